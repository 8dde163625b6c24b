#include "mmk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "mmk/error.hpp"
#include "mmk/rng.hpp"

namespace mmk {

using Eigen::MatrixXd;
using Eigen::VectorXd;

GaussianStats GaussianStats::of(const MatrixXd& v) {
  if (v.rows() < 2) throwUsage("Gaussian statistics need at least 2 samples");
  if (!v.allFinite()) throwData("feature vectors contain non-finite values");
  GaussianStats s;
  s.mean = v.colwise().mean().transpose();
  const MatrixXd centered = v.rowwise() - s.mean.transpose();
  s.cov = (centered.transpose() * centered) / static_cast<double>(v.rows() - 1);
  s.cov = 0.5 * (s.cov + s.cov.transpose());
  return s;
}

VectorXd kineticFeatures(const MotionSequence& m) {
  const int T = m.frames();
  if (T < 2) throwUsage("kinetic features need at least 2 frames");
  const int J = m.joints();
  const int D = m.featureDim();
  VectorXd f = VectorXd::Zero(static_cast<Eigen::Index>(J) * D);
  for (int t = 1; t < T; ++t) {
    for (int j = 0; j < J; ++j) {
      for (int d = 0; d < D; ++d) {
        const double v = static_cast<double>(m.at(t, j, d)) - m.at(t - 1, j, d);
        f(j * D + d) += v * v;
      }
    }
  }
  return f / static_cast<double>(T - 1);
}

VectorXd geometricFeatures(const MotionSequence& m) {
  const int J = m.joints();
  if (J < 2) throwUsage("geometric features need at least 2 joints");
  const int T = m.frames();
  VectorXd f = VectorXd::Zero(static_cast<Eigen::Index>(J) * (J - 1) / 2);
  for (int t = 0; t < T; ++t) {
    Eigen::Index k = 0;
    for (int a = 0; a < J; ++a) {
      const VectorXd pa = m.joint(t, a);
      for (int b = a + 1; b < J; ++b) f(k++) += (pa - m.joint(t, b)).norm();
    }
  }
  return f / static_cast<double>(T);
}

FeatureSet stackFeatures(std::span<const VectorXd> rows, FeatureKind kind) {
  FeatureSet s;
  s.kind = kind;
  if (rows.empty()) return s;
  s.vectors.resize(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throwData("feature vectors have different lengths");
    s.vectors.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return s;
}

MatrixXd sqrtPsd(const MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (s + s.transpose()));
  if (es.info() != Eigen::Success) throwNumeric("eigendecomposition failed");
  const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double frechetDistance(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size()) throwUsage("FID feature dimensions differ");
  // Tr((Sa Sb)^1/2) = Tr((Sa^1/2 Sb Sa^1/2)^1/2), a symmetric PSD product.
  const MatrixXd ra = sqrtPsd(a.cov);
  const MatrixXd inner = ra * b.cov * ra;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throwNumeric("eigendecomposition failed");
  const double traceRoot = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * traceRoot;
  if (!std::isfinite(value)) throwNumeric("FID is not finite");
  return std::max(0.0, value);
}

double fid(const FeatureSet& a, const FeatureSet& b) {
  if (a.vectors.cols() != b.vectors.cols()) throwUsage("FID feature dimensions differ");
  return frechetDistance(GaussianStats::of(a.vectors), GaussianStats::of(b.vectors));
}

double diversity(const FeatureSet& a, int pairs, std::uint64_t seed, bool fullPairs) {
  const auto n = static_cast<std::size_t>(a.vectors.rows());
  if (n < 2) throwUsage("diversity needs at least 2 vectors");
  const MatrixXd& v = a.vectors;
  double sum = 0.0;
  std::size_t count = 0;
  if (fullPairs) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        sum += (v.row(static_cast<Eigen::Index>(i)) - v.row(static_cast<Eigen::Index>(j))).norm();
        ++count;
      }
    }
    return sum / static_cast<double>(count);
  }
  if (pairs < 1) throwUsage("diversity needs at least one pair");
  Rng rng(seed);
  std::vector<std::size_t> order(n);
  while (count < static_cast<std::size_t>(pairs)) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t i = 0; i + 1 < n && count < static_cast<std::size_t>(pairs); i += 2) {
      sum += (v.row(static_cast<Eigen::Index>(order[i])) - v.row(static_cast<Eigen::Index>(order[i + 1]))).norm();
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

VectorXd speedCurve(const MotionSequence& m) {
  const int T = m.frames();
  VectorXd s = VectorXd::Constant(T, std::numeric_limits<double>::quiet_NaN());
  for (int t = 1; t + 1 < T; ++t) {
    double total = 0.0;
    for (int j = 0; j < m.joints(); ++j) total += 0.5 * (m.joint(t + 1, j) - m.joint(t - 1, j)).norm();
    s(t) = total;
  }
  return s;
}

std::vector<double> danceBeats(const MotionSequence& m) {
  constexpr int kMinSeparation = 2;
  const VectorXd s = speedCurve(m);
  const int T = m.frames();
  std::vector<int> frames;
  for (int t = 2; t + 2 < T; ++t) {
    if (!(s(t) < s(t - 1) && s(t) <= s(t + 1))) continue;
    if (!frames.empty() && t - frames.back() < kMinSeparation) {
      if (s(t) < s(frames.back())) frames.back() = t;
      continue;
    }
    frames.push_back(t);
  }
  std::vector<double> out;
  out.reserve(frames.size());
  for (int f : frames) out.push_back(static_cast<double>(f) / m.fps());
  return out;
}

double beatAlignKernel(std::span<const double> musicBeats, std::span<const double> dance, double sigma) {
  if (musicBeats.empty()) throwUsage("beat alignment needs at least one music beat");
  if (!(sigma > 0.0)) throwUsage("beat alignment sigma must be positive");
  if (dance.empty()) return 0.0;
  double total = 0.0;
  for (double b : musicBeats) {
    double best = std::numeric_limits<double>::infinity();
    for (double d : dance) best = std::min(best, (b - d) * (b - d));
    total += std::exp(-best / (2.0 * sigma * sigma));
  }
  return total / static_cast<double>(musicBeats.size());
}

double beatAlignScore(std::span<const double> musicBeats, const MotionSequence& motion, double sigmaSeconds) {
  if (musicBeats.empty()) throwUsage("beat alignment needs at least one music beat");
  if (motion.frames() < 3) throwUsage("beat alignment needs at least 3 frames");
  const auto dance = danceBeats(motion);
  return beatAlignKernel(musicBeats, dance, sigmaSeconds);
}

double rPrecision(const MatrixXd& motion, const MatrixXd& text, int k, int pool) {
  const Eigen::Index n = motion.rows();
  if (text.rows() != n || text.cols() != motion.cols()) throwUsage("R-precision embeddings must be paired");
  if (pool < 1 || pool > n) throwUsage("R-precision pool " + std::to_string(pool) + " exceeds " + std::to_string(n) + " rows");
  if (k < 1 || k > pool) throwUsage("R-precision k must lie in [1, pool]");
  std::size_t hits = 0;
  std::size_t total = 0;
  for (Eigen::Index start = 0; start + pool <= n; start += pool) {
    for (Eigen::Index i = start; i < start + pool; ++i) {
      const double own = (motion.row(i) - text.row(i)).norm();
      int closer = 0;
      for (Eigen::Index j = start; j < start + pool; ++j) {
        if (j != i && (motion.row(i) - text.row(j)).norm() < own) ++closer;
      }
      hits += closer < k ? 1 : 0;
      ++total;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

double multimodalDistance(const MatrixXd& motion, const MatrixXd& text) {
  if (motion.rows() != text.rows() || motion.cols() != text.cols()) throwUsage("MM-Dist embeddings must be paired");
  if (motion.rows() == 0) throwUsage("MM-Dist needs at least one pair");
  return (motion - text).rowwise().norm().mean();
}

double mmodality(std::span<const MatrixXd> groups) {
  if (groups.empty()) throwUsage("MModality needs at least one group");
  double sum = 0.0;
  for (const auto& g : groups) {
    if (g.rows() < 2) throwUsage("MModality groups need at least 2 generations");
    double within = 0.0;
    int pairs = 0;
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < g.rows(); ++j) {
        within += (g.row(i) - g.row(j)).norm();
        ++pairs;
      }
    }
    sum += within / pairs;
  }
  return sum / static_cast<double>(groups.size());
}

Eigen::RowVectorXd MotionStubEmbedder::embed(const MotionSequence& m) const {
  const VectorXd kin = kineticFeatures(m);
  const VectorXd geo = m.joints() >= 2 ? geometricFeatures(m) : VectorXd();
  VectorXd f(kin.size() + geo.size());
  f << kin, geo;
  Rng rng(seed_ ^ static_cast<std::uint64_t>(f.size()));
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(dims_);
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    for (int d = 0; d < dims_; ++d) out(d) += f(i) * rng.normal();
  }
  const double n = out.norm();
  if (n > 0.0) out /= n;
  return out;
}

} // namespace mmk
