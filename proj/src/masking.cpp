#include "mmk/masking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "mmk/error.hpp"
#include "mmk/rng.hpp"

namespace mmk {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd softmaxRows(MatrixXd logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - m).exp();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

MatrixXd attentionWeights(const MatrixXd& q, const MatrixXd& k) {
  return softmaxRows((q * k.transpose()) / std::sqrt(static_cast<double>(q.cols())));
}

} // namespace

AttentionResult scaledAttention(const MatrixXd& q, const MatrixXd& k, const MatrixXd& v) {
  if (q.cols() < 1) throwUsage("attention width must be >= 1");
  if (q.cols() != k.cols()) throwUsage("attention: Q and K widths differ");
  if (k.rows() != v.rows()) throwUsage("attention: K and V row counts differ");
  if (k.rows() < 1) throwUsage("attention needs at least one key");
  AttentionResult r;
  r.weights = attentionWeights(q, k);
  r.output = r.weights * v;
  return r;
}

MatrixXd MotionEmbedding::temporalTokens() const {
  MatrixXd out = MatrixXd::Zero(frames, width());
  for (int t = 0; t < frames; ++t) {
    for (int j = 0; j < joints; ++j) out.row(t) += tokens.row(t * joints + j);
  }
  return out / static_cast<double>(joints);
}

MatrixXd MotionEmbedding::spatialTokens() const {
  MatrixXd out = MatrixXd::Zero(joints, width());
  for (int t = 0; t < frames; ++t) {
    for (int j = 0; j < joints; ++j) out.row(j) += tokens.row(t * joints + j);
  }
  return out / static_cast<double>(frames);
}

MatrixXd MotionEmbedding::frame(int t) const { return tokens.middleRows(t * joints, joints); }

std::vector<int> spatialConditionRows(Modality modality, int conditionRows, int t, int frames) {
  if (modality == Modality::Text) return {0};
  const int offset = modality == Modality::TextAndAudio ? 1 : 0;
  const int audio = conditionRows - offset;
  if (audio < 1 || frames < 1) throwData("condition has no audio rows to align");
  // lo < audio because t < frames; every token gets at least one row.
  const int lo = static_cast<int>((static_cast<long long>(t) * audio) / frames);
  const int hi = std::max(lo + 1, static_cast<int>((static_cast<long long>(t + 1) * audio) / frames));
  std::vector<int> rows;
  if (offset == 1) rows.push_back(0);
  for (int r = lo; r < hi; ++r) rows.push_back(offset + r);
  return rows;
}

AttentionScores scoreTokens(const MotionEmbedding& m, const ConditionEmbedding& c) {
  if (m.frames < 1 || m.joints < 1 || m.tokens.rows() != static_cast<Eigen::Index>(m.frames) * m.joints) {
    throwData("motion embedding shape is inconsistent");
  }
  if (c.rows.cols() != m.width()) throwData("condition and motion embeddings have different widths");
  if (c.modality == Modality::Text && c.rows.rows() != 1) {
    throwData("text condition must be exactly one temporal token");
  }
  if (c.modality == Modality::TextAndAudio && c.rows.rows() < 2) {
    throwData("fused condition needs the text token plus at least one audio row");
  }
  if (c.rows.rows() < 1) throwData("condition embedding is empty");

  AttentionScores s;
  const MatrixXd temporal = m.temporalTokens();
  if (c.modality == Modality::Text) {
    MatrixXd joint(m.frames + 1, m.width());
    joint.row(0) = c.rows.row(0);
    joint.bottomRows(m.frames) = temporal;
    s.rawMap = attentionWeights(joint, joint);
    VectorXd fromCondition = s.rawMap.row(0).tail(m.frames).transpose();
    s.temporal = fromCondition / fromCondition.sum();
  } else {
    s.rawMap = attentionWeights(c.rows, temporal);
    s.temporal = s.rawMap.colwise().mean().transpose();
  }

  s.spatial = VectorXd::Zero(m.joints);
  for (int t = 0; t < m.frames; ++t) {
    const auto rows = spatialConditionRows(c.modality, static_cast<int>(c.rows.rows()), t, m.frames);
    MatrixXd q(static_cast<Eigen::Index>(rows.size()), m.width());
    for (std::size_t i = 0; i < rows.size(); ++i) q.row(static_cast<Eigen::Index>(i)) = c.rows.row(rows[i]);
    s.spatial += attentionWeights(q, m.frame(t)).colwise().mean().transpose();
  }
  s.spatial /= static_cast<double>(m.frames);
  return s;
}

int maskCount(double alpha, int n) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throwUsage("mask ratio must lie in [0, 1]");
  const int k = static_cast<int>(std::ceil(alpha * n - 1e-9));
  return std::clamp(k, 0, n);
}

namespace {

// Indices of the k entries ranked first by `before`, returned ascending.
template <typename Before>
std::vector<int> selectK(int n, int k, Before before) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), before);
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<int> topK(const VectorXd& scores, int k) {
  if (!scores.allFinite()) throwData("mask scores must be finite");
  return selectK(static_cast<int>(scores.size()), k, [&](int a, int b) { return scores(a) > scores(b); });
}

} // namespace

std::vector<int> topAlphaMask(const VectorXd& scores, double alpha) {
  return topK(scores, maskCount(alpha, static_cast<int>(scores.size())));
}

nlohmann::json MaskPlan::toJson(bool includeRawMap) const {
  auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j{{"temporal_masked", temporalMasked},
                   {"spatial_masked", spatialMasked},
                   {"alpha_temporal", alphaTemporal},
                   {"alpha_spatial", alphaSpatial},
                   {"temporal_scores", vec(scores.temporal)},
                   {"spatial_scores", vec(scores.spatial)}};
  if (includeRawMap) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < scores.rawMap.rows(); ++i) rows.push_back(vec(scores.rawMap.row(i).transpose()));
    j["raw_map"] = std::move(rows);
  }
  return j;
}

MaskPlan planMasks(const MotionEmbedding& m, const ConditionEmbedding& c, double alphaTemporal,
                   double alphaSpatial) {
  MaskPlan plan;
  plan.alphaTemporal = alphaTemporal;
  plan.alphaSpatial = alphaSpatial;
  plan.scores = scoreTokens(m, c);
  plan.temporalMasked = topAlphaMask(plan.scores.temporal, alphaTemporal);
  plan.spatialMasked = topAlphaMask(plan.scores.spatial, alphaSpatial);
  return plan;
}

ScoringProjection ScoringProjection::random(int featureDim, int textDim, int audioDim, int width,
                                            std::uint64_t seed) {
  if (featureDim < 1 || textDim < 1 || audioDim < 1 || width < 1) throwUsage("projection dims must be positive");
  Rng rng(seed);
  auto gaussian = [&](int rows, int cols) {
    MatrixXd m(rows, cols);
    const double s = 1.0 / std::sqrt(static_cast<double>(rows));
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = s * rng.normal();
    return m;
  };
  ScoringProjection p;
  p.motion = gaussian(featureDim, width);
  p.text = gaussian(textDim, width);
  p.audio = gaussian(audioDim, width);
  p.textToAudio = gaussian(textDim, audioDim);
  return p;
}

MotionEmbedding ScoringProjection::embed(const MotionSequence& m) const {
  if (m.featureDim() != motion.rows()) throwData("motion feature width does not match projection");
  MotionEmbedding e;
  e.frames = m.frames();
  e.joints = m.joints();
  e.tokens.resize(static_cast<Eigen::Index>(e.frames) * e.joints, motion.cols());
  for (int t = 0; t < e.frames; ++t) {
    for (int j = 0; j < e.joints; ++j) e.tokens.row(t * e.joints + j) = m.joint(t, j).transpose() * motion;
  }
  return e;
}

ConditionEmbedding ScoringProjection::embed(const Condition& c) const {
  c.validate();
  ConditionEmbedding e;
  e.modality = c.modality;
  if (c.textEmbed && c.textEmbed->size() != text.rows()) throwData("text width does not match projection");
  if (c.audioFeats && c.audioFeats->cols() != audio.rows()) throwData("audio width does not match projection");
  switch (c.modality) {
    case Modality::Text:
      e.rows = *c.textEmbed * text;
      break;
    case Modality::Audio:
      e.rows = *c.audioFeats * audio;
      break;
    case Modality::TextAndAudio: {
      MatrixXd fused(c.audioFeats->rows() + 1, c.audioFeats->cols());
      fused.row(0) = *c.textEmbed * textToAudio;
      fused.bottomRows(c.audioFeats->rows()) = *c.audioFeats;
      e.rows = fused * audio;
      break;
    }
  }
  return e;
}

// ------------------------------------------------------------ baselines

std::vector<int> randomMask(int n, double alpha, std::uint64_t seed) {
  const int k = maskCount(alpha, n);
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<int> confidenceMask(const VectorXd& confidence, double alpha) {
  if (!confidence.allFinite()) throwData("confidence values must be finite");
  const int n = static_cast<int>(confidence.size());
  return selectK(n, maskCount(alpha, n), [&](int a, int b) { return confidence(a) < confidence(b); });
}

VectorXd localDensity(const MatrixXd& tokens) {
  const Eigen::Index n = tokens.rows();
  VectorXd norms = tokens.rowwise().norm();
  VectorXd density = VectorXd::Zero(n);
  if (n < 2) return density;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j || norms(i) == 0.0 || norms(j) == 0.0) continue;
      density(i) += tokens.row(i).dot(tokens.row(j)) / (norms(i) * norms(j));
    }
  }
  return density / static_cast<double>(n - 1);
}

std::vector<int> densityMask(const MatrixXd& tokens, double alpha) {
  return topAlphaMask(localDensity(tokens), alpha);
}

ClusterFit kmeans(const MatrixXd& points, int clusters, std::uint64_t seed, int iterations) {
  const auto n = static_cast<int>(points.rows());
  if (clusters < 1) throwUsage("cluster count must be positive");
  if (clusters > n) {
    throwUsage("cluster count " + std::to_string(clusters) + " exceeds token count " + std::to_string(n));
  }
  Rng rng(seed);
  // k-means++ seeding
  ClusterFit fit;
  fit.centroids.resize(clusters, points.cols());
  fit.centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(n))));
  VectorXd nearest = VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  for (int c = 1; c < clusters; ++c) {
    for (int i = 0; i < n; ++i) {
      nearest(i) = std::min(nearest(i), (points.row(i) - fit.centroids.row(c - 1)).squaredNorm());
    }
    const double total = nearest.sum();
    int pick = 0;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        r -= nearest(pick);
        if (r < 0.0) break;
      }
    } else {
      pick = c;  // all points coincide with chosen centroids
    }
    fit.centroids.row(c) = points.row(pick);
  }

  fit.assignment.assign(static_cast<std::size_t>(n), 0);
  for (int it = 0; it < iterations; ++it) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bestD = std::numeric_limits<double>::infinity();
      for (int c = 0; c < clusters; ++c) {
        const double d = (points.row(i) - fit.centroids.row(c)).squaredNorm();
        if (d < bestD) {
          bestD = d;
          best = c;
        }
      }
      if (fit.assignment[static_cast<std::size_t>(i)] != best || it == 0) changed = true;
      fit.assignment[static_cast<std::size_t>(i)] = best;
    }
    MatrixXd sums = MatrixXd::Zero(clusters, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(clusters), 0);
    for (int i = 0; i < n; ++i) {
      sums.row(fit.assignment[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(fit.assignment[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < clusters; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) fit.centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
    }
    if (!changed) break;
  }
  return fit;
}

VectorXd kmeansScores(const MatrixXd& tokens, int clusters, std::uint64_t seed) {
  const ClusterFit fit = kmeans(tokens, clusters, seed);
  VectorXd s(tokens.rows());
  for (Eigen::Index i = 0; i < tokens.rows(); ++i) {
    s(i) = (tokens.row(i) - fit.centroids.row(fit.assignment[static_cast<std::size_t>(i)])).norm();
  }
  return s;
}

VectorXd gmmScores(const MatrixXd& tokens, int clusters, std::uint64_t seed) {
  constexpr double kVarFloor = 1e-6;
  const ClusterFit init = kmeans(tokens, clusters, seed);
  const Eigen::Index n = tokens.rows();
  const Eigen::Index d = tokens.cols();
  MatrixXd means = init.centroids;
  MatrixXd vars = MatrixXd::Constant(clusters, d, 1.0);
  VectorXd weights = VectorXd::Constant(clusters, 1.0 / clusters);
  MatrixXd logp(n, clusters);

  auto evalLogp = [&] {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int c = 0; c < clusters; ++c) {
        double lp = std::log(weights(c));
        for (Eigen::Index k = 0; k < d; ++k) {
          const double diff = tokens(i, k) - means(c, k);
          lp -= 0.5 * (std::log(2.0 * std::numbers::pi * vars(c, k)) + diff * diff / vars(c, k));
        }
        logp(i, c) = lp;
      }
    }
  };
  auto logSumExp = [](const Eigen::RowVectorXd& r) {
    const double m = r.maxCoeff();
    return m + std::log((r.array() - m).exp().sum());
  };

  for (int it = 0; it < 50; ++it) {
    evalLogp();
    MatrixXd resp(n, clusters);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lse = logSumExp(logp.row(i));
      resp.row(i) = (logp.row(i).array() - lse).exp();
    }
    for (int c = 0; c < clusters; ++c) {
      const double nk = resp.col(c).sum();
      if (nk <= 1e-12) continue;
      weights(c) = nk / static_cast<double>(n);
      means.row(c) = (resp.col(c).transpose() * tokens) / nk;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double v = (resp.col(c).array() * (tokens.col(k).array() - means(c, k)).square()).sum() / nk;
        vars(c, k) = std::max(v, kVarFloor);
      }
    }
  }
  evalLogp();
  VectorXd nll(n);
  for (Eigen::Index i = 0; i < n; ++i) nll(i) = -logSumExp(logp.row(i));
  return nll;
}

std::vector<int> baselineMask(const BaselineStrategy& strategy, const MatrixXd& tokens,
                              const VectorXd& confidence, double alpha) {
  const int n = static_cast<int>(tokens.rows());
  return std::visit(
      [&](const auto& s) -> std::vector<int> {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, RandomStrategy>) {
          return randomMask(n, alpha, s.seed);
        } else if constexpr (std::is_same_v<S, ConfidenceStrategy>) {
          if (confidence.size() != n) throwUsage("confidence vector length does not match token count");
          return confidenceMask(confidence, alpha);
        } else if constexpr (std::is_same_v<S, DensityStrategy>) {
          return densityMask(tokens, alpha);
        } else if constexpr (std::is_same_v<S, KMeansStrategy>) {
          return topAlphaMask(kmeansScores(tokens, s.clusters, s.seed), alpha);
        } else {
          return topAlphaMask(gmmScores(tokens, s.clusters, s.seed), alpha);
        }
      },
      strategy);
}

} // namespace mmk
