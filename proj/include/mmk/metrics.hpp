#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mmk/motion_data.hpp"

namespace mmk {

enum class FeatureKind { Kinetic, Geometric, Embed };

struct FeatureSet {
  Eigen::MatrixXd vectors;  // n x f
  FeatureKind kind = FeatureKind::Embed;
};

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // unbiased (n - 1)

  static GaussianStats of(const Eigen::MatrixXd& vectors);
};

/// Mean squared frame-to-frame velocity per joint channel (length J * D).
Eigen::VectorXd kineticFeatures(const MotionSequence& m);

/// Time-averaged distance for every joint pair (a < b), in lexicographic
/// pair order (length J * (J - 1) / 2).
Eigen::VectorXd geometricFeatures(const MotionSequence& m);

FeatureSet stackFeatures(std::span<const Eigen::VectorXd> rows, FeatureKind kind);

/// Symmetric PSD square root via eigendecomposition; small negative
/// eigenvalues are clamped to zero.
Eigen::MatrixXd sqrtPsd(const Eigen::MatrixXd& s);

double frechetDistance(const GaussianStats& a, const GaussianStats& b);
double fid(const FeatureSet& a, const FeatureSet& b);

/// Mean Euclidean distance over `pairs` seeded random pairs; each round of
/// pairs is disjoint. With `fullPairs`, the exact mean over all i < j.
double diversity(const FeatureSet& a, int pairs, std::uint64_t seed = 0, bool fullPairs = false);

/// Central-difference speed summed over joints, defined for frames 1..T-2
/// (entries 0 and T-1 are NaN).
Eigen::VectorXd speedCurve(const MotionSequence& m);

/// Kinematic beats: local minima of the speed curve (strictly below the
/// previous frame, not above the next), at least 2 frames apart. Seconds.
std::vector<double> danceBeats(const MotionSequence& m);

/// Mean over music beats of exp(-d^2 / (2 sigma^2)), d the distance to the
/// nearest dance beat. 0 when there are no dance beats.
double beatAlignKernel(std::span<const double> musicBeats, std::span<const double> danceBeatTimes, double sigma);
double beatAlignScore(std::span<const double> musicBeats, const MotionSequence& motion, double sigmaSeconds);

inline constexpr int kDefaultBeatSigmaFrames = 3;
inline constexpr int kDefaultRPrecisionPool = 32;

/// Rows are split into consecutive groups of `pool`; within a group each
/// motion's true text competes with the other pool - 1 texts. Fraction whose
/// true text has fewer than k strictly closer distractors.
double rPrecision(const Eigen::MatrixXd& motionEmbeds, const Eigen::MatrixXd& textEmbeds, int k, int pool);

double multimodalDistance(const Eigen::MatrixXd& motionEmbeds, const Eigen::MatrixXd& textEmbeds);

/// Mean over groups of the mean pairwise distance within the group.
double mmodality(std::span<const Eigen::MatrixXd> groups);

/// Fixed random projection of [kinetic, geometric] features to a unit
/// vector; stands in for a learned motion evaluator.
class MotionStubEmbedder {
 public:
  explicit MotionStubEmbedder(int dims, std::uint64_t seed = 0x6d6f74696f6eULL) : dims_(dims), seed_(seed) {}
  Eigen::RowVectorXd embed(const MotionSequence& m) const;
  int dims() const { return dims_; }

 private:
  int dims_;
  std::uint64_t seed_;
};

} // namespace mmk
