#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mmk/motion_data.hpp"

namespace mmk {

struct AttentionResult {
  Eigen::MatrixXd output;   // n x e
  Eigen::MatrixXd weights;  // n x m, rows sum to 1
};

/// softmax(Q K^T / sqrt(d)) V
AttentionResult scaledAttention(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k,
                                const Eigen::MatrixXd& v);

/// Motion tokens projected to the model width: row t * joints + j holds
/// token (t, j).
struct MotionEmbedding {
  int frames = 0;
  int joints = 0;
  Eigen::MatrixXd tokens;

  int width() const { return static_cast<int>(tokens.cols()); }
  // Per-frame tokens (frames x width): mean over joints.
  Eigen::MatrixXd temporalTokens() const;
  // Per-joint tokens (joints x width): mean over frames.
  Eigen::MatrixXd spatialTokens() const;
  // Tokens of frame t (joints x width).
  Eigen::MatrixXd frame(int t) const;
};

/// Condition projected to the model width. Text is one row; Audio is T_a
/// rows; TextAndAudio is the fused grid with the text token first.
struct ConditionEmbedding {
  Modality modality = Modality::Text;
  Eigen::MatrixXd rows;
};

/// Rows of the fused/audio condition aligned with temporal token t of
/// `frames`. For TextAndAudio the text row comes first; for Text it is the
/// single text row.
std::vector<int> spatialConditionRows(Modality modality, int conditionRows, int t, int frames);

struct AttentionScores {
  Eigen::VectorXd temporal;  // length T
  Eigen::VectorXd spatial;   // length J
  Eigen::MatrixXd rawMap;    // temporal attention weights
};

/// Text: self-attention over (C, M); a frame's score is the weight it
/// receives from the condition row, renormalized over motion columns.
/// Audio/TextAndAudio: cross-attention with C as query; score = column mean.
/// Spatial: per frame, cross-attention with the aligned condition rows as
/// query over that frame's joints; column means averaged over frames.
AttentionScores scoreTokens(const MotionEmbedding& m, const ConditionEmbedding& c);

/// Indices of the ceil(alpha * n) largest scores, lower index first on ties.
/// Returned in ascending index order.
std::vector<int> topAlphaMask(const Eigen::VectorXd& scores, double alpha);

/// ceil(alpha * n) with a small tolerance against representation error.
int maskCount(double alpha, int n);

struct MaskPlan {
  std::vector<int> temporalMasked;
  std::vector<int> spatialMasked;
  double alphaTemporal = 0.0;
  double alphaSpatial = 0.0;
  AttentionScores scores;

  nlohmann::json toJson(bool includeRawMap) const;
};

inline constexpr double kDefaultMaskRatio = 0.30;

MaskPlan planMasks(const MotionEmbedding& m, const ConditionEmbedding& c,
                   double alphaTemporal = kDefaultMaskRatio, double alphaSpatial = kDefaultMaskRatio);

/// Fixed random projections used to score raw motion frames directly
/// (no trained model), e.g. for inspection of a corpus.
struct ScoringProjection {
  Eigen::MatrixXd motion;      // D x width
  Eigen::MatrixXd text;        // C_t x width
  Eigen::MatrixXd audio;       // C_a x width
  Eigen::MatrixXd textToAudio; // C_t x C_a

  static ScoringProjection random(int featureDim, int textDim, int audioDim, int width,
                                  std::uint64_t seed);

  MotionEmbedding embed(const MotionSequence& m) const;
  ConditionEmbedding embed(const Condition& c) const;
};

// ------------------------------------------------------------ baselines

struct RandomStrategy {
  std::uint64_t seed = 0;
};
struct ConfidenceStrategy {};
struct DensityStrategy {};
struct KMeansStrategy {
  int clusters = 3;
  std::uint64_t seed = 0;
};
struct GmmStrategy {
  int clusters = 3;
  std::uint64_t seed = 0;
};

using BaselineStrategy =
    std::variant<RandomStrategy, ConfidenceStrategy, DensityStrategy, KMeansStrategy, GmmStrategy>;

std::vector<int> randomMask(int n, double alpha, std::uint64_t seed);
/// The ceil(alpha * n) lowest confidences.
std::vector<int> confidenceMask(const Eigen::VectorXd& confidence, double alpha);
/// Mean cosine similarity of each row to every other row.
Eigen::VectorXd localDensity(const Eigen::MatrixXd& tokens);
std::vector<int> densityMask(const Eigen::MatrixXd& tokens, double alpha);

struct ClusterFit {
  Eigen::MatrixXd centroids;
  std::vector<int> assignment;
};
ClusterFit kmeans(const Eigen::MatrixXd& points, int clusters, std::uint64_t seed, int iterations = 50);
/// Distance of each row to its assigned centroid.
Eigen::VectorXd kmeansScores(const Eigen::MatrixXd& tokens, int clusters, std::uint64_t seed);
/// Negative log-likelihood of each row under a diagonal Gaussian mixture.
Eigen::VectorXd gmmScores(const Eigen::MatrixXd& tokens, int clusters, std::uint64_t seed);

/// Dispatches a baseline. `tokens` is n x width; `confidence` (length n) is
/// only read by ConfidenceStrategy.
std::vector<int> baselineMask(const BaselineStrategy& strategy, const Eigen::MatrixXd& tokens,
                              const Eigen::VectorXd& confidence, double alpha);

} // namespace mmk
