#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mmk/autodiff.hpp"
#include "mmk/motion_data.hpp"

namespace mmk {

struct Codebook {
  Eigen::MatrixXd entries;  // K x d_code

  int size() const { return static_cast<int>(entries.rows()); }
  int dim() const { return static_cast<int>(entries.cols()); }
};

struct Quantized {
  int index = 0;
  double error = 0.0;  // Euclidean distance to the chosen entry
};

/// Nearest entry by Euclidean distance, lowest index on ties.
Quantized quantize(const Eigen::Ref<const Eigen::RowVectorXd>& latent, const Codebook& cb);

/// Temporal x spatial grid of codebook indices plus mask flags.
struct TokenGrid {
  int frames = 0;   // T'
  int joints = 0;   // J'
  int scale = 1;
  int padded = 0;   // frames of last-frame padding added before encoding
  double fps = 20.0;
  std::vector<int> indices;           // row t * joints + j
  std::vector<std::uint8_t> masked;   // same layout

  TokenGrid() = default;
  TokenGrid(int frames, int joints, int scale);

  int& at(int t, int j) { return indices[static_cast<std::size_t>(t) * joints + j]; }
  int at(int t, int j) const { return indices[static_cast<std::size_t>(t) * joints + j]; }
  bool isMasked(int t, int j) const { return masked[static_cast<std::size_t>(t) * joints + j] != 0; }
  std::size_t cells() const { return indices.size(); }
};

struct TokenizerConfig {
  int codebookSize = 64;
  int codeDim = 32;
  int scale = 4;
  int hidden = 64;
  double beta = 0.25;
  double peakLearningRate = 2e-4;
  long warmupSteps = 2000;
  int steps = 200;
  int batchSize = 64;
  std::uint64_t seed = 0;

  nlohmann::json toJson() const;
  static TokenizerConfig fromJson(const nlohmann::json& j);
};

/// Stride-`scale` temporal convolution per joint track (kernel = stride, so a
/// two-layer MLP over each window), single-layer VQ, mirrored decoder.
class TokenizerModel {
 public:
  TokenizerModel(int featureDim, const TokenizerConfig& cfg);

  /// scale = 1, codeDim = featureDim and encoder/decoder that reproduce their
  /// input exactly (relu(x) - relu(-x)).
  static TokenizerModel identityToy(int featureDim, int codebookSize, std::uint64_t seed);

  int featureDim() const { return featureDim_; }
  int scale() const { return scale_; }
  int codebookSize() const { return static_cast<int>(codebook_.value.rows()); }
  int codeDim() const { return static_cast<int>(codebook_.value.cols()); }
  int hidden() const { return static_cast<int>(encW1_.value.cols()); }
  double beta() const { return beta_; }
  std::uint64_t seed() const { return seed_; }
  long step() const { return step_; }
  void setStep(long s) { step_ = s; }

  Codebook codebook() const { return {codebook_.value}; }

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

  /// (T' * J) x (scale * D) windows, row t' * J + j; pads by repeating the
  /// last frame.
  Eigen::MatrixXd windows(const MotionSequence& m, int* padded = nullptr) const;

  Eigen::MatrixXd encodeLatents(const Eigen::MatrixXd& windows) const;
  Eigen::MatrixXd decodeLatents(const Eigen::MatrixXd& latents) const;

  TokenGrid encode(const MotionSequence& m) const;
  MotionSequence decode(const TokenGrid& g) const;

  /// Quantizer decisions of one forward pass: chosen indices, encoder
  /// latents and the selected codes.
  struct VqFreeze {
    std::vector<int> indices;
    Eigen::MatrixXd latents;
    Eigen::MatrixXd codes;
  };

  /// Reconstruction + codebook + beta * commitment loss on a batch of windows,
  /// recorded on `tape`; the decoder sees the straight-through quantized code.
  /// With `frozen`, the quantizer decisions are replayed instead of recomputed,
  /// which makes the loss a smooth function whose exact gradient equals the
  /// straight-through gradient (used by finite-difference checks).
  struct LossTerms {
    ad::Var total;
    double reconstruction = 0.0;
  };
  LossTerms loss(ad::Tape& tape, const Eigen::MatrixXd& windows, const VqFreeze* frozen = nullptr,
                 VqFreeze* capture = nullptr);

  /// Seeds codebook entries from encoder latents of the given windows.
  void initCodebookFrom(const Eigen::MatrixXd& windows, std::uint64_t seed);

 private:
  TokenizerModel(int featureDim, int scale, int codeDim, int hidden, int codebookSize, double beta,
                 std::uint64_t seed);

  int featureDim_;
  int scale_;
  double beta_;
  std::uint64_t seed_;
  long step_ = 0;
  ad::Parameter encW1_, encB1_, encW2_, encB2_;
  ad::Parameter codebook_;
  ad::Parameter decW1_, decB1_, decW2_, decB2_;
};

struct TrainLogEntry {
  long step = 0;
  double loss = 0.0;
  double reconstruction = 0.0;
  double learningRate = 0.0;
};

struct TokenizerTraining {
  TokenizerModel model;
  std::vector<TrainLogEntry> log;
};

TokenizerTraining trainTokenizer(std::span<const CorpusRecord> corpus, const TokenizerConfig& cfg);

/// Mean squared reconstruction error of decode(encode(m)) over a corpus.
double reconstructionMse(const TokenizerModel& model, std::span<const CorpusRecord> corpus);

/// `runConfig`, when non-null, is stored in the header under "run_config".
std::vector<std::uint8_t> encodeTokenizerCheckpoint(const TokenizerModel& model, const nlohmann::json& runConfig = nullptr);
TokenizerModel decodeTokenizerCheckpoint(std::span<const std::uint8_t> bytes, nlohmann::json* runConfig = nullptr);

} // namespace mmk
