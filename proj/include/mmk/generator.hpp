#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mmk/autodiff.hpp"
#include "mmk/masking.hpp"
#include "mmk/motion_data.hpp"
#include "mmk/optim.hpp"
#include "mmk/tokenizer.hpp"

namespace mmk {

enum class StrategyKind { Attention, Random, Confidence, Density, KMeans, Gmm };

const char* strategyName(StrategyKind s);
StrategyKind parseStrategy(const std::string& s);

struct GeneratorConfig {
  int dModel = 32;
  int ffHidden = 64;
  int tatLayers = 2;
  int satLayers = 2;
  int codebookSize = 64;
  int textDim = 32;
  int audioDim = 8;
  int maxFrames = 64;
  int joints = 6;
  std::uint64_t seed = 0;

  // training
  double alphaTemporal = kDefaultMaskRatio;
  double alphaSpatial = kDefaultMaskRatio;
  StrategyKind strategy = StrategyKind::Attention;
  int clusters = 3;
  double peakLearningRate = 2e-4;
  long warmupSteps = 2000;
  int steps = 500;
  int batchSize = 64;

  nlohmann::json toJson() const;
  static GeneratorConfig fromJson(const nlohmann::json& j);
};

/// One transformer block: attention, residual, layer
/// norm, two-layer GELU feed-forward, residual.
struct BlockParams {
  ad::Parameter wq, wk, wv, wo;
  ad::Parameter lnGain, lnBias;
  ad::Parameter ff1, ffb1, ff2, ffb2;

  std::vector<ad::Parameter*> all();
};

/// Attention weights captured during a forward pass, per layer and per
/// sequence (joint tracks for TAT, frames for SAT).
struct ForwardTrace {
  std::vector<std::vector<Eigen::MatrixXd>> tat;
  std::vector<std::vector<Eigen::MatrixXd>> sat;
};

class GeneratorModel {
 public:
  explicit GeneratorModel(const GeneratorConfig& cfg);

  const GeneratorConfig& config() const { return cfg_; }
  int dModel() const { return cfg_.dModel; }
  int codebookSize() const { return cfg_.codebookSize; }
  long step() const { return step_; }
  void setStep(long s) { step_ = s; }

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

  BlockParams& tatBlock(int i) { return tat_.at(static_cast<std::size_t>(i)); }
  BlockParams& satBlock(int i) { return sat_.at(static_cast<std::size_t>(i)); }
  ad::Parameter& outputWeight() { return headW_; }
  ad::Parameter& outputBias() { return headB_; }
  ad::Parameter& maskEmbedding() { return maskEmb_; }

  /// Condition rows at model width (Text: 1, Audio: T_a, TextAndAudio: T_a+1).
  ad::Var conditionRows(ad::Tape& tape, const Condition& c);
  /// Input embeddings of a grid; masked cells carry the mask embedding.
  ad::Var tokenEmbeddings(ad::Tape& tape, const TokenGrid& g);

  /// One TAT block on a single joint track (T' x d). Text: self-attention
  /// over (C, M), motion rows returned. Otherwise motion queries condition.
  ad::Var tatBlockForward(ad::Tape& tape, int layer, ad::Var track, ad::Var condition, Modality modality,
                          Eigen::MatrixXd* weights = nullptr);
  /// One SAT block on a single frame (J' x d) against its aligned condition
  /// rows; motion always queries.
  ad::Var satBlockForward(ad::Tape& tape, int layer, ad::Var frame, ad::Var spatialCondition,
                          Eigen::MatrixXd* weights = nullptr);

  /// Full stack: TAT layers over joint tracks, then SAT layers over frames,
  /// then the shared output head. Returns (T' * J') x K logits.
  ad::Var logits(ad::Tape& tape, const TokenGrid& g, const Condition& c, ForwardTrace* trace = nullptr);

  /// Values-only helpers (no gradient).
  Eigen::MatrixXd logitsValue(const TokenGrid& g, const Condition& c, ForwardTrace* trace = nullptr);
  Eigen::MatrixXd conditionValue(const Condition& c);

  /// Unmasked input embeddings and condition rows for attention-based masking.
  MotionEmbedding scoringEmbedding(const TokenGrid& g);

 private:
  ad::Var block(ad::Tape& tape, BlockParams& p, ad::Var x, ad::Var q, ad::Var kv, Eigen::Index keepFrom,
                Eigen::MatrixXd* weights);

  GeneratorConfig cfg_;
  long step_ = 0;
  ad::Parameter tokEmb_, maskEmb_, posT_, posS_;
  ad::Parameter textProj_, audioProj_, textToAudio_, spatialCond_;
  std::vector<BlockParams> tat_;
  std::vector<BlockParams> sat_;
  ad::Parameter headW_, headB_;
};

struct RestorationItem {
  TokenGrid grid;  // true indices; `masked` marks cells to restore
  Condition condition;
};

using RestorationBatch = std::vector<RestorationItem>;

/// Mean cross-entropy over masked cells of the batch; 0 when none masked.
ad::Var restorationLoss(ad::Tape& tape, GeneratorModel& model, const RestorationBatch& batch);

/// Fraction of masked cells whose argmax prediction equals the true index.
double restorationAccuracy(GeneratorModel& model, const RestorationBatch& batch);

class GeneratorTrainer {
 public:
  explicit GeneratorTrainer(GeneratorModel& model, double beta1 = 0.9, double beta2 = 0.99);

  double learningRate() const;
  /// One Adam step on the batch. A batch without masked cells returns 0 and
  /// leaves the model untouched.
  double trainStep(const RestorationBatch& batch);

 private:
  GeneratorModel& model_;
  Adam opt_;
};

/// Marks cells of `g` whose frame or joint index is in the plan.
void applyMaskPlan(TokenGrid& g, const std::vector<int>& temporal, const std::vector<int>& spatial);

/// Chooses the masks for one record with the configured strategy.
std::pair<std::vector<int>, std::vector<int>> chooseMasks(GeneratorModel& model, const TokenGrid& g,
                                                          const Condition& c, const GeneratorConfig& cfg,
                                                          std::uint64_t seed);

struct GeneratorTraining {
  GeneratorModel model;
  std::vector<TrainLogEntry> log;
};

struct TokenizedRecord {
  TokenGrid grid;
  Condition condition;
};

std::vector<TokenizedRecord> tokenizeCorpus(const TokenizerModel& tok, std::span<const CorpusRecord> corpus);

/// Masked-restoration training; masks are re-planned once per epoch from the
/// current model.
GeneratorTraining trainGenerator(std::span<const TokenizedRecord> data, const GeneratorConfig& cfg);

struct DecodeSchedule {
  int rounds = 10;
  bool sample = false;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

/// Number of cells left masked after `round` (1-based) of `rounds`.
int cosineMaskedCount(int cells, int round, int rounds);

/// Iterative confidence-ranked decoding from an all-masked grid.
TokenGrid generate(GeneratorModel& model, const Condition& c, int frames, const DecodeSchedule& schedule,
                   int scale = 1, double fps = 20.0);

/// `runConfig`, when non-null, is stored in the header under "run_config".
std::vector<std::uint8_t> encodeGeneratorCheckpoint(const GeneratorModel& model, const nlohmann::json& runConfig = nullptr);
GeneratorModel decodeGeneratorCheckpoint(std::span<const std::uint8_t> bytes, nlohmann::json* runConfig = nullptr);

} // namespace mmk
