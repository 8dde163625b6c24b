#include "mmk/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "mmk/checkpoint.hpp"
#include "mmk/error.hpp"
#include "mmk/rng.hpp"

namespace mmk {

using ad::Mat;
using ad::Parameter;
using ad::Tape;
using ad::Var;
using nlohmann::json;

const char* strategyName(StrategyKind s) {
  switch (s) {
    case StrategyKind::Attention: return "attention";
    case StrategyKind::Random: return "random";
    case StrategyKind::Confidence: return "confidence";
    case StrategyKind::Density: return "density";
    case StrategyKind::KMeans: return "kmeans";
    case StrategyKind::Gmm: return "gmm";
  }
  return "?";
}

StrategyKind parseStrategy(const std::string& s) {
  for (auto k : {StrategyKind::Attention, StrategyKind::Random, StrategyKind::Confidence, StrategyKind::Density,
                 StrategyKind::KMeans, StrategyKind::Gmm}) {
    if (s == strategyName(k)) return k;
  }
  throwUsage("unknown masking strategy '" + s + "'");
}

json GeneratorConfig::toJson() const {
  return json{{"d_model", dModel},
              {"ff_hidden", ffHidden},
              {"tat_layers", tatLayers},
              {"sat_layers", satLayers},
              {"codebook_size", codebookSize},
              {"text_dim", textDim},
              {"audio_dim", audioDim},
              {"max_frames", maxFrames},
              {"joints", joints},
              {"seed", seed},
              {"alpha_t", alphaTemporal},
              {"alpha_s", alphaSpatial},
              {"strategy", strategyName(strategy)},
              {"clusters", clusters},
              {"peak_lr", peakLearningRate},
              {"warmup_steps", warmupSteps},
              {"steps", steps},
              {"batch_size", batchSize}};
}

GeneratorConfig GeneratorConfig::fromJson(const json& j) {
  GeneratorConfig c;
  c.dModel = j.value("d_model", c.dModel);
  c.ffHidden = j.value("ff_hidden", c.ffHidden);
  c.tatLayers = j.value("tat_layers", c.tatLayers);
  c.satLayers = j.value("sat_layers", c.satLayers);
  c.codebookSize = j.value("codebook_size", c.codebookSize);
  c.textDim = j.value("text_dim", c.textDim);
  c.audioDim = j.value("audio_dim", c.audioDim);
  c.maxFrames = j.value("max_frames", c.maxFrames);
  c.joints = j.value("joints", c.joints);
  c.seed = j.value("seed", c.seed);
  c.alphaTemporal = j.value("alpha_t", c.alphaTemporal);
  c.alphaSpatial = j.value("alpha_s", c.alphaSpatial);
  c.strategy = parseStrategy(j.value("strategy", std::string(strategyName(c.strategy))));
  c.clusters = j.value("clusters", c.clusters);
  c.peakLearningRate = j.value("peak_lr", c.peakLearningRate);
  c.warmupSteps = j.value("warmup_steps", c.warmupSteps);
  c.steps = j.value("steps", c.steps);
  c.batchSize = j.value("batch_size", c.batchSize);
  return c;
}

std::vector<Parameter*> BlockParams::all() {
  return {&wq, &wk, &wv, &wo, &lnGain, &lnBias, &ff1, &ffb1, &ff2, &ffb2};
}

namespace {

Mat gaussian(Rng& rng, int rows, int cols, double s) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = s * rng.normal();
  return m;
}

Mat xavier(Rng& rng, int rows, int cols) { return gaussian(rng, rows, cols, 1.0 / std::sqrt(static_cast<double>(rows))); }

BlockParams makeBlock(Rng& rng, const std::string& prefix, int d, int h) {
  BlockParams b;
  b.wq = Parameter(prefix + ".wq", xavier(rng, d, d));
  b.wk = Parameter(prefix + ".wk", xavier(rng, d, d));
  b.wv = Parameter(prefix + ".wv", xavier(rng, d, d));
  b.wo = Parameter(prefix + ".wo", xavier(rng, d, d));
  b.lnGain = Parameter(prefix + ".ln_gain", Mat::Ones(1, d));
  b.lnBias = Parameter(prefix + ".ln_bias", Mat::Zero(1, d));
  b.ff1 = Parameter(prefix + ".ff1", xavier(rng, d, h));
  b.ffb1 = Parameter(prefix + ".ff_b1", Mat::Zero(1, h));
  b.ff2 = Parameter(prefix + ".ff2", xavier(rng, h, d));
  b.ffb2 = Parameter(prefix + ".ff_b2", Mat::Zero(1, d));
  return b;
}

} // namespace

GeneratorModel::GeneratorModel(const GeneratorConfig& cfg) : cfg_(cfg) {
  if (cfg.tatLayers < 1 || cfg.satLayers < 1) throwUsage("generator needs at least one TAT and one SAT layer");
  if (cfg.dModel < 1 || cfg.ffHidden < 1 || cfg.codebookSize < 2 || cfg.textDim < 1 || cfg.audioDim < 1 ||
      cfg.maxFrames < 1 || cfg.joints < 1) {
    throwUsage("generator dimensions must be positive");
  }
  Rng rng(cfg.seed);
  const int d = cfg.dModel;
  tokEmb_ = Parameter("tok_emb", gaussian(rng, cfg.codebookSize, d, 1.0));
  maskEmb_ = Parameter("mask_emb", gaussian(rng, 1, d, 1.0));
  posT_ = Parameter("pos_temporal", gaussian(rng, cfg.maxFrames, d, 0.1));
  posS_ = Parameter("pos_spatial", gaussian(rng, cfg.joints, d, 0.1));
  textProj_ = Parameter("text_proj", xavier(rng, cfg.textDim, d));
  audioProj_ = Parameter("audio_proj", xavier(rng, cfg.audioDim, d));
  textToAudio_ = Parameter("text_to_audio", xavier(rng, cfg.textDim, cfg.audioDim));
  spatialCond_ = Parameter("spatial_cond", xavier(rng, d, d));
  for (int i = 0; i < cfg.tatLayers; ++i) tat_.push_back(makeBlock(rng, "tat" + std::to_string(i), d, cfg.ffHidden));
  for (int i = 0; i < cfg.satLayers; ++i) sat_.push_back(makeBlock(rng, "sat" + std::to_string(i), d, cfg.ffHidden));
  headW_ = Parameter("head_w", gaussian(rng, d, cfg.codebookSize, 0.02));
  headB_ = Parameter("head_b", Mat::Zero(1, cfg.codebookSize));
}

std::vector<Parameter*> GeneratorModel::parameters() {
  std::vector<Parameter*> out{&tokEmb_, &maskEmb_, &posT_, &posS_, &textProj_, &audioProj_, &textToAudio_, &spatialCond_};
  for (auto& b : tat_) {
    for (auto* p : b.all()) out.push_back(p);
  }
  for (auto& b : sat_) {
    for (auto* p : b.all()) out.push_back(p);
  }
  out.push_back(&headW_);
  out.push_back(&headB_);
  return out;
}

std::vector<const Parameter*> GeneratorModel::parameters() const {
  auto mut = const_cast<GeneratorModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

Var GeneratorModel::conditionRows(Tape& tape, const Condition& c) {
  c.validate();
  if (c.textEmbed && c.textDim() != cfg_.textDim) throwData("text embedding width does not match generator projections");
  if (c.audioFeats && c.audioDim() != cfg_.audioDim) throwData("audio feature width does not match generator projections");
  switch (c.modality) {
    case Modality::Text:
      return ad::matmul(tape.constant(*c.textEmbed), tape.param(textProj_));
    case Modality::Audio:
      return ad::matmul(tape.constant(*c.audioFeats), tape.param(audioProj_));
    case Modality::TextAndAudio: {
      const Var parts[] = {ad::matmul(tape.constant(*c.textEmbed), tape.param(textToAudio_)), tape.constant(*c.audioFeats)};
      return ad::matmul(ad::concatRows(parts), tape.param(audioProj_));
    }
  }
  throwData("unknown modality");
}

Var GeneratorModel::tokenEmbeddings(Tape& tape, const TokenGrid& g) {
  if (g.frames < 1 || g.frames > cfg_.maxFrames) throwData("token grid length outside the positional table");
  if (g.joints != cfg_.joints) throwData("token grid joint count does not match generator");
  const int K = cfg_.codebookSize;
  std::vector<int> idx(g.cells());
  std::vector<int> tIdx(g.cells());
  std::vector<int> jIdx(g.cells());
  for (int t = 0; t < g.frames; ++t) {
    for (int j = 0; j < g.joints; ++j) {
      const std::size_t c = static_cast<std::size_t>(t) * g.joints + j;
      const int k = g.indices[c];
      if (!g.masked[c] && (k < 0 || k >= K)) throwData("token index outside codebook");
      idx[c] = g.masked[c] ? K : k;
      tIdx[c] = t;
      jIdx[c] = j;
    }
  }
  const Var table[] = {tape.param(tokEmb_), tape.param(maskEmb_)};
  Var e = ad::gatherRows(ad::concatRows(table), idx);
  e = ad::add(e, ad::gatherRows(tape.param(posT_), tIdx));
  return ad::add(e, ad::gatherRows(tape.param(posS_), jIdx));
}

Var GeneratorModel::block(Tape& tape, BlockParams& p, Var x, Var q, Var kv, Eigen::Index keepFrom, Mat* weights) {
  const double invSqrtD = 1.0 / std::sqrt(static_cast<double>(cfg_.dModel));
  Var Q = ad::matmul(q, tape.param(p.wq));
  Var K = ad::matmul(kv, tape.param(p.wk));
  Var V = ad::matmul(kv, tape.param(p.wv));
  Var A = ad::softmaxRows(ad::scale(ad::matmulNT(Q, K), invSqrtD));
  if (weights != nullptr) *weights = A.value();
  Var O = ad::matmul(ad::matmul(A, V), tape.param(p.wo));
  if (keepFrom > 0) O = ad::sliceRows(O, keepFrom, x.rows());
  Var h = ad::layerNormRows(ad::add(x, O), tape.param(p.lnGain), tape.param(p.lnBias));
  Var f = ad::gelu(ad::addRow(ad::matmul(h, tape.param(p.ff1)), tape.param(p.ffb1)));
  f = ad::addRow(ad::matmul(f, tape.param(p.ff2)), tape.param(p.ffb2));
  return ad::add(h, f);
}

Var GeneratorModel::tatBlockForward(Tape& tape, int layer, Var track, Var condition, Modality modality, Mat* weights) {
  if (track.cols() != cfg_.dModel || condition.cols() != cfg_.dModel) throwData("TAT input width mismatch");
  BlockParams& p = tat_.at(static_cast<std::size_t>(layer));
  if (modality == Modality::Text) {
    if (condition.rows() != 1) throwData("text condition must be a single temporal token");
    const Var parts[] = {condition, track};
    Var joint = ad::concatRows(parts);
    return block(tape, p, track, joint, joint, 1, weights);
  }
  return block(tape, p, track, track, condition, 0, weights);
}

Var GeneratorModel::satBlockForward(Tape& tape, int layer, Var frame, Var spatialCondition, Mat* weights) {
  if (frame.cols() != cfg_.dModel || spatialCondition.cols() != cfg_.dModel) throwData("SAT input width mismatch");
  return block(tape, sat_.at(static_cast<std::size_t>(layer)), frame, frame, spatialCondition, 0, weights);
}

Var GeneratorModel::logits(Tape& tape, const TokenGrid& g, const Condition& c, ForwardTrace* trace) {
  const int T = g.frames;
  const int J = g.joints;
  Var cond = conditionRows(tape, c);
  Var x = tokenEmbeddings(tape, g);

  if (trace != nullptr) {
    trace->tat.assign(tat_.size(), std::vector<Mat>(static_cast<std::size_t>(J)));
    trace->sat.assign(sat_.size(), std::vector<Mat>(static_cast<std::size_t>(T)));
  }

  // Joint-major view for the temporal blocks.
  std::vector<int> perm;
  perm.reserve(g.cells());
  for (int j = 0; j < J; ++j) {
    for (int t = 0; t < T; ++t) perm.push_back(t * J + j);
  }
  Var xj = ad::gatherRows(x, perm);
  std::vector<Var> tracks;
  for (int j = 0; j < J; ++j) tracks.push_back(ad::sliceRows(xj, static_cast<Eigen::Index>(j) * T, T));
  for (std::size_t l = 0; l < tat_.size(); ++l) {
    for (int j = 0; j < J; ++j) {
      Mat* w = trace != nullptr ? &trace->tat[l][static_cast<std::size_t>(j)] : nullptr;
      tracks[static_cast<std::size_t>(j)] =
          tatBlockForward(tape, static_cast<int>(l), tracks[static_cast<std::size_t>(j)], cond, c.modality, w);
    }
  }
  std::vector<int> inverse(g.cells());
  for (std::size_t i = 0; i < perm.size(); ++i) inverse[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
  x = ad::gatherRows(ad::concatRows(tracks), inverse);

  Var spatialBase = ad::matmul(cond, tape.param(spatialCond_));
  std::vector<Var> frames;
  std::vector<Var> frameCond;
  for (int t = 0; t < T; ++t) {
    frames.push_back(ad::sliceRows(x, static_cast<Eigen::Index>(t) * J, J));
    const auto rows = spatialConditionRows(c.modality, static_cast<int>(cond.rows()), t, T);
    frameCond.push_back(ad::gatherRows(spatialBase, rows));
  }
  for (std::size_t l = 0; l < sat_.size(); ++l) {
    for (int t = 0; t < T; ++t) {
      Mat* w = trace != nullptr ? &trace->sat[l][static_cast<std::size_t>(t)] : nullptr;
      frames[static_cast<std::size_t>(t)] = satBlockForward(tape, static_cast<int>(l), frames[static_cast<std::size_t>(t)],
                                                            frameCond[static_cast<std::size_t>(t)], w);
    }
  }
  x = ad::concatRows(frames);
  return ad::addRow(ad::matmul(x, tape.param(headW_)), tape.param(headB_));
}

Mat GeneratorModel::logitsValue(const TokenGrid& g, const Condition& c, ForwardTrace* trace) {
  Tape tape;
  return logits(tape, g, c, trace).value();
}

Mat GeneratorModel::conditionValue(const Condition& c) {
  Tape tape;
  return conditionRows(tape, c).value();
}

MotionEmbedding GeneratorModel::scoringEmbedding(const TokenGrid& g) {
  TokenGrid open = g;
  std::fill(open.masked.begin(), open.masked.end(), std::uint8_t{0});
  Tape tape;
  MotionEmbedding m;
  m.frames = g.frames;
  m.joints = g.joints;
  m.tokens = tokenEmbeddings(tape, open).value();
  return m;
}

// ------------------------------------------------------------ training

Var restorationLoss(Tape& tape, GeneratorModel& model, const RestorationBatch& batch) {
  std::vector<Var> parts;
  std::vector<int> targets;
  for (const auto& item : batch) {
    const auto& g = item.grid;
    if (std::none_of(g.masked.begin(), g.masked.end(), [](std::uint8_t m) { return m != 0; })) continue;
    parts.push_back(model.logits(tape, g, item.condition));
    for (std::size_t c = 0; c < g.cells(); ++c) targets.push_back(g.masked[c] ? g.indices[c] : -1);
  }
  if (parts.empty()) return tape.constant(Mat::Zero(1, 1));
  return ad::crossEntropy(ad::concatRows(parts), targets);
}

double restorationAccuracy(GeneratorModel& model, const RestorationBatch& batch) {
  std::size_t hit = 0;
  std::size_t total = 0;
  for (const auto& item : batch) {
    const auto& g = item.grid;
    if (std::none_of(g.masked.begin(), g.masked.end(), [](std::uint8_t m) { return m != 0; })) continue;
    const Mat z = model.logitsValue(g, item.condition);
    for (std::size_t c = 0; c < g.cells(); ++c) {
      if (!g.masked[c]) continue;
      Eigen::Index best = 0;
      z.row(static_cast<Eigen::Index>(c)).maxCoeff(&best);
      hit += best == g.indices[c] ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

GeneratorTrainer::GeneratorTrainer(GeneratorModel& model, double beta1, double beta2)
    : model_(model), opt_(model.parameters(), beta1, beta2) {}

double GeneratorTrainer::learningRate() const {
  return warmupLearningRate(model_.step(), model_.config().peakLearningRate, model_.config().warmupSteps);
}

double GeneratorTrainer::trainStep(const RestorationBatch& batch) {
  if (batch.empty()) throwUsage("train step needs a non-empty batch");
  Tape tape;
  opt_.zeroGrad();
  Var loss = restorationLoss(tape, model_, batch);
  const double value = loss.value()(0, 0);
  if (!std::isfinite(value)) throwNumeric("generator loss is not finite at step " + std::to_string(model_.step()));
  if (!tape.needsGrad(loss)) return value;  // nothing masked
  tape.backward(loss);
  opt_.step(learningRate());
  model_.setStep(model_.step() + 1);
  return value;
}

void applyMaskPlan(TokenGrid& g, const std::vector<int>& temporal, const std::vector<int>& spatial) {
  std::fill(g.masked.begin(), g.masked.end(), std::uint8_t{0});
  for (int t : temporal) {
    for (int j = 0; j < g.joints; ++j) g.masked[static_cast<std::size_t>(t) * g.joints + j] = 1;
  }
  for (int j : spatial) {
    for (int t = 0; t < g.frames; ++t) g.masked[static_cast<std::size_t>(t) * g.joints + j] = 1;
  }
}

std::pair<std::vector<int>, std::vector<int>> chooseMasks(GeneratorModel& model, const TokenGrid& g,
                                                          const Condition& c, const GeneratorConfig& cfg,
                                                          std::uint64_t seed) {
  const double at = cfg.alphaTemporal;
  const double as = cfg.alphaSpatial;
  switch (cfg.strategy) {
    case StrategyKind::Attention: {
      const MaskPlan plan = planMasks(model.scoringEmbedding(g), {c.modality, model.conditionValue(c)}, at, as);
      return {plan.temporalMasked, plan.spatialMasked};
    }
    case StrategyKind::Random:
      return {randomMask(g.frames, at, seed), randomMask(g.joints, as, seed ^ 0x5a5a5a5aULL)};
    case StrategyKind::Confidence: {
      TokenGrid open = g;
      std::fill(open.masked.begin(), open.masked.end(), std::uint8_t{0});
      const Mat z = model.logitsValue(open, c);
      Eigen::VectorXd perFrame = Eigen::VectorXd::Zero(g.frames);
      Eigen::VectorXd perJoint = Eigen::VectorXd::Zero(g.joints);
      for (int t = 0; t < g.frames; ++t) {
        for (int j = 0; j < g.joints; ++j) {
          const Eigen::Index r = static_cast<Eigen::Index>(t) * g.joints + j;
          const double m = z.row(r).maxCoeff();
          const double p = std::exp(z(r, g.at(t, j)) - m) / (z.row(r).array() - m).exp().sum();
          perFrame(t) += p / g.joints;
          perJoint(j) += p / g.frames;
        }
      }
      return {confidenceMask(perFrame, at), confidenceMask(perJoint, as)};
    }
    case StrategyKind::Density:
    case StrategyKind::KMeans:
    case StrategyKind::Gmm: {
      const MotionEmbedding e = model.scoringEmbedding(g);
      BaselineStrategy s = DensityStrategy{};
      if (cfg.strategy == StrategyKind::KMeans) s = KMeansStrategy{cfg.clusters, seed};
      if (cfg.strategy == StrategyKind::Gmm) s = GmmStrategy{cfg.clusters, seed};
      const Eigen::VectorXd none;
      return {baselineMask(s, e.temporalTokens(), none, at), baselineMask(s, e.spatialTokens(), none, as)};
    }
  }
  throwUsage("unknown strategy");
}

std::vector<TokenizedRecord> tokenizeCorpus(const TokenizerModel& tok, std::span<const CorpusRecord> corpus) {
  std::vector<TokenizedRecord> out;
  out.reserve(corpus.size());
  for (const auto& r : corpus) out.push_back({tok.encode(r.motion), r.condition});
  return out;
}

GeneratorTraining trainGenerator(std::span<const TokenizedRecord> data, const GeneratorConfig& cfg) {
  if (data.empty()) throwUsage("generator training needs data");
  GeneratorTraining out{GeneratorModel(cfg), {}};
  GeneratorTrainer trainer(out.model);
  Rng rng(cfg.seed + 17);
  const std::size_t batch = static_cast<std::size_t>(std::max(1, cfg.batchSize));
  int done = 0;
  for (std::uint64_t epoch = 0; done < cfg.steps; ++epoch) {
    RestorationBatch items;
    items.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      RestorationItem item{data[i].grid, data[i].condition};
      const std::uint64_t seed = cfg.seed * 1000003ULL + epoch * 7919ULL + i;
      const auto [temporal, spatial] = chooseMasks(out.model, item.grid, item.condition, cfg, seed);
      applyMaskPlan(item.grid, temporal, spatial);
      items.push_back(std::move(item));
    }
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size() && done < cfg.steps; start += batch) {
      RestorationBatch b;
      for (std::size_t k = start; k < std::min(order.size(), start + batch); ++k) b.push_back(items[order[k]]);
      const double lr = trainer.learningRate();
      const long step = out.model.step();
      const double loss = trainer.trainStep(b);
      out.log.push_back({step, loss, 0.0, lr});
      ++done;
    }
  }
  return out;
}

// ------------------------------------------------------------ decoding

int cosineMaskedCount(int cells, int round, int rounds) {
  if (round >= rounds) return 0;
  const double frac = std::cos(std::numbers::pi / 2.0 * static_cast<double>(round) / static_cast<double>(rounds));
  return std::clamp(static_cast<int>(std::floor(cells * frac)), 0, cells);
}

TokenGrid generate(GeneratorModel& model, const Condition& c, int frames, const DecodeSchedule& schedule, int scale,
                   double fps) {
  if (frames <= 0) throwUsage("generation length must be positive");
  if (schedule.rounds < 1) throwUsage("decode schedule needs at least one round");
  const int J = model.config().joints;
  TokenGrid g(frames, J, scale);
  g.fps = fps;
  std::fill(g.masked.begin(), g.masked.end(), std::uint8_t{1});
  const int cells = static_cast<int>(g.cells());
  Rng rng(schedule.seed);

  for (int round = 1; round <= schedule.rounds; ++round) {
    const Mat z = model.logitsValue(g, c);
    std::vector<std::pair<double, int>> fresh;  // (confidence, cell)
    for (int cell = 0; cell < cells; ++cell) {
      if (!g.masked[static_cast<std::size_t>(cell)]) continue;
      Eigen::RowVectorXd logit = z.row(cell);
      if (schedule.sample) logit /= std::max(schedule.temperature, 1e-6);
      const double m = logit.maxCoeff();
      Eigen::RowVectorXd p = (logit.array() - m).exp();
      p /= p.sum();
      int choice = 0;
      if (schedule.sample) {
        double r = rng.uniform();
        for (choice = 0; choice < p.size() - 1; ++choice) {
          r -= p(choice);
          if (r < 0.0) break;
        }
      } else {
        p.maxCoeff(&choice);
      }
      g.indices[static_cast<std::size_t>(cell)] = choice;
      fresh.emplace_back(p(choice), cell);
    }
    const int keepMasked = std::min(cosineMaskedCount(cells, round, schedule.rounds), static_cast<int>(fresh.size()));
    std::stable_sort(fresh.begin(), fresh.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [conf, cell] : fresh) g.masked[static_cast<std::size_t>(cell)] = 0;
    for (int i = 0; i < keepMasked; ++i) g.masked[static_cast<std::size_t>(fresh[static_cast<std::size_t>(i)].second)] = 1;
  }
  return g;
}

std::vector<std::uint8_t> encodeGeneratorCheckpoint(const GeneratorModel& model, const json& runConfig) {
  const GeneratorConfig& c = model.config();
  json header{{"dims",
               {{"d_model", c.dModel},
                {"ff_hidden", c.ffHidden},
                {"tat_layers", c.tatLayers},
                {"sat_layers", c.satLayers},
                {"codebook_size", c.codebookSize},
                {"text_dim", c.textDim},
                {"audio_dim", c.audioDim},
                {"max_frames", c.maxFrames},
                {"joints", c.joints}}},
              {"config", c.toJson()},
              {"seed", c.seed},
              {"step", model.step()}};
  if (!runConfig.is_null()) header["run_config"] = runConfig;
  const auto params = model.parameters();
  return writeCheckpoint("GEN1", std::move(header), params);
}

GeneratorModel decodeGeneratorCheckpoint(std::span<const std::uint8_t> bytes, json* runConfig) {
  const CheckpointContents c = readCheckpoint("GEN1", bytes);
  if (runConfig) *runConfig = c.header.value("run_config", json());
  try {
    GeneratorModel m(GeneratorConfig::fromJson(c.header.at("config")));
    c.restore(m.parameters());
    m.setStep(c.header.at("step").get<long>());
    return m;
  } catch (const json::exception& e) {
    throwData(std::string("malformed GEN1 header: ") + e.what());
  }
}

} // namespace mmk
