#include "mmk/tokenizer.hpp"

#include <cmath>
#include <limits>

#include "mmk/binio.hpp"
#include "mmk/checkpoint.hpp"
#include "mmk/error.hpp"
#include "mmk/optim.hpp"
#include "mmk/rng.hpp"

namespace mmk {

using ad::Mat;
using ad::Parameter;
using nlohmann::json;

Quantized quantize(const Eigen::Ref<const Eigen::RowVectorXd>& latent, const Codebook& cb) {
  if (latent.size() != cb.dim()) throwUsage("latent width does not match codebook");
  Quantized q;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cb.size(); ++k) {
    const double d = (cb.entries.row(k) - latent).squaredNorm();
    if (d < best) {
      best = d;
      q.index = k;
    }
  }
  q.error = std::sqrt(best);
  return q;
}

TokenGrid::TokenGrid(int f, int j, int s)
    : frames(f), joints(j), scale(s),
      indices(static_cast<std::size_t>(f) * j, 0),
      masked(static_cast<std::size_t>(f) * j, 0) {}

json TokenizerConfig::toJson() const {
  return json{{"codebook_size", codebookSize}, {"code_dim", codeDim},   {"scale", scale},
              {"hidden", hidden},              {"beta", beta},          {"peak_lr", peakLearningRate},
              {"warmup_steps", warmupSteps},   {"steps", steps},        {"batch_size", batchSize},
              {"seed", seed}};
}

TokenizerConfig TokenizerConfig::fromJson(const json& j) {
  TokenizerConfig c;
  c.codebookSize = j.value("codebook_size", c.codebookSize);
  c.codeDim = j.value("code_dim", c.codeDim);
  c.scale = j.value("scale", c.scale);
  c.hidden = j.value("hidden", c.hidden);
  c.beta = j.value("beta", c.beta);
  c.peakLearningRate = j.value("peak_lr", c.peakLearningRate);
  c.warmupSteps = j.value("warmup_steps", c.warmupSteps);
  c.steps = j.value("steps", c.steps);
  c.batchSize = j.value("batch_size", c.batchSize);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {

Mat gaussian(Rng& rng, int rows, int cols) {
  Mat m(rows, cols);
  const double s = 1.0 / std::sqrt(static_cast<double>(rows));
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = s * rng.normal();
  return m;
}

} // namespace

TokenizerModel::TokenizerModel(int featureDim, int scale, int codeDim, int hidden, int codebookSize,
                               double beta, std::uint64_t seed)
    : featureDim_(featureDim), scale_(scale), beta_(beta), seed_(seed) {
  if (featureDim < 1 || scale < 1 || codeDim < 1 || hidden < 1) throwUsage("tokenizer dims must be positive");
  if (codebookSize < 2) throwUsage("codebook needs at least 2 entries");
  Rng rng(seed);
  const int window = scale * featureDim;
  encW1_ = Parameter("enc_w1", gaussian(rng, window, hidden));
  encB1_ = Parameter("enc_b1", Mat::Zero(1, hidden));
  encW2_ = Parameter("enc_w2", gaussian(rng, hidden, codeDim));
  encB2_ = Parameter("enc_b2", Mat::Zero(1, codeDim));
  codebook_ = Parameter("codebook", gaussian(rng, codeDim, codebookSize).transpose());
  decW1_ = Parameter("dec_w1", gaussian(rng, codeDim, hidden));
  decB1_ = Parameter("dec_b1", Mat::Zero(1, hidden));
  decW2_ = Parameter("dec_w2", gaussian(rng, hidden, window));
  decB2_ = Parameter("dec_b2", Mat::Zero(1, window));
}

TokenizerModel::TokenizerModel(int featureDim, const TokenizerConfig& cfg)
    : TokenizerModel(featureDim, cfg.scale, cfg.codeDim, cfg.hidden, cfg.codebookSize, cfg.beta, cfg.seed) {}

TokenizerModel TokenizerModel::identityToy(int featureDim, int codebookSize, std::uint64_t seed) {
  const int d = featureDim;
  TokenizerModel m(d, 1, d, 2 * d, codebookSize, 0.25, seed);
  Mat split(d, 2 * d);
  split << Mat::Identity(d, d), -Mat::Identity(d, d);
  Mat merge = split.transpose();
  m.encW1_.value = split;
  m.encW2_.value = merge;
  m.decW1_.value = split;
  m.decW2_.value = merge;
  return m;
}

std::vector<Parameter*> TokenizerModel::parameters() {
  return {&encW1_, &encB1_, &encW2_, &encB2_, &codebook_, &decW1_, &decB1_, &decW2_, &decB2_};
}

std::vector<const Parameter*> TokenizerModel::parameters() const {
  return {&encW1_, &encB1_, &encW2_, &encB2_, &codebook_, &decW1_, &decB1_, &decW2_, &decB2_};
}

Mat TokenizerModel::windows(const MotionSequence& m, int* padded) const {
  if (m.featureDim() != featureDim_) throwData("motion feature width does not match tokenizer");
  const int T = m.frames();
  const int J = m.joints();
  const int Tp = (T + scale_ - 1) / scale_;
  if (padded != nullptr) *padded = Tp * scale_ - T;
  Mat w(static_cast<Eigen::Index>(Tp) * J, scale_ * featureDim_);
  for (int tp = 0; tp < Tp; ++tp) {
    for (int j = 0; j < J; ++j) {
      for (int s = 0; s < scale_; ++s) {
        const int t = std::min(tp * scale_ + s, T - 1);
        for (int d = 0; d < featureDim_; ++d) w(tp * J + j, s * featureDim_ + d) = m.at(t, j, d);
      }
    }
  }
  return w;
}

Mat TokenizerModel::encodeLatents(const Mat& w) const {
  Mat h = ((w * encW1_.value).rowwise() + encB1_.value.row(0)).cwiseMax(0.0);
  return (h * encW2_.value).rowwise() + encB2_.value.row(0);
}

Mat TokenizerModel::decodeLatents(const Mat& z) const {
  Mat h = ((z * decW1_.value).rowwise() + decB1_.value.row(0)).cwiseMax(0.0);
  return (h * decW2_.value).rowwise() + decB2_.value.row(0);
}

TokenGrid TokenizerModel::encode(const MotionSequence& m) const {
  int padded = 0;
  const Mat w = windows(m, &padded);
  const Mat z = encodeLatents(w);
  const Codebook cb = codebook();
  TokenGrid g((m.frames() + padded) / scale_, m.joints(), scale_);
  g.padded = padded;
  g.fps = m.fps();
  for (Eigen::Index r = 0; r < z.rows(); ++r) g.indices[static_cast<std::size_t>(r)] = quantize(z.row(r), cb).index;
  return g;
}

MotionSequence TokenizerModel::decode(const TokenGrid& g) const {
  if (g.scale != scale_) throwData("token grid scale does not match tokenizer");
  if (g.indices.size() != static_cast<std::size_t>(g.frames) * g.joints || g.frames < 1 || g.joints < 1) {
    throwData("token grid shape is inconsistent");
  }
  const int K = codebookSize();
  Mat z(static_cast<Eigen::Index>(g.indices.size()), codeDim());
  for (std::size_t i = 0; i < g.indices.size(); ++i) {
    const int k = g.indices[i];
    if (k < 0 || k >= K) throwData("token index " + std::to_string(k) + " outside codebook of size " + std::to_string(K));
    z.row(static_cast<Eigen::Index>(i)) = codebook_.value.row(k);
  }
  const Mat w = decodeLatents(z);
  const int T = g.frames * scale_ - g.padded;
  if (T < 1) throwData("token grid padding exceeds its length");
  std::vector<float> data(static_cast<std::size_t>(T) * g.joints * featureDim_);
  for (int tp = 0; tp < g.frames; ++tp) {
    for (int j = 0; j < g.joints; ++j) {
      for (int s = 0; s < scale_; ++s) {
        const int t = tp * scale_ + s;
        if (t >= T) continue;
        for (int d = 0; d < featureDim_; ++d) {
          data[(static_cast<std::size_t>(t) * g.joints + j) * featureDim_ + d] =
              static_cast<float>(w(tp * g.joints + j, s * featureDim_ + d));
        }
      }
    }
  }
  return MotionSequence(T, g.joints, featureDim_, g.fps, std::move(data));
}

TokenizerModel::LossTerms TokenizerModel::loss(ad::Tape& tape, const Mat& w, const VqFreeze* frozen,
                                               VqFreeze* capture) {
  using namespace ad;
  Var x = tape.constant(w);
  Var h = relu(addRow(matmul(x, tape.param(encW1_)), tape.param(encB1_)));
  Var z = addRow(matmul(h, tape.param(encW2_)), tape.param(encB2_));

  VqFreeze local;
  const VqFreeze* vq = frozen;
  if (vq == nullptr) {
    const Codebook cb = codebook();
    local.indices.resize(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index r = 0; r < z.rows(); ++r) local.indices[static_cast<std::size_t>(r)] = quantize(z.value().row(r), cb).index;
    local.latents = z.value();
    local.codes.resize(z.rows(), codeDim());
    for (Eigen::Index r = 0; r < z.rows(); ++r) local.codes.row(r) = codebook_.value.row(local.indices[static_cast<std::size_t>(r)]);
    vq = &local;
  }
  if (capture != nullptr) *capture = *vq;

  Var e = gatherRows(tape.param(codebook_), vq->indices);
  // Straight-through: forward value is the code, gradient flows to z.
  Var zq = add(z, tape.constant(vq->codes - vq->latents));
  Var hd = relu(addRow(matmul(zq, tape.param(decW1_)), tape.param(decB1_)));
  Var xr = addRow(matmul(hd, tape.param(decW2_)), tape.param(decB2_));

  Var recon = meanSquaredError(xr, x);
  Var codebookTerm = meanSquaredError(tape.constant(vq->latents), e);
  Var commitTerm = meanSquaredError(z, tape.constant(vq->codes));
  Var total = add(add(recon, codebookTerm), ad::scale(commitTerm, beta_));
  return {total, recon.value()(0, 0)};
}

void TokenizerModel::initCodebookFrom(const Mat& w, std::uint64_t seed) {
  const Mat z = encodeLatents(w);
  Rng rng(seed ^ 0xc0debeefULL);
  for (Eigen::Index k = 0; k < codebook_.value.rows(); ++k) {
    codebook_.value.row(k) = z.row(static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(z.rows()))));
    for (Eigen::Index c = 0; c < codebook_.value.cols(); ++c) codebook_.value(k, c) += 1e-3 * rng.normal();
  }
}

TokenizerTraining trainTokenizer(std::span<const CorpusRecord> corpus, const TokenizerConfig& cfg) {
  if (corpus.empty()) throwUsage("tokenizer training needs a non-empty corpus");
  const int D = corpus.front().motion.featureDim();
  TokenizerTraining out{TokenizerModel(D, cfg), {}};
  TokenizerModel& model = out.model;

  std::vector<Mat> perRecord;
  perRecord.reserve(corpus.size());
  Eigen::Index totalRows = 0;
  for (const auto& r : corpus) {
    perRecord.push_back(model.windows(r.motion));
    totalRows += perRecord.back().rows();
  }
  Mat all(totalRows, perRecord.front().cols());
  Eigen::Index at = 0;
  for (const auto& w : perRecord) {
    all.middleRows(at, w.rows()) = w;
    at += w.rows();
  }
  model.initCodebookFrom(all, cfg.seed);

  Adam opt(model.parameters());
  Rng rng(cfg.seed + 1);
  const auto batch = static_cast<std::size_t>(std::max(1, std::min<int>(cfg.batchSize, static_cast<int>(corpus.size()))));
  for (int s = 0; s < cfg.steps; ++s) {
    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    Eigen::Index rows = 0;
    for (std::size_t b = 0; b < batch; ++b) rows += perRecord[order[b]].rows();
    Mat w(rows, all.cols());
    rows = 0;
    for (std::size_t b = 0; b < batch; ++b) {
      w.middleRows(rows, perRecord[order[b]].rows()) = perRecord[order[b]];
      rows += perRecord[order[b]].rows();
    }

    const double lr = warmupLearningRate(model.step(), cfg.peakLearningRate, cfg.warmupSteps);
    ad::Tape tape;
    opt.zeroGrad();
    auto terms = model.loss(tape, w);
    const double value = terms.total.value()(0, 0);
    if (!std::isfinite(value)) throwNumeric("tokenizer loss diverged at step " + std::to_string(model.step()));
    tape.backward(terms.total);
    opt.step(lr);
    out.log.push_back({model.step(), value, terms.reconstruction, lr});
    model.setStep(model.step() + 1);
  }
  return out;
}

double reconstructionMse(const TokenizerModel& model, std::span<const CorpusRecord> corpus) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : corpus) {
    const MotionSequence rec = model.decode(model.encode(r.motion));
    for (std::size_t i = 0; i < rec.data().size(); ++i) {
      const double d = static_cast<double>(rec.data()[i]) - r.motion.data()[i];
      sum += d * d;
    }
    count += rec.data().size();
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

std::vector<std::uint8_t> encodeTokenizerCheckpoint(const TokenizerModel& model, const json& runConfig) {
  json header{{"dims",
               {{"feature_dim", model.featureDim()},
                {"scale", model.scale()},
                {"code_dim", model.codeDim()},
                {"hidden", model.hidden()},
                {"codebook_size", model.codebookSize()}}},
              {"beta", model.beta()},
              {"seed", model.seed()},
              {"step", model.step()}};
  if (!runConfig.is_null()) header["run_config"] = runConfig;
  const auto params = model.parameters();
  return writeCheckpoint("TKZ1", std::move(header), params);
}

TokenizerModel decodeTokenizerCheckpoint(std::span<const std::uint8_t> bytes, json* runConfig) {
  const CheckpointContents c = readCheckpoint("TKZ1", bytes);
  if (runConfig) *runConfig = c.header.value("run_config", json());
  try {
    const json& d = c.header.at("dims");
    TokenizerConfig cfg;
    cfg.scale = d.at("scale").get<int>();
    cfg.codeDim = d.at("code_dim").get<int>();
    cfg.hidden = d.at("hidden").get<int>();
    cfg.codebookSize = d.at("codebook_size").get<int>();
    cfg.beta = c.header.at("beta").get<double>();
    cfg.seed = c.header.at("seed").get<std::uint64_t>();
    TokenizerModel m(d.at("feature_dim").get<int>(), cfg);
    c.restore(m.parameters());
    m.setStep(c.header.at("step").get<long>());
    return m;
  } catch (const json::exception& e) {
    throwData(std::string("malformed TKZ1 header: ") + e.what());
  }
}

} // namespace mmk
