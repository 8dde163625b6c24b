#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "mmk/error.hpp"
#include "mmk/generator.hpp"
#include "mmk/rng.hpp"
#include "support/grad_check.hpp"

namespace mmk {
namespace {

using Eigen::MatrixXd;

GeneratorConfig tinyConfig() {
  GeneratorConfig c;
  c.dModel = 8;
  c.ffHidden = 16;
  c.tatLayers = 1;
  c.satLayers = 1;
  c.codebookSize = 6;
  c.textDim = 4;
  c.audioDim = 3;
  c.maxFrames = 8;
  c.joints = 3;
  c.seed = 11;
  return c;
}

MatrixXd randomMat(Rng& rng, int r, int c) {
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
  return m;
}

Condition makeCondition(Rng& rng, Modality m, int audioFrames, const GeneratorConfig& cfg) {
  Condition c;
  c.modality = m;
  if (m != Modality::Audio) c.textEmbed = randomMat(rng, 1, cfg.textDim);
  if (m != Modality::Text) c.audioFeats = randomMat(rng, audioFrames, cfg.audioDim);
  return c;
}

TokenGrid randomGrid(Rng& rng, int T, const GeneratorConfig& cfg) {
  TokenGrid g(T, cfg.joints, 1);
  for (auto& k : g.indices) k = static_cast<int>(rng.below(static_cast<std::size_t>(cfg.codebookSize)));
  return g;
}

// Straight-line block: explicit loops for every product and normalization.
MatrixXd loopBlock(const BlockParams& p, const MatrixXd& x, const MatrixXd& q, const MatrixXd& kv, int keepFrom,
                   MatrixXd* weights) {
  auto mul = [](const MatrixXd& a, const MatrixXd& b) {
    MatrixXd out = MatrixXd::Zero(a.rows(), b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < b.cols(); ++j)
        for (Eigen::Index k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
    return out;
  };
  const MatrixXd Q = mul(q, p.wq.value), K = mul(kv, p.wk.value), V = mul(kv, p.wv.value);
  const auto d = static_cast<double>(Q.cols());
  MatrixXd A(Q.rows(), K.rows());
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    double mx = -1e300;
    for (Eigen::Index j = 0; j < K.rows(); ++j) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < Q.cols(); ++c) s += Q(i, c) * K(j, c);
      A(i, j) = s / std::sqrt(d);
      mx = std::max(mx, A(i, j));
    }
    double z = 0.0;
    for (Eigen::Index j = 0; j < K.rows(); ++j) z += (A(i, j) = std::exp(A(i, j) - mx));
    for (Eigen::Index j = 0; j < K.rows(); ++j) A(i, j) /= z;
  }
  if (weights) *weights = A;
  const MatrixXd O = mul(mul(A, V), p.wo.value);
  MatrixXd h(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mean = 0.0, var = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) h(i, c) = x(i, c) + O(i + keepFrom, c);
    for (Eigen::Index c = 0; c < x.cols(); ++c) mean += h(i, c) / static_cast<double>(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) var += (h(i, c) - mean) * (h(i, c) - mean) / static_cast<double>(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      h(i, c) = (h(i, c) - mean) / std::sqrt(var + 1e-5) * p.lnGain.value(0, c) + p.lnBias.value(0, c);
    }
  }
  MatrixXd f = mul(h, p.ff1.value);
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    for (Eigen::Index c = 0; c < f.cols(); ++c) {
      const double v = f(i, c) + p.ffb1.value(0, c);
      f(i, c) = 0.5 * v * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (v + 0.044715 * v * v * v)));
    }
  }
  MatrixXd out = mul(f, p.ff2.value);
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(i, c) += p.ffb2.value(0, c) + h(i, c);
  return out;
}

void perturbNorms(GeneratorModel& model, Rng& rng) {
  // Non-trivial gains and biases so the oracle sees every term.
  for (auto* p : model.parameters()) {
    if (p->name.find("ln_") != std::string::npos || p->name.find("ff_b") != std::string::npos) {
      p->value += 0.3 * randomMat(rng, static_cast<int>(p->value.rows()), static_cast<int>(p->value.cols()));
    }
  }
}

TEST(GeneratorForward, LogitShapesForEveryModality) {
  Rng rng(1);
  const auto cfg = tinyConfig();
  GeneratorModel model(cfg);
  for (Modality m : {Modality::Text, Modality::Audio, Modality::TextAndAudio}) {
    const auto g = randomGrid(rng, 4, cfg);
    const MatrixXd z = model.logitsValue(g, makeCondition(rng, m, 7, cfg));
    EXPECT_EQ(z.rows(), 4 * cfg.joints);
    EXPECT_EQ(z.cols(), cfg.codebookSize);
    EXPECT_TRUE(z.allFinite());
  }
}

TEST(GeneratorForward, TatKeepsTrackShape) {
  Rng rng(2);
  const auto cfg = tinyConfig();
  GeneratorModel model(cfg);
  for (Modality m : {Modality::Text, Modality::Audio, Modality::TextAndAudio}) {
    ad::Tape tape;
    const int condRows = m == Modality::Text ? 1 : 5;
    ad::Var out = model.tatBlockForward(tape, 0, tape.constant(randomMat(rng, 3, 8)),
                                        tape.constant(randomMat(rng, condRows, 8)), m);
    EXPECT_EQ(out.rows(), 3);
    EXPECT_EQ(out.cols(), 8);
  }
}

TEST(GeneratorForward, ZeroHeadGivesUniformLogits) {
  Rng rng(3);
  const auto cfg = tinyConfig();
  GeneratorModel model(cfg);
  model.outputWeight().value.setZero();
  model.outputBias().value.setZero();
  const MatrixXd z = model.logitsValue(randomGrid(rng, 3, cfg), makeCondition(rng, Modality::Audio, 4, cfg));
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const Eigen::RowVectorXd p = z.row(r).array().exp() / z.row(r).array().exp().sum();
    for (Eigen::Index k = 0; k < p.size(); ++k) EXPECT_DOUBLE_EQ(p(k), 1.0 / cfg.codebookSize);
  }
}

TEST(GeneratorForward, TatMatchesLoopOracle) {
  Rng rng(4);
  const auto cfg = tinyConfig();
  GeneratorModel model(cfg);
  perturbNorms(model, rng);
  const MatrixXd track = randomMat(rng, 3, 8);
  for (Modality m : {Modality::Text, Modality::Audio}) {
    const MatrixXd cond = randomMat(rng, m == Modality::Text ? 1 : 5, 8);
    ad::Tape tape;
    MatrixXd w;
    const MatrixXd got = model.tatBlockForward(tape, 0, tape.constant(track), tape.constant(cond), m, &w).value();
    MatrixXd wantW;
    MatrixXd want;
    if (m == Modality::Text) {
      MatrixXd joint(4, 8);
      joint << cond, track;
      want = loopBlock(model.tatBlock(0), track, joint, joint, 1, &wantW);
    } else {
      want = loopBlock(model.tatBlock(0), track, track, cond, 0, &wantW);
    }
    EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-5);
    EXPECT_LT((w - wantW).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(GeneratorForward, SatMatchesLoopOracle) {
  Rng rng(5);
  const auto cfg = tinyConfig();
  GeneratorModel model(cfg);
  perturbNorms(model, rng);
  const MatrixXd frame = randomMat(rng, 3, 8), cond = randomMat(rng, 2, 8);
  ad::Tape tape;
  const MatrixXd got = model.satBlockForward(tape, 0, tape.constant(frame), tape.constant(cond)).value();
  EXPECT_LT((got - loopBlock(model.satBlock(0), frame, frame, cond, 0, nullptr)).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(GeneratorForward, SatSingleJointAndRepeatedConditionRows) {
  Rng rng(6);
  GeneratorModel model(tinyConfig());
  const MatrixXd frame = randomMat(rng, 1, 8);
  const MatrixXd row = randomMat(rng, 1, 8);
  MatrixXd twice(2, 8);
  twice << row, row;
  ad::Tape tape;
  MatrixXd w1, w2;
  const MatrixXd one = model.satBlockForward(tape, 0, tape.constant(frame), tape.constant(row), &w1).value();
  const MatrixXd two = model.satBlockForward(tape, 0, tape.constant(frame), tape.constant(twice), &w2).value();
  EXPECT_DOUBLE_EQ(w1(0, 0), 1.0);
  EXPECT_NEAR(w2(0, 0), 0.5, 1e-12);
  EXPECT_TRUE(one.allFinite());
  EXPECT_LT((one - two).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GeneratorForward, AudioKeyPermutationInvariance) {
  Rng rng(7);
  GeneratorModel model(tinyConfig());
  const MatrixXd track = randomMat(rng, 4, 8), cond = randomMat(rng, 6, 8);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
  perm.indices() << 3, 0, 5, 1, 4, 2;
  const MatrixXd shuffled = perm * cond;
  for (Modality m : {Modality::Audio, Modality::TextAndAudio}) {
    ad::Tape tape;
    const MatrixXd a = model.tatBlockForward(tape, 0, tape.constant(track), tape.constant(cond), m).value();
    const MatrixXd b = model.tatBlockForward(tape, 0, tape.constant(track), tape.constant(shuffled), m).value();
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(GeneratorForward, ModalityRoutingIsVisibleInTrace) {
  Rng rng(8);
  const auto cfg = tinyConfig();
  GeneratorModel model(cfg);
  const int T = 5, Ta = 9;
  const auto g = randomGrid(rng, T, cfg);
  ForwardTrace text, audio, both;
  model.logitsValue(g, makeCondition(rng, Modality::Text, Ta, cfg), &text);
  model.logitsValue(g, makeCondition(rng, Modality::Audio, Ta, cfg), &audio);
  model.logitsValue(g, makeCondition(rng, Modality::TextAndAudio, Ta, cfg), &both);
  ASSERT_EQ(text.tat.size(), 1u);
  ASSERT_EQ(text.tat[0].size(), static_cast<std::size_t>(cfg.joints));
  for (int j = 0; j < cfg.joints; ++j) {
    EXPECT_EQ(text.tat[0][j].rows(), T + 1);
    EXPECT_EQ(text.tat[0][j].cols(), T + 1);
    EXPECT_EQ(audio.tat[0][j].rows(), T);
    EXPECT_EQ(audio.tat[0][j].cols(), Ta);
    EXPECT_EQ(both.tat[0][j].rows(), T);
    EXPECT_EQ(both.tat[0][j].cols(), Ta + 1);
  }
  ASSERT_EQ(audio.sat[0].size(), static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    EXPECT_EQ(text.sat[0][t].rows(), cfg.joints);
    EXPECT_EQ(text.sat[0][t].cols(), 1);
    EXPECT_EQ(audio.sat[0][t].rows(), cfg.joints);
    EXPECT_EQ(audio.sat[0][t].cols(), static_cast<Eigen::Index>(spatialConditionRows(Modality::Audio, Ta, t, T).size()));
  }
}

TEST(GeneratorForward, ProjectionMismatchIsDataError) {
  Rng rng(9);
  auto cfg = tinyConfig();
  GeneratorModel model(cfg);
  cfg.audioDim = 5;
  EXPECT_THROW(model.logitsValue(randomGrid(rng, 3, tinyConfig()), makeCondition(rng, Modality::Audio, 4, cfg)), Error);
  EXPECT_THROW(model.logitsValue(randomGrid(rng, 9, tinyConfig()), makeCondition(rng, Modality::Text, 4, tinyConfig())), Error);
  ad::Tape tape;
  EXPECT_THROW(model.tatBlockForward(tape, 0, tape.constant(randomMat(rng, 3, 8)), tape.constant(randomMat(rng, 2, 8)),
                                     Modality::Text),
               Error);
}

RestorationBatch mixedBatch(Rng& rng, const GeneratorConfig& cfg) {
  RestorationBatch b;
  for (Modality m : {Modality::Text, Modality::Audio, Modality::TextAndAudio}) {
    RestorationItem it{randomGrid(rng, 3, cfg), makeCondition(rng, m, 4, cfg)};
    applyMaskPlan(it.grid, {1}, {2});
    b.push_back(it);
  }
  return b;
}

TEST(GeneratorTraining, EveryParameterFamilyPassesFiniteDifferences) {
  Rng rng(10);
  const auto cfg = tinyConfig();
  GeneratorModel model(cfg);
  perturbNorms(model, rng);
  const auto batch = mixedBatch(rng, cfg);
  auto params = model.parameters();
  auto loss = [&](bool withGrad) {
    ad::Tape tape;
    if (withGrad) {
      for (auto* p : params) p->zeroGrad();
    }
    ad::Var l = restorationLoss(tape, model, batch);
    if (withGrad) tape.backward(l);
    return l.value()(0, 0);
  };
  const auto r = testing::checkGradients(params, loss, 20, 3);
  EXPECT_LT(r.worstRelative, 1e-4) << r.worstAt;
  EXPECT_EQ(r.families.size(), params.size());
}

TEST(GeneratorTraining, LossIsMeanCrossEntropyOverMaskedCells) {
  Rng rng(11);
  const auto cfg = tinyConfig();
  GeneratorModel model(cfg);
  const auto batch = mixedBatch(rng, cfg);
  double sum = 0.0;
  int count = 0;
  for (const auto& it : batch) {
    const MatrixXd z = model.logitsValue(it.grid, it.condition);
    for (std::size_t c = 0; c < it.grid.cells(); ++c) {
      if (!it.grid.masked[c]) continue;
      const auto r = static_cast<Eigen::Index>(c);
      const double mx = z.row(r).maxCoeff();
      sum += mx + std::log((z.row(r).array() - mx).exp().sum()) - z(r, it.grid.indices[c]);
      ++count;
    }
  }
  ad::Tape tape;
  EXPECT_NEAR(restorationLoss(tape, model, batch).value()(0, 0), sum / count, 1e-10);
}

TEST(GeneratorTraining, MaskedLabelsAreTheOnlyTargets) {
  Rng rng(13);
  const auto cfg = tinyConfig();
  GeneratorModel model(cfg);
  auto batch = mixedBatch(rng, cfg);
  ad::Tape tape;
  const double base = restorationLoss(tape, model, batch).value()(0, 0);
  // Masked cells feed the mask embedding, so their stored index is a pure
  // target: changing it changes the loss; the inputs are untouched.
  auto changed = batch;
  for (auto& it : changed) {
    for (std::size_t c = 0; c < it.grid.cells(); ++c) {
      if (it.grid.masked[c]) it.grid.indices[c] = (it.grid.indices[c] + 1) % cfg.codebookSize;
    }
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    TokenGrid a = batch[i].grid, b = changed[i].grid;
    EXPECT_EQ(model.logitsValue(a, batch[i].condition), model.logitsValue(b, changed[i].condition));
  }
  ad::Tape t2;
  EXPECT_NE(restorationLoss(t2, model, changed).value()(0, 0), base);
}

TEST(GeneratorTraining, NothingMaskedLeavesModelUntouched) {
  Rng rng(14);
  const auto cfg = tinyConfig();
  GeneratorModel model(cfg);
  RestorationBatch batch{{randomGrid(rng, 3, cfg), makeCondition(rng, Modality::Audio, 4, cfg)}};
  std::vector<MatrixXd> before;
  for (auto* p : model.parameters()) before.push_back(p->value);
  GeneratorTrainer trainer(model);
  EXPECT_EQ(trainer.trainStep(batch), 0.0);
  EXPECT_EQ(model.step(), 0);
  const auto after = model.parameters();
  for (std::size_t i = 0; i < after.size(); ++i) EXPECT_EQ(after[i]->value, before[i]) << after[i]->name;
  EXPECT_THROW(trainer.trainStep({}), Error);
}

TEST(GeneratorTraining, StepAdvancesScheduleAndMovesWeights) {
  Rng rng(15);
  auto cfg = tinyConfig();
  cfg.warmupSteps = 2;
  GeneratorModel model(cfg);
  GeneratorTrainer trainer(model);
  const auto batch = mixedBatch(rng, cfg);
  EXPECT_EQ(trainer.learningRate(), 0.0);
  trainer.trainStep(batch);
  EXPECT_EQ(model.step(), 1);
  EXPECT_DOUBLE_EQ(trainer.learningRate(), 1e-4);
  const MatrixXd head = model.outputWeight().value;
  trainer.trainStep(batch);
  EXPECT_NE(model.outputWeight().value, head);
}

TEST(MaskPlanApplication, CellMaskIsUnionOfAxes) {
  TokenGrid g(4, 3, 1);
  applyMaskPlan(g, {0, 2}, {1});
  for (int t = 0; t < 4; ++t) {
    for (int j = 0; j < 3; ++j) EXPECT_EQ(g.isMasked(t, j), t == 0 || t == 2 || j == 1);
  }
  applyMaskPlan(g, {}, {});
  EXPECT_EQ(std::accumulate(g.masked.begin(), g.masked.end(), 0), 0);
}

TEST(MaskPlanApplication, EveryStrategyHonoursRatios) {
  Rng rng(16);
  auto cfg = tinyConfig();
  GeneratorModel model(cfg);
  const auto g = randomGrid(rng, 6, cfg);
  const auto c = makeCondition(rng, Modality::Audio, 6, cfg);
  for (StrategyKind s : {StrategyKind::Attention, StrategyKind::Random, StrategyKind::Confidence, StrategyKind::Density,
                         StrategyKind::KMeans, StrategyKind::Gmm}) {
    cfg.strategy = s;
    cfg.clusters = 2;
    const auto [t, j] = chooseMasks(model, g, c, cfg, 4);
    EXPECT_EQ(t.size(), 2u) << strategyName(s);
    EXPECT_EQ(j.size(), 1u) << strategyName(s);
    EXPECT_EQ(parseStrategy(strategyName(s)), s);
  }
  EXPECT_THROW(parseStrategy("greedy"), Error);
}

TEST(Generate, CosineScheduleEndsUnmasked) {
  EXPECT_EQ(cosineMaskedCount(10, 0, 4), 10);
  EXPECT_EQ(cosineMaskedCount(10, 4, 4), 0);
  for (int r = 1; r < 10; ++r) EXPECT_LE(cosineMaskedCount(40, r, 10), cosineMaskedCount(40, r - 1, 10));
}

TEST(Generate, SingleRoundArgmaxFillsEveryCell) {
  Rng rng(17);
  const auto cfg = tinyConfig();
  GeneratorModel model(cfg);
  const auto c = makeCondition(rng, Modality::Text, 1, cfg);
  DecodeSchedule s;
  s.rounds = 1;
  const TokenGrid g = generate(model, c, 5, s);
  EXPECT_EQ(g.frames, 5);
  EXPECT_EQ(g.joints, cfg.joints);
  EXPECT_EQ(std::accumulate(g.masked.begin(), g.masked.end(), 0), 0);
  // One pass from an all-masked grid: argmax of those logits.
  TokenGrid blank(5, cfg.joints, 1);
  std::fill(blank.masked.begin(), blank.masked.end(), std::uint8_t{1});
  const MatrixXd z = model.logitsValue(blank, c);
  for (std::size_t i = 0; i < g.cells(); ++i) {
    Eigen::Index best = 0;
    z.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
    EXPECT_EQ(g.indices[i], best);
  }
  EXPECT_THROW(generate(model, c, 0, s), Error);
}

TEST(Generate, SeededSamplingIsDeterministicAndInRange) {
  Rng rng(18);
  const auto cfg = tinyConfig();
  GeneratorModel model(cfg);
  const auto c = makeCondition(rng, Modality::TextAndAudio, 6, cfg);
  DecodeSchedule s;
  s.sample = true;
  s.seed = 9;
  s.rounds = 4;
  const TokenGrid a = generate(model, c, 6, s);
  const TokenGrid b = generate(model, c, 6, s);
  EXPECT_EQ(a.indices, b.indices);
  for (int k : a.indices) {
    EXPECT_GE(k, 0);
    EXPECT_LT(k, cfg.codebookSize);
  }
}

TEST(Gen1, RoundTripsByteExactly) {
  Rng rng(19);
  auto cfg = tinyConfig();
  cfg.warmupSteps = 1;
  GeneratorModel model(cfg);
  GeneratorTrainer trainer(model);
  trainer.trainStep(mixedBatch(rng, cfg));
  trainer.trainStep(mixedBatch(rng, cfg));
  const nlohmann::json rc{{"command", "train-gen"}};
  const auto bytes = encodeGeneratorCheckpoint(model, rc);
  nlohmann::json back;
  GeneratorModel loaded = decodeGeneratorCheckpoint(bytes, &back);
  EXPECT_EQ(back, rc);
  EXPECT_EQ(loaded.step(), 2);
  EXPECT_EQ(encodeGeneratorCheckpoint(loaded, back), bytes);
  const auto g = randomGrid(rng, 3, cfg);
  const auto c = makeCondition(rng, Modality::Audio, 4, cfg);
  EXPECT_LT((loaded.logitsValue(g, c) - model.logitsValue(g, c)).cwiseAbs().maxCoeff(), 1e-4);
  auto cut = bytes;
  cut.pop_back();
  EXPECT_THROW(decodeGeneratorCheckpoint(cut), Error);
}

} // namespace
} // namespace mmk
