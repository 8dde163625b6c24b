#include <gtest/gtest.h>

#include "mmk/error.hpp"
#include "mmk/experiments.hpp"
#include "mmk/run_config.hpp"

namespace mmk {
namespace {

using nlohmann::json;

TEST(RunConfig, DefaultsMatchTheShippedConfiguration) {
  const RunConfig rc;
  EXPECT_EQ(rc.alphaTemporal, 0.30);
  EXPECT_EQ(rc.alphaSpatial, 0.30);
  EXPECT_EQ(rc.strategy, StrategyKind::Attention);
  EXPECT_EQ(rc.tatLayers, 2);
  EXPECT_EQ(rc.satLayers, 2);
  EXPECT_EQ(rc.batchSize, 64);
  EXPECT_EQ(rc.warmupSteps, 2000);
  EXPECT_EQ(rc.peakLearningRate, 2e-4);
  EXPECT_EQ(rc.pool, 32);
  EXPECT_EQ(rc.epsLateral, 0.1);
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig rc;
  rc.command = "train-gen";
  rc.seed = 42;
  rc.alphaTemporal = 0.15;
  rc.strategy = StrategyKind::Gmm;
  rc.sample = true;
  rc.paths["corpus"] = "corpus.mpk";
  const json j = rc.toJson();
  EXPECT_EQ(RunConfig::fromJson(j).toJson(), j);
  EXPECT_EQ(j["strategy"], "gmm");
  EXPECT_EQ(j["alpha_t"], 0.15);
}

TEST(RunConfig, RejectsOutOfRangeKnobs) {
  EXPECT_THROW(RunConfig::fromJson(json{{"alpha_t", 1.5}}), Error);
  EXPECT_THROW(RunConfig::fromJson(json{{"alpha_s", -0.1}}), Error);
  EXPECT_THROW(RunConfig::fromJson(json{{"tat_layers", 0}}), Error);
  EXPECT_THROW(RunConfig::fromJson(json{{"strategy", "greedy"}}), Error);
  try {
    RunConfig::fromJson(json{{"pool", 0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Usage);
  }
}

TEST(RunConfig, DerivedConfigsCarryTheKnobs) {
  RunConfig rc;
  rc.codebook = 16;
  rc.scale = 2;
  rc.dModel = 8;
  const auto t = rc.tokenizerConfig();
  EXPECT_EQ(t.codebookSize, 16);
  EXPECT_EQ(t.scale, 2);
  const auto g = rc.generatorConfig(16, 32, 8, 6, 20);
  EXPECT_EQ(g.dModel, 8);
  EXPECT_EQ(g.ffHidden, 16);
  EXPECT_EQ(g.maxFrames, 20);
  EXPECT_EQ(g.alphaTemporal, 0.30);
  EXPECT_EQ(rc.decodeSchedule().rounds, 10);
}

TEST(Evaluate, CorpusAgainstItself) {
  const auto corpus = synthCorpus(3, 12, ShapeSpec{});
  const json r = evaluateCorpora(corpus, corpus, EvalOptions{});
  EXPECT_NEAR(r["fid_k"].get<double>(), 0.0, 1e-6);
  EXPECT_NEAR(r["fid_g"].get<double>(), 0.0, 1e-6);
  EXPECT_EQ(r["n_real"], 12);
  EXPECT_GE(r["div_k"].get<double>(), 0.0);
  for (const char* key : {"bas", "mm_dist", "mmodality", "r_precision@1", "r_precision@2", "r_precision@3"}) {
    EXPECT_TRUE(r.contains(key)) << key;
  }
  if (!r["bas"].is_null()) {
    EXPECT_GE(r["bas"].get<double>(), 0.0);
    EXPECT_LE(r["bas"].get<double>(), 1.0);
  }
}

TEST(Evaluate, TooFewRecordsGiveNullFid) {
  const auto corpus = synthCorpus(3, 1, ShapeSpec{});
  const json r = evaluateCorpora(corpus, corpus, EvalOptions{});
  EXPECT_TRUE(r["fid_k"].is_null());
}

TEST(MaskInspect, TenFramesAtThirtyPercent) {
  ShapeSpec spec;
  spec.frames = 10;
  spec.modality = Modality::Audio;
  const auto corpus = synthCorpus(1, 2, spec);
  const json r = inspectMasks(corpus, 0.3, 0.3, 16, 1);
  ASSERT_EQ(r["records"].size(), 2u);
  for (const auto& rec : r["records"]) {
    EXPECT_EQ(rec["frames"], 10);
    EXPECT_EQ(rec["plan"]["temporal_masked"].size(), 3u);
  }
  EXPECT_EQ(inspectMasks(corpus, 0.3, 0.3, 16, 1), r);
}

TEST(Generation, CorpusFollowsConditions) {
  ShapeSpec spec;
  spec.frames = 10;
  const auto corpus = synthCorpus(5, 4, spec);
  RunConfig rc;
  rc.codebook = 8;
  rc.codeDim = 4;
  rc.scale = 2;
  rc.dModel = 8;
  rc.steps = 2;
  rc.warmupSteps = 1;
  const auto tok = trainTokenizer(corpus, rc.tokenizerConfig()).model;
  const auto data = tokenizeCorpus(tok, corpus);
  auto trained = trainGenerator(data, generatorConfigFor(rc, tok.codebookSize(), data));
  DecodeSchedule s;
  s.rounds = 2;
  const auto out = generateCorpus(trained.model, tok, corpus, s);
  ASSERT_EQ(out.size(), corpus.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i].id, "gen_" + corpus[i].id);
    EXPECT_EQ(out[i].motion.frames(), corpus[i].motion.frames());
    EXPECT_EQ(out[i].condition.modality, corpus[i].condition.modality);
  }
  EXPECT_EQ(encodeMotionPack(out), encodeMotionPack(generateCorpus(trained.model, tok, corpus, s)));
  const double acc = heldOutRestorationAccuracy(trained.model, data, 0.3, 0.3, 2);
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
}

TEST(RatioGrid, Labels) {
  EXPECT_EQ(gridLabel({0.30, 0.30}), "T:30% S:30%");
  EXPECT_EQ(gridLabel({0.15, 0.50}), "T:15% S:50%");
}

} // namespace
} // namespace mmk
