#include "mmk/run_config.hpp"

#include "mmk/error.hpp"

namespace mmk {

using nlohmann::json;

void RunConfig::validate() const {
  auto ratio = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throwUsage(std::string(name) + " must lie in [0, 1]");
  };
  auto positive = [](long v, const char* name) {
    if (v < 1) throwUsage(std::string(name) + " must be positive");
  };
  ratio(alphaTemporal, "alpha_t");
  ratio(alphaSpatial, "alpha_s");
  positive(clusters, "clusters");
  positive(tatLayers, "tat_layers");
  positive(satLayers, "sat_layers");
  positive(dModel, "d_model");
  positive(codebook - 1, "codebook - 1");
  positive(codeDim, "code_dim");
  positive(scale, "scale");
  positive(rounds, "rounds");
  positive(steps, "steps");
  positive(batchSize, "batch_size");
  positive(records, "n");
  positive(pool, "pool");
  positive(diversityPairs, "diversity_pairs");
  positive(scoringWidth, "scoring_width");
  positive(shape.frames, "frames");
  positive(shape.joints, "joints");
  positive(shape.featureDim, "feature_dim");
  positive(shape.textDim, "text_dim");
  positive(shape.audioDim, "audio_dim");
  if (warmupSteps < 0) throwUsage("warmup_steps must be non-negative");
  if (!(peakLearningRate >= 0.0)) throwUsage("peak_lr must be non-negative");
  if (!(sigmaBeatsFrames > 0.0)) throwUsage("sigma_beats must be positive");
  if (!(epsLateral > 0.0)) throwUsage("eps_lateral must be positive");
  if (!(temperature > 0.0)) throwUsage("temperature must be positive");
  if (!(shape.fps > 0.0)) throwUsage("fps must be positive");
}

json RunConfig::toJson() const {
  return json{{"command", command},
              {"seed", seed},
              {"alpha_t", alphaTemporal},
              {"alpha_s", alphaSpatial},
              {"strategy", strategyName(strategy)},
              {"clusters", clusters},
              {"tat_layers", tatLayers},
              {"sat_layers", satLayers},
              {"d_model", dModel},
              {"codebook", codebook},
              {"code_dim", codeDim},
              {"scale", scale},
              {"rounds", rounds},
              {"sample", sample},
              {"temperature", temperature},
              {"steps", steps},
              {"batch_size", batchSize},
              {"peak_lr", peakLearningRate},
              {"warmup_steps", warmupSteps},
              {"n", records},
              {"shape", shape.toJson()},
              {"sigma_beats", sigmaBeatsFrames},
              {"eps_lateral", epsLateral},
              {"pool", pool},
              {"full_pairs", fullPairs},
              {"diversity_pairs", diversityPairs},
              {"scoring_width", scoringWidth},
              {"paths", paths}};
}

RunConfig RunConfig::fromJson(const json& j) {
  if (!j.is_object()) throwUsage("run config must be a JSON object");
  RunConfig c;
  try {
    c.command = j.value("command", c.command);
    c.seed = j.value("seed", c.seed);
    c.alphaTemporal = j.value("alpha_t", c.alphaTemporal);
    c.alphaSpatial = j.value("alpha_s", c.alphaSpatial);
    c.strategy = parseStrategy(j.value("strategy", std::string(strategyName(c.strategy))));
    c.clusters = j.value("clusters", c.clusters);
    c.tatLayers = j.value("tat_layers", c.tatLayers);
    c.satLayers = j.value("sat_layers", c.satLayers);
    c.dModel = j.value("d_model", c.dModel);
    c.codebook = j.value("codebook", c.codebook);
    c.codeDim = j.value("code_dim", c.codeDim);
    c.scale = j.value("scale", c.scale);
    c.rounds = j.value("rounds", c.rounds);
    c.sample = j.value("sample", c.sample);
    c.temperature = j.value("temperature", c.temperature);
    c.steps = j.value("steps", c.steps);
    c.batchSize = j.value("batch_size", c.batchSize);
    c.peakLearningRate = j.value("peak_lr", c.peakLearningRate);
    c.warmupSteps = j.value("warmup_steps", c.warmupSteps);
    c.records = j.value("n", c.records);
    if (j.contains("shape")) c.shape = ShapeSpec::fromJson(j["shape"]);
    c.sigmaBeatsFrames = j.value("sigma_beats", c.sigmaBeatsFrames);
    c.epsLateral = j.value("eps_lateral", c.epsLateral);
    c.pool = j.value("pool", c.pool);
    c.fullPairs = j.value("full_pairs", c.fullPairs);
    c.diversityPairs = j.value("diversity_pairs", c.diversityPairs);
    c.scoringWidth = j.value("scoring_width", c.scoringWidth);
    c.paths = j.value("paths", c.paths);
  } catch (const json::exception& e) {
    throwUsage(std::string("invalid run config: ") + e.what());
  }
  c.validate();
  return c;
}

TokenizerConfig RunConfig::tokenizerConfig() const {
  TokenizerConfig t;
  t.codebookSize = codebook;
  t.codeDim = codeDim;
  t.scale = scale;
  t.peakLearningRate = peakLearningRate;
  t.warmupSteps = warmupSteps;
  t.steps = steps;
  t.batchSize = batchSize;
  t.seed = seed;
  return t;
}

GeneratorConfig RunConfig::generatorConfig(int codebookSize, int textDim, int audioDim, int joints,
                                           int maxFrames) const {
  GeneratorConfig g;
  g.dModel = dModel;
  g.ffHidden = 2 * dModel;
  g.tatLayers = tatLayers;
  g.satLayers = satLayers;
  g.codebookSize = codebookSize;
  g.textDim = textDim;
  g.audioDim = audioDim;
  g.joints = joints;
  g.maxFrames = maxFrames;
  g.seed = seed;
  g.alphaTemporal = alphaTemporal;
  g.alphaSpatial = alphaSpatial;
  g.strategy = strategy;
  g.clusters = clusters;
  g.peakLearningRate = peakLearningRate;
  g.warmupSteps = warmupSteps;
  g.steps = steps;
  g.batchSize = batchSize;
  return g;
}

DecodeSchedule RunConfig::decodeSchedule() const {
  return DecodeSchedule{rounds, sample, temperature, seed};
}

} // namespace mmk
