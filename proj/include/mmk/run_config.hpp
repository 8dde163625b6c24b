#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "mmk/generator.hpp"
#include "mmk/motion_data.hpp"
#include "mmk/tokenizer.hpp"

namespace mmk {

/// Every experiment knob a command may read. Serializes to canonical JSON
/// that is echoed into each artifact; fromJson(toJson()) reproduces it.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 0;

  // masking
  double alphaTemporal = kDefaultMaskRatio;
  double alphaSpatial = kDefaultMaskRatio;
  StrategyKind strategy = StrategyKind::Attention;
  int clusters = 3;

  // model
  int tatLayers = 2;
  int satLayers = 2;
  int dModel = 32;
  int codebook = 64;
  int codeDim = 32;
  int scale = 4;
  int rounds = 10;
  bool sample = false;
  double temperature = 1.0;

  // training
  int steps = 500;
  int batchSize = 64;
  double peakLearningRate = 2e-4;
  long warmupSteps = 2000;

  // corpus synthesis
  int records = 64;
  ShapeSpec shape;

  // metrics / rigging
  double sigmaBeatsFrames = 3.0;
  double epsLateral = 0.1;
  int pool = 32;
  bool fullPairs = false;
  int diversityPairs = 200;
  int scoringWidth = 32;

  std::map<std::string, std::string> paths;

  // Throws Error(Usage) for ratios outside [0, 1] or non-positive counts.
  void validate() const;

  nlohmann::json toJson() const;
  static RunConfig fromJson(const nlohmann::json& j);

  TokenizerConfig tokenizerConfig() const;
  GeneratorConfig generatorConfig(int codebookSize, int textDim, int audioDim, int joints, int maxFrames) const;
  DecodeSchedule decodeSchedule() const;
};

} // namespace mmk
