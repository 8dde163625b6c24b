#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "mmk/generator.hpp"
#include "mmk/metrics.hpp"
#include "mmk/motion_data.hpp"
#include "mmk/run_config.hpp"
#include "mmk/tokenizer.hpp"

namespace mmk {

struct EvalOptions {
  double sigmaBeatsFrames = kDefaultBeatSigmaFrames;
  int pool = kDefaultRPrecisionPool;
  bool fullPairs = false;
  int diversityPairs = 200;
  int embedDim = 32;
  std::uint64_t seed = 0;

  static EvalOptions from(const RunConfig& c);
};

/// {fid_k, fid_g, div_k, div_g, bas, mm_dist, mmodality, r_precision@1..3}
/// of `generated` against `real`; metrics without enough data are null.
nlohmann::json evaluateCorpora(std::span<const CorpusRecord> real, std::span<const CorpusRecord> generated,
                               const EvalOptions& opt);

/// Attention-based mask plans of every record, scored on raw frames through
/// a seeded random projection.
nlohmann::json inspectMasks(std::span<const CorpusRecord> corpus, double alphaTemporal, double alphaSpatial,
                            int width, std::uint64_t seed);

/// Generator shape for a tokenized corpus: condition widths, joints and the
/// longest token grid come from the data, everything else from `rc`.
GeneratorConfig generatorConfigFor(const RunConfig& rc, int codebookSize, std::span<const TokenizedRecord> data);

/// Generates one motion per conditioning record, with its length and
/// condition, and decodes it through the tokenizer.
std::vector<CorpusRecord> generateCorpus(GeneratorModel& model, const TokenizerModel& tokenizer,
                                         std::span<const CorpusRecord> conditions, const DecodeSchedule& schedule);

/// Restoration accuracy under seeded random masks at the given ratios; the
/// same masks for every model evaluated with the same seed.
double heldOutRestorationAccuracy(GeneratorModel& model, std::span<const TokenizedRecord> data, double alphaTemporal,
                                  double alphaSpatial, std::uint64_t seed);

struct GridCell {
  double alphaTemporal = 0.0;
  double alphaSpatial = 0.0;
};

std::string gridLabel(const GridCell& c);

/// Trains one generator per (alpha_t, alpha_s) pair and reports the
/// text-to-motion metric columns for each.
nlohmann::json runRatioGrid(std::span<const CorpusRecord> corpus, const TokenizerModel& tokenizer,
                            const RunConfig& base, std::span<const double> alphas);

} // namespace mmk
