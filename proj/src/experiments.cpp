#include "mmk/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "mmk/condition_codec.hpp"
#include "mmk/error.hpp"
#include "mmk/parallel.hpp"

namespace mmk {

using nlohmann::json;

EvalOptions EvalOptions::from(const RunConfig& c) {
  EvalOptions o;
  o.sigmaBeatsFrames = c.sigmaBeatsFrames;
  o.pool = c.pool;
  o.fullPairs = c.fullPairs;
  o.diversityPairs = c.diversityPairs;
  o.seed = c.seed;
  return o;
}

namespace {

struct RecordFeatures {
  Eigen::VectorXd kinetic;
  Eigen::VectorXd geometric;
  Eigen::RowVectorXd embed;
  double bas = std::numeric_limits<double>::quiet_NaN();
};

std::vector<RecordFeatures> featuresOf(std::span<const CorpusRecord> records, const EvalOptions& opt) {
  const MotionStubEmbedder embedder(opt.embedDim);
  std::vector<RecordFeatures> out(records.size());
  parallelFor(records.size(), [&](std::size_t i) {
    const CorpusRecord& r = records[i];
    RecordFeatures& f = out[i];
    f.kinetic = kineticFeatures(r.motion);
    f.geometric = geometricFeatures(r.motion);
    f.embed = embedder.embed(r.motion);
    if (r.condition.modality != Modality::Text && !r.condition.beatTimes.empty() && r.motion.frames() >= 3) {
      f.bas = beatAlignScore(r.condition.beatTimes, r.motion, opt.sigmaBeatsFrames / r.motion.fps());
    }
  });
  return out;
}

FeatureSet collect(const std::vector<RecordFeatures>& f, Eigen::VectorXd RecordFeatures::*member, FeatureKind kind) {
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(f.size());
  for (const auto& r : f) rows.push_back(r.*member);
  return stackFeatures(rows, kind);
}

void checkCompatible(std::span<const CorpusRecord> records, int joints, int featureDim) {
  for (const auto& r : records) {
    if (r.motion.joints() != joints || r.motion.featureDim() != featureDim) {
      throwData("record " + r.id + " has a skeleton shape that differs from the rest of the evaluation");
    }
  }
}

json numberOrNull(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

} // namespace

json evaluateCorpora(std::span<const CorpusRecord> real, std::span<const CorpusRecord> generated,
                     const EvalOptions& opt) {
  if (real.empty() || generated.empty()) throwUsage("evaluation needs non-empty real and generated sets");
  if (opt.pool < 1 || opt.diversityPairs < 1 || opt.embedDim < 1 || !(opt.sigmaBeatsFrames > 0.0)) {
    throwUsage("evaluation options must be positive");
  }
  const int J = real.front().motion.joints();
  const int D = real.front().motion.featureDim();
  checkCompatible(real, J, D);
  checkCompatible(generated, J, D);

  const auto fr = featuresOf(real, opt);
  const auto fg = featuresOf(generated, opt);

  json report;
  report["n_real"] = real.size();
  report["n_generated"] = generated.size();

  const bool fidOk = fr.size() >= 2 && fg.size() >= 2;
  report["fid_k"] = fidOk ? json(fid(collect(fr, &RecordFeatures::kinetic, FeatureKind::Kinetic),
                                     collect(fg, &RecordFeatures::kinetic, FeatureKind::Kinetic)))
                          : json(nullptr);
  report["fid_g"] = fidOk ? json(fid(collect(fr, &RecordFeatures::geometric, FeatureKind::Geometric),
                                     collect(fg, &RecordFeatures::geometric, FeatureKind::Geometric)))
                          : json(nullptr);

  const bool divOk = fg.size() >= 2;
  report["div_k"] = divOk ? json(diversity(collect(fg, &RecordFeatures::kinetic, FeatureKind::Kinetic),
                                           opt.diversityPairs, opt.seed, opt.fullPairs))
                          : json(nullptr);
  report["div_g"] = divOk ? json(diversity(collect(fg, &RecordFeatures::geometric, FeatureKind::Geometric),
                                           opt.diversityPairs, opt.seed, opt.fullPairs))
                          : json(nullptr);

  double basSum = 0.0;
  int basCount = 0;
  for (const auto& f : fg) {
    if (std::isfinite(f.bas)) {
      basSum += f.bas;
      ++basCount;
    }
  }
  report["bas"] = basCount > 0 ? json(basSum / basCount) : json(nullptr);
  report["bas_records"] = basCount;

  // Text-side metrics run on generated records that carry a caption.
  const TextStubEmbedder text(opt.embedDim);
  std::vector<std::size_t> captioned;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    if (generated[i].caption) captioned.push_back(i);
  }
  const auto n = static_cast<Eigen::Index>(captioned.size());
  Eigen::MatrixXd me(n, opt.embedDim);
  Eigen::MatrixXd te(n, opt.embedDim);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto i = captioned[static_cast<std::size_t>(r)];
    me.row(r) = fg[i].embed;
    te.row(r) = text.embed(*generated[i].caption);
  }
  report["mm_dist"] = n > 0 ? json(multimodalDistance(me, te)) : json(nullptr);
  const int pool = static_cast<int>(std::min<Eigen::Index>(opt.pool, n));
  report["r_precision_pool"] = pool;
  for (int k = 1; k <= 3; ++k) {
    report["r_precision@" + std::to_string(k)] = pool >= k && pool >= 2 ? json(rPrecision(me, te, k, pool)) : json(nullptr);
  }

  std::map<std::string, std::vector<Eigen::RowVectorXd>> byCaption;
  for (const auto i : captioned) byCaption[*generated[i].caption].push_back(fg[i].embed);
  std::vector<Eigen::MatrixXd> groups;
  for (const auto& [caption, rows] : byCaption) {
    if (rows.size() < 2) continue;
    Eigen::MatrixXd g(static_cast<Eigen::Index>(rows.size()), opt.embedDim);
    for (std::size_t r = 0; r < rows.size(); ++r) g.row(static_cast<Eigen::Index>(r)) = rows[r];
    groups.push_back(std::move(g));
  }
  report["mmodality"] = groups.empty() ? json(nullptr) : json(mmodality(groups));
  report["mmodality_groups"] = groups.size();

  for (const char* key : {"fid_k", "fid_g", "div_k", "div_g", "bas", "mm_dist"}) {
    if (report[key].is_number() && !std::isfinite(report[key].get<double>())) {
      throwNumeric(std::string("metric ") + key + " is not finite");
    }
  }
  return report;
}

json inspectMasks(std::span<const CorpusRecord> corpus, double alphaTemporal, double alphaSpatial, int width,
                  std::uint64_t seed) {
  if (corpus.empty()) throwUsage("mask inspection needs at least one record");
  const int D = corpus.front().motion.featureDim();
  int Ct = 1;
  int Ca = 1;
  for (const auto& r : corpus) {
    if (r.condition.textDim() > 0) Ct = r.condition.textDim();
    if (r.condition.audioDim() > 0) Ca = r.condition.audioDim();
  }
  const ScoringProjection proj = ScoringProjection::random(D, Ct, Ca, width, seed);
  json records = json::array();
  for (const auto& r : corpus) {
    try {
      const MaskPlan plan = planMasks(proj.embed(r.motion), proj.embed(r.condition), alphaTemporal, alphaSpatial);
      records.push_back({{"id", r.id},
                         {"modality", modalityName(r.condition.modality)},
                         {"frames", r.motion.frames()},
                         {"joints", r.motion.joints()},
                         {"plan", plan.toJson(true)}});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Data) throw;
      throwData("record " + r.id + ": " + e.what());
    }
  }
  return json{{"records", std::move(records)}, {"width", width}};
}

GeneratorConfig generatorConfigFor(const RunConfig& rc, int codebookSize, std::span<const TokenizedRecord> data) {
  if (data.empty()) throwUsage("generator training needs data");
  int maxTokens = 1;
  int textDim = 1;
  int audioDim = 1;
  const int joints = data.front().grid.joints;
  for (const auto& d : data) {
    if (d.grid.joints != joints) throwData("token grids disagree on the joint count");
    maxTokens = std::max(maxTokens, d.grid.frames);
    if (d.condition.textDim() > 0) textDim = d.condition.textDim();
    if (d.condition.audioDim() > 0) audioDim = d.condition.audioDim();
  }
  return rc.generatorConfig(codebookSize, textDim, audioDim, joints, maxTokens);
}

std::vector<CorpusRecord> generateCorpus(GeneratorModel& model, const TokenizerModel& tokenizer,
                                         std::span<const CorpusRecord> conditions, const DecodeSchedule& schedule) {
  std::vector<CorpusRecord> out;
  out.reserve(conditions.size());
  const int scale = tokenizer.scale();
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    const CorpusRecord& r = conditions[i];
    if (r.motion.joints() != model.config().joints) {
      throwData("record " + r.id + " has " + std::to_string(r.motion.joints()) + " joints; generator expects " +
                std::to_string(model.config().joints));
    }
    const int T = r.motion.frames();
    const int tokens = (T + scale - 1) / scale;
    DecodeSchedule s = schedule;
    s.seed = schedule.seed + i;
    TokenGrid g = generate(model, r.condition, tokens, s, scale, r.motion.fps());
    g.padded = tokens * scale - T;
    out.push_back({"gen_" + r.id, tokenizer.decode(g), r.condition, r.caption});
  }
  return out;
}

double heldOutRestorationAccuracy(GeneratorModel& model, std::span<const TokenizedRecord> data, double alphaTemporal,
                                  double alphaSpatial, std::uint64_t seed) {
  RestorationBatch batch;
  batch.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    RestorationItem item{data[i].grid, data[i].condition};
    const std::uint64_t s = seed * 2654435761ULL + i * 97ULL;
    applyMaskPlan(item.grid, randomMask(item.grid.frames, alphaTemporal, s),
                  randomMask(item.grid.joints, alphaSpatial, s + 1));
    batch.push_back(std::move(item));
  }
  return restorationAccuracy(model, batch);
}

std::string gridLabel(const GridCell& c) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "T:%d%% S:%d%%", static_cast<int>(std::lround(c.alphaTemporal * 100.0)),
                static_cast<int>(std::lround(c.alphaSpatial * 100.0)));
  return buf;
}

json runRatioGrid(std::span<const CorpusRecord> corpus, const TokenizerModel& tokenizer, const RunConfig& base,
                  std::span<const double> alphas) {
  if (corpus.empty()) throwUsage("ratio grid needs a corpus");
  if (alphas.empty()) throwUsage("ratio grid needs at least one ratio");
  const auto data = tokenizeCorpus(tokenizer, corpus);
  EvalOptions opt = EvalOptions::from(base);
  const MotionStubEmbedder embedder(opt.embedDim);
  std::vector<Eigen::VectorXd> realRows;
  for (const auto& r : corpus) realRows.push_back(embedder.embed(r.motion).transpose());
  const FeatureSet realEmbeds = stackFeatures(realRows, FeatureKind::Embed);

  const GridCell defaultCell{kDefaultMaskRatio, kDefaultMaskRatio};
  json rows = json::array();
  for (const double at : alphas) {
    for (const double as : alphas) {
      RunConfig rc = base;
      rc.alphaTemporal = at;
      rc.alphaSpatial = as;
      rc.validate();
      GeneratorTraining trained = trainGenerator(data, generatorConfigFor(rc, tokenizer.codebookSize(), data));
      const double acc = heldOutRestorationAccuracy(trained.model, data, at, as, base.seed + 1);
      const auto gen = generateCorpus(trained.model, tokenizer, corpus, rc.decodeSchedule());
      const json metrics = evaluateCorpora(corpus, gen, opt);
      std::vector<Eigen::VectorXd> genRows;
      for (const auto& r : gen) genRows.push_back(embedder.embed(r.motion).transpose());
      const FeatureSet genEmbeds = stackFeatures(genRows, FeatureKind::Embed);
      const GridCell cell{at, as};
      rows.push_back({{"label", gridLabel(cell)},
                      {"alpha_t", at},
                      {"alpha_s", as},
                      {"r_precision_top1", metrics["r_precision@1"]},
                      {"r_precision_top2", metrics["r_precision@2"]},
                      {"r_precision_top3", metrics["r_precision@3"]},
                      {"fid", numberOrNull(genEmbeds.vectors.rows() >= 2 ? fid(realEmbeds, genEmbeds) : NAN)},
                      {"mm_dist", metrics["mm_dist"]},
                      {"diversity", numberOrNull(genEmbeds.vectors.rows() >= 2
                                                     ? diversity(genEmbeds, opt.diversityPairs, opt.seed, opt.fullPairs)
                                                     : NAN)},
                      {"mmodality", metrics["mmodality"]},
                      {"restoration_accuracy", acc},
                      {"default", gridLabel(cell) == gridLabel(defaultCell)}});
    }
  }
  return json{{"columns",
               {"r_precision_top1", "r_precision_top2", "r_precision_top3", "fid", "mm_dist", "diversity",
                "mmodality"}},
              {"alphas", std::vector<double>(alphas.begin(), alphas.end())},
              {"default", gridLabel(defaultCell)},
              {"rows", std::move(rows)},
              {"run_config", base.toJson()}};
}

} // namespace mmk
