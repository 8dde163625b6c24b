// Batch front end over the mmk C API.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmk/mmk.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Failure {
  int code;
  std::string message;
};

const char* kindName(int code) {
  switch (code) {
    case MMK_ERR_USAGE: return "usage";
    case MMK_ERR_DATA: return "data";
    case MMK_ERR_NUMERIC: return "numeric";
    default: return "internal";
  }
}

int report(const Failure& f) {
  std::cerr << json{{"error", kindName(f.code)}, {"code", f.code}, {"message", f.message}}.dump() << '\n';
  return f.code;
}

void check(mmk_status s) {
  if (s != MMK_OK) throw Failure{static_cast<int>(s), mmk_last_error()};
}

// Owns a string returned by the library.
struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { mmk_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  ~Handle() { Free(p); }
};
using Corpus = Handle<mmk_corpus, mmk_corpus_free>;
using Tokenizer = Handle<mmk_tokenizer, mmk_tokenizer_free>;
using Generator = Handle<mmk_generator, mmk_generator_free>;

struct Options {
  std::optional<std::uint64_t> seed;
  std::string corpus, out, tokenizer, generator, generated, candidates;
  std::optional<double> alphaT, alphaS, sigmaBeats, epsLateral, peakLr, temperature;
  std::optional<std::string> strategy, modality;
  std::optional<int> tatLayers, satLayers, codebook, codeDim, scale, rounds, pool, n, steps, batch, dModel, clusters,
      frames, joints, warmup, scoringWidth;
  bool fullPairs = false;
  bool sample = false;
  std::vector<double> alphas{0.15, 0.30, 0.50};
};

template <typename T>
void put(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

// The run config of one command: explicit flags over library defaults, then
// normalized by the library so every artifact echoes the complete config.
std::string runConfig(const std::string& command, const Options& o, const json& paths) {
  json j{{"command", command}, {"paths", paths}};
  put(j, "seed", o.seed);
  put(j, "alpha_t", o.alphaT);
  put(j, "alpha_s", o.alphaS);
  put(j, "strategy", o.strategy);
  put(j, "clusters", o.clusters);
  put(j, "tat_layers", o.tatLayers);
  put(j, "sat_layers", o.satLayers);
  put(j, "d_model", o.dModel);
  put(j, "codebook", o.codebook);
  put(j, "code_dim", o.codeDim);
  put(j, "scale", o.scale);
  put(j, "rounds", o.rounds);
  put(j, "temperature", o.temperature);
  put(j, "steps", o.steps);
  put(j, "batch_size", o.batch);
  put(j, "peak_lr", o.peakLr);
  put(j, "warmup_steps", o.warmup);
  put(j, "n", o.n);
  put(j, "sigma_beats", o.sigmaBeats);
  put(j, "eps_lateral", o.epsLateral);
  put(j, "pool", o.pool);
  put(j, "scoring_width", o.scoringWidth);
  if (o.sample) j["sample"] = true;
  if (o.fullPairs) j["full_pairs"] = true;
  if (o.frames || o.joints || o.modality) {
    json shape = json::object();
    put(shape, "frames", o.frames);
    put(shape, "joints", o.joints);
    put(shape, "modality", o.modality);
    j["shape"] = shape;
  }
  OwnedString normalized;
  check(mmk_run_config_normalize(j.dump().c_str(), &normalized.p));
  return normalized.str();
}

fs::path outDir(const Options& o) {
  if (o.out.empty()) throw Failure{MMK_ERR_USAGE, "--out is required"};
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw Failure{MMK_ERR_USAGE, "cannot create output directory " + o.out + ": " + ec.message()};
  return fs::path(o.out);
}

void needFile(const std::string& path, const char* flag) {
  if (path.empty()) throw Failure{MMK_ERR_USAGE, std::string(flag) + " is required"};
  if (!fs::exists(path)) throw Failure{MMK_ERR_DATA, std::string(flag) + " " + path + " does not exist"};
}

void writeText(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text << '\n';
  if (!f) throw Failure{MMK_ERR_DATA, "cannot write " + path.string()};
}

// Parses a library-produced JSON string and attaches the run config.
std::string withConfig(const std::string& body, const std::string& config) {
  json j = json::parse(body);
  if (j.is_object()) {
    j["run_config"] = json::parse(config);
  } else {
    j = json{{"entries", std::move(j)}, {"run_config", json::parse(config)}};
  }
  return j.dump(2);
}

void loadCorpus(const std::string& path, const char* flag, Corpus& c) {
  needFile(path, flag);
  check(mmk_corpus_load(path.c_str(), &c.p));
}

void loadTokenizer(const Options& o, Tokenizer& t) {
  needFile(o.tokenizer, "--tokenizer");
  check(mmk_tokenizer_load(o.tokenizer.c_str(), &t.p));
}

void announce(const fs::path& p) { std::cout << p.string() << '\n'; }

void cmdSynth(const Options& o) {
  const fs::path dir = outDir(o);
  const fs::path path = dir / "corpus.mpk";
  const std::string rc = runConfig("synth", o, {{"out", path.filename().string()}});
  Corpus c;
  check(mmk_corpus_synth(rc.c_str(), &c.p));
  check(mmk_corpus_save(c.p, path.string().c_str(), rc.c_str()));
  announce(path);
}

void cmdTrainVq(const Options& o) {
  // Validate knobs before touching any file.
  const std::string rc = runConfig("train-vq", o, {{"corpus", o.corpus}, {"out", "tokenizer.tkz"}});
  Corpus c;
  loadCorpus(o.corpus, "--corpus", c);
  const fs::path dir = outDir(o);
  const fs::path model = dir / "tokenizer.tkz";
  Tokenizer t;
  OwnedString log;
  check(mmk_tokenizer_train(c.p, rc.c_str(), &t.p, &log.p));
  check(mmk_tokenizer_save(t.p, model.string().c_str(), rc.c_str()));
  writeText(dir / "train_vq_log.json", withConfig(log.str(), rc));
  announce(model);
}

void cmdTrainGen(const Options& o) {
  const std::string rc =
      runConfig("train-gen", o, {{"corpus", o.corpus}, {"tokenizer", o.tokenizer}, {"out", "generator.gen"}});
  Corpus c;
  loadCorpus(o.corpus, "--corpus", c);
  Tokenizer t;
  loadTokenizer(o, t);
  const fs::path dir = outDir(o);
  const fs::path model = dir / "generator.gen";
  Generator g;
  OwnedString log;
  check(mmk_generator_train(c.p, t.p, rc.c_str(), &g.p, &log.p));
  check(mmk_generator_save(g.p, model.string().c_str(), rc.c_str()));
  writeText(dir / "train_gen_log.json", withConfig(log.str(), rc));
  announce(model);
}

void cmdGenerate(const Options& o) {
  const std::string rc = runConfig(
      "generate", o,
      {{"corpus", o.corpus}, {"tokenizer", o.tokenizer}, {"generator", o.generator}, {"out", "generated.mpk"}});
  Corpus c;
  loadCorpus(o.corpus, "--corpus", c);
  Tokenizer t;
  loadTokenizer(o, t);
  needFile(o.generator, "--generator");
  Generator g;
  check(mmk_generator_load(o.generator.c_str(), &g.p));
  const fs::path dir = outDir(o);
  const fs::path path = dir / "generated.mpk";
  Corpus out;
  check(mmk_generate(g.p, t.p, c.p, rc.c_str(), &out.p));
  check(mmk_corpus_save(out.p, path.string().c_str(), rc.c_str()));
  announce(path);
}

void cmdEvaluate(const Options& o) {
  const std::string rc = runConfig(
      "evaluate", o,
      {{"corpus", o.corpus}, {"generated", o.generated.empty() ? o.corpus : o.generated}, {"out", "evaluation.json"}});
  Corpus real;
  loadCorpus(o.corpus, "--corpus", real);
  Corpus generated;
  if (!o.generated.empty()) loadCorpus(o.generated, "--generated", generated);
  const fs::path dir = outDir(o);
  const fs::path path = dir / "evaluation.json";
  OwnedString r;
  check(mmk_evaluate(real.p, generated.p ? generated.p : real.p, rc.c_str(), &r.p));
  writeText(path, r.str());
  announce(path);
}

void cmdMaskInspect(const Options& o) {
  const std::string rc = runConfig("mask-inspect", o, {{"corpus", o.corpus}, {"out", "mask_inspect.json"}});
  Corpus c;
  loadCorpus(o.corpus, "--corpus", c);
  const fs::path dir = outDir(o);
  const fs::path path = dir / "mask_inspect.json";
  OwnedString r;
  check(mmk_mask_inspect(c.p, rc.c_str(), &r.p));
  writeText(path, r.str());
  announce(path);
}

void cmdSelectRig(const Options& o) {
  const std::string rc = runConfig("select-rig", o, {{"candidates", o.candidates}, {"out", "rig_selection.json"}});
  if (o.candidates.empty()) throw Failure{MMK_ERR_USAGE, "--candidates is required"};
  if (!fs::is_directory(o.candidates)) throw Failure{MMK_ERR_DATA, "--candidates " + o.candidates + " is not a directory"};
  const fs::path dir = outDir(o);
  const fs::path path = dir / "rig_selection.json";
  OwnedString r;
  check(mmk_select_rig(o.candidates.c_str(), rc.c_str(), &r.p));
  writeText(path, r.str());
  announce(path);
}

void cmdRatioGrid(const Options& o) {
  const std::string rc =
      runConfig("ratio-grid", o, {{"corpus", o.corpus}, {"tokenizer", o.tokenizer}, {"out", "ratio_grid.json"}});
  Corpus c;
  loadCorpus(o.corpus, "--corpus", c);
  Tokenizer t;
  loadTokenizer(o, t);
  const fs::path dir = outDir(o);
  const fs::path path = dir / "ratio_grid.json";
  OwnedString r;
  check(mmk_ratio_grid(c.p, t.p, rc.c_str(), o.alphas.data(), o.alphas.size(), &r.p));
  writeText(path, r.str());
  announce(path);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmk: conditional masked motion generation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mmk_version()));
  Options o;

  auto* synth = app.add_subcommand("synth", "Write a deterministic synthetic corpus");
  auto* trainVq = app.add_subcommand("train-vq", "Train the motion tokenizer");
  auto* trainGen = app.add_subcommand("train-gen", "Train the masked generator");
  auto* generate = app.add_subcommand("generate", "Generate one motion per conditioning record");
  auto* evaluate = app.add_subcommand("evaluate", "Metric report of generated against real motion");
  auto* maskInspect = app.add_subcommand("mask-inspect", "Attention maps and mask plans per record");
  auto* selectRig = app.add_subcommand("select-rig", "Select the best rigged candidate of a directory");
  auto* ratioGrid = app.add_subcommand("ratio-grid", "Train and evaluate over a grid of mask ratios");

  for (auto* s : {synth, trainVq, trainGen, generate, evaluate, maskInspect, selectRig, ratioGrid}) {
    s->add_option("--seed", o.seed, "Random seed");
    s->add_option("--out", o.out, "Output directory")->required();
  }
  for (auto* s : {trainVq, trainGen, generate, evaluate, maskInspect, ratioGrid}) {
    s->add_option("--corpus", o.corpus, "MotionPack corpus")->required();
  }
  for (auto* s : {trainGen, generate, ratioGrid}) {
    s->add_option("--tokenizer", o.tokenizer, "Tokenizer checkpoint")->required();
  }
  for (auto* s : {trainGen, maskInspect, ratioGrid}) {
    s->add_option("--alpha-t", o.alphaT, "Temporal mask ratio");
    s->add_option("--alpha-s", o.alphaS, "Spatial mask ratio");
  }
  for (auto* s : {trainVq, trainGen, ratioGrid}) {
    s->add_option("--steps", o.steps, "Training steps");
    s->add_option("--batch-size", o.batch, "Records per step");
    s->add_option("--peak-lr", o.peakLr, "Peak learning rate");
    s->add_option("--warmup-steps", o.warmup, "Linear warm-up steps");
  }
  for (auto* s : {trainGen, ratioGrid}) {
    s->add_option("--strategy", o.strategy, "Masking strategy")
        ->check(CLI::IsMember({"attention", "random", "confidence", "density", "kmeans", "gmm"}));
    s->add_option("--clusters", o.clusters, "Clusters for kmeans/gmm masking");
    s->add_option("--tat-layers", o.tatLayers, "Temporal transformer layers");
    s->add_option("--sat-layers", o.satLayers, "Spatial transformer layers");
    s->add_option("--d-model", o.dModel, "Model width");
  }
  for (auto* s : {generate, ratioGrid}) {
    s->add_option("--rounds", o.rounds, "Decoding rounds");
    s->add_flag("--sample", o.sample, "Sample tokens instead of taking the argmax");
    s->add_option("--temperature", o.temperature, "Sampling temperature");
  }
  for (auto* s : {evaluate, ratioGrid}) {
    s->add_option("--sigma-beats", o.sigmaBeats, "Beat alignment kernel width in frames");
    s->add_option("--pool", o.pool, "R-precision pool size");
    s->add_flag("--full-pairs", o.fullPairs, "Exact all-pairs diversity");
  }
  synth->add_option("--n", o.n, "Number of records");
  synth->add_option("--frames", o.frames, "Frames per record");
  synth->add_option("--joints", o.joints, "Joints per frame");
  synth->add_option("--modality", o.modality, "Fixed condition modality")
      ->check(CLI::IsMember({"text", "audio", "text_audio", "mixed"}));
  trainVq->add_option("--codebook", o.codebook, "Codebook size");
  trainVq->add_option("--code-dim", o.codeDim, "Code width");
  trainVq->add_option("--scale", o.scale, "Temporal downsampling factor");
  generate->add_option("--generator", o.generator, "Generator checkpoint")->required();
  evaluate->add_option("--generated", o.generated, "Generated MotionPack (defaults to --corpus)");
  maskInspect->add_option("--scoring-width", o.scoringWidth, "Width of the scoring projection");
  selectRig->add_option("--candidates", o.candidates, "Directory of .rig candidates")->required();
  selectRig->add_option("--eps-lateral", o.epsLateral, "Lateral centroid tolerance");
  ratioGrid->add_option("--alphas", o.alphas, "Ratios of the grid axes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report({MMK_ERR_USAGE, e.what()});
  }

  try {
    if (*synth) cmdSynth(o);
    else if (*trainVq) cmdTrainVq(o);
    else if (*trainGen) cmdTrainGen(o);
    else if (*generate) cmdGenerate(o);
    else if (*evaluate) cmdEvaluate(o);
    else if (*maskInspect) cmdMaskInspect(o);
    else if (*selectRig) cmdSelectRig(o);
    else if (*ratioGrid) cmdRatioGrid(o);
  } catch (const Failure& f) {
    return report(f);
  } catch (const std::exception& e) {
    return report({MMK_ERR_INTERNAL, e.what()});
  }
  return 0;
}
