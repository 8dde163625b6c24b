#include "mmk/mmk.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "mmk/binio.hpp"
#include "mmk/error.hpp"
#include "mmk/experiments.hpp"
#include "mmk/rigging.hpp"
#include "mmk/run_config.hpp"

using nlohmann::json;

struct mmk_corpus {
  std::vector<mmk::CorpusRecord> records;
};

struct mmk_tokenizer {
  mmk::TokenizerModel model;
};

struct mmk_generator {
  mmk::GeneratorModel model;
};

namespace {

thread_local std::string lastError;

template <typename F>
mmk_status guard(F&& f) {
  lastError.clear();
  try {
    f();
    return MMK_OK;
  } catch (const mmk::Error& e) {
    lastError = e.what();
    return static_cast<mmk_status>(static_cast<int>(e.kind()));
  } catch (const json::exception& e) {
    lastError = std::string("malformed JSON: ") + e.what();
    return MMK_ERR_USAGE;
  } catch (const std::bad_alloc&) {
    lastError = "out of memory";
    return MMK_ERR_INTERNAL;
  } catch (const std::exception& e) {
    lastError = e.what();
    return MMK_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) mmk::throwUsage(std::string(what) + " must not be null");
}

mmk::RunConfig parseConfig(const char* text) {
  if (!text || !*text) return mmk::RunConfig{};
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    mmk::throwUsage(std::string("run config is not valid JSON: ") + e.what());
  }
  return mmk::RunConfig::fromJson(j);
}

char* dupString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** dst, const json& j) {
  if (dst) *dst = dupString(j.dump(2));
}

json logJson(const std::vector<mmk::TrainLogEntry>& log) {
  json a = json::array();
  for (const auto& e : log) {
    json row{{"step", e.step}, {"loss", e.loss}, {"lr", e.learningRate}};
    if (e.reconstruction != 0.0) row["reconstruction"] = e.reconstruction;
    a.push_back(std::move(row));
  }
  return a;
}

} // namespace

extern "C" {

const char* mmk_version(void) { return "0.1.0"; }

const char* mmk_last_error(void) { return lastError.c_str(); }

void mmk_string_free(char* s) { std::free(s); }

mmk_status mmk_run_config_normalize(const char* run_config, char** normalized) {
  return guard([&] {
    require(normalized, "output");
    *normalized = dupString(mmk::binio::canonicalDump(parseConfig(run_config).toJson()));
  });
}

mmk_status mmk_corpus_synth(const char* run_config, mmk_corpus** out) {
  return guard([&] {
    require(out, "output");
    const mmk::RunConfig rc = parseConfig(run_config);
    *out = new mmk_corpus{mmk::synthCorpus(rc.seed, rc.records, rc.shape)};
  });
}

mmk_status mmk_corpus_load(const char* path, mmk_corpus** out) {
  return guard([&] {
    require(path, "path");
    require(out, "output");
    *out = new mmk_corpus{mmk::loadCorpus(path)};
  });
}

mmk_status mmk_corpus_save(const mmk_corpus* corpus, const char* path, const char* run_config) {
  return guard([&] {
    require(corpus, "corpus");
    require(path, "path");
    mmk::saveCorpus(path, corpus->records, parseConfig(run_config).toJson());
  });
}

size_t mmk_corpus_size(const mmk_corpus* corpus) { return corpus ? corpus->records.size() : 0; }

void mmk_corpus_free(mmk_corpus* corpus) { delete corpus; }

mmk_status mmk_tokenizer_train(const mmk_corpus* corpus, const char* run_config, mmk_tokenizer** out, char** log) {
  return guard([&] {
    require(corpus, "corpus");
    require(out, "output");
    const mmk::RunConfig rc = parseConfig(run_config);
    auto trained = mmk::trainTokenizer(corpus->records, rc.tokenizerConfig());
    const json l = logJson(trained.log);
    *out = new mmk_tokenizer{std::move(trained.model)};
    emit(log, l);
  });
}

mmk_status mmk_tokenizer_load(const char* path, mmk_tokenizer** out) {
  return guard([&] {
    require(path, "path");
    require(out, "output");
    *out = new mmk_tokenizer{mmk::decodeTokenizerCheckpoint(mmk::binio::readFile(path))};
  });
}

mmk_status mmk_tokenizer_save(const mmk_tokenizer* tokenizer, const char* path, const char* run_config) {
  return guard([&] {
    require(tokenizer, "tokenizer");
    require(path, "path");
    mmk::binio::writeFile(path, mmk::encodeTokenizerCheckpoint(tokenizer->model, parseConfig(run_config).toJson()));
  });
}

void mmk_tokenizer_free(mmk_tokenizer* tokenizer) { delete tokenizer; }

mmk_status mmk_generator_train(const mmk_corpus* corpus, const mmk_tokenizer* tokenizer, const char* run_config,
                               mmk_generator** out, char** log) {
  return guard([&] {
    require(corpus, "corpus");
    require(tokenizer, "tokenizer");
    require(out, "output");
    const mmk::RunConfig rc = parseConfig(run_config);
    const auto data = mmk::tokenizeCorpus(tokenizer->model, corpus->records);
    auto trained = mmk::trainGenerator(data, mmk::generatorConfigFor(rc, tokenizer->model.codebookSize(), data));
    json l = logJson(trained.log);
    const double acc = mmk::heldOutRestorationAccuracy(trained.model, data, rc.alphaTemporal, rc.alphaSpatial, rc.seed + 1);
    *out = new mmk_generator{std::move(trained.model)};
    emit(log, json{{"steps", std::move(l)}, {"restoration_accuracy", acc}});
  });
}

mmk_status mmk_generator_load(const char* path, mmk_generator** out) {
  return guard([&] {
    require(path, "path");
    require(out, "output");
    *out = new mmk_generator{mmk::decodeGeneratorCheckpoint(mmk::binio::readFile(path))};
  });
}

mmk_status mmk_generator_save(const mmk_generator* generator, const char* path, const char* run_config) {
  return guard([&] {
    require(generator, "generator");
    require(path, "path");
    mmk::binio::writeFile(path, mmk::encodeGeneratorCheckpoint(generator->model, parseConfig(run_config).toJson()));
  });
}

void mmk_generator_free(mmk_generator* generator) { delete generator; }

mmk_status mmk_generate(mmk_generator* generator, const mmk_tokenizer* tokenizer, const mmk_corpus* conditions,
                        const char* run_config, mmk_corpus** out) {
  return guard([&] {
    require(generator, "generator");
    require(tokenizer, "tokenizer");
    require(conditions, "conditions");
    require(out, "output");
    const mmk::RunConfig rc = parseConfig(run_config);
    *out = new mmk_corpus{
        mmk::generateCorpus(generator->model, tokenizer->model, conditions->records, rc.decodeSchedule())};
  });
}

mmk_status mmk_evaluate(const mmk_corpus* real, const mmk_corpus* generated, const char* run_config, char** report) {
  return guard([&] {
    require(real, "real corpus");
    require(generated, "generated corpus");
    require(report, "output");
    const mmk::RunConfig rc = parseConfig(run_config);
    json r = mmk::evaluateCorpora(real->records, generated->records, mmk::EvalOptions::from(rc));
    r["run_config"] = rc.toJson();
    emit(report, r);
  });
}

mmk_status mmk_mask_inspect(const mmk_corpus* corpus, const char* run_config, char** report) {
  return guard([&] {
    require(corpus, "corpus");
    require(report, "output");
    const mmk::RunConfig rc = parseConfig(run_config);
    json r = mmk::inspectMasks(corpus->records, rc.alphaTemporal, rc.alphaSpatial, rc.scoringWidth, rc.seed);
    r["run_config"] = rc.toJson();
    emit(report, r);
  });
}

mmk_status mmk_ratio_grid(const mmk_corpus* corpus, const mmk_tokenizer* tokenizer, const char* run_config,
                          const double* alphas, size_t n_alphas, char** report) {
  return guard([&] {
    require(corpus, "corpus");
    require(tokenizer, "tokenizer");
    require(alphas, "alphas");
    require(report, "output");
    const mmk::RunConfig rc = parseConfig(run_config);
    emit(report, mmk::runRatioGrid(corpus->records, tokenizer->model, rc, std::span<const double>(alphas, n_alphas)));
  });
}

mmk_status mmk_select_rig(const char* directory, const char* run_config, char** report) {
  return guard([&] {
    require(directory, "directory");
    require(report, "output");
    const mmk::RunConfig rc = parseConfig(run_config);
    const auto candidates = mmk::loadRigDirectory(directory);
    if (candidates.empty()) mmk::throwData(std::string("no .rig candidates in ") + directory);
    json r = mmk::selectOptimal(candidates, rc.epsLateral).toJson();
    r["run_config"] = rc.toJson();
    emit(report, r);
  });
}

mmk_status mmk_rig_write(const char* path, const char* id, const float* points, size_t n_points,
                         const float* weights, size_t n_joints) {
  return guard([&] {
    require(path, "path");
    require(id, "id");
    require(points, "points");
    require(weights, "weights");
    mmk::RiggedCandidate c;
    c.id = id;
    const auto N = static_cast<Eigen::Index>(n_points);
    const auto J = static_cast<Eigen::Index>(n_joints);
    c.points.resize(N, 3);
    c.weights.resize(N, J);
    for (Eigen::Index i = 0; i < N; ++i) {
      for (Eigen::Index k = 0; k < 3; ++k) c.points(i, k) = points[i * 3 + k];
      for (Eigen::Index k = 0; k < J; ++k) c.weights(i, k) = weights[i * J + k];
    }
    c.validate();
    mmk::binio::writeFile(path, mmk::encodeRig(c));
  });
}

} // extern "C"
