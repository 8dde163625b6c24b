// Acceptance run: one PASS/FAIL line per criterion, with the measured value
// and the wall time against its budget. Exit status is non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmk/binio.hpp"
#include "mmk/experiments.hpp"
#include "mmk/generator.hpp"
#include "mmk/masking.hpp"
#include "mmk/metrics.hpp"
#include "mmk/rigging.hpp"
#include "mmk/rng.hpp"
#include "mmk/run_config.hpp"
#include "mmk/tokenizer.hpp"
#include "support/grad_check.hpp"

namespace {

using namespace mmk;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool ok = true;
  std::string detail;
  std::vector<std::string> info;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

MatrixXd randomMat(Rng& rng, int r, int c) {
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
  return m;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------- 1

std::vector<int> sortOracle(const VectorXd& s, double alpha) {
  std::vector<int> idx(static_cast<std::size_t>(s.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return s(a) != s(b) ? s(a) > s(b) : a < b; });
  idx.resize(static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(s.size()) - 1e-9)));
  std::sort(idx.begin(), idx.end());
  return idx;
}

Outcome masking() {
  Outcome o;
  const double alphas[] = {0.0, 0.1, 0.15, 0.2, 0.25, 0.3, 1.0 / 3.0, 0.5, 0.7, 0.9, 1.0};
  long instances = 0;
  // Every score vector over a three-level alphabet, so ties of every shape occur.
  for (int n = 1; n <= 8; ++n) {
    int total = 1;
    for (int i = 0; i < n; ++i) total *= 3;
    for (int code = 0; code < total; ++code) {
      VectorXd s(n);
      for (int i = 0, c = code; i < n; ++i, c /= 3) s(i) = c % 3;
      for (double a : alphas) {
        const auto got = topAlphaMask(s, a);
        const int want = static_cast<int>(std::ceil(a * n - 1e-9));
        if (static_cast<int>(got.size()) != want || got != sortOracle(s, a)) {
          o.require(false, "top-alpha mismatch at n=" + std::to_string(n));
          return o;
        }
        ++instances;
      }
    }
  }
  // Baseline strategies on random token sets.
  Rng rng(1);
  long baselines = 0;
  for (int n = 1; n <= 8; ++n) {
    for (int draw = 0; draw < 20; ++draw) {
      const MatrixXd tokens = randomMat(rng, n, 4);
      VectorXd conf(n);
      for (int i = 0; i < n; ++i) conf(i) = rng.uniform();
      const int k = std::min(n, 3);
      const BaselineStrategy all[] = {RandomStrategy{static_cast<std::uint64_t>(draw)}, ConfidenceStrategy{},
                                      DensityStrategy{}, KMeansStrategy{k, 1}, GmmStrategy{k, 1}};
      for (double a : alphas) {
        for (const auto& st : all) {
          const auto mask = baselineMask(st, tokens, conf, a);
          const std::set<int> uniq(mask.begin(), mask.end());
          const bool inRange = std::all_of(mask.begin(), mask.end(), [&](int i) { return i >= 0 && i < n; });
          o.require(static_cast<int>(mask.size()) == maskCount(a, n) && uniq.size() == mask.size() && inRange,
                    "baseline cardinality at n=" + std::to_string(n));
          ++baselines;
        }
      }
    }
  }
  o.info.push_back(std::to_string(instances) + " top-alpha instances, " + std::to_string(baselines) +
                   " baseline masks");
  return o;
}

// ---------------------------------------------------------------- 2

Outcome routing() {
  Outcome o;
  Rng rng(2);
  const int T = 6, J = 4, Ta = 11, d = 8;
  const MotionEmbedding m{T, J, randomMat(rng, T * J, d)};
  auto rows = [&](Modality mod) { return mod == Modality::Text ? 1 : (mod == Modality::Audio ? Ta : Ta + 1); };
  for (Modality mod : {Modality::Text, Modality::Audio, Modality::TextAndAudio}) {
    const auto s = scoreTokens(m, ConditionEmbedding{mod, randomMat(rng, rows(mod), d)});
    const int wantRows = mod == Modality::Text ? T + 1 : rows(mod);
    const int wantCols = mod == Modality::Text ? T + 1 : T;
    o.require(s.rawMap.rows() == wantRows && s.rawMap.cols() == wantCols,
              std::string("masking map ") + modalityName(mod));
    o.require(s.temporal.size() == T && s.spatial.size() == J, "score lengths");
  }

  GeneratorConfig cfg;
  cfg.dModel = d;
  cfg.ffHidden = 16;
  cfg.codebookSize = 8;
  cfg.textDim = 5;
  cfg.audioDim = 3;
  cfg.maxFrames = T;
  cfg.joints = J;
  GeneratorModel model(cfg);
  TokenGrid g(T, J, 1);
  for (auto& k : g.indices) k = static_cast<int>(rng.below(8));
  for (Modality mod : {Modality::Text, Modality::Audio, Modality::TextAndAudio}) {
    Condition c;
    c.modality = mod;
    if (mod != Modality::Audio) c.textEmbed = randomMat(rng, 1, cfg.textDim);
    if (mod != Modality::Text) c.audioFeats = randomMat(rng, Ta, cfg.audioDim);
    ForwardTrace trace;
    model.logitsValue(g, c, &trace);
    for (const auto& layer : trace.tat) {
      for (const auto& w : layer) {
        const bool ok = mod == Modality::Text ? (w.rows() == T + 1 && w.cols() == T + 1)
                                              : (w.rows() == T && w.cols() == rows(mod));
        o.require(ok, std::string("TAT weights ") + modalityName(mod));
      }
    }
    for (const auto& layer : trace.sat) {
      for (int t = 0; t < T; ++t) {
        const auto want = spatialConditionRows(mod, rows(mod), t, T).size();
        o.require(layer[t].rows() == J && static_cast<std::size_t>(layer[t].cols()) == want,
                  std::string("SAT weights ") + modalityName(mod));
      }
    }
  }
  o.info.push_back("text TAT (T'+1)x(T'+1), audio TAT T'xT_a, fused TAT T'x(T_a+1)");
  return o;
}

// ---------------------------------------------------------------- 3

Outcome gradients() {
  Outcome o;
  Rng rng(3);
  {
    TokenizerConfig tc;
    tc.codebookSize = 8;
    tc.codeDim = 4;
    tc.scale = 2;
    tc.hidden = 8;
    TokenizerModel tok(3, tc);
    std::vector<float> v(6 * 3 * 3);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    const MatrixXd w = tok.windows(MotionSequence(6, 3, 3, 20.0, v));
    tok.initCodebookFrom(w, 1);
    TokenizerModel::VqFreeze freeze;
    {
      ad::Tape tape;
      tok.loss(tape, w, nullptr, &freeze);
    }
    auto params = tok.parameters();
    auto loss = [&](bool g) {
      ad::Tape tape;
      if (g) {
        for (auto* p : params) p->zeroGrad();
      }
      auto t = tok.loss(tape, w, &freeze);
      if (g) tape.backward(t.total);
      return t.total.value()(0, 0);
    };
    const auto r = testing::checkGradients(params, loss, 20, 1);
    o.require(r.worstRelative <= 1e-4, "tokenizer worst " + fmt(r.worstRelative) + " at " + r.worstAt);
    o.require(r.families.size() == params.size(), "tokenizer family without gradient");
    o.info.push_back("tokenizer: " + std::to_string(params.size()) + " families, worst rel " + fmt(r.worstRelative, 3));
  }
  {
    GeneratorConfig cfg;
    cfg.dModel = 8;
    cfg.ffHidden = 16;
    cfg.codebookSize = 6;
    cfg.textDim = 4;
    cfg.audioDim = 3;
    cfg.maxFrames = 4;
    cfg.joints = 3;
    GeneratorModel model(cfg);
    for (auto* p : model.parameters()) {
      if (p->name.find("ln_") != std::string::npos || p->name.find("ff_b") != std::string::npos) {
        p->value += 0.3 * randomMat(rng, static_cast<int>(p->value.rows()), static_cast<int>(p->value.cols()));
      }
    }
    RestorationBatch batch;
    for (Modality mod : {Modality::Text, Modality::Audio, Modality::TextAndAudio}) {
      Condition c;
      c.modality = mod;
      if (mod != Modality::Audio) c.textEmbed = randomMat(rng, 1, cfg.textDim);
      if (mod != Modality::Text) c.audioFeats = randomMat(rng, 5, cfg.audioDim);
      TokenGrid g(3, cfg.joints, 1);
      for (auto& k : g.indices) k = static_cast<int>(rng.below(6));
      applyMaskPlan(g, {1}, {2});
      batch.push_back({g, c});
    }
    auto params = model.parameters();
    auto loss = [&](bool g) {
      ad::Tape tape;
      if (g) {
        for (auto* p : params) p->zeroGrad();
      }
      ad::Var l = restorationLoss(tape, model, batch);
      if (g) tape.backward(l);
      return l.value()(0, 0);
    };
    const auto r = testing::checkGradients(params, loss, 20, 2);
    o.require(r.worstRelative <= 1e-4, "generator worst " + fmt(r.worstRelative) + " at " + r.worstAt);
    o.require(r.families.size() == params.size(), "generator family without gradient");
    o.info.push_back("generator: " + std::to_string(params.size()) + " families, worst rel " + fmt(r.worstRelative, 3));
  }
  return o;
}

// ---------------------------------------------------------------- 4

struct StrategyResult {
  double ownMasks = 0.0;
  double randomMasks = 0.0;
  double attentionMasks = 0.0;
};

StrategyResult trainAndScore(std::span<const TokenizedRecord> data, const RunConfig& rc, int K) {
  GeneratorConfig gc = generatorConfigFor(rc, K, data);
  auto trained = trainGenerator(data, gc);
  StrategyResult r;
  r.randomMasks = heldOutRestorationAccuracy(trained.model, data, rc.alphaTemporal, rc.alphaSpatial, 1);
  RestorationBatch own, att;
  GeneratorConfig attCfg = gc;
  attCfg.strategy = StrategyKind::Attention;
  for (std::size_t i = 0; i < data.size(); ++i) {
    // A fresh draw: training used seeds derived from the epoch counter.
    RestorationItem a{data[i].grid, data[i].condition};
    const auto [t, s] = chooseMasks(trained.model, a.grid, a.condition, gc, 999 + i);
    applyMaskPlan(a.grid, t, s);
    own.push_back(std::move(a));
    RestorationItem b{data[i].grid, data[i].condition};
    const auto [t2, s2] = chooseMasks(trained.model, b.grid, b.condition, attCfg, 999 + i);
    applyMaskPlan(b.grid, t2, s2);
    att.push_back(std::move(b));
  }
  r.ownMasks = restorationAccuracy(trained.model, own);
  r.attentionMasks = restorationAccuracy(trained.model, att);
  return r;
}

Outcome learningSignal() {
  Outcome o;
  const auto corpus = synthCorpus(0, 64, ShapeSpec{});
  RunConfig rc;  // shipped defaults: K=64, 500 steps, batch 64, warm-up 2000
  const auto tok = trainTokenizer(corpus, rc.tokenizerConfig()).model;
  const auto data = tokenizeCorpus(tok, corpus);
  const int K = tok.codebookSize();
  rc.strategy = StrategyKind::Attention;
  const StrategyResult att = trainAndScore(data, rc, K);
  rc.strategy = StrategyKind::Random;
  const StrategyResult rnd = trainAndScore(data, rc, K);
  const double chance = 1.0 / K;
  o.require(att.ownMasks >= 5.0 * chance, "attention accuracy " + fmt(att.ownMasks) + " < 5x chance");
  o.require(att.ownMasks >= rnd.ownMasks,
            "attention " + fmt(att.ownMasks) + " below random " + fmt(rnd.ownMasks));
  o.info.push_back("K=" + std::to_string(K) + " chance " + fmt(chance) + ", threshold " + fmt(5.0 * chance));
  o.info.push_back("own-strategy masks: attention " + fmt(att.ownMasks) + ", random " + fmt(rnd.ownMasks));
  o.info.push_back("common random masks (info): attention " + fmt(att.randomMasks) + ", random " +
                   fmt(rnd.randomMasks));
  o.info.push_back("attention-chosen masks (info): attention " + fmt(att.attentionMasks) + ", random " +
                   fmt(rnd.attentionMasks));
  return o;
}

// ---------------------------------------------------------------- 5

Outcome ratioGrid(int steps) {
  Outcome o;
  const auto corpus = synthCorpus(0, 64, ShapeSpec{});
  RunConfig rc;
  const auto tok = trainTokenizer(corpus, rc.tokenizerConfig()).model;
  rc.command = "ratio-grid";
  rc.steps = steps;
  const double alphas[] = {0.15, 0.30, 0.50};
  const auto report = runRatioGrid(corpus, tok, rc, alphas);
  const auto& rows = report.at("rows");
  o.require(rows.size() == 9, "expected 9 grid rows");
  const std::vector<std::string> columns{"r_precision_top1", "r_precision_top2", "r_precision_top3", "fid",
                                         "mm_dist", "diversity", "mmodality"};
  o.require(report.at("columns").get<std::vector<std::string>>() == columns, "column set");
  std::set<std::string> labels;
  int defaults = 0;
  for (const auto& r : rows) {
    labels.insert(r.at("label").get<std::string>());
    for (const auto& c : columns) o.require(r.contains(c), "row lacks " + c);
    defaults += r.at("default").get<bool>() ? 1 : 0;
  }
  o.require(labels.size() == 9, "labels not distinct");
  o.require(labels.count("T:30% S:30%") == 1 && defaults == 1, "default row missing");
  o.require(report.at("default") == "T:30% S:30%", "report default label");
  const RunConfig shipped;
  o.require(shipped.alphaTemporal == 0.30 && shipped.alphaSpatial == 0.30, "shipped ratios are not 30%/30%");
  o.require(RunConfig::fromJson(nlohmann::json::object()).toJson() == shipped.toJson(), "empty config is not default");
  for (const auto& r : rows) {
    if (r.at("default").get<bool>()) {
      o.info.push_back("default row: top1 " + r.at("r_precision_top1").dump() + ", fid " + r.at("fid").dump() +
                       ", restoration " + r.at("restoration_accuracy").dump());
    }
  }
  o.info.push_back(std::to_string(steps) + " training steps per cell");
  return o;
}

// ---------------------------------------------------------------- 6

Outcome metricIdentities() {
  Outcome o;
  Rng rng(6);
  const FeatureSet x{randomMat(rng, 100, 6)};
  const double self = fid(x, x);
  o.require(std::abs(self) <= 1e-6, "fid(X,X) = " + fmt(self));
  o.require(diversity(FeatureSet{MatrixXd::Constant(10, 4, 0.7)}, 20) == 0.0, "diversity(identical) != 0");
  const double b1[] = {2.0}, d1[] = {2.15};
  const double kernel = beatAlignKernel(b1, d1, 0.15);
  o.require(std::abs(kernel - std::exp(-0.5)) <= 1e-12 && std::abs(kernel - 0.6065) < 5e-5, "BAS kernel point");
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> music, dance;
    for (int i = 0; i < 5; ++i) music.push_back(rng.uniform() * 4.0);
    for (int i = 0; i < 3; ++i) dance.push_back(rng.uniform() * 4.0);
    const double s = beatAlignKernel(music, dance, 0.15);
    o.require(s >= 0.0 && s <= 1.0, "BAS outside [0,1]");
  }
  const MatrixXd me = randomMat(rng, 64, 8), te = randomMat(rng, 64, 8);
  o.require(rPrecision(me, te, 32, 32) == 1.0, "r_precision(k=pool) != 1");
  const MatrixXd base = (randomMat(rng, 10 * 5, 3) * 16.0).array().round() / 16.0;
  std::vector<float> a, b;
  for (Eigen::Index i = 0; i < base.rows(); ++i) {
    for (int d = 0; d < 3; ++d) {
      a.push_back(static_cast<float>(base(i, d)));
      b.push_back(static_cast<float>(base(i, d)) + (d == 2 ? 8.0f : -4.0f));
    }
  }
  const VectorXd ga = geometricFeatures(MotionSequence(10, 5, 3, 20.0, a));
  const VectorXd gb = geometricFeatures(MotionSequence(10, 5, 3, 20.0, b));
  o.require(ga == gb, "geometric features moved under translation");
  o.info.push_back("fid(X,X)=" + fmt(self, 3) + ", kernel point " + fmt(kernel, 6));
  return o;
}

// ---------------------------------------------------------------- 7

RiggedCandidate rig(const std::string& id, MatrixXd points, MatrixXd weights) {
  return {id, std::move(points), std::move(weights)};
}

Outcome rigging() {
  Outcome o;
  MatrixXd p(3, 3);
  p << 1, 0, 0, -1, 0, 0, 0, 0, 2;
  const Centroid g = centroid(rig("a", p, MatrixXd::Ones(3, 1)));
  o.require(g.x == 0.0 && g.y == 0.0 && std::abs(g.z - 2.0 / 3.0) < 1e-15, "centroid hand case");
  o.require(passesStage1({0, 0, 0.5}) && !passesStage1({0, 0, -0.5}) && !passesStage1({0.5, 0, 0.5}, 0.1),
            "stage-1 hand cases");
  MatrixXd w(2, 2);
  w << 0.8, 0.0, 0.4, 1.0;
  const WeightSum ws = weightSumDeviation(rig("w", MatrixXd::Zero(2, 3), w));
  o.require(std::abs(ws.s - 1.1) < 1e-12 && std::abs(ws.delta - 0.1) < 1e-12, "weight-sum hand case");
  const WeightSum zero = weightSumDeviation(rig("z", MatrixXd::Zero(2, 3), MatrixXd::Zero(2, 3)));
  o.require(zero.s == 0.0 && zero.delta == 1.0, "all-zero weights");

  auto upright = [](const std::string& id, double s) {
    MatrixXd pts(2, 3);
    pts << 0.02, 0.0, 0.5, -0.02, 0.0, 0.5;
    return rig(id, pts, MatrixXd::Constant(2, 4, s / 4.0));
  };
  const std::vector<RiggedCandidate> table{upright("s193", 1.93), upright("s178", 1.78), upright("s136", 1.36),
                                           upright("s106", 1.06)};
  const auto pick = selectOptimal(table);
  o.require(pick.chosen && table[*pick.chosen].id == "s106", "S-values case");

  Rng rng(7);
  int agreements = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(6));
    std::vector<RiggedCandidate> list;
    for (int i = 0; i < n; ++i) {
      const int pts = 1 + static_cast<int>(rng.below(4));
      const int joints = 1 + static_cast<int>(rng.below(3));
      MatrixXd cp(pts, 3);
      for (int r = 0; r < pts; ++r) {
        cp(r, 0) = (rng.uniform() - 0.5) * 0.4;
        cp(r, 1) = (rng.uniform() - 0.5) * 0.4;
        cp(r, 2) = rng.uniform() * 1.4 - 0.3;
      }
      MatrixXd cw(pts, joints);
      for (Eigen::Index k = 0; k < cw.size(); ++k) cw(k) = std::floor(rng.uniform() * 4.0) / 4.0;
      list.push_back(rig("c" + std::to_string(i), cp, cw));
    }
    // Enumerate, filter, sort.
    std::vector<std::pair<double, std::size_t>> alive;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto n_ = static_cast<double>(list[i].points.rows());
      double x = 0, y = 0, z = 0, s = 0;
      for (Eigen::Index r = 0; r < list[i].points.rows(); ++r) {
        x += list[i].points(r, 0) / n_;
        y += list[i].points(r, 1) / n_;
        z += list[i].points(r, 2) / n_;
        for (Eigen::Index j = 0; j < list[i].weights.cols(); ++j) s += list[i].weights(r, j) / n_;
      }
      if (std::abs(x) <= 0.1 && std::abs(y) <= 0.1 && z > 0 && z < 1) alive.emplace_back(std::abs(s - 1.0), i);
    }
    std::stable_sort(alive.begin(), alive.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first - 1e-12; });
    const std::optional<std::size_t> want =
        alive.empty() ? std::nullopt : std::optional<std::size_t>(alive.front().second);
    agreements += selectOptimal(list, 0.1).chosen == want ? 1 : 0;
  }
  o.require(agreements == 500, "oracle agreement " + std::to_string(agreements) + "/500");
  o.info.push_back("brute-force agreement " + std::to_string(agreements) + "/500");
  return o;
}

// ---------------------------------------------------------------- 8

Outcome formats() {
  Outcome o;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mmk_acceptance_formats";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto cycle = [&](const std::string& name, const std::vector<std::uint8_t>& first,
                   const std::function<std::vector<std::uint8_t>(const std::vector<std::uint8_t>&)>& reencode) {
    const auto a = (dir / (name + ".1")).string(), b = (dir / (name + ".2")).string();
    binio::writeFile(a, first);
    binio::writeFile(b, reencode(binio::readFile(a)));
    o.require(binio::readFile(a) == binio::readFile(b), name + " bytes differ");
  };

  const auto corpus = synthCorpus(8, 6, ShapeSpec{});
  const nlohmann::json rc = RunConfig{}.toJson();
  cycle("MotionPack", encodeMotionPack(corpus, rc), [](const auto& bytes) {
    nlohmann::json back;
    const auto records = decodeMotionPack(bytes, &back);
    return encodeMotionPack(records, back);
  });

  TokenizerConfig tc;
  tc.codebookSize = 8;
  tc.codeDim = 4;
  tc.steps = 2;
  const auto tok = trainTokenizer(corpus, tc).model;
  cycle("TKZ1", encodeTokenizerCheckpoint(tok, rc), [](const auto& bytes) {
    nlohmann::json back;
    const auto m = decodeTokenizerCheckpoint(bytes, &back);
    return encodeTokenizerCheckpoint(m, back);
  });

  RunConfig small;
  small.dModel = 8;
  small.steps = 2;
  small.warmupSteps = 1;
  const auto data = tokenizeCorpus(tok, corpus);
  const auto gen = trainGenerator(data, generatorConfigFor(small, tok.codebookSize(), data)).model;
  cycle("GEN1", encodeGeneratorCheckpoint(gen, rc), [](const auto& bytes) {
    nlohmann::json back;
    const auto m = decodeGeneratorCheckpoint(bytes, &back);
    return encodeGeneratorCheckpoint(m, back);
  });

  Rng rng(8);
  cycle("RIG1", encodeRig(rig("cand", randomMat(rng, 7, 3), randomMat(rng, 7, 4).cwiseAbs())),
        [](const auto& bytes) { return encodeRig(decodeRig(bytes)); });
  o.info.push_back("MotionPack, TKZ1, GEN1, RIG1 via files");
  return o;
}

struct Criterion {
  int id;
  const char* title;
  double budgetSeconds;
  std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv) {
  CLI::App app("mmk acceptance run");
  std::vector<int> only;
  int gridSteps = 200;
  app.add_option("--only", only, "Criteria to run (default: all)");
  app.add_option("--grid-steps", gridSteps, "Training steps per ratio-grid cell")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, "masking cardinality and oracle suite", 5, masking},
      {2, "modality routing", 1, routing},
      {3, "gradient suite", 60, gradients},
      {4, "learning signal", 600, learningSignal},
      {5, "ratio grid", 1800, [gridSteps] { return ratioGrid(gridSteps); }},
      {6, "metric identities", 10, metricIdentities},
      {7, "rigging selection", 5, rigging},
      {8, "format round trips", 5, formats},
  };
  int failures = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.require(false, std::string("threw: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    out.require(secs < c.budgetSeconds, "over time budget");
    failures += out.ok ? 0 : 1;
    std::printf("criterion %d %s: %s (%.2f s, budget %.0f s)%s%s\n", c.id, c.title, out.ok ? "PASS" : "FAIL", secs,
                c.budgetSeconds, out.detail.empty() ? "" : " - ", out.detail.c_str());
    for (const auto& line : out.info) std::printf("    %s\n", line.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
