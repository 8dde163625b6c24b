#include "mmk/rigging.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "mmk/binio.hpp"
#include "mmk/error.hpp"

namespace mmk {

void RiggedCandidate::validate() const {
  if (points.rows() < 1 || points.cols() != 3) throwData("candidate '" + id + "' needs N >= 1 points of 3 coordinates");
  if (weights.rows() != points.rows() || weights.cols() < 1) {
    throwData("candidate '" + id + "' weight matrix must be N x n_joints with n_joints >= 1");
  }
  if (!points.allFinite() || !weights.allFinite()) throwData("candidate '" + id + "' holds non-finite values");
  if ((weights.array() < 0.0).any()) throwData("candidate '" + id + "' has negative joint weights");
}

Centroid centroid(const RiggedCandidate& c) {
  if (c.points.rows() < 1) throwData("centroid of an empty point cloud");
  const Eigen::RowVector3d m = c.points.colwise().mean();
  return {m(0), m(1), m(2)};
}

std::vector<std::string> stage1Failures(const Centroid& g, double eps) {
  if (!(eps > 0.0)) throwUsage("lateral tolerance must be positive");
  std::vector<std::string> why;
  auto inBox = [](double v) { return -1.0 < v && v < 1.0; };
  if (!inBox(g.x)) why.emplace_back("x outside (-1, 1)");
  if (!inBox(g.y)) why.emplace_back("y outside (-1, 1)");
  if (!inBox(g.z)) why.emplace_back("z outside (-1, 1)");
  if (std::abs(g.x) > eps) why.emplace_back("|x| exceeds lateral tolerance");
  if (std::abs(g.y) > eps) why.emplace_back("|y| exceeds lateral tolerance");
  if (!(g.z > 0.0)) why.emplace_back("z not above ground");
  return why;
}

bool passesStage1(const Centroid& g, double eps) { return stage1Failures(g, eps).empty(); }

WeightSum weightSumDeviation(const RiggedCandidate& c) {
  if (c.weights.rows() < 1) throwData("weight sum of an empty candidate");
  WeightSum w;
  w.s = c.weights.rowwise().sum().mean();
  w.delta = std::abs(w.s - 1.0);
  return w;
}

Selection selectOptimal(std::span<const RiggedCandidate> candidates, double eps) {
  if (candidates.empty()) throwUsage("rig selection needs at least one candidate");
  Selection sel;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    CandidateReport r;
    r.id = c.id;
    r.centroid = centroid(c);
    r.reasons = stage1Failures(r.centroid, eps);
    r.stage1 = r.reasons.empty();
    r.weightSum = weightSumDeviation(c);
    if (r.stage1 && (!sel.chosen || r.weightSum.delta < sel.candidates[*sel.chosen].weightSum.delta)) sel.chosen = i;
    sel.candidates.push_back(std::move(r));
  }
  return sel;
}

nlohmann::json Selection::toJson() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : candidates) {
    list.push_back({{"id", c.id},
                    {"centroid", {c.centroid.x, c.centroid.y, c.centroid.z}},
                    {"stage1", c.stage1},
                    {"reasons", c.reasons},
                    {"S", c.weightSum.s},
                    {"delta", c.weightSum.delta}});
  }
  return {{"chosen", chosen ? nlohmann::json(candidates[*chosen].id) : nlohmann::json(nullptr)},
          {"outcome", chosen ? "selected" : "no candidate passes"},
          {"candidates", std::move(list)}};
}

std::vector<std::uint8_t> encodeRig(const RiggedCandidate& c) {
  c.validate();
  binio::Writer w;
  w.putMagic("RIG1");
  w.putHeader({{"id", c.id}, {"N", c.points.rows()}, {"n_joints", c.weights.cols()}});
  for (Eigen::Index i = 0; i < c.points.rows(); ++i) {
    for (int k = 0; k < 3; ++k) w.putF32(c.points(i, k));
  }
  for (Eigen::Index i = 0; i < c.weights.rows(); ++i) {
    for (Eigen::Index k = 0; k < c.weights.cols(); ++k) w.putF32(c.weights(i, k));
  }
  return w.bytes();
}

RiggedCandidate decodeRig(std::span<const std::uint8_t> bytes) {
  binio::Reader in(bytes);
  in.expectMagic("RIG1");
  const auto h = in.header();
  RiggedCandidate c;
  Eigen::Index n = 0;
  Eigen::Index joints = 0;
  try {
    c.id = h.at("id").get<std::string>();
    n = h.at("N").get<Eigen::Index>();
    joints = h.at("n_joints").get<Eigen::Index>();
  } catch (const nlohmann::json::exception&) {
    throwData("malformed RIG1 header");
  }
  if (n < 1 || joints < 1) throwData("candidate '" + c.id + "' has a non-positive dimension");
  if (in.remaining() != static_cast<std::size_t>(n * (3 + joints)) * 4) {
    throwData("candidate '" + c.id + "' payload size does not match N and n_joints");
  }
  c.points.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) c.points(i, k) = in.f32();
  }
  c.weights.resize(n, joints);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < joints; ++k) c.weights(i, k) = in.f32();
  }
  c.validate();
  return c;
}

std::vector<RiggedCandidate> loadRigDirectory(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throwData("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".rig") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<RiggedCandidate> out;
  for (const auto& f : files) out.push_back(decodeRig(binio::readFile(f.string())));
  return out;
}

} // namespace mmk
