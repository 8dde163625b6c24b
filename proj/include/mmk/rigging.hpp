#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace mmk {

struct RiggedCandidate {
  std::string id;
  Eigen::MatrixXd points;   // N x 3
  Eigen::MatrixXd weights;  // N x n_joints, non-negative

  // Throws Error(Data) on shape, finiteness or sign violations.
  void validate() const;
};

struct Centroid {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

inline constexpr double kDefaultLateralTolerance = 0.1;

Centroid centroid(const RiggedCandidate& c);

/// Inside the open unit box, laterally centred within `epsLateral`, and
/// above ground (0 < z).
bool passesStage1(const Centroid& g, double epsLateral = kDefaultLateralTolerance);

/// Reasons a centroid fails stage 1; empty when it passes.
std::vector<std::string> stage1Failures(const Centroid& g, double epsLateral = kDefaultLateralTolerance);

struct WeightSum {
  double s = 0.0;      // mean per-vertex weight sum
  double delta = 0.0;  // |s - 1|
};

WeightSum weightSumDeviation(const RiggedCandidate& c);

struct CandidateReport {
  std::string id;
  Centroid centroid;
  bool stage1 = false;
  std::vector<std::string> reasons;
  WeightSum weightSum;
};

struct Selection {
  std::optional<std::size_t> chosen;  // index into the input list
  std::vector<CandidateReport> candidates;

  nlohmann::json toJson() const;
};

/// Stage 1 filter, then argmin of |S - 1| over survivors (first on ties).
Selection selectOptimal(std::span<const RiggedCandidate> candidates,
                        double epsLateral = kDefaultLateralTolerance);

/// RIG1: magic | u32 header length | JSON {id, N, n_joints} | float32 points
/// (N x 3) then weights (N x n_joints), row-major.
std::vector<std::uint8_t> encodeRig(const RiggedCandidate& c);
RiggedCandidate decodeRig(std::span<const std::uint8_t> bytes);

/// Loads every *.rig file of a directory in filename order.
std::vector<RiggedCandidate> loadRigDirectory(const std::string& dir);

} // namespace mmk
