#pragma once

// Central finite-difference check of reverse-mode gradients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mmk/autodiff.hpp"
#include "mmk/rng.hpp"

namespace mmk::testing {

struct GradCheck {
  double worstRelative = 0.0;
  std::string worstAt;
  int checked = 0;
  std::vector<std::string> families;  // parameters whose analytic gradient was nonzero somewhere
};

/// `loss(true)` must zero grads, record a pass and run backward; `loss(false)`
/// only evaluates. Up to `perParam` entries of every parameter are probed.
/// The relative error divides by max(|analytic|, |numeric|, floor).
inline GradCheck checkGradients(std::span<ad::Parameter* const> params, const std::function<double(bool)>& loss,
                                int perParam, std::uint64_t seed, double h = 1e-5, double floor = 1e-6) {
  GradCheck out;
  loss(true);
  std::vector<ad::Mat> analytic;
  for (auto* p : params) analytic.push_back(p->grad);
  Rng rng(seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    ad::Parameter& p = *params[pi];
    if (analytic[pi].cwiseAbs().maxCoeff() > 0.0) out.families.push_back(p.name);
    const auto n = static_cast<std::size_t>(p.value.size());
    std::vector<std::size_t> entries(n);
    for (std::size_t i = 0; i < n; ++i) entries[i] = i;
    rng.shuffle(entries);
    entries.resize(std::min<std::size_t>(n, static_cast<std::size_t>(perParam)));
    for (const std::size_t e : entries) {
      const auto i = static_cast<Eigen::Index>(e);
      const double keep = p.value(i);
      p.value(i) = keep + h;
      const double up = loss(false);
      p.value(i) = keep - h;
      const double down = loss(false);
      p.value(i) = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[pi](i);
      const double scale = std::max(std::abs(a), std::abs(numeric));
      const double rel = std::abs(a - numeric) / std::max(scale, floor);
      ++out.checked;
      if (rel > out.worstRelative) {
        out.worstRelative = rel;
        out.worstAt = p.name + "[" + std::to_string(e) + "]";
      }
    }
  }
  return out;
}

} // namespace mmk::testing
