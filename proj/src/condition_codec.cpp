#include "mmk/condition_codec.hpp"

#include <cctype>
#include <cmath>
#include <string>

#include "mmk/error.hpp"

namespace mmk {

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace

TextStubEmbedder::TextStubEmbedder(int dims, std::uint64_t seed) : dims_(dims), seed_(seed) {
  if (dims < 1) throwUsage("text embedding width must be positive");
}

Eigen::RowVectorXd TextStubEmbedder::embed(std::string_view caption) const {
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(dims_);
  std::string token;
  int tokens = 0;
  auto flush = [&] {
    if (token.empty()) return;
    std::uint64_t state = fnv1a(token, seed_);
    for (int i = 0; i < dims_; i += 64) {
      const std::uint64_t bits = splitmix64(state);
      for (int b = 0; b < 64 && i + b < dims_; ++b) v(i + b) += ((bits >> b) & 1U) ? 1.0 : -1.0;
    }
    ++tokens;
    token.clear();
  };
  for (char c : caption) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      token.push_back(static_cast<char>(std::tolower(u)));
    } else {
      flush();
    }
  }
  flush();
  if (tokens == 0) throwUsage("caption is empty");
  const double n = v.norm();
  if (n == 0.0) {
    // Tokens cancelled exactly; fall back to a fixed direction.
    v(0) = 1.0;
    return v;
  }
  return v / n;
}

Eigen::VectorXd onsetEnvelope(const AudioTrack& track) {
  const Eigen::Index n = track.features.rows();
  Eigen::VectorXd onset = Eigen::VectorXd::Zero(n);
  if (track.features.cols() == 0) return onset;
  for (Eigen::Index t = 1; t < n; ++t) {
    onset(t) = std::max(0.0, track.features(t, 0) - track.features(t - 1, 0));
  }
  return onset;
}

std::vector<double> extractBeats(const AudioTrack& track, double threshold) {
  if (track.features.rows() < 3) throwUsage("beat extraction needs at least 3 audio frames");
  if (!(track.hopSeconds > 0.0)) throwUsage("hop_seconds must be positive");
  if (!track.features.allFinite()) throwData("audio features contain non-finite values");
  const Eigen::VectorXd onset = onsetEnvelope(track);
  const Eigen::Index n = onset.size();
  std::vector<double> beats;
  for (Eigen::Index t = 1; t < n; ++t) {
    const double v = onset(t);
    if (v <= threshold) continue;
    const double next = t + 1 < n ? onset(t + 1) : 0.0;
    if (v > onset(t - 1) && v >= next) beats.push_back(static_cast<double>(t) * track.hopSeconds);
  }
  return beats;
}

double audioHopSeconds(int motionFrames, double fps, int audioFrames) {
  if (audioFrames <= 0 || !(fps > 0.0)) throwUsage("audio hop needs positive frame counts and fps");
  return (static_cast<double>(motionFrames) / fps) / static_cast<double>(audioFrames);
}

} // namespace mmk
