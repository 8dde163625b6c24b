#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace mmk {

inline constexpr std::uint64_t kDefaultTextSeed = 0x6d6d6b5f74657874ULL;

/// Deterministic stand-in for a text encoder: a hashed bag of lowercase
/// alphanumeric tokens, each mapped to a pseudo-random +/-1 pattern, summed
/// and L2-normalized. Always yields exactly one temporal token.
class TextStubEmbedder {
 public:
  explicit TextStubEmbedder(int dims, std::uint64_t seed = kDefaultTextSeed);

  int dims() const { return dims_; }
  std::uint64_t seed() const { return seed_; }

  // Throws Error(Usage) for a caption that is empty after trimming.
  Eigen::RowVectorXd embed(std::string_view caption) const;

 private:
  int dims_;
  std::uint64_t seed_;
};

struct AudioTrack {
  Eigen::MatrixXd features;  // T_a x C_a
  double hopSeconds = 0.0;
};

/// Half-wave rectified first difference of channel 0; entry 0 is zero.
Eigen::VectorXd onsetEnvelope(const AudioTrack& track);

/// Local maxima of the onset envelope above `threshold`, in seconds.
/// Plateaus report their first frame.
std::vector<double> extractBeats(const AudioTrack& track, double threshold);

/// Hop between audio frames when T_a frames span the motion's duration.
double audioHopSeconds(int motionFrames, double fps, int audioFrames);

} // namespace mmk
