#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace mmk {

/// Frames x joints x features grid of one motion clip, stored row-major
/// (frame-major, then joint, then feature) at float32 precision.
class MotionSequence {
 public:
  MotionSequence(int frames, int joints, int featureDim, double fps, std::vector<float> data);

  int frames() const { return frames_; }
  int joints() const { return joints_; }
  int featureDim() const { return featureDim_; }
  double fps() const { return fps_; }

  float at(int t, int j, int d) const {
    return data_[(static_cast<std::size_t>(t) * joints_ + j) * featureDim_ + d];
  }
  std::span<const float> data() const { return data_; }

  // Feature vector of joint j at frame t.
  Eigen::VectorXd joint(int t, int j) const;

  bool operator==(const MotionSequence&) const = default;

 private:
  int frames_;
  int joints_;
  int featureDim_;
  double fps_;
  std::vector<float> data_;
};

/// Swaps the temporal and spatial axes: entry (t, j) moves to (j, t). The
/// result is a J x T x D grid whose "frames" are joints; fps is carried over.
MotionSequence rearrangeSpatial(const MotionSequence& m);

enum class Modality { Text, Audio, TextAndAudio };

const char* modalityName(Modality m);
Modality parseModality(const std::string& s);

struct Condition {
  Modality modality = Modality::Text;
  std::optional<Eigen::RowVectorXd> textEmbed;  // exactly one temporal token
  std::optional<Eigen::MatrixXd> audioFeats;    // T_a x C_a
  std::vector<double> beatTimes;                // seconds, strictly increasing

  // Throws Error(Data) when the modality/presence/ordering rules are broken.
  void validate() const;

  int textDim() const { return textEmbed ? static_cast<int>(textEmbed->size()) : 0; }
  int audioFrames() const { return audioFeats ? static_cast<int>(audioFeats->rows()) : 0; }
  int audioDim() const { return audioFeats ? static_cast<int>(audioFeats->cols()) : 0; }
};

struct CorpusRecord {
  std::string id;
  MotionSequence motion;
  Condition condition;
  std::optional<std::string> caption;
};

/// MotionPack: "MPK1" | u32 header length | JSON header | float32 payloads.
/// `runConfig`, when non-null, is embedded in the header under "run_config".
std::vector<std::uint8_t> encodeMotionPack(std::span<const CorpusRecord> records,
                                           const nlohmann::json& runConfig = nullptr);
std::vector<CorpusRecord> decodeMotionPack(std::span<const std::uint8_t> bytes,
                                           nlohmann::json* runConfig = nullptr);

std::vector<CorpusRecord> loadCorpus(const std::string& path, nlohmann::json* runConfig = nullptr);
void saveCorpus(const std::string& path, std::span<const CorpusRecord> records,
                const nlohmann::json& runConfig = nullptr);

struct ShapeSpec {
  int frames = 32;
  int joints = 6;
  int featureDim = 3;
  double fps = 20.0;
  int textDim = 32;
  int audioDim = 8;
  // Modality of record i: a fixed modality, or cycling Text/Audio/TextAndAudio.
  std::optional<Modality> modality;

  nlohmann::json toJson() const;
  static ShapeSpec fromJson(const nlohmann::json& j);
};

/// Deterministic synthetic corpus: per-joint sinusoid mixtures whose tempo is
/// tied to the condition (caption template, audio beat period).
std::vector<CorpusRecord> synthCorpus(std::uint64_t seed, int n, const ShapeSpec& spec);

/// The fixed caption template bank used by synthCorpus.
std::span<const std::string> captionTemplates();

} // namespace mmk
