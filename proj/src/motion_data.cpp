#include "mmk/motion_data.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "mmk/binio.hpp"
#include "mmk/condition_codec.hpp"
#include "mmk/error.hpp"
#include "mmk/rng.hpp"

namespace mmk {

using nlohmann::json;

MotionSequence::MotionSequence(int frames, int joints, int featureDim, double fps,
                               std::vector<float> data)
    : frames_(frames), joints_(joints), featureDim_(featureDim), fps_(fps), data_(std::move(data)) {
  if (frames < 1 || joints < 1 || featureDim < 1) throwData("motion dimensions must be positive");
  if (!(fps > 0.0) || !std::isfinite(fps)) throwData("motion fps must be positive");
  const auto expected = static_cast<std::size_t>(frames) * joints * featureDim;
  if (data_.size() != expected) {
    throwData("motion payload has " + std::to_string(data_.size()) + " values, expected " +
              std::to_string(expected));
  }
  for (float v : data_) {
    if (!std::isfinite(v)) throwData("motion payload contains a non-finite value");
  }
}

Eigen::VectorXd MotionSequence::joint(int t, int j) const {
  Eigen::VectorXd v(featureDim_);
  for (int d = 0; d < featureDim_; ++d) v(d) = at(t, j, d);
  return v;
}

MotionSequence rearrangeSpatial(const MotionSequence& m) {
  const int T = m.frames();
  const int J = m.joints();
  const int D = m.featureDim();
  std::vector<float> out(m.data().size());
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < J; ++j) {
      for (int d = 0; d < D; ++d) {
        out[(static_cast<std::size_t>(j) * T + t) * D + d] = m.at(t, j, d);
      }
    }
  }
  return MotionSequence(J, T, D, m.fps(), std::move(out));
}

const char* modalityName(Modality m) {
  switch (m) {
    case Modality::Text: return "text";
    case Modality::Audio: return "audio";
    case Modality::TextAndAudio: return "text_audio";
  }
  return "?";
}

Modality parseModality(const std::string& s) {
  if (s == "text") return Modality::Text;
  if (s == "audio") return Modality::Audio;
  if (s == "text_audio") return Modality::TextAndAudio;
  throwData("unknown modality '" + s + "'");
}

void Condition::validate() const {
  const bool wantText = modality != Modality::Audio;
  const bool wantAudio = modality != Modality::Text;
  if (wantText != textEmbed.has_value()) {
    throwData(std::string("text embedding presence does not match modality ") + modalityName(modality));
  }
  if (wantAudio != audioFeats.has_value()) {
    throwData(std::string("audio features presence does not match modality ") + modalityName(modality));
  }
  if (textEmbed && (textEmbed->size() == 0 || !textEmbed->allFinite())) {
    throwData("text embedding must be a non-empty finite row");
  }
  if (audioFeats && (audioFeats->rows() == 0 || audioFeats->cols() == 0 || !audioFeats->allFinite())) {
    throwData("audio features must be a non-empty finite grid");
  }
  for (std::size_t i = 0; i < beatTimes.size(); ++i) {
    if (!std::isfinite(beatTimes[i])) throwData("beat time is not finite");
    if (i > 0 && !(beatTimes[i] > beatTimes[i - 1])) throwData("beat times must be strictly increasing");
  }
}

// ---------------------------------------------------------------- MotionPack

namespace {

constexpr int kMotionPackVersion = 1;

json recordHeader(const CorpusRecord& r) {
  const Condition& c = r.condition;
  return json{{"id", r.id},
              {"T", r.motion.frames()},
              {"J", r.motion.joints()},
              {"D", r.motion.featureDim()},
              {"fps", r.motion.fps()},
              {"modality", modalityName(c.modality)},
              {"C_t", c.textDim()},
              {"T_a", c.audioFrames()},
              {"C_a", c.audioDim()},
              {"beat_count", c.beatTimes.size()},
              {"caption", r.caption ? json(*r.caption) : json(nullptr)}};
}

template <typename T>
T field(const json& h, const char* key, const std::string& id) {
  try {
    return h.at(key).get<T>();
  } catch (const json::exception&) {
    throwData("record '" + id + "': missing or invalid header field '" + key + "'");
  }
}

} // namespace

std::vector<std::uint8_t> encodeMotionPack(std::span<const CorpusRecord> records,
                                           const json& runConfig) {
  json header{{"version", kMotionPackVersion}, {"record_count", records.size()}};
  json list = json::array();
  std::set<std::string> ids;
  for (const auto& r : records) {
    if (!ids.insert(r.id).second) throwData("duplicate record id '" + r.id + "'");
    r.condition.validate();
    list.push_back(recordHeader(r));
  }
  header["records"] = std::move(list);
  if (!runConfig.is_null()) header["run_config"] = runConfig;

  binio::Writer w;
  w.putMagic("MPK1");
  w.putHeader(header);
  for (const auto& r : records) {
    w.putF32s(r.motion.data());
    if (r.condition.textEmbed) {
      for (double v : *r.condition.textEmbed) w.putF32(v);
    }
    if (r.condition.audioFeats) {
      const auto& a = *r.condition.audioFeats;
      for (Eigen::Index t = 0; t < a.rows(); ++t) {
        for (Eigen::Index c = 0; c < a.cols(); ++c) w.putF32(a(t, c));
      }
    }
    for (double b : r.condition.beatTimes) w.putF64(b);
  }
  return w.bytes();
}

std::vector<CorpusRecord> decodeMotionPack(std::span<const std::uint8_t> bytes, json* runConfig) {
  binio::Reader in(bytes);
  in.expectMagic("MPK1");
  const json header = in.header();
  if (!header.is_object() || !header.contains("records") || !header["records"].is_array()) {
    throwData("malformed MotionPack header: missing records array");
  }
  if (header.value("version", 0) != kMotionPackVersion) throwData("unsupported MotionPack version");
  const auto& list = header["records"];
  if (header.value("record_count", std::size_t{0}) != list.size()) {
    throwData("malformed MotionPack header: record_count does not match records");
  }
  if (runConfig != nullptr) *runConfig = header.contains("run_config") ? header["run_config"] : json(nullptr);

  std::vector<CorpusRecord> out;
  out.reserve(list.size());
  std::set<std::string> ids;
  for (const auto& h : list) {
    const std::string id = h.contains("id") && h["id"].is_string() ? h["id"].get<std::string>() : "?";
    const std::size_t start = in.offset();
    auto fail = [&](const std::string& why) {
      throwData("record '" + id + "' at byte offset " + std::to_string(start) + ": " + why);
    };
    if (!ids.insert(id).second) fail("duplicate record id");
    const int T = field<int>(h, "T", id);
    const int J = field<int>(h, "J", id);
    const int D = field<int>(h, "D", id);
    const double fps = field<double>(h, "fps", id);
    const Modality modality = parseModality(field<std::string>(h, "modality", id));
    const int Ct = field<int>(h, "C_t", id);
    const int Ta = field<int>(h, "T_a", id);
    const int Ca = field<int>(h, "C_a", id);
    const auto beats = field<std::size_t>(h, "beat_count", id);
    if (T < 1 || J < 1 || D < 1 || Ct < 0 || Ta < 0 || Ca < 0) fail("dimension mismatch");
    if ((Ta == 0) != (Ca == 0)) fail("dimension mismatch: T_a and C_a must both be zero or positive");

    const std::size_t count = static_cast<std::size_t>(T) * J * D;
    const std::size_t needed = 4 * (count + static_cast<std::size_t>(Ct) + static_cast<std::size_t>(Ta) * Ca) + 8 * beats;
    if (in.remaining() < needed) fail("dimension mismatch: payload truncated");

    std::vector<float> data(count);
    in.f32s(data);
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::isfinite(data[i])) {
        throwData("record '" + id + "' at byte offset " + std::to_string(start + 4 * i) +
                  ": non-finite motion value");
      }
    }
    Condition c;
    c.modality = modality;
    if (Ct > 0) {
      Eigen::RowVectorXd e(Ct);
      for (int i = 0; i < Ct; ++i) e(i) = in.f32();
      c.textEmbed = std::move(e);
    }
    if (Ta > 0) {
      Eigen::MatrixXd a(Ta, Ca);
      for (int t = 0; t < Ta; ++t) {
        for (int k = 0; k < Ca; ++k) a(t, k) = in.f32();
      }
      c.audioFeats = std::move(a);
    }
    c.beatTimes.resize(beats);
    for (auto& b : c.beatTimes) b = in.f64();
    try {
      c.validate();
    } catch (const Error& e) {
      fail(e.what());
    }

    std::optional<std::string> caption;
    if (h.contains("caption") && h["caption"].is_string()) caption = h["caption"].get<std::string>();
    try {
      out.push_back(CorpusRecord{id, MotionSequence(T, J, D, fps, std::move(data)), std::move(c),
                                 std::move(caption)});
    } catch (const Error& e) {
      fail(e.what());
    }
  }
  if (!in.atEnd()) {
    throwData("trailing bytes after last record at byte offset " + std::to_string(in.offset()));
  }
  return out;
}

std::vector<CorpusRecord> loadCorpus(const std::string& path, json* runConfig) {
  const auto bytes = binio::readFile(path);
  return decodeMotionPack(bytes, runConfig);
}

void saveCorpus(const std::string& path, std::span<const CorpusRecord> records, const json& runConfig) {
  binio::writeFile(path, encodeMotionPack(records, runConfig));
}

// ---------------------------------------------------------------- synthesis

json ShapeSpec::toJson() const {
  return json{{"frames", frames},
              {"joints", joints},
              {"feature_dim", featureDim},
              {"fps", fps},
              {"text_dim", textDim},
              {"audio_dim", audioDim},
              {"modality", modality ? json(modalityName(*modality)) : json("mixed")}};
}

ShapeSpec ShapeSpec::fromJson(const json& j) {
  ShapeSpec s;
  s.frames = j.value("frames", s.frames);
  s.joints = j.value("joints", s.joints);
  s.featureDim = j.value("feature_dim", s.featureDim);
  s.fps = j.value("fps", s.fps);
  s.textDim = j.value("text_dim", s.textDim);
  s.audioDim = j.value("audio_dim", s.audioDim);
  const std::string m = j.value("modality", std::string("mixed"));
  if (m != "mixed") s.modality = parseModality(m);
  return s;
}

std::span<const std::string> captionTemplates() {
  static const std::vector<std::string> bank = {
      "a person walks forward slowly",
      "a person spins in place",
      "someone jumps up and down",
      "a dancer waves both arms overhead",
      "a person kicks with the right leg",
      "a person sways side to side",
      "someone runs in a small circle",
      "a dancer bows and then claps",
  };
  return bank;
}

std::vector<CorpusRecord> synthCorpus(std::uint64_t seed, int n, const ShapeSpec& spec) {
  if (n < 1) throwUsage("synth corpus needs n >= 1");
  if (spec.frames < 1 || spec.joints < 1 || spec.featureDim < 1 || spec.textDim < 1 || spec.audioDim < 1 ||
      !(spec.fps > 0.0)) {
    throwUsage("synth shape dimensions must be positive");
  }
  Rng rng(seed);
  const TextStubEmbedder embedder(spec.textDim);
  const auto templates = captionTemplates();
  const int T = spec.frames;
  const int J = spec.joints;
  const int D = spec.featureDim;
  constexpr double pi = std::numbers::pi;

  std::vector<CorpusRecord> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int style = static_cast<int>(rng.below(templates.size()));
    const int period = 4 + 2 * (style % 4);  // motion frames between beats
    const Modality modality = spec.modality ? *spec.modality : static_cast<Modality>(i % 3);

    std::vector<float> data(static_cast<std::size_t>(T) * J * D);
    std::vector<double> base(static_cast<std::size_t>(J) * D);
    std::vector<double> amp(base.size());
    std::vector<double> detail(base.size());
    std::vector<double> phase(base.size());
    for (int j = 0; j < J; ++j) {
      const double emphasis = (1.0 + ((j + style) % 3)) / 3.0;
      for (int d = 0; d < D; ++d) {
        const std::size_t k = static_cast<std::size_t>(j) * D + d;
        base[k] = rng.uniform(-0.5, 0.5);
        amp[k] = emphasis * rng.uniform(0.5, 1.0);
        detail[k] = 0.1 * rng.uniform(0.0, 1.0);
        phase[k] = rng.uniform(0.0, 2.0 * pi);
      }
    }
    for (int t = 0; t < T; ++t) {
      for (std::size_t k = 0; k < base.size(); ++k) {
        const double v = base[k] + amp[k] * std::cos(pi * t / period) +
                         detail[k] * std::sin(2.0 * pi * t / period + phase[k]) + 0.01 * rng.normal();
        data[static_cast<std::size_t>(t) * base.size() + k] = static_cast<float>(v);
      }
    }

    Condition c;
    c.modality = modality;
    const std::string caption = templates[static_cast<std::size_t>(style)];
    if (modality != Modality::Audio) {
      Eigen::RowVectorXd e = embedder.embed(caption);
      c.textEmbed = e.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
    }
    if (modality != Modality::Text) {
      const int Ta = T;
      const double hop = audioHopSeconds(T, spec.fps, Ta);
      Eigen::MatrixXd a(Ta, spec.audioDim);
      for (int t = 0; t < Ta; ++t) {
        a(t, 0) = (t > 0 && t % period == 0) ? 1.0 : 0.0;
        for (int ch = 1; ch < spec.audioDim; ++ch) {
          const double v = 0.5 + 0.5 * std::sin(2.0 * pi * ch * t / (4.0 * period) + style * ch);
          a(t, ch) = static_cast<float>(v);
        }
      }
      for (int t = period; t < Ta; t += period) c.beatTimes.push_back(t * hop);
      c.audioFeats = std::move(a);
    }
    out.push_back(CorpusRecord{"rec" + std::to_string(i), MotionSequence(T, J, D, spec.fps, std::move(data)),
                               std::move(c), caption});
  }
  return out;
}

} // namespace mmk
