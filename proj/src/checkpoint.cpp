#include "mmk/checkpoint.hpp"

#include "mmk/binio.hpp"
#include "mmk/error.hpp"

namespace mmk {

std::vector<std::uint8_t> writeCheckpoint(std::string_view magic, nlohmann::json header,
                                          std::span<const ad::Parameter* const> params) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto* p : params) list.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  header["format"] = std::string(magic);
  header["params"] = std::move(list);
  binio::Writer w;
  w.putMagic(magic);
  w.putHeader(header);
  for (const auto* p : params) {
    if (!p->value.allFinite()) throwNumeric("parameter " + p->name + " is not finite");
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) w.putF32(p->value(r, c));
    }
  }
  return w.bytes();
}

CheckpointContents readCheckpoint(std::string_view magic, std::span<const std::uint8_t> bytes) {
  binio::Reader in(bytes);
  in.expectMagic(magic);
  CheckpointContents out;
  out.header = in.header();
  if (!out.header.is_object() || !out.header.contains("params") || !out.header["params"].is_array()) {
    throwData("checkpoint header lacks a params list");
  }
  for (const auto& p : out.header["params"]) {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    try {
      name = p.at("name").get<std::string>();
      rows = p.at("rows").get<Eigen::Index>();
      cols = p.at("cols").get<Eigen::Index>();
    } catch (const nlohmann::json::exception&) {
      throwData("malformed checkpoint parameter entry");
    }
    if (rows < 0 || cols < 0) throwData("negative parameter shape for " + name);
    if (in.remaining() < static_cast<std::size_t>(rows * cols) * 4) {
      throwData("checkpoint payload truncated at parameter " + name + ", byte offset " + std::to_string(in.offset()));
    }
    ad::Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = in.f32();
    }
    if (!m.allFinite()) throwData("parameter " + name + " holds non-finite values");
    out.params.emplace_back(std::move(name), std::move(m));
  }
  if (!in.atEnd()) throwData("trailing bytes in checkpoint at byte offset " + std::to_string(in.offset()));
  return out;
}

void CheckpointContents::restore(std::span<ad::Parameter* const> dst) const {
  if (dst.size() != params.size()) throwData("checkpoint parameter count does not match the model");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const auto& [name, value] = params[i];
    if (dst[i]->name != name) throwData("checkpoint parameter '" + name + "' where '" + dst[i]->name + "' expected");
    if (dst[i]->value.rows() != value.rows() || dst[i]->value.cols() != value.cols()) {
      throwData("checkpoint parameter '" + name + "' has the wrong shape");
    }
    dst[i]->value = value;
    dst[i]->zeroGrad();
  }
}

} // namespace mmk
