// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "bytes.hpp"
#include "slicefl/errors.hpp"

namespace slicefl {
namespace {

constexpr std::string_view kMagic = "SFLCKPT1";
constexpr std::uint32_t kVersion = 1;

std::size_t header_size(const NamedTensors& tensors) {
  std::size_t n = kMagic.size() + 8;
  for (const auto& [name, t] : tensors) n += 4 + name.size() + 4 + 8 * t.ndim();
  return n;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const NamedTensors& tensors) {
  detail::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(t.ndim()));
    for (std::size_t d : t.shape()) w.u64(d);
  }
  for (const auto& [name, t] : tensors)
    for (double v : t.values()) w.f64(v);
  return std::move(w.buffer());
}

NamedTensors decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes);
  if (r.bytes(kMagic.size()) != kMagic) throw FormatError("not a slicefl checkpoint");
  if (r.u32() != kVersion) throw FormatError("unsupported checkpoint version");
  const std::uint32_t count = r.u32();
  std::vector<std::pair<std::string, Shape>> headers;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.u32());
    const std::uint32_t ndim = r.u32();
    Shape shape(ndim);
    for (auto& d : shape) d = r.u64();
    headers.emplace_back(std::move(name), std::move(shape));
  }
  NamedTensors out;
  for (auto& [name, shape] : headers) {
    const std::size_t n = shape_numel(shape);
    if (r.remaining() < n * 8) throw FormatError("checkpoint body truncated at '" + name + "'");
    std::vector<double> values(n);
    for (double& v : values) v = r.f64();
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint body");
  return out;
}

nlohmann::json checkpoint_manifest(const NamedTensors& tensors, const std::string& binary_name) {
  nlohmann::json entries = nlohmann::json::array();
  std::size_t offset = header_size(tensors);
  for (const auto& [name, t] : tensors) {
    entries.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += 8 * t.numel();
  }
  return {{"format", "slicefl-checkpoint"},
          {"version", kVersion},
          {"binary", binary_name},
          {"byte_order", "little"},
          {"dtype", "f64"},
          {"tensors", entries}};
}

void save_checkpoint(const std::filesystem::path& dir, const std::string& stem,
                     const NamedTensors& tensors) {
  std::filesystem::create_directories(dir);
  const auto bytes = encode_checkpoint(tensors);
  std::ofstream bin(dir / (stem + ".bin"), std::ios::binary);
  bin.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  std::ofstream(dir / (stem + ".json")) << checkpoint_manifest(tensors, stem + ".bin").dump(2) << '\n';
}

NamedTensors load_checkpoint(const std::filesystem::path& bin_path) {
  std::ifstream in(bin_path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + bin_path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace slicefl
