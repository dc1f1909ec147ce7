// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "slicefl/tensor.hpp"

namespace slicefl {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Flat checkpoint layout, all integers little-endian:
///
///   magic        8 bytes  "SFLCKPT1"
///   version      u32      1
///   count        u32      number of tensors
///   count x {    u32 name_len, name bytes (UTF-8),
///                u32 ndim, ndim x u64 dims }
///   body         row-major IEEE-754 f64 values of each tensor, in header order
std::vector<std::uint8_t> encode_checkpoint(const NamedTensors& tensors);
NamedTensors decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Manifest listing name, shape and body byte offset of every tensor.
nlohmann::json checkpoint_manifest(const NamedTensors& tensors, const std::string& binary_name);

/// Writes `<stem>.bin` and `<stem>.json` into `dir`.
void save_checkpoint(const std::filesystem::path& dir, const std::string& stem,
                     const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& bin_path);

}  // namespace slicefl
