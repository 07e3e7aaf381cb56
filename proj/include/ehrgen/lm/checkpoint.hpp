#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "ehrgen/lm/model.hpp"

namespace ehrgen::lm {

inline constexpr int kCheckpointFormatVersion = 1;

// Layout: "EHRGCKPT", u32 format version, u64 manifest length, JSON manifest
// (config, step, tensor table, payload size and SHA-256, caller metadata),
// then parameters, Adam m and Adam v as little-endian float32.
void save_checkpoint(const std::string& path, const Model& model, const nlohmann::json& metadata);

// Throws VersionError on an unknown version; Error on a corrupt or truncated
// file, a tensor table that does not match the config, or (when given) a
// vocabulary size different from `expected_vocab`.
Model load_checkpoint(const std::string& path, std::optional<std::size_t> expected_vocab = std::nullopt);

// The manifest alone, without reading the payload.
nlohmann::json read_checkpoint_manifest(const std::string& path);

}  // namespace ehrgen::lm
