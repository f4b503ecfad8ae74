#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tsgzsl/tensor.hpp"

namespace tsgzsl::core {

using NamedTensors = std::vector<std::pair<std::string, TensorPtr>>;

/// Flat binary container: magic "MODC", u32 version, u32 tensor count, then
/// per tensor: u32 name length, name bytes, u32 rank, u64 dims, and the
/// values as little-endian 64-bit floats.
void save_tensors(const std::string& path, const NamedTensors& tensors);

NamedTensors load_tensors(const std::string& path);

/// Loads a container into an existing parameter list, checking that names
/// and shapes line up exactly.
void load_into(const std::string& path, const NamedTensors& params);

}  // namespace tsgzsl::core
