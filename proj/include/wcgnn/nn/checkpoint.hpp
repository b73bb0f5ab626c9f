#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "wcgnn/nn/tensor.hpp"

namespace wcgnn::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary tensor checkpoint:
///   8 bytes  magic "WCGNNCKP"
///   u32      format version
///   u32      tensor count n
///   n x (u64 rows, u64 cols)   shape table
///   all tensor buffers, row-major little-endian float64, in table order
/// A JSON sidecar at <path>.json carries `meta` (widths, beta, ...).
void save_tensors(const std::filesystem::path& path, const std::vector<const Tensor*>& tensors,
                  const nlohmann::json& meta);

struct LoadedTensors {
    std::vector<Tensor> tensors;
    nlohmann::json meta;
};

LoadedTensors load_tensors(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace wcgnn::nn
