#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "wcgnn/scenario.hpp"

namespace wcgnn {

inline constexpr int kDatasetFormatVersion = 1;

/// Binary dataset file (".wcds"):
///
///   line 1: JSON header terminated by '\n'
///           {"magic":"wcgnn-dataset","version":1,"config":{...},
///            "num_samples":n,"num_pairs":K,"num_tx_antennas":Nt,
///            "record_doubles":R}
///   then n records of R = 4K + 2K^2 Nt + 2K little-endian float64 values:
///     tx[K][2] (x, y), rx[K][2] (x, y),
///     h[j][k][n][2] (re, im) for transmitter j, receiver k, antenna n,
///     weights[K], noise[K]
void save_dataset_binary(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset_binary(const std::filesystem::path& path);

// Pure JSON form for small sets and debugging.
nlohmann::json dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(const nlohmann::json& j);

// Dispatch on extension: ".json" uses the JSON form, anything else binary.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace wcgnn
