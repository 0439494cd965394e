#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "smpconv/smp.hpp"

namespace smp {

// JSON document with dim, channels, n_points, positions (n_points x dim),
// weights (n_points x channels), radii, radius_min and radius_max.
nlohmann::json filter_to_json(const SmpFilter& filter);

/// Validates every field and all filter invariants; throws ContractError.
SmpFilter filter_from_json(const nlohmann::json& doc);

void save_checkpoint(const SmpFilter& filter, const std::filesystem::path& path);
SmpFilter load_checkpoint(const std::filesystem::path& path);

}  // namespace smp
