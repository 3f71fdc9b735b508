#pragma once

#include <filesystem>

#include <json.hpp>

#include "spinecho/coherence.hpp"

namespace spinecho {

/// Sidecar path of a curve CSV: "x.csv" -> "x.meta.json".
std::filesystem::path curve_sidecar_path(const std::filesystem::path& csv_path);

/// CSV columns t_ms, L_real, L_imag (full double precision) plus a JSON
/// metadata sidecar. `provenance`, when given, is embedded verbatim in the
/// sidecar (run config and code version).
void save_curve(const CoherenceCurve& curve, const std::filesystem::path& csv_path,
                const nlohmann::ordered_json* provenance = nullptr);

/// Loads the CSV and sidecar; the sidecar is required.
CoherenceCurve load_curve(const std::filesystem::path& csv_path);

} // namespace spinecho
