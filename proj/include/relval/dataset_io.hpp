#pragma once

#include <string>

#include "relval/data_model.hpp"

namespace relval {

/// Provenance stamped on every artifact this tool writes.
struct Provenance {
    std::string config_digest;  // hex FNV-1a of the canonical config JSON
    std::uint64_t seed = 0;
    std::string tool_version;
};

std::string tool_version();

/// FNV-1a digest of an arbitrary string (canonical config serializations).
std::string digest_string(const std::string& text);

// Dataset file format: CSV (header: id, features in schema order, targets,
// duration, dxs, last_trade_offset_days) plus a JSON sidecar that declares
// feature kinds, target names, and units.
void save_dataset(const Dataset& dataset, const std::string& csv_path,
                  const std::string& sidecar_path, const Provenance& prov);

Dataset load_dataset(const std::string& csv_path, const std::string& sidecar_path);

}  // namespace relval
