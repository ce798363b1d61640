#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace recon {

inline constexpr const char* kToolVersion = "recon 0.1.0";

// FNV-1a of the file bytes, hex encoded. Cheap integrity stamp for manifests.
std::string file_hash_hex(const std::string& path);

std::string hash_hex(std::uint64_t h);

// Every subcommand records what it read, what it wrote (with hashes), the
// seed, and a hash of its own argument string, so a run directory is
// self-describing.
nlohmann::json make_manifest(const std::string& command, const std::vector<std::string>& inputs,
                             const std::vector<std::string>& outputs, std::uint64_t seed,
                             const std::string& config_hash);

void write_manifest(const nlohmann::json& manifest, const std::string& path);

}  // namespace recon
