#include "recon/manifest.hpp"

#include <fstream>
#include <sstream>

#include "recon/errors.hpp"
#include "recon/rng.hpp"

namespace recon {

std::string hash_hex(std::uint64_t h) {
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("file_hash_hex: cannot open " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  }
  return hash_hex(h);
}

nlohmann::json make_manifest(const std::string& command, const std::vector<std::string>& inputs,
                             const std::vector<std::string>& outputs, std::uint64_t seed,
                             const std::string& config_hash) {
  nlohmann::json in_hashes = nlohmann::json::object();
  for (const auto& p : inputs) in_hashes[p] = file_hash_hex(p);
  nlohmann::json out_hashes = nlohmann::json::object();
  for (const auto& p : outputs) out_hashes[p] = file_hash_hex(p);
  return {{"version", kToolVersion},
          {"command", command},
          {"seed", seed},
          {"config_hash", config_hash},
          {"inputs", in_hashes},
          {"outputs", out_hashes}};
}

void write_manifest(const nlohmann::json& manifest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_manifest: cannot open " + path);
  out << manifest.dump(2) << "\n";
}

}  // namespace recon
