#pragma once

#include <iosfwd>
#include <nlohmann/json.hpp>
#include <string>

namespace dfr::cmd {

inline constexpr const char* kToolVersion = "0.1.0";

// 64-bit FNV-1a; content fingerprint for manifests (not cryptographic).
uint64_t fnv1a64(std::string_view bytes);
std::string file_hash_hex(const std::string& path);

// Each command validates its config (unknown keys rejected, errors name the
// JSON path), writes its artifacts plus a manifest.json under out_dir, and
// returns a summary. The DFR_SEED environment variable, when set, overrides
// the config's "seed".
nlohmann::json cmd_generate(nlohmann::json config);
nlohmann::json cmd_train_erm(nlohmann::json config);
nlohmann::json cmd_extract(nlohmann::json config);
nlohmann::json cmd_dfr(nlohmann::json config);
nlohmann::json cmd_evaluate(nlohmann::json config);
nlohmann::json cmd_sweep(nlohmann::json config);
nlohmann::json cmd_verify(nlohmann::json config, std::ostream& log);

// Dispatch by name; prints the summary to `out` and a machine-readable error
// JSON to `err` on failure. Returns the process exit code.
int run_command(const std::string& name, const nlohmann::json& config,
                std::ostream& out, std::ostream& err);

nlohmann::json load_config_file(const std::string& path);

}  // namespace dfr::cmd
