#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace sdmlmc::cli {

// Flat key/value configuration. Every key has a default; anything else is a
// configuration error.
using KeyValues = std::map<std::string, std::string>;

KeyValues default_config();

// Merge `key = value` lines ('#' comments, blank lines allowed) on top of kv.
void merge_config_stream(KeyValues& kv, std::istream& in, const std::string& origin);
void merge_config_file(KeyValues& kv, const std::string& path);
// Merge one `key=value` command-line override.
void merge_override(KeyValues& kv, const std::string& spec);

// Execute one subcommand (run, calibrate-beta, calibrate-gamma, compare,
// dump-field, dump-mesh) with a fully merged configuration, writing the
// subcommand's files plus manifest.json into `outdir`.
void run_command(const std::string& command, const KeyValues& kv, const std::string& outdir);

// Wrapper used by the executable: merges defaults, optional config file and
// overrides, runs the command, and maps exceptions to exit codes
// (0 success, 2 configuration error, 3 solver failure).
int dispatch(const std::string& command, const std::string& config_path,
             const std::vector<std::string>& overrides, const std::string& outdir,
             std::ostream& err);

}  // namespace sdmlmc::cli
