#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace cyclelr {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration (specs, config files, CLI flags).
struct ConfigError : Error {
    using Error::Error;
};

// Non-finite loss or gradient during training.
struct DivergenceError : Error {
    DivergenceError(const std::string& msg, long long step) : Error(msg), step_index(step) {}
    long long step_index = -1;
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

inline void check_config(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

// Shortest decimal string that round-trips through a 64-bit double.
std::string fmt_double(double v);

std::string read_file(const std::filesystem::path& path);

// Writes to a temporary sibling file and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

} // namespace cyclelr
