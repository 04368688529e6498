#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace memerl {

std::vector<std::string> split_whitespace(std::string_view text);
std::string to_lower(std::string_view text);
std::string_view trim(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// printf-style formatting into a std::string.
std::string strprintf(const char* fmt, ...) __attribute__((format(printf, 1, 2)));

/// Shortest text that parses back to the same double.
std::string format_double(double value);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data);

/// Mixes several integers into one well-distributed 64-bit seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

/// Uniform double in [0, 1) from 53 random bits; portable across standard libraries.
template <typename Engine>
double uniform01(Engine& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

std::vector<std::string> split_csv_line(std::string_view line);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace memerl
