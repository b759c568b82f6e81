#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <stdexcept>
#include <string_view>

namespace rffpsr {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest-exact decimal form capped at 17 significant digits; parses back bit-identically.
std::string format_double(double v);
double parse_double(std::string_view s);

/// 64-bit FNV-1a; used for content hashes in reports.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace rffpsr
