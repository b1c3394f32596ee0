#pragma once

#include <cstdint>
#include <string>

namespace qnet {

// Shortest round-trip decimal form of a double (std::to_chars); stable
// across runs, which keeps CSV outputs byte-identical under replay.
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);
void ensure_directory(const std::string& path);

// FNV-1a 64-bit content checksum, hex-encoded.
std::string fnv1a64_hex(const std::string& content);

}  // namespace qnet
