// Small file I/O helpers: whole-file read, atomic write (temp + rename),
// and round-trip-exact formatting of doubles for text formats.
#pragma once

#include <filesystem>
#include <string>

namespace bcgauth {

std::string read_text_file(const std::filesystem::path& path);

// Writes to a temp file in the same directory, then renames into place.
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);

// Shortest decimal form that parses back to the identical double (%.17g).
std::string format_double(double value);

}  // namespace bcgauth
