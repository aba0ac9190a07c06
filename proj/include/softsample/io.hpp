#pragma once

#include <string>

namespace softsample {

// Throws DataError when the file cannot be read.
std::string read_text_file(const std::string& path);

// Writes via a temp file in the same directory followed by a rename, so a
// reader never observes a partial file.
void write_text_file_atomic(const std::string& path,
                            const std::string& content);

// FNV-1a 64-bit digest of the file bytes, as 16 lowercase hex chars.
std::string file_digest_hex(const std::string& path);

// Fixed formatting for CSV cells: '.' decimal separator, up to 6 significant
// digits, no thousands separators.
std::string format_g6(double value);

}  // namespace softsample
