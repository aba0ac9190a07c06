#include "softsample/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include "softsample/error.hpp"
#include "softsample/random.hpp"

namespace softsample {

namespace fs = std::filesystem;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw DataError("error while reading file: " + path);
  return ss.str();
}

void write_text_file_atomic(const std::string& path,
                            const std::string& content) {
  fs::path target(path);
  fs::path dir = target.parent_path();
  if (!dir.empty()) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open file for writing: " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw DataError("error while writing file: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError("cannot move " + tmp.string() + " to " + path + ": " + ec.message());
  }
}

std::string file_digest_hex(const std::string& path) {
  std::string bytes = read_text_file(path);
  return to_hex(fnv1a64(bytes));
}

std::string format_g6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

}  // namespace softsample
