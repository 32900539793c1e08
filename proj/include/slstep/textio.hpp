// Plain-text artifact I/O: key/value files, CSV, hashing, atomic writes.
//
// Every on-disk artifact uses decimal floating point with 17 significant
// digits so that parse -> emit round-trips are bit exact.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace slstep {

// Shortest-exact decimal for a double (17 significant digits).
std::string format_double(double v);
double parse_double(const std::string& s);

// FNV-1a 64-bit over a byte string.
std::uint64_t fnv1a64(const std::string& bytes);
std::string hash_hex(std::uint64_t h);

// Flat key/value text file: one "key = v0 v1 ..." per line, '#' comments.
// Keys keep file order for writing; lookup is by exact key.
class KvFile {
 public:
  void set(const std::string& key, const std::string& value);
  void set_doubles(const std::string& key, const std::vector<double>& values);
  void set_int(const std::string& key, long long v);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;  // throws if missing
  std::vector<double> get_doubles(const std::string& key) const;
  long long get_int(const std::string& key) const;

  std::string serialize() const;
  static KvFile parse(const std::string& text);

  void save(const std::string& path) const;
  static KvFile load(const std::string& path);

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

// Writes content to path via a temp file + rename.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// Splits on whitespace.
std::vector<std::string> split_tokens(const std::string& s);

}  // namespace slstep
