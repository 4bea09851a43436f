#pragma once

#include "vio/types.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace vio {

// splitmix64 finalizer; used to derive independent seeds from (seed, id...)
// tuples so that per-entity noise does not depend on iteration order.
uint64_t hash_u64(uint64_t x);
uint64_t hash_combine(uint64_t a, uint64_t b);

// Deterministic RNG. Gaussian draws use Box-Muller on explicit uniforms so
// output does not depend on the standard library's distribution.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }
  // [0, 1)
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi);  // inclusive range
  double gaussian();
  Vec3 gaussian3() { return Vec3(gaussian(), gaussian(), gaussian()); }
  // Uniformly distributed unit vector of the given dimension.
  VecX unit_vector(int dim);
  // Fisher-Yates shuffle of indices [0, n).
  std::vector<int> permutation(int n);

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Shortest round-trip decimal representation (std::to_chars).
std::string format_double(double v);
double parse_double(std::string_view s, const std::string& context);
int64_t parse_i64(std::string_view s, const std::string& context);

// Minimal CSV support: comma-separated, one header row, '.' decimal.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& header);
  ~CsvWriter();
  void row(const std::vector<std::string>& fields);
  void raw_line(const std::string& line);

 private:
  struct Impl;
  Impl* impl_;
};

struct CsvFile {
  std::string path;
  std::string header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // 1-based source line per row
};

// Reads the whole file; throws std::runtime_error naming file and line on
// missing files or malformed rows (when expected_fields > 0).
CsvFile read_csv(const std::string& path, int expected_fields = -1);

// Binary P5 PGM, maxval 255.
void write_pgm(const std::string& path, int width, int height,
               const std::vector<uint8_t>& pixels);
std::vector<uint8_t> read_pgm(const std::string& path, int* width,
                              int* height);

// Flat key=value config text ('#' comments, blank lines ignored).
std::vector<std::pair<std::string, std::string>> read_kv_file(
    const std::string& path);
void write_kv_file(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& kv);

}  // namespace vio
