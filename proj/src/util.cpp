#include "vio/util.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vio {

uint64_t hash_u64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t hash_combine(uint64_t a, uint64_t b) {
  return hash_u64(a ^ (hash_u64(b) + 0x9e3779b97f4a7c15ull + (a << 6)));
}

int Rng::uniform_int(int lo, int hi) {
  const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(gen_() % span);
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 1e-300);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

VecX Rng::unit_vector(int dim) {
  VecX v(dim);
  double n2 = 0.0;
  do {
    for (int i = 0; i < dim; ++i) v[i] = gaussian();
    n2 = v.squaredNorm();
  } while (n2 < 1e-12);
  return v / std::sqrt(n2);
}

std::vector<int> Rng::permutation(int n) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = uniform_int(0, i);
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& context) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error(context + ": cannot parse number '" +
                             std::string(s) + "'");
  }
  return v;
}

int64_t parse_i64(std::string_view s, const std::string& context) {
  int64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error(context + ": cannot parse integer '" +
                             std::string(s) + "'");
  }
  return v;
}

struct CsvWriter::Impl {
  std::ofstream out;
  std::string path;
};

CsvWriter::CsvWriter(const std::string& path, const std::string& header)
    : impl_(new Impl) {
  impl_->out.open(path, std::ios::binary);
  impl_->path = path;
  if (!impl_->out) {
    throw std::runtime_error("cannot open " + path + " for writing");
  }
  impl_->out << header << "\n";
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::row(const std::vector<std::string>& fields) {
  std::string line;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += fields[i];
  }
  impl_->out << line << "\n";
}

void CsvWriter::raw_line(const std::string& line) {
  impl_->out << line << "\n";
}

static std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

CsvFile read_csv(const std::string& path, int expected_fields) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    // Report just the basename so callers see e.g. "imu.csv not found".
    const auto slash = path.find_last_of('/');
    const std::string base =
        slash == std::string::npos ? path : path.substr(slash + 1);
    throw std::runtime_error(base + " not found (looked in " + path + ")");
  }
  CsvFile file;
  file.path = path;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
        line.pop_back();
      }
      file.header = line;
      continue;
    }
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (expected_fields > 0 &&
        static_cast<int>(fields.size()) != expected_fields) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(expected_fields) +
                               " fields, got " + std::to_string(fields.size()));
    }
    file.rows.push_back(std::move(fields));
    file.line_numbers.push_back(line_no);
  }
  return file;
}

void write_pgm(const std::string& path, int width, int height,
               const std::vector<uint8_t>& pixels) {
  if (static_cast<int>(pixels.size()) != width * height) {
    throw std::invalid_argument("write_pgm: pixel buffer size mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), pixels.size());
}

std::vector<uint8_t> read_pgm(const std::string& path, int* width,
                              int* height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + " not found");
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255 || w <= 0 || h <= 0) {
    throw std::runtime_error(path + ": not a binary P5 PGM with maxval 255");
  }
  in.get();  // single whitespace after maxval
  std::vector<uint8_t> pixels(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(pixels.data()), pixels.size());
  if (!in) throw std::runtime_error(path + ": truncated pixel data");
  *width = w;
  *height = h;
  return pixels;
}

std::vector<std::pair<std::string, std::string>> read_kv_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + " not found");
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
      line.pop_back();
    }
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t");
    line = line.substr(b, e - b + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected key=value");
    }
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto b2 = s.find_first_not_of(" \t");
      const auto e2 = s.find_last_not_of(" \t");
      s = b2 == std::string::npos ? "" : s.substr(b2, e2 - b2 + 1);
    };
    trim(key);
    trim(val);
    kv.emplace_back(key, val);
  }
  return kv;
}

void write_kv_file(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
}

}  // namespace vio
