#include "e2edet/pyramid_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>

#include "e2edet/error.hpp"

namespace e2edet {

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class Cursor {
 public:
  explicit Cursor(std::string_view bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }

  void expect(std::string_view lit) {
    if (bytes_.substr(pos_, lit.size()) != lit) {
      throw ParseError(pos_, "expected '" + std::string(lit) + "'");
    }
    pos_ += lit.size();
  }

  std::string_view token() {
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && bytes_[pos_] != ' ' && bytes_[pos_] != '\n') ++pos_;
    if (pos_ == start) throw ParseError(start, "expected a value");
    return bytes_.substr(start, pos_ - start);
  }

  long integer(long min_value) {
    const std::size_t start = pos_;
    const std::string_view t = token();
    long v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
      throw ParseError(start, "expected an integer, got '" + std::string(t) + "'");
    }
    if (v < min_value) {
      throw ParseError(start, "value " + std::to_string(v) + " below minimum " +
                                  std::to_string(min_value));
    }
    return v;
  }

  double real() {
    const std::size_t start = pos_;
    const std::string_view t = token();
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || !std::isfinite(v)) {
      throw ParseError(start, "expected a number, got '" + std::string(t) + "'");
    }
    return v;
  }

  float f32() {
    if (bytes_.size() - pos_ < 4) throw ParseError(pos_, "truncated float data");
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return std::bit_cast<float>(bits);
  }

  bool at_end() const noexcept { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void put_f32(std::string& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

}  // namespace

std::string encode_pyramid(const FeaturePyramid& p) {
  p.validate();
  std::string out = "DFP1 " + std::to_string(p.levels.size()) + "\n";
  for (std::size_t l = 0; l < p.levels.size(); ++l) {
    const Grid& g = p.levels[l];
    out += std::to_string(g.channels) + " " + std::to_string(g.height) + " " +
           std::to_string(g.width) + " " + format_double(p.strides[l]) + "\n";
    for (double v : g.values) put_f32(out, static_cast<float>(v));
  }
  return out;
}

FeaturePyramid decode_pyramid(std::string_view bytes) {
  Cursor cur(bytes);
  cur.expect("DFP1 ");
  const long num_levels = cur.integer(1);
  cur.expect("\n");
  FeaturePyramid p;
  for (long l = 0; l < num_levels; ++l) {
    const long c = cur.integer(1);
    cur.expect(" ");
    const long h = cur.integer(1);
    cur.expect(" ");
    const long w = cur.integer(1);
    cur.expect(" ");
    const std::size_t stride_at = cur.offset();
    const double stride = cur.real();
    if (!(stride > 0.0)) throw ParseError(stride_at, "stride must be positive");
    cur.expect("\n");
    Grid g(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w));
    for (double& v : g.values) {
      const std::size_t at = cur.offset();
      const float f = cur.f32();
      if (!std::isfinite(f)) throw ParseError(at, "non-finite value");
      v = f;
    }
    p.levels.push_back(std::move(g));
    p.strides.push_back(stride);
  }
  if (!cur.at_end()) throw ParseError(cur.offset(), "trailing bytes after last level");
  p.validate();
  return p;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(path.string(), "read failed");
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

void write_pyramid(const std::filesystem::path& path, const FeaturePyramid& p) {
  write_file(path, encode_pyramid(p));
}

FeaturePyramid read_pyramid(const std::filesystem::path& path) {
  return decode_pyramid(read_file(path));
}

std::string encode_pgm(const Grid& g) {
  std::vector<double> peak(static_cast<std::size_t>(g.height) * static_cast<std::size_t>(g.width),
                           0.0);
  for (int c = 0; c < g.channels; ++c) {
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x) {
        double& p = peak[static_cast<std::size_t>(y) * static_cast<std::size_t>(g.width) +
                         static_cast<std::size_t>(x)];
        p = std::max(p, g.at(c, y, x));
      }
    }
  }
  const double top = peak.empty() ? 0.0 : *std::max_element(peak.begin(), peak.end());
  std::string out =
      "P5\n" + std::to_string(g.width) + " " + std::to_string(g.height) + "\n255\n";
  for (double v : peak) {
    const double scaled = top > 0.0 ? std::round(255.0 * v / top) : 0.0;
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::clamp(scaled, 0.0, 255.0))));
  }
  return out;
}

std::vector<std::filesystem::path> write_heatmaps(const FeaturePyramid& p,
                                                  const std::filesystem::path& dir,
                                                  const std::string& prefix) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
  std::vector<std::filesystem::path> paths;
  for (std::size_t l = 0; l < p.levels.size(); ++l) {
    const auto path = dir / (prefix + "_L" + std::to_string(l) + ".pgm");
    write_file(path, encode_pgm(p.levels[l]));
    paths.push_back(path);
  }
  return paths;
}

}  // namespace e2edet
