#include "spxnet/formats.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "binary_io.hpp"
#include "spxnet/errors.hpp"
#include "spxnet/weights_io.hpp"

namespace spxnet {

namespace {

constexpr std::int64_t kMaxDim = 1 << 16;

void check_dims(std::int64_t w, std::int64_t h, std::size_t bytes_per_pixel, std::size_t available, const char* what) {
  if (w <= 0 || h <= 0) throw FormatError(std::string(what) + ": non-positive dimensions");
  if (w > kMaxDim || h > kMaxDim) throw FormatError(std::string(what) + ": dimensions exceed limit");
  const auto needed = static_cast<std::uint64_t>(w) * static_cast<std::uint64_t>(h) * bytes_per_pixel;
  if (needed > available) throw FormatError(std::string(what) + ": payload truncated");
}

// Whitespace-separated header tokens of the netpbm family, with '#'
// comments running to the end of the line.
class HeaderScanner {
 public:
  explicit HeaderScanner(std::string_view bytes) : bytes_(bytes) {}

  std::string token(bool allow_comments) {
    skip_space(allow_comments);
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_])) && out.size() < 64) {
      out.push_back(bytes_[pos_++]);
    }
    if (out.empty()) throw FormatError("header truncated");
    return out;
  }

  std::int64_t integer(bool allow_comments) {
    const std::string t = token(allow_comments);
    for (char c : t) {
      if (!std::isdigit(static_cast<unsigned char>(c))) throw FormatError("header field '" + t + "' is not an integer");
    }
    if (t.size() > 9) throw FormatError("header field '" + t + "' too large");
    return std::stoll(t);
  }

  // Exactly one whitespace byte separates the header from the payload.
  void end_of_header() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw FormatError("header not terminated by whitespace");
    }
    ++pos_;
  }

  std::size_t position() const { return pos_; }

 private:
  void skip_space(bool allow_comments) {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (allow_comments && c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t swap_bytes(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xFF00u) | ((v << 8) & 0xFF0000u) | (v << 24);
}

void check_image(const Tensor& t, std::initializer_list<int> channels, const char* what) {
  const Shape s = t.shape();
  bool ok = s.n == 1;
  bool ch = false;
  for (int c : channels) ch = ch || s.c == c;
  if (!ok || !ch) throw ShapeError(std::string(what) + ": unsupported tensor shape " + s.str());
}

}  // namespace

std::string encode_flo(const Tensor& flow) {
  check_image(flow, {2}, "flo");
  const Shape s = flow.shape();
  detail::ByteWriter w;
  w.f32(kFloMagic);
  w.i32(s.w);
  w.i32(s.h);
  const auto d = flow.data();
  for (std::size_t i = 0; i < s.plane(); ++i) {
    w.f32(d[i]);
    w.f32(d[s.plane() + i]);
  }
  return w.take();
}

Tensor decode_flo(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.remaining() < 12) throw FormatError("flo: header truncated");
  const float magic = r.f32();
  if (magic != kFloMagic) throw FormatError("flo: bad magic");
  const std::int64_t w = r.i32();
  const std::int64_t h = r.i32();
  check_dims(w, h, 8, r.remaining(), "flo");
  const std::size_t plane = static_cast<std::size_t>(w * h);
  std::vector<float> values(2 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    values[i] = r.f32();
    values[plane + i] = r.f32();
  }
  return Tensor::from({1, 2, static_cast<int>(h), static_cast<int>(w)}, std::move(values));
}

Tensor read_flo(const std::filesystem::path& path) { return decode_flo(read_file(path)); }
void write_flo(const Tensor& flow, const std::filesystem::path& path) { atomic_write(path, encode_flo(flow)); }

std::string encode_pfm(const Tensor& image, bool little_endian) {
  check_image(image, {1, 3}, "pfm");
  const Shape s = image.shape();
  std::string out = (s.c == 1 ? "Pf\n" : "PF\n") + std::to_string(s.w) + " " + std::to_string(s.h) + "\n" +
                    (little_endian ? "-1.0" : "1.0") + "\n";
  const auto d = image.data();
  detail::ByteWriter w;
  for (int y = s.h - 1; y >= 0; --y) {
    for (int x = 0; x < s.w; ++x) {
      for (int c = 0; c < s.c; ++c) {
        const auto bits = std::bit_cast<std::uint32_t>(d[(static_cast<std::size_t>(c) * s.h + y) * s.w + x]);
        w.u32(little_endian ? bits : swap_bytes(bits));
      }
    }
  }
  return out + w.take();
}

Tensor decode_pfm(std::string_view bytes) {
  HeaderScanner scan(bytes);
  const std::string magic = scan.token(false);
  int channels = 0;
  if (magic == "Pf") {
    channels = 1;
  } else if (magic == "PF") {
    channels = 3;
  } else {
    throw FormatError("pfm: bad magic");
  }
  const std::int64_t w = scan.integer(false);
  const std::int64_t h = scan.integer(false);
  const std::string scale_text = scan.token(false);
  char* end = nullptr;
  const double scale = std::strtod(scale_text.c_str(), &end);
  if (end != scale_text.c_str() + scale_text.size() || !std::isfinite(scale) || scale == 0.0) {
    throw FormatError("pfm: invalid scale '" + scale_text + "'");
  }
  scan.end_of_header();
  const bool little_endian = scale < 0.0;
  detail::ByteReader r(bytes.substr(scan.position()));
  check_dims(w, h, 4 * static_cast<std::size_t>(channels), r.remaining(), "pfm");
  const int hi = static_cast<int>(h);
  const int wi = static_cast<int>(w);
  std::vector<float> values(static_cast<std::size_t>(channels) * hi * wi);
  for (int y = hi - 1; y >= 0; --y) {
    for (int x = 0; x < wi; ++x) {
      for (int c = 0; c < channels; ++c) {
        values[(static_cast<std::size_t>(c) * hi + y) * wi + x] = little_endian ? r.f32() : r.f32_big_endian();
      }
    }
  }
  return Tensor::from({1, channels, hi, wi}, std::move(values));
}

Tensor read_pfm(const std::filesystem::path& path) { return decode_pfm(read_file(path)); }
void write_pfm(const Tensor& image, const std::filesystem::path& path, bool little_endian) {
  atomic_write(path, encode_pfm(image, little_endian));
}

std::uint8_t quantize_unit(float x) {
  if (!(x > 0.0f)) return 0;
  if (x >= 1.0f) return 255;
  return static_cast<std::uint8_t>(std::lround(255.0 * x));
}

std::string encode_pnm(const Tensor& image) {
  check_image(image, {1, 3}, "pnm");
  const Shape s = image.shape();
  std::string out = (s.c == 1 ? "P5\n" : "P6\n") + std::to_string(s.w) + " " + std::to_string(s.h) + "\n255\n";
  const auto d = image.data();
  out.reserve(out.size() + s.numel());
  for (std::size_t i = 0; i < s.plane(); ++i) {
    for (int c = 0; c < s.c; ++c) out.push_back(static_cast<char>(quantize_unit(d[c * s.plane() + i])));
  }
  return out;
}

Tensor decode_pnm(std::string_view bytes) {
  HeaderScanner scan(bytes);
  const std::string magic = scan.token(true);
  int channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw FormatError("pnm: unsupported magic '" + magic.substr(0, 8) + "'");
  }
  const std::int64_t w = scan.integer(true);
  const std::int64_t h = scan.integer(true);
  const std::int64_t maxval = scan.integer(true);
  if (maxval != 255) throw FormatError("pnm: unsupported maxval " + std::to_string(maxval));
  scan.end_of_header();
  const std::string_view payload = bytes.substr(scan.position());
  check_dims(w, h, static_cast<std::size_t>(channels), payload.size(), "pnm");
  const std::size_t plane = static_cast<std::size_t>(w * h);
  std::vector<float> values(plane * channels);
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < channels; ++c) {
      values[c * plane + i] = static_cast<float>(static_cast<unsigned char>(payload[i * channels + c])) / 255.0f;
    }
  }
  return Tensor::from({1, channels, static_cast<int>(h), static_cast<int>(w)}, std::move(values));
}

namespace {

Tensor read_pnm_channels(const std::filesystem::path& path, int channels) {
  Tensor t = decode_pnm(read_file(path));
  if (t.shape().c != channels) {
    throw FormatError(path.string() + ": expected " + (channels == 3 ? "a P6" : "a P5") + " image");
  }
  return t;
}

}  // namespace

Tensor read_ppm(const std::filesystem::path& path) { return read_pnm_channels(path, 3); }
Tensor read_pgm(const std::filesystem::path& path) { return read_pnm_channels(path, 1); }

void write_ppm(const Tensor& image, const std::filesystem::path& path) {
  check_image(image, {3}, "ppm");
  atomic_write(path, encode_pnm(image));
}

void write_pgm(const Tensor& image, const std::filesystem::path& path) {
  check_image(image, {1}, "pgm");
  atomic_write(path, encode_pnm(image));
}

}  // namespace spxnet
