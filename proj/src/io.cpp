// SPDX-License-Identifier: Apache-2.0
#include "transgan/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "transgan/rng.hpp"

TRANSGAN_BEGIN_NAMESPACE

namespace fs = std::filesystem;

// ---------------------------------------------------------------------- files

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

// ------------------------------------------------------------------ datasets

CifarData decode_cifar10(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw FormatError("CIFAR-10: empty file");
  if (bytes.size() % kCifarRecordBytes != 0)
    throw FormatError("CIFAR-10: truncated record (file length " + std::to_string(bytes.size()) +
                      " is not a multiple of 3073)");
  const auto n = bytes.size() / kCifarRecordBytes;
  constexpr auto plane = kCifarSide * kCifarSide;
  std::vector<Real> pixels(n * plane * 3);
  std::vector<std::uint8_t> labels(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto* rec = bytes.data() + r * kCifarRecordBytes;
    labels[r] = rec[0];
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t p = 0; p < plane; ++p)
        pixels[(r * plane + p) * 3 + ch] =
            static_cast<Real>(rec[1 + ch * plane + p]) / static_cast<Real>(127.5) - 1;
  }
  return {Tensor(Shape{n, kCifarSide, kCifarSide, 3}, std::move(pixels)), std::move(labels)};
}

CifarData read_cifar10_binary(const fs::path& path) { return decode_cifar10(read_file(path)); }

CifarData read_cifar10_directory(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with("data_batch_") && name.ends_with(".bin")) files.push_back(entry.path());
  }
  if (files.empty()) throw FormatError("no data_batch_*.bin files in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<std::uint8_t> all;
  for (const auto& f : files) {
    auto bytes = read_file(f);
    if (bytes.size() % kCifarRecordBytes != 0)
      throw FormatError("CIFAR-10: truncated record in " + f.string());
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  return decode_cifar10(all);
}

namespace {

using Color = std::array<double, 3>;

constexpr std::array<Color, 6> kPalette{{{0.9, -0.6, -0.6},
                                         {-0.6, 0.8, -0.5},
                                         {-0.5, -0.4, 0.9},
                                         {0.9, 0.8, -0.7},
                                         {-0.8, -0.8, -0.8},
                                         {0.8, 0.8, 0.8}}};

Color jittered(Rng& rng) {
  Color c = kPalette[static_cast<std::size_t>(rng.uniform_int(0, kPalette.size() - 1))];
  for (auto& v : c) v = std::clamp(v + rng.uniform(-0.1, 0.1), -1.0, 1.0);
  return c;
}

}  // namespace

Tensor synth_dataset(std::string_view kind, std::size_t n, std::size_t resolution,
                     std::uint64_t seed) {
  if (kind != "shapes" && kind != "rects" && kind != "ellipses")
    throw std::invalid_argument("synth_dataset: unknown kind '" + std::string(kind) + "'");
  if (n == 0 || resolution == 0) throw std::invalid_argument("synth_dataset: empty request");
  Rng rng(seed);
  const auto res = static_cast<double>(resolution);
  std::vector<Real> pixels(n * resolution * resolution * 3);
  for (std::size_t i = 0; i < n; ++i) {
    const Color top = jittered(rng), bottom = jittered(rng);
    const Color left = jittered(rng), right = jittered(rng);
    bool ellipse = kind == "ellipses";
    if (kind == "shapes") ellipse = rng.uniform() < 0.5;
    const double cy = rng.uniform(0.3, 0.7) * res, cx = rng.uniform(0.3, 0.7) * res;
    const double ry = rng.uniform(0.15, 0.3) * res, rx = rng.uniform(0.15, 0.3) * res;
    for (std::size_t y = 0; y < resolution; ++y) {
      const double ty = resolution > 1 ? double(y) / (res - 1) : 0.0;
      for (std::size_t x = 0; x < resolution; ++x) {
        const double tx = resolution > 1 ? double(x) / (res - 1) : 0.0;
        const double py = double(y) + 0.5 - cy, px = double(x) + 0.5 - cx;
        const bool inside = ellipse ? (py * py) / (ry * ry) + (px * px) / (rx * rx) <= 1.0
                                    : std::abs(py) <= ry && std::abs(px) <= rx;
        Real* dst = pixels.data() + ((i * resolution + y) * resolution + x) * 3;
        for (std::size_t c = 0; c < 3; ++c) {
          const double v = inside ? (1 - tx) * left[c] + tx * right[c]
                                  : (1 - ty) * top[c] + ty * bottom[c];
          dst[c] = static_cast<Real>(std::clamp(v, -1.0, 1.0));
        }
      }
    }
  }
  return Tensor(Shape{n, resolution, resolution, 3}, std::move(pixels));
}

// -------------------------------------------------------------------- images

std::uint8_t pixel_to_byte(Real v) {
  if (std::isnan(v)) return 0;
  const double scaled = std::round((static_cast<double>(v) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

std::vector<std::uint8_t> encode_ppm_grid(const Tensor& images, std::size_t cols) {
  if (cols == 0) throw std::invalid_argument("ppm grid: cols must be at least 1");
  const bool single = images.rank() == 3;
  if ((!single && images.rank() != 4) || images.shape().back() != 3)
    throw DimensionError("ppm grid: expected [B,H,W,3] images, got " +
                         shape_to_string(images.shape()));
  const std::size_t count = single ? 1 : images.dim(0);
  const std::size_t h = images.dim(single ? 0 : 1), w = images.dim(single ? 1 : 2);
  constexpr std::size_t gutter = 2;
  const std::size_t grid_cols = std::min(cols, count);
  const std::size_t grid_rows = (count + cols - 1) / cols;
  const std::size_t width = grid_cols * w + (grid_cols - 1) * gutter;
  const std::size_t height = grid_rows * h + (grid_rows - 1) * gutter;

  const std::string header =
      "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const std::size_t payload = out.size();
  out.resize(payload + width * height * 3, 0);
  auto src = images.data();
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t oy = (k / cols) * (h + gutter), ox = (k % cols) * (w + gutter);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t c = 0; c < 3; ++c)
          out[payload + ((oy + y) * width + ox + x) * 3 + c] =
              pixel_to_byte(src[((k * h + y) * w + x) * 3 + c]);
  }
  return out;
}

void write_ppm_grid(const Tensor& images, std::size_t cols, const fs::path& path) {
  write_file_atomic(path, encode_ppm_grid(images, cols));
}

Tensor read_ppm(const fs::path& path) {
  const auto bytes = read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t += static_cast<char>(bytes[pos++]);
    return t;
  };
  if (token() != "P6") throw FormatError(path.string() + ": not a binary PPM (P6)");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed PPM header");
  }
  if (maxval != 255 || w == 0 || h == 0) throw FormatError(path.string() + ": unsupported PPM");
  ++pos;  // single whitespace after maxval
  if (bytes.size() < pos + w * h * 3) throw FormatError(path.string() + ": truncated PPM payload");
  std::vector<Real> pixels(w * h * 3);
  for (std::size_t i = 0; i < pixels.size(); ++i)
    pixels[i] = static_cast<Real>(bytes[pos + i]) / static_cast<Real>(127.5) - 1;
  return Tensor(Shape{h, w, 3}, std::move(pixels));
}

// ---------------------------------------------------------------- checkpoint

std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - offset, 1u << 30));
    crc = crc32(crc, bytes.data() + offset, chunk);
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'T', 'G', 'C', 'K'};

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(T(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return value;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint: truncated file");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const std::vector<CheckpointTensor>& tensors) {
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.size() > UINT16_MAX) throw std::invalid_argument("checkpoint: tensor name too long");
    if (t.extents.size() > UINT8_MAX) throw std::invalid_argument("checkpoint: rank too large");
    std::uint64_t count = 1;
    for (auto e : t.extents) count *= e;
    if (count != t.values.size())
      throw std::invalid_argument("checkpoint: payload of '" + t.name + "' does not match extents");
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    out.push_back(static_cast<std::uint8_t>(t.extents.size()));
    for (auto e : t.extents) put_le<std::uint64_t>(out, e);
    for (float v : t.values) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      put_le<std::uint32_t>(out, bits);
    }
  }
  put_le<std::uint32_t>(out, crc32_ieee(out));
  return out;
}

std::vector<CheckpointTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin()))
    throw FormatError("checkpoint: bad magic (not a TGCK file)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: version mismatch (file " + std::to_string(version) +
                      ", expected " + std::to_string(kCheckpointVersion) + ")");
  const auto count = r.get<std::uint32_t>();
  std::vector<CheckpointTensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    const auto name_len = r.get<std::uint16_t>();
    auto name = r.take(name_len);
    t.name.assign(name.begin(), name.end());
    const auto rank = r.get<std::uint8_t>();
    std::uint64_t n = 1;
    for (std::uint8_t a = 0; a < rank; ++a) {
      t.extents.push_back(r.get<std::uint64_t>());
      n *= t.extents.back();
    }
    if (n > (bytes.size() - r.position()) / 4) throw FormatError("checkpoint: truncated file");
    t.values.resize(n);
    for (auto& v : t.values) {
      const auto bits = r.get<std::uint32_t>();
      std::memcpy(&v, &bits, sizeof v);
    }
    tensors.push_back(std::move(t));
  }
  const auto body = r.position();
  const auto stored = r.get<std::uint32_t>();
  if (r.position() != bytes.size())
    throw FormatError("checkpoint: " + std::to_string(bytes.size() - r.position()) +
                      " trailing bytes after the footer");
  if (crc32_ieee(bytes.first(body)) != stored) throw FormatError("checkpoint: checksum failure");
  return tensors;
}

void write_checkpoint(const fs::path& path, const std::vector<CheckpointTensor>& tensors) {
  write_file_atomic(path, encode_checkpoint(tensors));
}

std::vector<CheckpointTensor> read_checkpoint(const fs::path& path) {
  return decode_checkpoint(read_file(path));
}

TRANSGAN_END_NAMESPACE
