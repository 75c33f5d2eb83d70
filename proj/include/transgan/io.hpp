// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "transgan/tensor.hpp"

TRANSGAN_BEGIN_NAMESPACE

/// Malformed, truncated or corrupted external file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------------ datasets

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr std::size_t kCifarSide = 32;

struct CifarData {
  Tensor images;  // [n, 32, 32, 3] in [-1, 1]
  std::vector<std::uint8_t> labels;
};

/// CIFAR-10 binary batch: records of one label byte followed by 1024 red,
/// 1024 green and 1024 blue bytes (each plane row-major 32x32). Bytes map to
/// v / 127.5 - 1.
CifarData decode_cifar10(std::span<const std::uint8_t> bytes);
CifarData read_cifar10_binary(const std::filesystem::path& path);
/// Every data_batch_*.bin in `dir`, in name order.
CifarData read_cifar10_directory(const std::filesystem::path& dir);

/// Procedural images: a vertical two-colour background gradient with one
/// gradient-filled rectangle or ellipse. `kind` is "shapes" (either),
/// "rects" or "ellipses". Deterministic per seed.
Tensor synth_dataset(std::string_view kind, std::size_t n, std::size_t resolution,
                     std::uint64_t seed);

// -------------------------------------------------------------------- images

/// round((v + 1) * 127.5), half away from zero, clamped to [0, 255].
std::uint8_t pixel_to_byte(Real v);

/// Binary P6 grid: images tiled row-major, `cols` per row, with 2-pixel
/// black gutters between tiles.
std::vector<std::uint8_t> encode_ppm_grid(const Tensor& images, std::size_t cols);
void write_ppm_grid(const Tensor& images, std::size_t cols, const std::filesystem::path& path);
/// Reads a P6 file (maxval 255) into [H, W, 3] in [-1, 1].
Tensor read_ppm(const std::filesystem::path& path);

// ---------------------------------------------------------------- checkpoint

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  std::vector<std::uint64_t> extents;
  std::vector<float> values;
};

/// "TGCK", u32 version, u32 count, then per tensor: u16 name length + UTF-8
/// name, u8 rank, u64 extents, f32 payload; trailing CRC32 of every
/// preceding byte. All integers and floats little-endian.
std::vector<std::uint8_t> encode_checkpoint(const std::vector<CheckpointTensor>& tensors);
std::vector<CheckpointTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);
void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointTensor>& tensors);
std::vector<CheckpointTensor> read_checkpoint(const std::filesystem::path& path);

std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------- files

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it into place, so a failed
/// write never leaves a partial file at `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

TRANSGAN_END_NAMESPACE
