// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "transgan/io.hpp"
#include "transgan/rng.hpp"

using namespace transgan;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "transgan-test-io";
  fs::create_directories(dir);
  return dir / name;
}

// Record r: label r, red plane 0..255 cycling, green = 255 - red, blue = 128.
std::vector<std::uint8_t> cifar_fixture(std::size_t records) {
  std::vector<std::uint8_t> bytes;
  for (std::size_t r = 0; r < records; ++r) {
    bytes.push_back(static_cast<std::uint8_t>(r));
    for (std::size_t p = 0; p < 1024; ++p) bytes.push_back(static_cast<std::uint8_t>((p + r) % 256));
    for (std::size_t p = 0; p < 1024; ++p) bytes.push_back(static_cast<std::uint8_t>(255 - (p + r) % 256));
    for (std::size_t p = 0; p < 1024; ++p) bytes.push_back(128);
  }
  return bytes;
}

Real expected_real(std::uint8_t b) { return static_cast<Real>(b) / static_cast<Real>(127.5) - 1; }

}  // namespace

TEST_CASE("CIFAR-10 records decode to interleaved reals") {
  const auto bytes = cifar_fixture(3);
  const auto data = decode_cifar10(bytes);
  REQUIRE(data.images.shape() == Shape{3, 32, 32, 3});
  CHECK(data.labels == std::vector<std::uint8_t>{0, 1, 2});
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t p = 0; p < 1024; ++p) {
      const auto red = static_cast<std::uint8_t>((p + r) % 256);
      const Real* px = data.images.data().data() + (r * 1024 + p) * 3;
      CHECK(px[0] == expected_real(red));
      CHECK(px[1] == expected_real(static_cast<std::uint8_t>(255 - red)));
      CHECK(px[2] == expected_real(128));
    }
  CHECK(data.images[0] == -1);           // red byte 0
  CHECK(data.images[1] == 1);            // green byte 255
  CHECK(data.images[255 * 3] == 1);      // red byte 255
}

TEST_CASE("CIFAR-10 errors") {
  CHECK_THROWS_AS(decode_cifar10({}), FormatError);
  auto bytes = cifar_fixture(2);
  bytes.pop_back();
  CHECK_THROWS_WITH_AS(decode_cifar10(bytes), doctest::Contains("truncated"), FormatError);
}

TEST_CASE("CIFAR-10 directory reads batches in order") {
  const auto dir = scratch("cifar");
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto a = cifar_fixture(2);
  auto b = cifar_fixture(3);
  b.erase(b.begin(), b.begin() + 2 * kCifarRecordBytes);  // record 2 only
  write_file_atomic(dir / "data_batch_2.bin", b);
  write_file_atomic(dir / "data_batch_1.bin", a);
  write_file_atomic(dir / "test_batch.bin", a);
  const auto data = read_cifar10_directory(dir);
  CHECK(data.labels == std::vector<std::uint8_t>{0, 1, 2});
  CHECK_THROWS_AS(read_cifar10_directory(scratch("missing-dir-" + std::to_string(std::rand()))),
                  std::exception);
}

TEST_CASE("pixel quantization") {
  CHECK(pixel_to_byte(-1) == 0);
  CHECK(pixel_to_byte(1) == 255);
  CHECK(pixel_to_byte(-5) == 0);
  CHECK(pixel_to_byte(7) == 255);
  CHECK(pixel_to_byte(0) == 128);
  CHECK(pixel_to_byte(std::numeric_limits<Real>::quiet_NaN()) == 0);
  for (int b = 0; b < 256; ++b) CHECK(pixel_to_byte(expected_real(static_cast<std::uint8_t>(b))) == b);
}

TEST_CASE("PPM grid layout and round trip") {
  std::vector<Real> v(3 * 2 * 2 * 3);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = expected_real(static_cast<std::uint8_t>(i * 7));
  const Tensor images(Shape{3, 2, 2, 3}, v);
  const auto bytes = encode_ppm_grid(images, 2);
  // 2 columns -> 2*2 + 2 gutter = 6 wide, 2 rows -> 6 high
  const std::string header = "P6\n6 6\n255\n";
  REQUIRE(bytes.size() == header.size() + 6 * 6 * 3);
  CHECK(std::memcmp(bytes.data(), header.data(), header.size()) == 0);

  const auto path = scratch("grid.ppm");
  write_ppm_grid(images, 2, path);
  CHECK(read_file(path) == bytes);
  const Tensor back = read_ppm(path);
  REQUIRE(back.shape() == Shape{6, 6, 3});
  // Image 1 sits at column offset 4.
  CHECK(back[(0 * 6 + 4) * 3] == v[12]);
  // Gutter is black.
  CHECK(back[(0 * 6 + 2) * 3] == -1);
  CHECK(encode_ppm_grid(images, 2) == bytes);
}

TEST_CASE("PPM errors") {
  const auto path = scratch("bad.ppm");
  const std::string text = "P3\n1 1\n255\n0 0 0\n";
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  CHECK_THROWS_AS(read_ppm(path), FormatError);
  const std::string truncated = "P6\n2 2\n255\nabc";
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(truncated.data()), truncated.size()));
  CHECK_THROWS_WITH_AS(read_ppm(path), doctest::Contains("truncated"), FormatError);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  Rng rng(5);
  std::vector<CheckpointTensor> tensors;
  tensors.push_back({"a", {2, 3}, {}});
  for (int i = 0; i < 6; ++i) tensors[0].values.push_back(static_cast<float>(rng.normal()));
  tensors[0].values[1] = -0.0f;
  tensors[0].values[2] = std::numeric_limits<float>::denorm_min();
  tensors.push_back({"scalar", {}, {42.5f}});
  tensors.push_back({"nan", {1}, {std::numeric_limits<float>::quiet_NaN()}});
  const auto bytes = encode_checkpoint(tensors);
  const auto back = decode_checkpoint(bytes);
  REQUIRE(back.size() == tensors.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    CHECK(back[i].name == tensors[i].name);
    CHECK(back[i].extents == tensors[i].extents);
    REQUIRE(back[i].values.size() == tensors[i].values.size());
    CHECK(std::memcmp(back[i].values.data(), tensors[i].values.data(), 4 * back[i].values.size()) == 0);
  }
  CHECK(encode_checkpoint(back) == bytes);

  const auto path = scratch("t.tgck");
  write_checkpoint(path, tensors);
  CHECK(read_file(path) == bytes);
  CHECK_FALSE(fs::exists(path.string() + ".tmp"));
}

TEST_CASE("checkpoint corruption is detected") {
  const auto bytes = encode_checkpoint({{"w", {4}, {1, 2, 3, 4}}});
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_WITH_AS(decode_checkpoint(bad), doctest::Contains("magic"), FormatError);
  bad = bytes;
  bad[4] = 9;
  CHECK_THROWS_WITH_AS(decode_checkpoint(bad), doctest::Contains("version"), FormatError);
  bad = bytes;
  bad.resize(bytes.size() - 6);
  CHECK_THROWS_WITH_AS(decode_checkpoint(bad), doctest::Contains("truncated"), FormatError);
  bad = bytes;
  bad[bytes.size() - 8] ^= 1;
  CHECK_THROWS_WITH_AS(decode_checkpoint(bad), doctest::Contains("checksum"), FormatError);
  bad = bytes;
  bad.push_back(0);
  CHECK_THROWS_WITH_AS(decode_checkpoint(bad), doctest::Contains("trailing"), FormatError);
  CHECK_THROWS(encode_checkpoint({{"w", {3}, {1, 2}}}));
}

TEST_CASE("crc32 matches the standard check value") {
  const std::string s = "123456789";
  CHECK(crc32_ieee(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())) == 0xCBF43926u);
}

TEST_CASE("synthetic datasets are seeded") {
  const Tensor a = synth_dataset("shapes", 8, 16, 3);
  const Tensor b = synth_dataset("shapes", 8, 16, 3);
  const Tensor c = synth_dataset("shapes", 8, 16, 4);
  CHECK(a.shape() == Shape{8, 16, 16, 3});
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  CHECK_FALSE(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
  for (auto v : a.data()) CHECK((v >= -1 && v <= 1));
  CHECK_NOTHROW(synth_dataset("rects", 2, 8, 1));
  CHECK_NOTHROW(synth_dataset("ellipses", 2, 8, 1));
  CHECK_THROWS(synth_dataset("faces", 2, 8, 1));
}
