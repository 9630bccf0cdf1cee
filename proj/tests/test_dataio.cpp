#include <doctest.h>
#include <zlib.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "leamvd/dataio.hpp"

using namespace leamvd;
namespace fs = std::filesystem;

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::vector<std::uint8_t> image_file(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                     std::uint8_t (*pixel)(std::size_t)) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x803);
  put_be32(out, count);
  put_be32(out, rows);
  put_be32(out, cols);
  const std::size_t n = std::size_t{count} * rows * cols;
  out.reserve(16 + n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(pixel(i));
  return out;
}

std::vector<std::uint8_t> label_file(std::uint32_t count) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x801);
  put_be32(out, count);
  for (std::uint32_t i = 0; i < count; ++i) out.push_back(static_cast<std::uint8_t>(i % 10));
  return out;
}

std::uint8_t ramp(std::size_t i) { return static_cast<std::uint8_t>(i * 7 % 256); }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "leamvd_test_dataio";
  fs::create_directories(dir);
  return dir / name;
}

fs::path write_raw(const std::string& name, const std::vector<std::uint8_t>& bytes) {
  const fs::path p = scratch(name);
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                           static_cast<std::streamsize>(bytes.size()));
  return p;
}

fs::path write_gz(const std::string& name, const std::vector<std::uint8_t>& bytes) {
  const fs::path p = scratch(name);
  gzFile f = gzopen(p.c_str(), "wb");
  REQUIRE(f != nullptr);
  REQUIRE(gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size())) == static_cast<int>(bytes.size()));
  gzclose(f);
  return p;
}

Dataset from_pixels(const std::vector<std::uint8_t>& pixels, std::size_t count) {
  IdxImages raw;
  raw.count = count;
  raw.rows = raw.cols = 28;
  raw.pixels = pixels;
  return binarize(raw);
}

}  // namespace

TEST_CASE("load_idx reads full-size headers, raw and compressed") {
  SUBCASE("training-set sized, gzip") {
    const fs::path img = write_gz("train60k.gz", image_file(60000, 28, 28, ramp));
    const fs::path lab = write_gz("train60k-labels.gz", label_file(60000));
    const IdxImages r = load_idx(img, lab);
    CHECK(r.count == 60000);
    CHECK(r.rows == 28);
    CHECK(r.cols == 28);
    CHECK(r.pixels.size() == 60000u * 784u);
    CHECK(r.pixels[12345] == ramp(12345));
    CHECK(r.labels.size() == 60000);
    CHECK(r.labels[59999] == 9);
    CHECK(binarize(r).images.rows() == 60000);
    CHECK(binarize(r).images.cols() == 784);
  }
  SUBCASE("test-set sized, uncompressed") {
    const IdxImages r = load_idx(write_raw("test10k", image_file(10000, 28, 28, ramp)));
    CHECK(r.count == 10000);
    CHECK(r.pixels.back() == ramp(10000u * 784u - 1));
    CHECK(r.labels.empty());
  }
}

TEST_CASE("bundled MNIST file") {
  const IdxImages r = load_idx(LEA_MVD_TEST_DATA_DIR "/train-images-idx3-ubyte.gz",
                               fs::path(LEA_MVD_TEST_DATA_DIR "/train-labels-idx1-ubyte.gz"));
  CHECK(r.count == 10000);
  CHECK(r.rows == 28);
  CHECK(r.cols == 28);
  const Dataset d = binarize(r);
  CHECK(d.images.rows() == 10000);
  CHECK(d.images.cols() == 784);
  // Digits cover roughly a fifth of the frame.
  const double ink = d.images.mean();
  CHECK(ink > 0.05);
  CHECK(ink < 0.3);
}

TEST_CASE("load_idx errors") {
  std::vector<std::uint8_t> bytes = image_file(3, 28, 28, ramp);
  SUBCASE("truncated") {
    bytes.resize(bytes.size() - 100);
    const fs::path p = write_raw("truncated", bytes);
    try {
      load_idx(p);
      FAIL("expected IdxFormatError");
    } catch (const IdxFormatError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("truncated") != std::string::npos);
      CHECK(msg.find(std::to_string(16 + 3 * 784)) != std::string::npos);
      CHECK(msg.find(std::to_string(16 + 3 * 784 - 100)) != std::string::npos);
    }
  }
  SUBCASE("short header") {
    bytes.resize(10);
    CHECK_THROWS_AS(load_idx(write_raw("short", bytes)), IdxFormatError);
  }
  SUBCASE("trailing bytes") {
    bytes.push_back(0);
    CHECK_THROWS_AS(load_idx(write_raw("trailing", bytes)), IdxFormatError);
  }
  SUBCASE("bad magic") {
    bytes[3] = 0x01;
    CHECK_THROWS_WITH_AS(load_idx(write_raw("magic", bytes)), doctest::Contains("bad magic"), IdxFormatError);
  }
  SUBCASE("label count mismatch") {
    const fs::path img = write_raw("img3", bytes);
    CHECK_THROWS_WITH_AS(load_idx(img, write_raw("lab4", label_file(4))), doctest::Contains("4 labels for 3"),
                         IdxFormatError);
  }
  SUBCASE("missing") {
    CHECK_THROWS_AS(load_idx(scratch("does-not-exist")), IdxFormatError);
  }
}

TEST_CASE("binarize threshold") {
  std::vector<std::uint8_t> px(784, 0);
  px[0] = 128;
  px[1] = 127;
  px[2] = 255;
  const Dataset d = from_pixels(px, 1);
  CHECK(d.images(0, 0) == 1.0);
  CHECK(d.images(0, 1) == 0.0);
  CHECK(d.images(0, 2) == 1.0);
  CHECK(d.images(0, 3) == 0.0);
  CHECK(d.width == 28);
  CHECK(d.height == 28);
}

TEST_CASE("downscale_7x7") {
  std::vector<std::uint8_t> px(784, 0);
  auto set_block = [&](int by, int bx, int how_many) {
    for (int k = 0; k < how_many; ++k) px[(4 * by + k / 4) * 28 + 4 * bx + k % 4] = 255;
  };
  set_block(0, 0, 16);
  set_block(0, 1, 8);
  set_block(0, 2, 7);
  set_block(6, 6, 9);
  const Dataset d = downscale_7x7(from_pixels(px, 1));
  REQUIRE(d.images.cols() == 49);
  CHECK(d.width == 7);
  CHECK(d.height == 7);
  CHECK(d.images(0, 0) == 1.0);
  CHECK(d.images(0, 1) == 1.0);  // mean exactly 0.5
  CHECK(d.images(0, 2) == 0.0);
  CHECK(d.images(0, 48) == 1.0);
  CHECK(d.images.sum() == 3.0);

  const Dataset ones = downscale_7x7(from_pixels(std::vector<std::uint8_t>(2 * 784, 255), 2));
  CHECK(ones.images.isOnes());

  Dataset small = d;
  CHECK_THROWS_AS(downscale_7x7(small), std::invalid_argument);
}

TEST_CASE("subset") {
  Dataset d;
  d.width = 1;
  d.height = 1;
  d.images = RowMatrix(100, 1);
  for (int i = 0; i < 100; ++i) d.images(i, 0) = i;

  SUBCASE("distinct rows in original order") {
    const Dataset s = subset(d, 30, 9);
    REQUIRE(s.count() == 30);
    for (Eigen::Index i = 1; i < 30; ++i) CHECK(s.images(i, 0) > s.images(i - 1, 0));
  }
  SUBCASE("seeded") {
    CHECK(subset(d, 30, 9).images == subset(d, 30, 9).images);
    CHECK(subset(d, 30, 9).images != subset(d, 30, 10).images);
  }
  SUBCASE("edges") {
    CHECK(subset(d, 100, 1).images == d.images);
    CHECK(subset(d, 0, 1).count() == 0);
    CHECK_THROWS_AS(subset(d, 101, 1), std::invalid_argument);
  }
}

TEST_CASE("subset commutes with downscaling") {
  const Dataset full = binarize(load_idx(LEA_MVD_TEST_DATA_DIR "/train-images-idx3-ubyte.gz"));
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset a = subset(downscale_7x7(full), 200, seed);
    const Dataset b = downscale_7x7(subset(full, 200, seed));
    CHECK(a.images == b.images);
  }
}
