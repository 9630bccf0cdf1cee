#include "leamvd/dataio.hpp"

#include <zlib.h>

#include <algorithm>
#include <numeric>

#include "leamvd/rng.hpp"

namespace leamvd {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw IdxFormatError("IDX file not found: " + path.string());
  // gzread passes uncompressed files through unchanged.
  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) throw IdxFormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes;
  std::vector<std::uint8_t> chunk(1 << 20);
  while (true) {
    const int got = gzread(file, chunk.data(), static_cast<unsigned>(chunk.size()));
    if (got < 0) {
      int code = 0;
      const std::string message = gzerror(file, &code);
      gzclose(file);
      throw IdxFormatError(path.string() + ": read error: " + message);
    }
    if (got == 0) break;
    bytes.insert(bytes.end(), chunk.begin(), chunk.begin() + got);
  }
  gzclose(file);
  return bytes;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void require_size(const std::filesystem::path& path, std::size_t expected, std::size_t actual) {
  if (actual < expected)
    throw IdxFormatError(path.string() + ": truncated file, expected " + std::to_string(expected) +
                         " bytes but found " + std::to_string(actual));
  if (actual > expected)
    throw IdxFormatError(path.string() + ": trailing data, expected " + std::to_string(expected) +
                         " bytes but found " + std::to_string(actual));
}

std::string hex(std::uint32_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out = "0x";
  for (int shift = 28; shift >= 0; shift -= 4) out += digits[(v >> shift) & 0xf];
  return out;
}

}  // namespace

IdxImages load_idx(const std::filesystem::path& images,
                   const std::optional<std::filesystem::path>& labels) {
  const std::vector<std::uint8_t> bytes = read_all(images);
  if (bytes.size() < 16) require_size(images, 16, bytes.size());
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kImageMagic)
    throw IdxFormatError(images.string() + ": bad magic " + hex(magic) + ", expected " + hex(kImageMagic));

  IdxImages out;
  out.count = read_be32(bytes, 4);
  out.rows = read_be32(bytes, 8);
  out.cols = read_be32(bytes, 12);
  require_size(images, 16 + out.count * out.rows * out.cols, bytes.size());
  out.pixels.assign(bytes.begin() + 16, bytes.end());

  if (labels) {
    const std::vector<std::uint8_t> lbytes = read_all(*labels);
    if (lbytes.size() < 8) require_size(*labels, 8, lbytes.size());
    const std::uint32_t lmagic = read_be32(lbytes, 0);
    if (lmagic != kLabelMagic)
      throw IdxFormatError(labels->string() + ": bad magic " + hex(lmagic) + ", expected " + hex(kLabelMagic));
    const std::size_t lcount = read_be32(lbytes, 4);
    if (lcount != out.count)
      throw IdxFormatError(labels->string() + ": " + std::to_string(lcount) + " labels for " +
                           std::to_string(out.count) + " images");
    require_size(*labels, 8 + lcount, lbytes.size());
    out.labels.assign(lbytes.begin() + 8, lbytes.end());
  }
  return out;
}

Dataset binarize(const IdxImages& raw, double threshold) {
  const std::size_t d = raw.rows * raw.cols;
  Dataset out{RowMatrix(static_cast<Eigen::Index>(raw.count), static_cast<Eigen::Index>(d)),
              raw.cols, raw.rows, "binarized(threshold=" + std::to_string(threshold) + ")"};
  for (std::size_t i = 0; i < raw.count; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out.images(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(raw.pixels[i * d + j]) / 255.0 > threshold ? 1.0 : 0.0;
  return out;
}

Dataset downscale_7x7(const Dataset& dataset) {
  if (dataset.width != 28 || dataset.height != 28 || dataset.images.cols() != 784)
    throw std::invalid_argument("downscale_7x7: expected 28x28 images, got " +
                                std::to_string(dataset.width) + "x" + std::to_string(dataset.height));
  Dataset out{RowMatrix(dataset.images.rows(), 49), 7, 7,
              dataset.provenance + "+downscaled(4x4 block mean >= 0.5)"};
  for (Eigen::Index i = 0; i < dataset.images.rows(); ++i) {
    for (int by = 0; by < 7; ++by) {
      for (int bx = 0; bx < 7; ++bx) {
        double sum = 0.0;
        for (int y = 0; y < 4; ++y)
          for (int x = 0; x < 4; ++x) sum += dataset.images(i, (4 * by + y) * 28 + 4 * bx + x);
        out.images(i, by * 7 + bx) = sum / 16.0 >= 0.5 ? 1.0 : 0.0;
      }
    }
  }
  return out;
}

Dataset subset(const Dataset& dataset, std::size_t count, std::uint64_t seed) {
  const std::size_t m = dataset.count();
  if (count > m)
    throw std::invalid_argument("subset: requested " + std::to_string(count) + " rows from " +
                                std::to_string(m));
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t j = 0; j < count && j + 1 < m; ++j) std::swap(idx[j], idx[j + rng.index(m - j)]);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());

  Dataset out{RowMatrix(static_cast<Eigen::Index>(count), dataset.images.cols()), dataset.width,
              dataset.height, dataset.provenance + "+subset(" + std::to_string(count) + ")"};
  for (std::size_t r = 0; r < count; ++r)
    out.images.row(static_cast<Eigen::Index>(r)) = dataset.images.row(static_cast<Eigen::Index>(idx[r]));
  return out;
}

}  // namespace leamvd
