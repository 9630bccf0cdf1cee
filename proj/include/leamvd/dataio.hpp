#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "leamvd/types.hpp"

namespace leamvd {

class IdxFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raw IDX image file contents (plus optional labels), one byte per pixel,
/// images stored back to back in row-major order.
struct IdxImages {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> labels;
};

/// Reads an IDX3 image file (magic 0x00000803) and optionally the matching
/// IDX1 label file (magic 0x00000801). Gzip-compressed files are detected and
/// inflated transparently.
IdxImages load_idx(const std::filesystem::path& images,
                   const std::optional<std::filesystem::path>& labels = std::nullopt);

/// Binary image matrix, one image per row.
struct Dataset {
  RowMatrix images;
  std::size_t width = 0;
  std::size_t height = 0;
  std::string provenance;

  std::size_t count() const { return static_cast<std::size_t>(images.rows()); }
};

/// pixel = 1 if byte / 255 > threshold else 0.
Dataset binarize(const IdxImages& raw, double threshold = 0.5);

/// 28x28 -> 7x7: mean of each 4x4 block, 1 if the mean is >= 0.5.
Dataset downscale_7x7(const Dataset& dataset);

/// `count` rows chosen without replacement by a seeded shuffle, kept in
/// their original order.
Dataset subset(const Dataset& dataset, std::size_t count, std::uint64_t seed);

}  // namespace leamvd
