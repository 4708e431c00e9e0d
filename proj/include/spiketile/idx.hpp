#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "spiketile/errors.hpp"

namespace spiketile {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// 28x28 grayscale images with digit labels, as stored in IDX files.
struct IdxDataset {
  int count = 0;
  int rows = 28;
  int cols = 28;
  std::vector<std::uint8_t> images;  // count * rows * cols
  std::vector<std::uint8_t> labels;  // count, values 0..9

  std::span<const std::uint8_t> image(int i) const {
    return {images.data() + static_cast<std::size_t>(i) * rows * cols,
            static_cast<std::size_t>(rows) * cols};
  }
};

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  return data;
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& d, std::size_t off,
                               const std::string& file) {
  if (off + 4 > d.size())
    throw ParseError(file + ": truncated at byte " + std::to_string(off) +
                     " (expected 32-bit big-endian word)");
  return static_cast<std::uint32_t>(d[off]) << 24 | static_cast<std::uint32_t>(d[off + 1]) << 16 |
         static_cast<std::uint32_t>(d[off + 2]) << 8 | static_cast<std::uint32_t>(d[off + 3]);
}

}  // namespace detail

/// Loads an image/label IDX pair. Strict: magics, matching counts, 28x28
/// geometry, exact payload length, labels in 0..9.
inline IdxDataset load_idx(const std::filesystem::path& images_path,
                           const std::filesystem::path& labels_path) {
  auto img = detail::read_file(images_path);
  auto lab = detail::read_file(labels_path);
  const std::string iname = images_path.string(), lname = labels_path.string();

  std::uint32_t magic = detail::read_be32(img, 0, iname);
  if (magic != kIdxImagesMagic)
    throw ParseError(iname + ": bad magic 0x" + [&] {
      char b[16];
      std::snprintf(b, sizeof b, "%08X", magic);
      return std::string(b);
    }() + ", expected 0x00000803");
  std::uint32_t n = detail::read_be32(img, 4, iname);
  std::uint32_t rows = detail::read_be32(img, 8, iname);
  std::uint32_t cols = detail::read_be32(img, 12, iname);
  if (rows != 28 || cols != 28)
    throw ParseError(iname + ": geometry " + std::to_string(rows) + "x" + std::to_string(cols) +
                     ", this pipeline takes 28x28");
  std::size_t want = 16 + static_cast<std::size_t>(n) * rows * cols;
  if (img.size() != want)
    throw ParseError(iname + ": payload is " + std::to_string(img.size()) + " bytes, header implies " +
                     std::to_string(want));

  std::uint32_t lmagic = detail::read_be32(lab, 0, lname);
  if (lmagic != kIdxLabelsMagic)
    throw ParseError(lname + ": bad magic, expected 0x00000801");
  std::uint32_t ln = detail::read_be32(lab, 4, lname);
  if (ln != n)
    throw ParseError(lname + ": " + std::to_string(ln) + " labels for " + std::to_string(n) +
                     " images");
  if (lab.size() != 8 + static_cast<std::size_t>(ln))
    throw ParseError(lname + ": payload is " + std::to_string(lab.size()) +
                     " bytes, header implies " + std::to_string(8 + ln));
  for (std::size_t i = 0; i < ln; ++i)
    if (lab[8 + i] > 9)
      throw ParseError(lname + ": label " + std::to_string(lab[8 + i]) + " at index " +
                       std::to_string(i) + " outside 0..9");

  IdxDataset d;
  d.count = static_cast<int>(n);
  d.rows = static_cast<int>(rows);
  d.cols = static_cast<int>(cols);
  d.images.assign(img.begin() + 16, img.end());
  d.labels.assign(lab.begin() + 8, lab.end());
  return d;
}

}  // namespace spiketile
