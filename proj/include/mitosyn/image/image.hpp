#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mitosyn {

inline constexpr int kPatchSide = 128;

// 8-bit interleaved RGB image, row-major HWC.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::uint8_t& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

  bool operator==(const Image&) const = default;
};

// Float image, HWC, used for normalized model inputs.
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<float> values;  // width * height * 3

  float at(int y, int x, int c) const { return values[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

// PNG codec. Grayscale/alpha/16-bit inputs are converted to 8-bit RGB on read.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

// Throws ValidationError unless the file decodes to a 128x128 RGB patch.
Image read_patch(const std::filesystem::path& path);

// Decoded patches keyed by path, so repeated folds read each file once.
class PatchCache {
 public:
  const Image& get(const std::filesystem::path& path);
  std::size_t size() const { return images_.size(); }

 private:
  std::map<std::string, Image> images_;
};

}  // namespace mitosyn
