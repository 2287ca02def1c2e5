#include <algorithm>
#include <cmath>
#include <string>

#include "chanorm/error.hpp"
#include "chanorm/io.hpp"
#include "chanorm/render.hpp"

namespace chanorm {

PgmImage render_pgm(const Matrix& features) {
  if (features.empty()) throw Error(ErrorKind::EmptyInput, "cannot render an empty feature matrix");
  const std::size_t width = features.rows();
  const std::size_t height = features.cols();
  const auto [lo, hi] = std::ranges::minmax(features.data());

  PgmImage img;
  const std::string header = "P5 " + std::to_string(width) + " " + std::to_string(height) + " 255\n";
  img.bytes.assign(header.begin(), header.end());
  img.degenerate = !(hi > lo);
  const std::size_t offset = img.bytes.size();
  img.bytes.resize(offset + width * height, 0);
  if (img.degenerate) return img;

  const double scale = 255.0 / (hi - lo);
  for (std::size_t f = 0; f < height; ++f) {
    const std::size_t y = height - 1 - f;
    for (std::size_t t = 0; t < width; ++t) {
      const double v = std::round((features(t, f) - lo) * scale);
      img.bytes[offset + y * width + t] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  }
  return img;
}

bool render_spectrogram(const Matrix& features, const std::filesystem::path& path) {
  const PgmImage img = render_pgm(features);
  write_file_atomic(path, img.bytes);
  return !img.degenerate;
}

}  // namespace chanorm
