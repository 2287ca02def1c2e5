#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "chanorm/matrix.hpp"

namespace chanorm {

struct PgmImage {
  std::vector<std::uint8_t> bytes;  // complete P5 file
  bool degenerate = false;          // max == min, image is all zero
};

/// Binary 8-bit PGM, width = frames, height = channels, channel 0 on the
/// bottom row, values min-max scaled to 0..255.
PgmImage render_pgm(const Matrix& features);

/// Writes the image; returns false (image still written, all zero) when the
/// value range is degenerate.
bool render_spectrogram(const Matrix& features, const std::filesystem::path& path);

}  // namespace chanorm
