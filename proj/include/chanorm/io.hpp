#pragma once

// On-disk formats: parameter JSON, FEA1 feature files, CSV features and the
// framing config. Every writer goes through write_file_atomic.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chanorm/dsp.hpp"
#include "chanorm/pipeline.hpp"

namespace chanorm {

inline constexpr int kParamsSchema = 1;

/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

std::string params_to_json(const FrontendParams& params);
/// When `expected` is given, every key its blocks need must be present
/// (SchemaMismatch names the first missing key) and values are validated.
FrontendParams params_from_json(std::string_view text, const FrontendVariant* expected = nullptr);

void save_params(const FrontendParams& params, const std::filesystem::path& path);
FrontendParams load_params(const std::filesystem::path& path, const FrontendVariant* expected = nullptr);

std::string framing_to_json(const FramingConfig& cfg);
FramingConfig framing_from_json(std::string_view text);
FramingConfig load_framing(const std::filesystem::path& path);

/// "FEA1", u32 LE frames, u32 LE channels, then float32 LE row-major.
std::vector<std::uint8_t> encode_features(const Matrix& features);
Matrix decode_features(std::span<const std::uint8_t> bytes);

/// One frame per line, comma separated, float32 values at round-trip precision.
std::string encode_features_csv(const Matrix& features);
Matrix decode_features_csv(std::string_view text);

enum class FeatureFormat { bin, csv };

void write_features(const Matrix& features, const std::filesystem::path& path, FeatureFormat format);
Matrix read_features(const std::filesystem::path& path);

}  // namespace chanorm
