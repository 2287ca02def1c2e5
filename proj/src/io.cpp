#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "chanorm/error.hpp"
#include "chanorm/io.hpp"

namespace chanorm {

namespace {

using json = nlohmann::json;

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
}

const json& require_key(const json& doc, const std::string& key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw Error(ErrorKind::SchemaMismatch, "missing key \"" + key + "\"");
  return *it;
}

double as_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw Error(ErrorKind::ParseError, "key \"" + key + "\": expected a number");
  return v.get<double>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw Error(ErrorKind::ParseError, "key \"" + key + "\": expected a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw Error(ErrorKind::ParseError, "key \"" + key + "\": expected a string");
  return v.get<std::string>();
}

std::vector<double> as_vector(const json& v, const std::string& key) {
  if (!v.is_array()) throw Error(ErrorKind::ParseError, "key \"" + key + "\": expected an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

bool has_prefix(const json& doc, std::string_view prefix) {
  for (const auto& [key, _] : doc.items())
    if (key.starts_with(prefix)) return true;
  return false;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorKind::Io, "cannot rename onto '" + path.string() + "': " + ec.message());
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return {bytes.begin(), bytes.end()};
}

// nlohmann/json prints doubles in shortest round-trip form, so every value
// reloads to the same bit pattern.
std::string params_to_json(const FrontendParams& params) {
  json doc = json::object();
  doc["schema"] = kParamsSchema;
  if (params.pcen) {
    const auto& p = *params.pcen;
    doc["pcen.alpha"] = p.alpha;
    doc["pcen.delta"] = p.delta;
    doc["pcen.r"] = p.r;
    doc["pcen.s"] = p.s;
    doc["pcen.eps"] = p.eps;
    doc["pcen.agc"] = p.agc_enabled;
    doc["pcen.drc"] = p.drc_enabled;
  }
  if (params.pcmn_direct) {
    doc["pcmn.mode"] = "direct";
    doc["pcmn.beta"] = params.pcmn_direct->beta;
    doc["pcmn.alpha"] = params.pcmn_direct->alpha;
    doc["pcmn.mu0"] = params.pcmn_direct->mu0;
  } else if (params.pcmn_splice) {
    doc["pcmn.mode"] = "splice";
    const auto w = params.pcmn_splice->weights.data();
    doc["pcmn.weights"] = std::vector<double>(w.begin(), w.end());
    doc["pcmn.bias"] = params.pcmn_splice->bias;
  }
  doc["cmn.mode"] = params.cmn.mode == CmnMode::sliding ? "sliding" : "full_utterance";
  doc["cmn.window_half"] = params.cmn.window_half;
  return doc.dump(2) + "\n";
}

FrontendParams params_from_json(std::string_view text, const FrontendVariant* expected) {
  const json doc = parse_json(text);
  if (!doc.is_object()) throw Error(ErrorKind::ParseError, "line 1: top level must be an object");
  const json& schema = require_key(doc, "schema");
  if (!schema.is_number_integer() || schema.get<int>() != kParamsSchema)
    throw Error(ErrorKind::SchemaMismatch, "\"schema\" must be " + std::to_string(kParamsSchema));

  FrontendParams params;
  const bool want_pcen = expected ? expected->nonlinearity == Nonlinearity::pcen : has_prefix(doc, "pcen.");
  if (want_pcen) {
    PcenParams p;
    p.alpha = as_vector(require_key(doc, "pcen.alpha"), "pcen.alpha");
    p.delta = as_vector(require_key(doc, "pcen.delta"), "pcen.delta");
    p.r = as_vector(require_key(doc, "pcen.r"), "pcen.r");
    p.s = as_number(require_key(doc, "pcen.s"), "pcen.s");
    p.eps = as_number(require_key(doc, "pcen.eps"), "pcen.eps");
    p.agc_enabled = as_bool(require_key(doc, "pcen.agc"), "pcen.agc");
    p.drc_enabled = as_bool(require_key(doc, "pcen.drc"), "pcen.drc");
    p.validate();
    params.pcen = std::move(p);
  }

  std::string mode;
  if (expected && expected->post_norm == PostNorm::pcmn_direct) mode = "direct";
  if (expected && expected->post_norm == PostNorm::pcmn_splice) mode = "splice";
  if (mode.empty() && !expected && doc.contains("pcmn.mode")) mode = as_string(doc["pcmn.mode"], "pcmn.mode");
  if (!mode.empty()) {
    const std::string stored = as_string(require_key(doc, "pcmn.mode"), "pcmn.mode");
    if (stored != mode)
      throw Error(ErrorKind::SchemaMismatch, "\"pcmn.mode\" is \"" + stored + "\", expected \"" + mode + "\"");
  }
  if (mode == "direct") {
    PcmnDirectParams p;
    p.beta = as_vector(require_key(doc, "pcmn.beta"), "pcmn.beta");
    p.alpha = as_vector(require_key(doc, "pcmn.alpha"), "pcmn.alpha");
    p.mu0 = as_vector(require_key(doc, "pcmn.mu0"), "pcmn.mu0");
    p.validate();
    params.pcmn_direct = std::move(p);
  } else if (mode == "splice") {
    PcmnSpliceParams p;
    p.bias = as_vector(require_key(doc, "pcmn.bias"), "pcmn.bias");
    const auto flat = as_vector(require_key(doc, "pcmn.weights"), "pcmn.weights");
    const std::size_t channels = p.bias.size();
    if (flat.size() != channels * channels * kSpliceContext)
      throw Error(ErrorKind::SchemaMismatch, "\"pcmn.weights\" has " + std::to_string(flat.size()) +
                                                 " entries, expected " +
                                                 std::to_string(channels * channels * kSpliceContext));
    p.weights = Matrix(channels, channels * kSpliceContext);
    std::ranges::copy(flat, p.weights.data().begin());
    p.validate();
    params.pcmn_splice = std::move(p);
  } else if (!mode.empty()) {
    throw Error(ErrorKind::SchemaMismatch, "\"pcmn.mode\" must be \"direct\" or \"splice\"");
  }

  if (doc.contains("cmn.mode")) {
    const std::string cm = as_string(doc["cmn.mode"], "cmn.mode");
    if (cm == "sliding")
      params.cmn.mode = CmnMode::sliding;
    else if (cm == "full_utterance")
      params.cmn.mode = CmnMode::full_utterance;
    else
      throw Error(ErrorKind::SchemaMismatch, "\"cmn.mode\" must be \"full_utterance\" or \"sliding\"");
  }
  if (doc.contains("cmn.window_half")) {
    const json& w = doc["cmn.window_half"];
    if (!w.is_number_unsigned()) throw Error(ErrorKind::ParseError, "key \"cmn.window_half\": expected a non-negative integer");
    params.cmn.window_half = w.get<std::size_t>();
  }
  params.cmn.validate();
  return params;
}

void save_params(const FrontendParams& params, const std::filesystem::path& path) {
  write_file_atomic(path, params_to_json(params));
}

FrontendParams load_params(const std::filesystem::path& path, const FrontendVariant* expected) {
  const std::string text = read_text_file(path);
  try {
    return params_from_json(text, expected);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string framing_to_json(const FramingConfig& cfg) {
  json doc = {
      {"sample_rate", cfg.sample_rate},
      {"frame_len_ms", cfg.frame_len_ms},
      {"hop_ms", cfg.hop_ms},
      {"fft_size", cfg.fft_size},
      {"n_mels", cfg.n_mels},
      {"fmin_hz", cfg.fmin_hz},
      {"fmax_hz", cfg.fmax_hz},
      {"window", cfg.window == WindowType::hamming ? "hamming" : "hann"},
      {"mel_scale", "htk"},
      {"preemphasis", cfg.preemphasis},
      {"dither", cfg.dither},
      {"dither_seed", cfg.dither_seed},
  };
  return doc.dump(2) + "\n";
}

FramingConfig framing_from_json(std::string_view text) {
  const json doc = parse_json(text);
  if (!doc.is_object()) throw Error(ErrorKind::ParseError, "line 1: top level must be an object");
  static const std::vector<std::string> known = {"sample_rate", "frame_len_ms", "hop_ms",  "fft_size",
                                                 "n_mels",      "fmin_hz",      "fmax_hz", "window",
                                                 "mel_scale",   "preemphasis",  "dither",  "dither_seed"};
  for (const auto& [key, _] : doc.items())
    if (std::ranges::find(known, key) == known.end())
      throw Error(ErrorKind::SchemaMismatch, "unknown framing key \"" + key + "\"");

  FramingConfig cfg;
  auto count = [&](const char* key, auto& field) {
    if (!doc.contains(key)) return;
    const json& v = doc[key];
    if (!v.is_number_unsigned()) throw Error(ErrorKind::ParseError, std::string("key \"") + key + "\": expected a non-negative integer");
    field = v.get<std::remove_reference_t<decltype(field)>>();
  };
  auto real = [&](const char* key, double& field) {
    if (doc.contains(key)) field = as_number(doc[key], key);
  };
  count("sample_rate", cfg.sample_rate);
  real("frame_len_ms", cfg.frame_len_ms);
  real("hop_ms", cfg.hop_ms);
  count("fft_size", cfg.fft_size);
  count("n_mels", cfg.n_mels);
  real("fmin_hz", cfg.fmin_hz);
  real("fmax_hz", cfg.fmax_hz);
  real("preemphasis", cfg.preemphasis);
  real("dither", cfg.dither);
  count("dither_seed", cfg.dither_seed);
  if (doc.contains("window")) {
    const std::string w = as_string(doc["window"], "window");
    if (w == "hamming")
      cfg.window = WindowType::hamming;
    else if (w == "hann")
      cfg.window = WindowType::hann;
    else
      throw Error(ErrorKind::SchemaMismatch, "\"window\" must be \"hamming\" or \"hann\"");
  }
  if (doc.contains("mel_scale") && as_string(doc["mel_scale"], "mel_scale") != "htk")
    throw Error(ErrorKind::SchemaMismatch, "\"mel_scale\" must be \"htk\"");
  cfg.validate();
  return cfg;
}

FramingConfig load_framing(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return framing_from_json(text);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_features(const Matrix& features) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + 4 * features.size());
  for (char c : {'F', 'E', 'A', '1'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, static_cast<std::uint32_t>(features.rows()));
  put_u32(out, static_cast<std::uint32_t>(features.cols()));
  for (double v : features.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Matrix decode_features(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || bytes[0] != 'F' || bytes[1] != 'E' || bytes[2] != 'A' || bytes[3] != '1')
    throw Error(ErrorKind::UnsupportedFormat, "missing FEA1 magic");
  const std::uint32_t frames = get_u32(bytes, 4);
  const std::uint32_t channels = get_u32(bytes, 8);
  const std::size_t expected = 12 + 4 * static_cast<std::size_t>(frames) * channels;
  if (bytes.size() != expected)
    throw Error(ErrorKind::UnsupportedFormat, "FEA1 payload is " + std::to_string(bytes.size()) +
                                                  " bytes, header implies " + std::to_string(expected));
  Matrix out(frames, channels);
  for (std::size_t n = 0; n < out.size(); ++n)
    out.data()[n] = std::bit_cast<float>(get_u32(bytes, 12 + 4 * n));
  return out;
}

std::string encode_features_csv(const Matrix& features) {
  std::string out;
  char buf[32];
  for (std::size_t t = 0; t < features.rows(); ++t) {
    for (std::size_t i = 0; i < features.cols(); ++i) {
      // Shortest form that reproduces the stored float32.
      const auto res = std::to_chars(buf, buf + sizeof buf, static_cast<float>(features(t, i)));
      if (i) out += ',';
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

Matrix decode_features_csv(std::string_view text) {
  std::vector<double> values;
  std::size_t channels = 0;
  std::size_t frames = 0;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    std::size_t count = 0;
    while (true) {
      const std::size_t comma = line.find(',');
      const std::string_view field = line.substr(0, comma);
      float v = 0.0f;
      const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
        throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": bad value '" + std::string(field) + "'");
      values.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      line = line.substr(comma + 1);
    }
    if (frames == 0) channels = count;
    if (count != channels)
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": " + std::to_string(count) +
                                             " values, expected " + std::to_string(channels));
    ++frames;
  }
  Matrix out(frames, channels);
  std::ranges::copy(values, out.data().begin());
  return out;
}

void write_features(const Matrix& features, const std::filesystem::path& path, FeatureFormat format) {
  if (format == FeatureFormat::bin)
    write_file_atomic(path, encode_features(features));
  else
    write_file_atomic(path, encode_features_csv(features));
}

Matrix read_features(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() >= 4 && bytes[0] == 'F' && bytes[1] == 'E' && bytes[2] == 'A' && bytes[3] == '1')
    return decode_features(bytes);
  return decode_features_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace chanorm
