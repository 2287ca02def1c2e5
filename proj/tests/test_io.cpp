#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "chanorm/error.hpp"
#include "chanorm/io.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace chanorm;

namespace {

FrontendParams perturbed(const FrontendVariant& variant, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  FrontendParams p = kernel_init(variant);
  if (p.pcen) {
    for (double& v : p.pcen->alpha) v = u(rng);
    for (double& v : p.pcen->delta) v = u(rng) * 7.0;
    for (double& v : p.pcen->r) v = u(rng);
  }
  if (p.pcmn_direct)
    for (double& v : p.pcmn_direct->mu0) v = u(rng) - 0.5;
  if (p.pcmn_splice) {
    for (double& v : p.pcmn_splice->weights.data()) v += std::normal_distribution<double>(0.0, 1e-3)(rng);
    for (double& v : p.pcmn_splice->bias) v = u(rng) * 1e-7;
  }
  return p;
}

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("params round trip is bit exact for every variant") {
  testutil::TempDir dir;
  std::uint64_t seed = 1;
  for (const auto& name : FrontendVariant::names()) {
    INFO(name);
    const auto variant = FrontendVariant::from_name(name);
    const FrontendParams p = perturbed(variant, seed++);
    const auto path = dir.path() / (name + ".json");
    save_params(p, path);
    const FrontendParams q = load_params(path, &variant);
    CHECK(params_hash(q) == params_hash(p));
    CHECK(params_to_json(q) == params_to_json(p));
    if (p.pcen) {
      CHECK(q.pcen->alpha == p.pcen->alpha);
      CHECK(q.pcen->delta == p.pcen->delta);
      CHECK(q.pcen->s == p.pcen->s);
      CHECK(q.pcen->agc_enabled == p.pcen->agc_enabled);
    }
    if (p.pcmn_splice) CHECK(q.pcmn_splice->weights == p.pcmn_splice->weights);
    CHECK(q.cmn.mode == p.cmn.mode);
    CHECK(q.cmn.window_half == p.cmn.window_half);
  }
}

TEST_CASE("params JSON is versioned and flat") {
  const auto text = params_to_json(kernel_init(FrontendVariant::from_name("pcen-pcmn")));
  CHECK(text.find("\"schema\": 1") != std::string::npos);
  CHECK(text.find("\"pcen.alpha\"") != std::string::npos);
  CHECK(text.find("\"pcmn.beta\"") != std::string::npos);
}

TEST_CASE("missing key is reported by name") {
  const auto variant = FrontendVariant::from_name("pcen");
  const auto text = params_to_json(kernel_init(variant));
  const auto broken = replace_once(text, "\"pcen.alpha\"", "\"pcen.alfa\"");
  testutil::check_error(ErrorKind::SchemaMismatch, "pcen.alpha", [&] { params_from_json(broken, &variant); });
}

TEST_CASE("out-of-range values are rejected on load") {
  const auto variant = FrontendVariant::from_name("pcen");
  FrontendParams p = kernel_init(variant, 2);
  const auto text = replace_once(params_to_json(p), "0.98", "1.5");
  testutil::check_error(ErrorKind::InvalidParameter, "alpha in (0, 1]", [&] { params_from_json(text, &variant); });
}

TEST_CASE("schema and syntax errors") {
  testutil::check_error(ErrorKind::ParseError, "line 3", [] { params_from_json("{\n  \"schema\": 1,\n  oops\n}"); });
  testutil::check_error(ErrorKind::SchemaMismatch, "schema", [] { params_from_json("{\"schema\": 2}"); });
  testutil::check_error(ErrorKind::SchemaMismatch, "schema", [] { params_from_json("{}"); });
  const auto variant = FrontendVariant::from_name("apcen-apcmn");
  testutil::check_error(ErrorKind::SchemaMismatch, "missing key \"pcmn.",
                        [&] { params_from_json(params_to_json(kernel_init(FrontendVariant::from_name("pcen"))), &variant); });
  testutil::check_error(ErrorKind::NotFound, "", [] { load_params("/nonexistent/chanorm/params.json"); });
}

TEST_CASE("FEA1 layout and round trip") {
  Matrix m(2, 3);
  for (std::size_t n = 0; n < m.size(); ++n) m.data()[n] = 0.25 * static_cast<double>(n) - 0.5;
  const auto bytes = encode_features(m);
  REQUIRE(bytes.size() == 12 + 6 * 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "FEA1");
  CHECK(bytes[4] == 2);
  CHECK(bytes[5] == 0);
  CHECK(bytes[8] == 3);
  // -0.5f little endian: 0xBF000000
  CHECK(bytes[12] == 0x00);
  CHECK(bytes[15] == 0xBF);
  CHECK(decode_features(bytes) == m);

  std::mt19937_64 rng(9);
  const Matrix r = oracle::gaussian_matrix(rng, 50, 40, 10.0);
  const Matrix back = decode_features(encode_features(r));
  for (std::size_t n = 0; n < r.size(); ++n) CHECK(back.data()[n] == static_cast<double>(static_cast<float>(r.data()[n])));
  CHECK(encode_features(back) == encode_features(r));
}

TEST_CASE("FEA1 decoding rejects malformed input") {
  auto bytes = encode_features(Matrix(2, 2, 1.0));
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_features(truncated), Error);
  bytes[0] = 'X';
  CHECK_THROWS_AS(decode_features(bytes), Error);
}

TEST_CASE("CSV round trip preserves float32 values") {
  std::mt19937_64 rng(10);
  const Matrix r = oracle::gaussian_matrix(rng, 20, 5, 1e3);
  const std::string csv = encode_features_csv(r);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 20);
  const Matrix back = decode_features_csv(csv);
  REQUIRE(back.same_shape(r));
  for (std::size_t n = 0; n < r.size(); ++n) CHECK(back.data()[n] == static_cast<double>(static_cast<float>(r.data()[n])));
  CHECK_THROWS_AS(decode_features_csv("1,2\n3\n"), Error);
}

TEST_CASE("feature files are read back by content") {
  testutil::TempDir dir;
  Matrix m(3, 2, 1.5);
  write_features(m, dir.path() / "a.feat", FeatureFormat::bin);
  write_features(m, dir.path() / "a.csv", FeatureFormat::csv);
  CHECK(read_features(dir.path() / "a.feat") == m);
  CHECK(read_features(dir.path() / "a.csv") == m);
  int entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
  CHECK(entries == 2);  // no temp files left behind
}

TEST_CASE("framing config JSON") {
  FramingConfig cfg;
  cfg.n_mels = 64;
  cfg.preemphasis = 0.97;
  const FramingConfig back = framing_from_json(framing_to_json(cfg));
  CHECK(back.n_mels == 64);
  CHECK(back.preemphasis == 0.97);
  CHECK(back.frame_samples() == cfg.frame_samples());
  testutil::check_error(ErrorKind::SchemaMismatch, "bogus", [] { framing_from_json("{\"bogus\": 1}"); });
}
