#include <doctest.h>

#include <cmath>
#include <random>

#include "chanorm/error.hpp"
#include "chanorm/pipeline.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace chanorm;

namespace {

AudioBuffer random_audio(std::uint64_t seed, std::size_t n = 16000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  AudioBuffer a{std::vector<double>(n), 16000};
  for (double& v : a.samples) v = d(rng);
  return a;
}

}  // namespace

TEST_CASE("kernel_init values") {
  const auto pcen = kernel_init(FrontendVariant::from_name("pcen"));
  REQUIRE(pcen.pcen);
  CHECK(pcen.pcen->alpha == std::vector<double>(40, 0.98));
  CHECK(pcen.pcen->delta == std::vector<double>(40, 2.0));
  CHECK(pcen.pcen->r == std::vector<double>(40, 0.5));
  CHECK_FALSE(pcen.pcmn_direct);
  CHECK_FALSE(pcen.pcmn_splice);

  const auto direct = kernel_init(FrontendVariant::from_name("log-pcmn"));
  REQUIRE(direct.pcmn_direct);
  CHECK(direct.pcmn_direct->beta == std::vector<double>(40, 1.0));
  CHECK(direct.pcmn_direct->alpha == std::vector<double>(40, 0.5));
  CHECK(direct.pcmn_direct->mu0 == std::vector<double>(40, 0.0));
  CHECK_FALSE(direct.pcen);

  const auto splice = kernel_init(FrontendVariant::from_name("apcen-apcmn"));
  REQUIRE(splice.pcen);
  REQUIRE(splice.pcmn_splice);
  const Matrix& w = splice.pcmn_splice->weights;
  CHECK(w.rows() == 40);
  CHECK(w.cols() == 40 * kSpliceContext);
  CHECK(w(3, 3 * kSpliceContext + kSpliceHalf) == doctest::Approx(1.0 - 0.5 / 21.0).epsilon(1e-15));
  CHECK(w(3, 3 * kSpliceContext + kSpliceHalf) == doctest::Approx(0.97619).epsilon(1e-5));
  CHECK(w(3, 3 * kSpliceContext) == doctest::Approx(-0.5 / 21.0).epsilon(1e-15));
  CHECK(w(3, 4 * kSpliceContext + kSpliceHalf) == 0.0);
  CHECK(splice.pcmn_splice->bias == std::vector<double>(40, 0.0));

  CHECK(kernel_init(FrontendVariant::from_name("pcen"), 7).pcen->alpha.size() == 7);
}

TEST_CASE("variant names round trip") {
  CHECK(FrontendVariant::names().size() == 7);
  for (const auto& name : FrontendVariant::names()) {
    const auto v = FrontendVariant::from_name(name);
    CHECK(v.tag() == name);
    CHECK_NOTHROW(v.validate());
  }
  testutil::check_error(ErrorKind::InvalidConfig, "log-cmn", [] { FrontendVariant::from_name("mfcc"); });

  FrontendVariant ablated = FrontendVariant::from_name("apcen");
  ablated.no_drc = true;
  CHECK(ablated.tag() == "apcen+no-drc");
  CHECK(FrontendVariant::from_name("apcen").trainable());
  CHECK_FALSE(FrontendVariant::from_name("pcen-pcmn").trainable());
}

TEST_CASE("invalid variant combinations are rejected") {
  FrontendVariant v = FrontendVariant::from_name("log-cmn");
  v.no_agc = true;
  CHECK_THROWS_AS(v.validate(), Error);

  v = FrontendVariant::from_name("log-cmn");
  v.train_pcen = true;
  CHECK_THROWS_AS(v.validate(), Error);

  v = FrontendVariant::from_name("log-pcmn");
  v.train_pcmn = true;  // direct form has no trainable path
  CHECK_THROWS_AS(v.validate(), Error);

  v = FrontendVariant::from_name("pcen");
  v.train_pcen = true;
  v.post_norm = PostNorm::cmn;
  CHECK_THROWS_AS(v.validate(), Error);
}

TEST_CASE("check_params catches missing and mis-sized blocks") {
  const auto variant = FrontendVariant::from_name("pcen-pcmn");
  FrontendParams params = kernel_init(variant);
  CHECK_NOTHROW(check_params(variant, params, 40));
  CHECK_THROWS_AS(check_params(variant, params, 41), Error);
  params.pcmn_direct.reset();
  CHECK_THROWS_AS(check_params(variant, params, 40), Error);
}

TEST_CASE("log-cmn features have zero channel means") {
  const auto variant = FrontendVariant::from_name("log-cmn");
  const FeatureMatrix f = extract_features(random_audio(1), variant, kernel_init(variant));
  CHECK(f.values.rows() == 98);
  CHECK(f.values.cols() == 40);
  CHECK(f.variant == "log-cmn");
  for (std::size_t i = 0; i < 40; ++i) {
    double sum = 0.0;
    for (std::size_t t = 0; t < f.values.rows(); ++t) sum += f.values(t, i);
    CHECK(std::abs(sum / 98.0) < 1e-12);
  }
}

TEST_CASE("PCEN in the identity limit reproduces mel energies") {
  const auto variant = FrontendVariant::from_name("pcen");
  FrontendParams params;
  params.pcen = PcenParams::broadcast(40, 1e-300, 1e-3, 1.0);
  const AudioBuffer audio = random_audio(2);
  const MelEnergies mel = compute_mel_energies(audio, FramingConfig{});
  const FeatureMatrix f = apply_frontend(mel, variant, params);
  REQUIRE(f.values.same_shape(mel.values));
  for (std::size_t n = 0; n < mel.values.size(); ++n) {
    const double e = mel.values.data()[n];
    CHECK(std::abs(f.values.data()[n] - e) <= 1e-12 * std::max(1.0, e));
  }
}

TEST_CASE("log compression floors zero energies") {
  Matrix e(2, 2, 0.0);
  e(1, 1) = std::exp(1.0);
  const Matrix y = log_compress(e);
  CHECK(y(0, 0) == std::log(kLogFloor));
  CHECK(y(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("extraction is deterministic") {
  const AudioBuffer audio = random_audio(3);
  for (const auto& name : FrontendVariant::names()) {
    const auto variant = FrontendVariant::from_name(name);
    const auto params = kernel_init(variant);
    const auto a = extract_features(audio, variant, params);
    const auto b = extract_features(audio, variant, params);
    CHECK(a.values == b.values);
    CHECK(a.params_hash == b.params_hash);
  }
}

TEST_CASE("params hash tracks every parameter value") {
  const auto variant = FrontendVariant::from_name("apcen-apcmn");
  const FrontendParams base = kernel_init(variant);
  const auto h = params_hash(base);
  CHECK(params_hash(kernel_init(variant)) == h);

  FrontendParams p = base;
  p.pcen->delta[17] = std::nextafter(p.pcen->delta[17], 3.0);
  CHECK(params_hash(p) != h);

  p = base;
  p.pcmn_splice->weights(39, 839) = 1e-300;
  CHECK(params_hash(p) != h);

  p = base;
  p.pcmn_splice->bias[0] = -0.0;  // bit pattern differs from +0
  CHECK(params_hash(p) != h);

  p = base;
  p.pcen->s = 0.05;
  CHECK(params_hash(p) != h);

  CHECK(params_hash(kernel_init(FrontendVariant::from_name("pcen"))) != params_hash(kernel_init(FrontendVariant::from_name("log-cmn"))));
}

TEST_CASE("all variants and ablations give finite features") {
  const AudioBuffer audio = random_audio(4);
  std::vector<FrontendVariant> variants;
  for (const auto& name : FrontendVariant::names()) variants.push_back(FrontendVariant::from_name(name));
  for (const char* base : {"apcen", "apcen-apcmn", "pcen"}) {
    FrontendVariant v = FrontendVariant::from_name(base);
    v.no_agc = true;
    variants.push_back(v);
    v.no_agc = false;
    v.no_drc = true;
    variants.push_back(v);
  }
  for (const auto& v : variants) {
    INFO(v.tag());
    const auto f = extract_features(audio, v, kernel_init(v));
    CHECK(f.values.rows() == 98);
    CHECK(f.values.cols() == 40);
    CHECK(f.variant == v.tag());
    bool finite = true;
    for (double x : f.values.data()) finite = finite && std::isfinite(x);
    CHECK(finite);
  }
}

TEST_CASE("ablation flags override stored PCEN flags") {
  FrontendVariant v = FrontendVariant::from_name("pcen");
  v.no_agc = true;
  const PcenParams eff = effective_pcen(v, kernel_init(v));
  CHECK_FALSE(eff.agc_enabled);
  CHECK(eff.drc_enabled);
}

TEST_CASE("apply_frontend rejects channel mismatches") {
  const auto variant = FrontendVariant::from_name("pcen");
  MelEnergies mel{Matrix(10, 8, 1.0), {}};
  CHECK_THROWS_AS(apply_frontend(mel, variant, kernel_init(variant)), Error);
  CHECK_NOTHROW(apply_frontend(mel, variant, kernel_init(variant, 8)));
}
