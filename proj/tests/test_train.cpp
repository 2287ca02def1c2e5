#include <doctest.h>

#include <cmath>
#include <random>

#include "chanorm/error.hpp"
#include "chanorm/train.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace chanorm;

namespace {

AudioBuffer noise(std::uint64_t seed, double amplitude = 0.2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-amplitude, amplitude);
  AudioBuffer a{std::vector<double>(16000), 16000};
  for (double& v : a.samples) v = d(rng);
  return a;
}

}  // namespace

TEST_CASE("proxy_loss: identical pair has zero loss and zero upstream") {
  const auto variant = FrontendVariant::from_name("apcen");
  const auto params = kernel_init(variant);
  const AudioBuffer a = noise(1);
  const ProxyLoss pl = proxy_loss(ProxyPair{a, a}, variant, params);
  CHECK(pl.loss == 0.0);
  for (double v : pl.upstream.data()) CHECK(v == 0.0);
}

TEST_CASE("proxy_loss: gain mismatch vanishes with full AGC and no DRC") {
  FrontendVariant variant = FrontendVariant::from_name("apcen");
  variant.no_drc = true;
  FrontendParams params = kernel_init(variant);
  params.pcen->alpha.assign(40, 1.0);
  // Keep energies far above eps.
  const AudioBuffer clean = noise(2, 0.5);
  for (double k : {0.1, 1.9}) {
    AudioBuffer degraded = clean;
    for (double& v : degraded.samples) v *= k;
    const ProxyLoss pl = proxy_loss(ProxyPair{clean, degraded}, variant, params);
    CHECK(pl.loss < 1e-6);
    CHECK(pl.loss >= 0.0);
  }
}

TEST_CASE("proxy_loss: upstream is the derivative of the mean squared error") {
  const auto variant = FrontendVariant::from_name("apcen-apcmn");
  const auto params = kernel_init(variant, 4);
  std::mt19937_64 rng(3);
  MelEnergies clean{oracle::random_matrix(rng, 25, 4, 0.1, 10.0), {}};
  MelEnergies degraded{oracle::random_matrix(rng, 25, 4, 0.1, 10.0), {}};
  const ProxyLoss pl = proxy_loss(clean, degraded, variant, params);
  CHECK(pl.loss > 0.0);
  const Matrix a = frontend_forward(degraded.values, variant, params).features;
  const Matrix b = frontend_forward(clean.values, variant, params).features;
  double loss = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) loss += (a.data()[n] - b.data()[n]) * (a.data()[n] - b.data()[n]);
  CHECK(pl.loss == doctest::Approx(loss / 100.0).epsilon(1e-14));
  for (std::size_t n = 0; n < a.size(); ++n)
    CHECK(pl.upstream.data()[n] == doctest::Approx(2.0 * (a.data()[n] - b.data()[n]) / 100.0).epsilon(1e-14));
}

TEST_CASE("proxy_loss: mismatched audio lengths") {
  const auto variant = FrontendVariant::from_name("apcen");
  AudioBuffer shorter = noise(4);
  shorter.samples.resize(8000);
  testutil::check_error(ErrorKind::ShapeMismatch, "length",
                        [&] { proxy_loss(ProxyPair{noise(4), shorter}, variant, kernel_init(variant)); });
}

TEST_CASE("grad_step: zero gradient leaves parameters unchanged") {
  const auto variant = FrontendVariant::from_name("apcen-apcmn");
  const auto params = kernel_init(variant);
  ParamGradients g;
  g.pcen = PcenGradients{std::vector<double>(40), std::vector<double>(40), std::vector<double>(40), {}};
  g.pcmn = PcmnSpliceGradients{Matrix(40, 840), std::vector<double>(40), {}};
  const FrontendParams next = grad_step(params, g, FitConfig{});
  CHECK(params_hash(next) == params_hash(params));
}

TEST_CASE("grad_step: projection clamps") {
  FrontendParams params;
  params.pcen = PcenParams::broadcast(1, 0.999, 0.005, 0.5);
  ParamGradients g;
  g.pcen = PcenGradients{{-1.0}, {1.0}, {0.0}, {}};
  FitConfig cfg;
  cfg.learning_rate = 0.01;
  const FrontendParams next = grad_step(params, g, cfg);
  CHECK(next.pcen->alpha[0] == 1.0);
  CHECK(next.pcen->delta[0] == 1e-3);
  CHECK(next.pcen->r[0] == 0.5);
}

TEST_CASE("grad_step: splice parameters are unconstrained") {
  FrontendParams params;
  params.pcmn_splice = PcmnSpliceParams::zeros(2);
  ParamGradients g;
  g.pcmn = PcmnSpliceGradients{Matrix(2, 42, 100.0), {50.0, -50.0}, {}};
  FitConfig cfg;
  cfg.learning_rate = 0.1;
  const FrontendParams next = grad_step(params, g, cfg);
  CHECK(next.pcmn_splice->weights(1, 7) == -10.0);
  CHECK(next.pcmn_splice->bias == std::vector<double>{-5.0, 5.0});
}

TEST_CASE("grad_step keeps PCEN invariants under random gradients") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d(0.0, 50.0);
  FrontendParams params;
  params.pcen = PcenParams::broadcast(8, 0.98, 2.0, 0.5);
  FitConfig cfg;
  cfg.learning_rate = 0.05;
  for (int step = 0; step < 200; ++step) {
    ParamGradients g;
    g.pcen = PcenGradients{std::vector<double>(8), std::vector<double>(8), std::vector<double>(8), {}};
    for (auto* v : {&g.pcen->d_alpha, &g.pcen->d_delta, &g.pcen->d_r})
      for (double& x : *v) x = d(rng);
    params = grad_step(params, g, cfg);
    CHECK_NOTHROW(params.pcen->validate());
  }
}

TEST_CASE("FitConfig validation") {
  FitConfig cfg;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.steps = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("frontend_backward matches the composite finite difference") {
  const auto variant = FrontendVariant::from_name("apcen-apcmn");
  std::mt19937_64 rng(6);
  const Matrix e = oracle::random_matrix(rng, 14, 3, 0.1, 10.0);
  FrontendParams params = kernel_init(variant, 3);
  for (double& w : params.pcmn_splice->weights.data()) w += std::normal_distribution<double>(0.0, 0.05)(rng);
  const Matrix up = oracle::gaussian_matrix(rng, 14, 3);
  const auto trace = frontend_forward(e, variant, params);
  const auto g = frontend_backward(e, trace, variant, params, up);
  REQUIRE(g.pcen);
  REQUIRE(g.pcmn);
  auto f = [&] { return frontend_forward(e, variant, params).features; };
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(oracle::rel_error(g.pcen->d_alpha[i], oracle::central_difference(params.pcen->alpha, i, 1e-5, up, f)) < 1e-4);
    CHECK(oracle::rel_error(g.pcen->d_delta[i], oracle::central_difference(params.pcen->delta, i, 1e-5, up, f)) < 1e-4);
    CHECK(oracle::rel_error(g.pcen->d_r[i], oracle::central_difference(params.pcen->r, i, 1e-5, up, f)) < 1e-4);
    CHECK(oracle::rel_error(g.pcmn->d_bias[i], oracle::central_difference(params.pcmn_splice->bias, i, 1e-5, up, f)) < 1e-6);
  }
}

TEST_CASE("gradcheck reports") {
  const auto pcen = gradcheck(FrontendVariant::from_name("apcen"), 7, 8, 3);
  CHECK(pcen.passed());
  REQUIRE(pcen.find("pcen.alpha"));
  CHECK(pcen.find("pcen.alpha")->max_rel_error < 1e-4);
  CHECK(pcen.find("pcen.input")->max_rel_error < 1e-4);

  const auto splice = gradcheck(FrontendVariant::from_name("log-apcmn"), 7, 30, 5);
  CHECK(splice.passed());
  CHECK(splice.find("pcmn.weights")->max_rel_error < 1e-6);
  CHECK(splice.find("pcen.alpha") == nullptr);

  FrontendVariant no_agc = FrontendVariant::from_name("apcen");
  no_agc.no_agc = true;
  const auto ablated = gradcheck(no_agc, 7, 8, 3);
  CHECK(ablated.passed());
  CHECK(ablated.find("pcen.alpha")->max_abs_analytic == 0.0);

  const auto both = gradcheck(FrontendVariant::from_name("apcen-apcmn"), 3, 16, 4);
  CHECK(both.passed());
  CHECK(both.find("chain.pcen.alpha") != nullptr);

  CHECK_THROWS_AS(gradcheck(FrontendVariant::from_name("log-cmn"), 1, 8, 3), Error);
}

TEST_CASE("synthetic task is reproducible and well formed") {
  const auto a = make_gain_mismatch_task(42, 4);
  const auto b = make_gain_mismatch_task(42, 4);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].clean.samples == b[i].clean.samples);
    CHECK(a[i].degraded.samples == b[i].degraded.samples);
    CHECK(a[i].clean.samples.size() == 16000);
    CHECK(a[i].degraded.samples.size() == 16000);
    for (double v : a[i].degraded.samples) CHECK(std::abs(v) <= 1.0);
    const double ratio = a[i].degraded.samples[100] / a[i].clean.samples[100];
    CHECK(ratio >= 0.2 - 1e-12);
    CHECK(ratio <= 5.0 + 1e-12);
  }
  CHECK_FALSE(make_gain_mismatch_task(43, 1)[0].clean.samples == a[0].clean.samples);
}

TEST_CASE("fit reduces the proxy loss and is deterministic") {
  const auto variant = FrontendVariant::from_name("apcen");
  const auto pairs = make_gain_mismatch_task(1, 4);
  FitConfig cfg;
  cfg.steps = 60;
  std::vector<FitRecord> seen;
  const FitResult r1 = fit(pairs, variant, kernel_init(variant), cfg, {}, [&](const FitRecord& r) { seen.push_back(r); });
  const FitResult r2 = fit(pairs, variant, kernel_init(variant), cfg);
  REQUIRE(r1.records.size() == 60);
  CHECK(seen.size() == 60);
  CHECK(r1.final_loss < r1.initial_loss);
  CHECK(params_hash(r1.params) == params_hash(r2.params));
  for (std::size_t i = 0; i < r1.records.size(); ++i) {
    CHECK(r1.records[i].loss == r2.records[i].loss);
    CHECK(r1.records[i].grad_norm == r2.records[i].grad_norm);
  }
  MESSAGE("loss " << r1.initial_loss << " -> " << r1.final_loss);
  CHECK(to_json_line(r1.records[3]).starts_with("{\"step\":3,\"loss\":"));

  CHECK_THROWS_AS(fit(pairs, FrontendVariant::from_name("pcen"), kernel_init(FrontendVariant::from_name("pcen")), cfg), Error);
}
