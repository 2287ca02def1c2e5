#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "chanorm/dsp.hpp"
#include "chanorm/error.hpp"
#include "chanorm/io.hpp"
#include "chanorm/pipeline.hpp"
#include "chanorm/render.hpp"
#include "chanorm/train.hpp"

namespace chanorm::cli {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string frontend;
  std::string params_path;
  std::string config_path;
  bool no_agc = false;
  bool no_drc = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_params = true) {
  cmd->add_option("--frontend", c.frontend, "Front-end variant")
      ->required()
      ->check(CLI::IsMember(FrontendVariant::names()));
  if (with_params) cmd->add_option("--params", c.params_path, "Parameter file (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--config", c.config_path, "Framing config (JSON)")->check(CLI::ExistingFile);
  cmd->add_flag("--no-agc", c.no_agc, "Disable the PCEN gain-control stage");
  cmd->add_flag("--no-drc", c.no_drc, "Disable the PCEN range-compression stage");
}

FrontendVariant resolve_variant(const Common& c) {
  FrontendVariant v = FrontendVariant::from_name(c.frontend);
  v.no_agc = c.no_agc;
  v.no_drc = c.no_drc;
  try {
    v.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return v;
}

FramingConfig resolve_framing(const Common& c) {
  return c.config_path.empty() ? FramingConfig{} : load_framing(c.config_path);
}

FrontendParams resolve_params(const Common& c, const FrontendVariant& v, std::size_t channels) {
  FrontendParams p = c.params_path.empty() ? kernel_init(v, channels) : load_params(c.params_path, &v);
  check_params(v, p, channels);
  return p;
}

FeatureFormat parse_format(const std::string& s) { return s == "csv" ? FeatureFormat::csv : FeatureFormat::bin; }

int do_extract(const Common& c, const std::vector<std::string>& inputs, const std::string& output,
               const std::string& format_name, std::size_t jobs, std::ostream& err) {
  const FrontendVariant variant = resolve_variant(c);
  const FramingConfig framing = resolve_framing(c);
  const FrontendParams params = resolve_params(c, variant, framing.n_mels);
  const FeatureFormat format = parse_format(format_name);

  std::vector<fs::path> outputs;
  if (inputs.size() == 1) {
    outputs.emplace_back(output);
  } else {
    const fs::path dir(output);
    if (!fs::is_directory(dir)) throw UsageError("--output must be an existing directory when several inputs are given");
    for (const auto& in : inputs)
      outputs.push_back(dir / fs::path(in).filename().replace_extension(format == FeatureFormat::csv ? ".csv" : ".feat"));
  }

  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  int status = kExitOk;
  auto worker = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      try {
        const FeatureMatrix fm = extract_features(load_wav(inputs[i]), variant, params, framing);
        write_features(fm.values, outputs[i], format);
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mutex);
        err << "error: " << inputs[i] << ": " << e.what() << "\n";
        status = kExitRuntime;
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, inputs.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  return status;
}

int do_render(const Common& c, const std::string& input, const std::string& output, std::ostream& err) {
  const FrontendVariant variant = resolve_variant(c);
  const FramingConfig framing = resolve_framing(c);
  const FrontendParams params = resolve_params(c, variant, framing.n_mels);
  const FeatureMatrix fm = extract_features(load_wav(input), variant, params, framing);
  if (!render_spectrogram(fm.values, output))
    err << "warning: feature range is degenerate (max == min); wrote an all-zero image\n";
  return kExitOk;
}

int do_init(const Common& c, const std::string& output, std::size_t channels) {
  const FrontendVariant variant = resolve_variant(c);
  const FramingConfig framing = resolve_framing(c);
  save_params(kernel_init(variant, channels ? channels : framing.n_mels), output);
  return kExitOk;
}

int do_gradcheck(const Common& c, std::uint64_t seed, std::size_t frames, std::size_t channels,
                 std::ostream& out) {
  const FrontendVariant variant = resolve_variant(c);
  if (!variant.trainable()) throw UsageError("--frontend " + c.frontend + " has no trainable parameters");
  const bool has_splice = variant.post_norm == PostNorm::pcmn_splice;
  if (frames == 0) frames = has_splice ? 30 : 8;
  if (channels == 0) channels = has_splice ? 5 : 3;
  const GradcheckReport report = gradcheck(variant, seed, frames, channels);
  double worst = 0.0;
  for (const auto& g : report.groups) {
    out << g.name << " max_rel_error=" << g.max_rel_error << " max_abs_grad=" << g.max_abs_analytic
        << " threshold=" << g.threshold << (g.passed() ? " PASS" : " FAIL") << "\n";
    worst = std::max(worst, g.max_rel_error);
  }
  out << "max_rel_error=" << worst << (report.passed() ? " PASS" : " FAIL") << "\n";
  return report.passed() ? kExitOk : kExitRuntime;
}

struct FitOptions {
  std::size_t steps = 500;
  double lr = 0.05;
  std::uint64_t seed = 0;
  std::size_t pairs = 20;
  std::vector<std::string> clean;
  std::vector<std::string> degraded;
  std::string report;
  std::string output;
};

int do_fit(const Common& c, const FitOptions& o, std::ostream& out, std::ostream& err) {
  const FrontendVariant variant = resolve_variant(c);
  if (!variant.trainable()) throw UsageError("--frontend " + c.frontend + " has no trainable parameters");
  if (o.clean.size() != o.degraded.size()) throw UsageError("--clean and --degraded must be given the same number of times");
  const FramingConfig framing = resolve_framing(c);
  FrontendParams params = resolve_params(c, variant, framing.n_mels);

  std::vector<ProxyPair> pairs;
  if (o.clean.empty()) {
    pairs = make_gain_mismatch_task(o.seed, o.pairs, 1.0, framing.sample_rate);
  } else {
    for (std::size_t i = 0; i < o.clean.size(); ++i) pairs.push_back({load_wav(o.clean[i]), load_wav(o.degraded[i])});
  }

  FitConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.steps = o.steps;
  cfg.seed = o.seed;
  std::string lines;
  const FitResult result = fit(pairs, variant, std::move(params), cfg, framing, [&](const FitRecord& r) {
    lines += to_json_line(r);
    lines += '\n';
  });
  if (o.report.empty())
    out << lines;
  else
    write_file_atomic(o.report, lines);
  if (!o.output.empty()) save_params(result.params, o.output);
  err << "initial_loss=" << result.initial_loss << " final_loss=" << result.final_loss << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Channel-normalization acoustic front-ends", "chanorm"};
  app.require_subcommand(1);

  Common common;
  std::vector<std::string> inputs;
  std::string input;
  std::string output;
  std::string format = "bin";
  std::size_t jobs = 1;
  std::uint64_t seed = 0;
  std::size_t frames = 0;
  std::size_t channels = 0;
  FitOptions fit_opts;

  auto* extract = app.add_subcommand("extract", "Extract features from WAV files");
  add_common(extract, common);
  extract->add_option("--input", inputs, "Input WAV file(s)")->required()->check(CLI::ExistingFile);
  extract->add_option("--output", output, "Output feature file, or directory for several inputs")->required();
  extract->add_option("--format", format, "Feature file format")->check(CLI::IsMember({"bin", "csv"}));
  extract->add_option("--jobs", jobs, "Files processed concurrently")->check(CLI::PositiveNumber);

  auto* fitcmd = app.add_subcommand("fit", "Fit trainable parameters on a clean/degraded proxy task");
  add_common(fitcmd, common);
  fitcmd->add_option("--steps", fit_opts.steps, "Gradient steps")->check(CLI::PositiveNumber);
  fitcmd->add_option("--lr", fit_opts.lr, "Learning rate")->check(CLI::PositiveNumber);
  fitcmd->add_option("--seed", fit_opts.seed, "Seed for the synthetic task");
  fitcmd->add_option("--pairs", fit_opts.pairs, "Synthetic pairs")->check(CLI::PositiveNumber);
  fitcmd->add_option("--clean", fit_opts.clean, "Clean WAV (repeat, paired with --degraded)")->check(CLI::ExistingFile);
  fitcmd->add_option("--degraded", fit_opts.degraded, "Degraded WAV (repeat)")->check(CLI::ExistingFile);
  fitcmd->add_option("--report", fit_opts.report, "JSON-lines fit report (default: stdout)");
  fitcmd->add_option("--output", fit_opts.output, "Write fitted parameters here");

  auto* gradcmd = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  add_common(gradcmd, common, false);
  gradcmd->add_option("--seed", seed, "Random seed");
  gradcmd->add_option("--frames", frames, "Frames (default 8, or 30 with splice PCMN)");
  gradcmd->add_option("--channels", channels, "Channels (default 3, or 5 with splice PCMN)");

  auto* render = app.add_subcommand("render", "Render features as an 8-bit PGM image");
  add_common(render, common);
  render->add_option("--input", input, "Input WAV file")->required()->check(CLI::ExistingFile);
  render->add_option("--output", output, "Output PGM file")->required();

  auto* init = app.add_subcommand("init-params", "Write kernel-initialized parameters");
  add_common(init, common, false);
  init->add_option("--output", output, "Output parameter file")->required();
  init->add_option("--channels", channels, "Channels (default: n_mels of the framing config)");

  // CLI11 consumes a reversed argument list without the program name.
  std::vector<std::string> rest(args.rbegin(), args.rend());
  if (!rest.empty()) rest.pop_back();
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (extract->parsed()) return do_extract(common, inputs, output, format, jobs, err);
    if (fitcmd->parsed()) return do_fit(common, fit_opts, out, err);
    if (gradcmd->parsed()) return do_gradcheck(common, seed, frames, channels, out);
    if (render->parsed()) return do_render(common, input, output, err);
    if (init->parsed()) return do_init(common, output, channels);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace chanorm::cli
