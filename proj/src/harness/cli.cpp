// Copyright 2026 The dmid Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dmid/harness/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "dmid/denoisers.hpp"
#include "dmid/ensemble.hpp"
#include "dmid/error.hpp"
#include "dmid/harness/image_io.hpp"
#include "dmid/harness/manifest.hpp"
#include "dmid/harness/synthetic.hpp"
#include "dmid/iterative.hpp"
#include "dmid/metrics.hpp"
#include "dmid/sampler.hpp"
#include "dmid/schedule.hpp"
#include "dmid/transform.hpp"

namespace dmid::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

class OutputExists : public Error {
 public:
  using Error::Error;
};

class ReplayMismatch : public Error {
 public:
  using Error::Error;
};

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// ---------------------------------------------------------------------------
// Shared option groups

struct ScheduleOptions {
  int timesteps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  void add(CLI::App* app) {
    app->add_option("--timesteps", timesteps, "Diffusion timesteps T")->capture_default_str();
    app->add_option("--beta-start", beta_start, "First beta of the linear schedule")
        ->capture_default_str();
    app->add_option("--beta-end", beta_end, "Last beta of the linear schedule")
        ->capture_default_str();
  }
  NoiseSchedule build() const { return build_linear_schedule(timesteps, beta_start, beta_end); }
  json to_json() const {
    return {{"timesteps", timesteps}, {"beta_start", beta_start}, {"beta_end", beta_end}};
  }
};

TimestepRounding parse_rounding(const std::string& name) {
  if (name == "nearest") return TimestepRounding::kNearest;
  if (name == "up") return TimestepRounding::kUp;
  throw ConfigError(fmt::format("unknown rounding '{}'", name));
}

// Recorded on every manifest entry so the run can be replayed verbatim.
struct Invocation {
  std::string command;
  std::vector<std::string> args;
  std::vector<std::string> output_flags;
};

json run_record(const Invocation& inv, json config, json inputs, json outputs, json timings) {
  return {{"kind", "run"},
          {"tool", "dmid"},
          {"version", kVersion},
          {"command", inv.command},
          {"args", inv.args},
          {"output_flags", inv.output_flags},
          {"cwd", fs::current_path().string()},
          {"config", std::move(config)},
          {"inputs", std::move(inputs)},
          {"outputs", std::move(outputs)},
          {"timings_ms", std::move(timings)}};
}

std::string format_psnr(const MetricReport& r) {
  return r.identical() ? "inf" : fmt::format("{:.4f}", r.psnr);
}

void refuse_overwrite(const std::string& path, bool force) {
  if (!force && fs::exists(path)) {
    throw OutputExists(fmt::format("refusing to overwrite '{}' (pass --force)", path));
  }
}

// ---------------------------------------------------------------------------
// embed-info

struct EmbedInfoOptions {
  double sigma = 0;
  double peak = 255;
  std::string rounding = "nearest";
  ScheduleOptions schedule;
};

void cmd_embed_info(const EmbedInfoOptions& o) {
  if (!(o.peak > 0)) throw ConfigError("--peak must be > 0");
  const NoiseSchedule schedule = o.schedule.build();
  const double sigma_latent = 2.0 * o.sigma / o.peak;
  const EmbeddingPlan plan = select_timestep(schedule, sigma_latent, parse_rounding(o.rounding));
  fmt::print("sigma: {}\n", o.sigma);
  fmt::print("sigma_latent: {}\n", sigma_latent);
  fmt::print("N: {}\n", plan.timestep);
  fmt::print("scale: {}\n", plan.scale);
  fmt::print("matched_sigma: {}\n", plan.matched_sigma);
}

// ---------------------------------------------------------------------------
// schedule dump

struct ScheduleDumpOptions {
  std::string out;
  ScheduleOptions schedule;
};

void cmd_schedule_dump(const ScheduleDumpOptions& o, const Invocation& inv) {
  const auto start = Clock::now();
  const NoiseSchedule schedule = o.schedule.build();
  std::string csv = "t,beta,alpha_bar,d\n";
  for (int t = 0; t <= schedule.steps(); ++t) {
    csv += fmt::format("{},{},{},{}\n", t, t == 0 ? 0.0 : schedule.beta(t), schedule.alpha_bar(t),
                       schedule.denoise_level(t));
  }
  io::write_file_atomic(o.out, {csv.begin(), csv.end()});
  harness::append_manifest(harness::manifest_path_for(o.out),
                           run_record(inv, o.schedule.to_json(), json::array(),
                                      json::array({harness::file_entry(o.out)}),
                                      {{"total", elapsed_ms(start)}}));
}

// ---------------------------------------------------------------------------
// noise add / estimate

struct NoiseAddOptions {
  std::string in, out;
  double sigma = 0;
  std::uint64_t seed = 0;
};

void cmd_noise_add(const NoiseAddOptions& o, const Invocation& inv) {
  const auto start = Clock::now();
  const PixelImage clean = io::load_image(o.in);
  io::save_image(o.out, harness::add_awgn(clean, o.sigma, o.seed));
  harness::append_manifest(
      harness::manifest_path_for(o.out),
      run_record(inv, {{"sigma", o.sigma}, {"seed", o.seed}},
                 json::array({harness::file_entry(o.in)}),
                 json::array({harness::file_entry(o.out)}), {{"total", elapsed_ms(start)}}));
}

void cmd_noise_estimate(const std::string& in) {
  fmt::print("sigma: {}\n", estimate_sigma(io::load_image(in)));
}

// ---------------------------------------------------------------------------
// denoise

struct DenoiseOptions {
  std::string in, out, ref;
  std::optional<double> sigma;
  bool blind = false;
  std::string noise = "gaussian";
  double gain = 1.0;
  int st = 1;
  int rt = 1;
  double gamma = 0.85;
  std::uint64_t seed = 0;
  std::string denoiser = "dct";
  std::string variant;
  std::string rounding = "nearest";
  std::size_t crop = 0;
  unsigned jobs = 1;
  ScheduleOptions schedule;
};

void cmd_denoise(const DenoiseOptions& o, const Invocation& inv) {
  const auto start = Clock::now();
  if (o.sigma.has_value() == o.blind) throw ConfigError("give exactly one of --sigma or --blind");
  PixelImage image = io::load_image(o.in);
  if (o.crop > 0) image = center_crop(image, o.crop);

  NoiseModel model{parse_noise_kind(o.noise), o.blind ? 0.0 : *o.sigma, o.gain};
  double estimated = -1.0;
  if (o.blind) {
    estimated = estimate_sigma(image);
    model.sigma = estimated;
  }
  const NoiseSchedule schedule = o.schedule.build();
  const auto denoiser = make_denoiser(o.denoiser);

  const LatentImage latent = to_latent(image, model);
  const EmbeddingPlan plan = select_timestep(schedule, latent.sigma_latent, parse_rounding(o.rounding));

  EnsembleConfig cfg;
  if (o.variant.empty()) {
    cfg.base = {plan.timestep, plan.timestep == 0 ? 0 : o.st, o.gamma, o.seed};
    cfg.repeats = o.rt;
  } else {
    VariantOptions vo;
    vo.gamma = o.gamma;
    vo.seed = o.seed;
    const VariantPlan variants = plan_variants(latent.sigma_latent, schedule, vo);
    if (o.variant == "distortion") {
      cfg = variants.distortion;
      if (!variants.warning.empty()) fmt::print(stderr, "warning: {}\n", variants.warning);
    } else if (o.variant == "perception") {
      cfg = variants.perception;
    } else {
      throw ConfigError(fmt::format("unknown variant '{}'", o.variant));
    }
  }

  const auto sample_start = Clock::now();
  const LatentImage restored = run_ensemble(latent, cfg, schedule, *denoiser, o.jobs);
  const double sample_ms = elapsed_ms(sample_start);
  const PixelImage result = from_latent(restored, model, image.range);
  io::save_image(o.out, result);

  if (o.blind) fmt::print("estimated_sigma: {}\n", estimated);
  fmt::print("N: {}\nS_t: {}\nR_t: {}\n", plan.timestep, cfg.base.sampling_steps, cfg.repeats);

  json inputs = json::array({harness::file_entry(o.in)});
  json metrics;
  if (!o.ref.empty()) {
    PixelImage reference = io::load_image(o.ref);
    if (o.crop > 0) reference = center_crop(reference, o.crop);
    const double peak = image.range.span();
    const MetricReport noisy = psnr(image, reference, peak);
    const MetricReport restored_metric = psnr(result, reference, peak);
    fmt::print("psnr_noisy: {}\npsnr: {}\nmse: {}\n", format_psnr(noisy),
               format_psnr(restored_metric), restored_metric.mse);
    inputs.push_back(harness::file_entry(o.ref));
    metrics = {{"mse", restored_metric.mse},
               {"psnr", restored_metric.identical() ? json("inf") : json(restored_metric.psnr)},
               {"psnr_noisy", noisy.identical() ? json("inf") : json(noisy.psnr)}};
  }

  json config = {{"sigma", model.sigma},
                 {"blind", o.blind},
                 {"noise", o.noise},
                 {"gain", o.gain},
                 {"timestep", plan.timestep},
                 {"sampling_steps", cfg.base.sampling_steps},
                 {"repeats", cfg.repeats},
                 {"gamma", cfg.base.gamma},
                 {"seed", cfg.base.seed},
                 {"denoiser", o.denoiser},
                 {"crop", o.crop},
                 {"schedule", o.schedule.to_json()}};
  if (!metrics.is_null()) config["metrics"] = metrics;
  harness::append_manifest(harness::manifest_path_for(o.out),
                           run_record(inv, std::move(config), std::move(inputs),
                                      json::array({harness::file_entry(o.out)}),
                                      {{"sampling", sample_ms}, {"total", elapsed_ms(start)}}));
}

// ---------------------------------------------------------------------------
// baseline

struct BaselineOptions {
  std::string in, out, ref;
  double sigma = 0;
  int iters = 5;
  std::string gamma_decay = "geometric";
  double gamma_end = 0.05;
  std::string denoiser = "dct";
};

void cmd_baseline(const BaselineOptions& o, const Invocation& inv) {
  const auto start = Clock::now();
  if (o.gamma_decay != "geometric") {
    throw ConfigError(fmt::format("unknown gamma decay '{}'", o.gamma_decay));
  }
  const PixelImage image = io::load_image(o.in);
  const NoiseModel model = NoiseModel::gaussian(o.sigma);
  const LatentImage latent = to_latent(image, model);
  const LatentImage restored =
      run_iterative(latent, IterationSchedule::geometric(o.iters, 1.0, o.gamma_end),
                    make_image_denoiser(o.denoiser), latent.sigma_latent);
  const PixelImage result = from_latent(restored, model, image.range);
  io::save_image(o.out, result);

  json inputs = json::array({harness::file_entry(o.in)});
  if (!o.ref.empty()) {
    const PixelImage reference = io::load_image(o.ref);
    const MetricReport r = psnr(result, reference, image.range.span());
    fmt::print("psnr: {}\nmse: {}\n", format_psnr(r), r.mse);
    inputs.push_back(harness::file_entry(o.ref));
  }
  harness::append_manifest(
      harness::manifest_path_for(o.out),
      run_record(inv,
                 {{"sigma", o.sigma},
                  {"iters", o.iters},
                  {"gamma_decay", o.gamma_decay},
                  {"gamma_end", o.gamma_end},
                  {"denoiser", o.denoiser}},
                 std::move(inputs), json::array({harness::file_entry(o.out)}),
                 {{"total", elapsed_ms(start)}}));
}

// ---------------------------------------------------------------------------
// synthetic

struct SyntheticOptions {
  std::string out;
  std::string prior;
  std::string image;
  std::size_t n = 1024;
  double sigma = 0;
  std::uint64_t seed = 0;
  bool force = false;
};

void cmd_synthetic(const SyntheticOptions& o, const Invocation& inv) {
  const auto start = Clock::now();
  if (o.prior.empty() == o.image.empty()) throw ConfigError("give exactly one of --prior or --image");
  if (!(o.sigma >= 0)) throw ConfigError("--sigma must be >= 0");
  // Validate everything before touching the filesystem.
  std::vector<double> clean_samples;
  PixelImage clean;
  if (!o.prior.empty()) {
    const auto colon = o.prior.find(':');
    const std::string kind = o.prior.substr(0, colon);
    const std::string args = colon == std::string::npos ? "" : o.prior.substr(colon + 1);
    if (kind == "gaussian") {
      const auto g = std::dynamic_pointer_cast<const GaussianDenoiser>(make_denoiser(o.prior));
      clean_samples = harness::sample_prior(g->prior(), o.n, o.seed);
    } else if (kind == "gmm") {
      clean_samples = harness::sample_prior(GaussianMixturePrior::load(args), o.n, o.seed);
    } else {
      throw ConfigError(fmt::format("unknown prior '{}'", o.prior));
    }
    clean = PixelImage({1, 1, o.n}, std::move(clean_samples), {-1.0, 1.0});
  } else {
    clean = io::load_image(o.image);
  }

  const fs::path dir(o.out);
  const bool from_image = !o.image.empty();
  const std::vector<std::string> files =
      from_image ? std::vector<std::string>{"clean.pgm", "noisy.raw", "noisy.pgm"}
                 : std::vector<std::string>{"clean.raw", "noisy.raw"};
  for (const auto& f : files) refuse_overwrite((dir / f).string(), o.force);
  fs::create_directories(dir);

  const PixelImage noisy = harness::add_awgn(clean, o.sigma, repeat_seed(o.seed, 1));
  json outputs = json::array();
  for (const auto& f : files) {
    const std::string path = (dir / f).string();
    io::save_image(path, f.starts_with("clean") ? clean : noisy);
    outputs.push_back(harness::file_entry(path));
  }
  json inputs = json::array();
  if (from_image) inputs.push_back(harness::file_entry(o.image));
  harness::append_manifest((dir / "manifest.jsonl").string(),
                           run_record(inv,
                                      {{"prior", o.prior},
                                       {"image", o.image},
                                       {"n", o.n},
                                       {"sigma", o.sigma},
                                       {"generator_seed", o.seed}},
                                      std::move(inputs), std::move(outputs),
                                      {{"total", elapsed_ms(start)}}));
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOptions {
  std::vector<std::string> grid;
  std::vector<std::uint64_t> seeds;
  std::uint64_t seed = 0;
  std::string csv;
  std::string task;
  std::string in;
  std::string image_id;
  double sigma = 50;
  std::string denoiser;
  std::size_t oracle_n = 4096;
  double oracle_std = 0.5;
  std::uint64_t noise_seed = 0;
  double gamma = 0.85;
  unsigned jobs = 1;
  ScheduleOptions schedule;
};

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("bad grid value '{}'", item));
    }
  }
  return out;
}

struct Grid {
  std::vector<int> st;
  std::vector<int> rt;
};

Grid parse_grid(const std::vector<std::string>& specs) {
  Grid grid{{1}, {1}};
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("grid entry '{}' needs key=values", spec));
    const std::string key = spec.substr(0, eq);
    if (key == "st") {
      grid.st = parse_int_list(spec.substr(eq + 1));
    } else if (key == "rt") {
      grid.rt = parse_int_list(spec.substr(eq + 1));
    } else {
      throw ConfigError(fmt::format("unknown grid axis '{}'", key));
    }
  }
  return grid;
}

struct SweepCell {
  int st;
  int rt;
  std::uint64_t seed;
  std::string key() const { return fmt::format("{}/{}/{}", st, rt, seed); }
};

constexpr const char* kSweepHeader = "image_id,sigma,st,rt,gamma,seed,mse,psnr,wall_ms,lpips,fid,status\n";

void cmd_sweep(const SweepOptions& o, const Invocation& inv) {
  const auto start = Clock::now();
  const Grid grid = parse_grid(o.grid);
  const std::vector<std::uint64_t> seeds = o.seeds.empty() ? std::vector{o.seed} : o.seeds;
  const NoiseSchedule schedule = o.schedule.build();
  const std::string task = o.task.empty() ? (o.in.empty() ? "oracle" : "image") : o.task;

  // Problem setup shared by all cells.
  LatentImage latent;
  std::vector<double> reference;
  NoiseModel model = NoiseModel::gaussian(o.sigma);
  ValueRange range{0.0, 255.0};
  double peak = 2.0;
  std::string image_id = o.image_id;
  std::string denoiser_spec = o.denoiser;
  json inputs = json::array();
  if (task == "oracle") {
    const double sigma_latent = 2.0 * o.sigma / 255.0;
    const auto problem = harness::make_oracle_task(o.oracle_n, 0.0, o.oracle_std, sigma_latent,
                                                   o.noise_seed, schedule);
    latent = {{1, 1, o.oracle_n}, problem.noisy, problem.sigma_latent};
    reference = problem.clean;
    if (denoiser_spec.empty()) denoiser_spec = fmt::format("gaussian:0,{}", o.oracle_std);
    if (image_id.empty()) image_id = "oracle";
  } else if (task == "image") {
    if (o.in.empty()) throw ConfigError("the image task needs --in");
    const PixelImage clean = io::load_image(o.in);
    range = clean.range;
    peak = range.span();
    latent = to_latent(harness::add_awgn(clean, o.sigma, o.noise_seed), model);
    reference = clean.data;
    if (denoiser_spec.empty()) denoiser_spec = "dct";
    if (image_id.empty()) image_id = fs::path(o.in).stem().string();
    inputs.push_back(harness::file_entry(o.in));
  } else {
    throw ConfigError(fmt::format("unknown sweep task '{}'", task));
  }
  const auto denoiser = make_denoiser(denoiser_spec);
  const int timestep = select_timestep(schedule, latent.sigma_latent).timestep;

  json problem = {{"task", task},
                  {"sigma", o.sigma},
                  {"gamma", o.gamma},
                  {"denoiser", denoiser_spec},
                  {"noise_seed", o.noise_seed},
                  {"oracle_n", o.oracle_n},
                  {"oracle_std", o.oracle_std},
                  {"schedule", o.schedule.to_json()},
                  {"input", inputs.empty() ? json() : inputs[0]["sha256"]}};
  const std::string config_hash = harness::sha256_hex(problem.dump()).substr(0, 16);

  std::vector<SweepCell> cells;
  for (int st : grid.st) {
    for (int rt : grid.rt) {
      for (std::uint64_t seed : seeds) cells.push_back({st, rt, seed});
    }
  }

  const std::string manifest = harness::manifest_path_for(o.csv);
  std::map<std::string, std::string> rows;
  for (const json& record : harness::read_manifest(manifest)) {
    if (record.value("kind", "") == "cell" && record.value("config_hash", "") == config_hash) {
      rows[record.at("cell").get<std::string>()] = record.at("row").get<std::string>();
    }
  }

  std::vector<const SweepCell*> pending;
  for (const auto& cell : cells) {
    if (!rows.contains(cell.key())) pending.push_back(&cell);
  }
  if (pending.size() < cells.size()) {
    fmt::print(stderr, "resuming: {} of {} cells already done\n", cells.size() - pending.size(),
               cells.size());
  }

  std::mutex rows_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < pending.size(); i = next++) {
      const SweepCell& cell = *pending[i];
      const auto cell_start = Clock::now();
      std::string metrics;
      try {
        EnsembleConfig cfg;
        cfg.base = {timestep, timestep == 0 ? 0 : cell.st, o.gamma, cell.seed};
        cfg.repeats = cell.rt;
        const LatentImage out = run_ensemble(latent, cfg, schedule, *denoiser, 1);
        std::vector<double> estimate = out.data;
        if (task == "image") estimate = from_latent(out, model, range).data;
        const MetricReport r = psnr(estimate, reference, peak);
        metrics = fmt::format("{},{},{:.3f},,,ok", r.mse, format_psnr(r), elapsed_ms(cell_start));
      } catch (const std::exception& e) {
        std::string what = e.what();
        std::replace(what.begin(), what.end(), ',', ';');
        metrics = fmt::format(",,{:.3f},,,error: {}", elapsed_ms(cell_start), what);
      }
      const std::string row = fmt::format("{},{},{},{},{},{},{}", image_id, o.sigma, cell.st,
                                          cell.rt, o.gamma, cell.seed, metrics);
      harness::append_manifest(manifest, {{"kind", "cell"},
                                          {"config_hash", config_hash},
                                          {"cell", cell.key()},
                                          {"row", row}});
      std::lock_guard lock(rows_mutex);
      rows[cell.key()] = row;
    }
  };
  const unsigned workers =
      std::clamp<unsigned>(o.jobs, 1, static_cast<unsigned>(std::max<std::size_t>(1, pending.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }

  std::string csv = kSweepHeader;
  for (const auto& cell : cells) csv += rows.at(cell.key()) + "\n";
  io::write_file_atomic(o.csv, {csv.begin(), csv.end()});
  fmt::print("cells: {}\n", cells.size());

  harness::append_manifest(manifest,
                           run_record(inv, {{"problem", problem}, {"config_hash", config_hash}},
                                      std::move(inputs),
                                      json::array({harness::file_entry(o.csv, false)}),
                                      {{"total", elapsed_ms(start)}}));
}

// ---------------------------------------------------------------------------
// replay

struct ReplayOptions {
  std::string manifest;
  std::string suffix = ".replay";
  std::optional<unsigned> jobs;
};

std::string with_suffix(const std::string& path, const std::string& suffix) {
  const fs::path p(path);
  if (!p.has_extension()) return path + suffix;
  return (p.parent_path() / (p.stem().string() + suffix + p.extension().string())).string();
}

std::string manifest_location(const std::string& command, const std::string& output) {
  return command == "synthetic" ? (fs::path(output) / "manifest.jsonl").string()
                                : harness::manifest_path_for(output);
}

int cmd_replay(const ReplayOptions& o) {
  const auto records = harness::read_manifest(o.manifest);
  const json* original = nullptr;
  for (const auto& r : records) {
    if (r.value("kind", "") == "run") original = &r;
  }
  if (!original) throw IoError(fmt::format("'{}' holds no run record", o.manifest));

  const std::string command = original->at("command");
  auto args = original->at("args").get<std::vector<std::string>>();
  const auto output_flags = original->at("output_flags").get<std::vector<std::string>>();
  std::string primary_output;
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (std::find(output_flags.begin(), output_flags.end(), args[i]) != output_flags.end()) {
      const std::string replaced = command == "synthetic" ? args[i + 1] + o.suffix
                                                          : with_suffix(args[i + 1], o.suffix);
      if (primary_output.empty()) primary_output = replaced;
      args[i + 1] = replaced;
    }
  }
  if (o.jobs) {
    const auto it = std::find(args.begin(), args.end(), "--jobs");
    if (it != args.end() && it + 1 != args.end()) {
      *(it + 1) = std::to_string(*o.jobs);
    } else if (command == "denoise" || command == "sweep") {
      args.push_back("--jobs");
      args.push_back(std::to_string(*o.jobs));
    }
  }
  if (command == "synthetic" && std::find(args.begin(), args.end(), "--force") == args.end()) {
    args.push_back("--force");
  }

  const fs::path previous = fs::current_path();
  fs::current_path(original->at("cwd").get<std::string>());
  int code = kInternalError;
  try {
    code = run(args);
  } catch (...) {
    fs::current_path(previous);
    throw;
  }
  if (code != kOk) {
    fs::current_path(previous);
    return code;
  }

  const auto replayed = harness::read_manifest(manifest_location(command, primary_output));
  fs::current_path(previous);
  if (replayed.empty()) throw IoError("replayed run wrote no manifest");
  const json& fresh = replayed.back();
  const json& before = original->at("outputs");
  const json& after = fresh.at("outputs");
  if (before.size() != after.size()) throw ReplayMismatch("replay produced a different output set");
  bool all_match = true;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const bool deterministic = before[i].value("deterministic", true);
    const bool same = before[i].at("sha256") == after[i].at("sha256");
    const char* verdict = !deterministic ? "skipped" : same ? "match" : "MISMATCH";
    fmt::print("{} {} -> {}\n", verdict, before[i].at("path").get<std::string>(),
               after[i].at("path").get<std::string>());
    if (deterministic && !same) all_match = false;
  }
  return all_match ? kOk : kReplayMismatch;
}

// ---------------------------------------------------------------------------
// Flat key=value config files. Keys are long flag names without dashes;
// anything given on the command line wins.

std::vector<std::string> apply_config_file(std::vector<std::string> args) {
  const auto it = std::find(args.begin(), args.end(), "--config");
  if (it == args.end()) return args;
  if (it + 1 == args.end()) throw ConfigError("--config needs a file");
  const std::string path = *(it + 1);
  args.erase(it, it + 2);

  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read config '{}'", path));
  std::set<std::string> given;
  for (const auto& a : args) {
    if (a.starts_with("--")) given.insert(a.substr(0, a.find('=')));
  }
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("{}:{}: expected key=value", path, lineno));
    const std::string flag = "--" + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (given.contains(flag)) continue;
    if (value == "true") {
      args.push_back(flag);
    } else if (value == "false") {
      continue;
    } else {
      args.push_back(flag);
      std::istringstream words(value);
      for (std::string w; words >> w;) args.push_back(w);
    }
  }
  return args;
}

std::vector<std::string> with_seed(std::vector<std::string> args, std::uint64_t seed) {
  if (std::find(args.begin(), args.end(), "--seed") == args.end()) {
    args.push_back("--seed");
    args.push_back(std::to_string(seed));
  }
  return args;
}

constexpr const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  1  internal error\n"
    "  2  invalid flags or configuration\n"
    "  3  unreadable input or unwritable output\n"
    "  4  noise level beyond the schedule's range\n"
    "  5  output exists (pass --force)\n"
    "  6  replayed outputs differ from the manifest";

}  // namespace

int run(std::vector<std::string> raw_args) {
  CLI::App app{"Diffusion-model image denoising with adaptive embedding and ensembling", "dmid"};
  app.footer(kExitCodes);
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.add_option("--config", "Flat key=value file supplying defaults for any flag");

  EmbedInfoOptions embed_info;
  auto* embed_cmd = app.add_subcommand("embed-info", "Show the embedding plan for a noise level");
  embed_cmd->add_option("--sigma", embed_info.sigma, "Noise std in source units")->required();
  embed_cmd->add_option("--peak", embed_info.peak, "Source value range")->capture_default_str();
  embed_cmd->add_option("--rounding", embed_info.rounding, "nearest | up")->capture_default_str();
  embed_info.schedule.add(embed_cmd);

  auto* schedule_cmd = app.add_subcommand("schedule", "Schedule utilities");
  schedule_cmd->require_subcommand(1);
  ScheduleDumpOptions dump;
  auto* dump_cmd = schedule_cmd->add_subcommand("dump", "Write t,beta,alpha_bar,d as CSV");
  dump_cmd->add_option("--out", dump.out, "CSV path")->required();
  dump.schedule.add(dump_cmd);

  auto* noise_cmd = app.add_subcommand("noise", "Synthetic noise and noise estimation");
  noise_cmd->require_subcommand(1);
  NoiseAddOptions noise_add;
  auto* add_cmd = noise_cmd->add_subcommand("add", "Add white Gaussian noise");
  add_cmd->add_option("--in", noise_add.in)->required();
  add_cmd->add_option("--out", noise_add.out)->required();
  add_cmd->add_option("--sigma", noise_add.sigma, "Noise std in source units")->required();
  add_cmd->add_option("--seed", noise_add.seed)->envname("DMID_SEED");
  std::string estimate_in;
  auto* estimate_cmd = noise_cmd->add_subcommand("estimate", "Estimate the noise std blindly");
  estimate_cmd->add_option("--in", estimate_in)->required();

  DenoiseOptions den;
  auto* den_cmd = app.add_subcommand("denoise", "Denoise an image");
  den_cmd->add_option("--in", den.in, "Noisy input image")->required();
  den_cmd->add_option("--out", den.out, "Output image")->required();
  den_cmd->add_option("--ref", den.ref, "Clean reference; prints PSNR when given");
  den_cmd->add_option("--sigma", den.sigma, "Noise std in source units");
  den_cmd->add_flag("--blind", den.blind, "Estimate the noise std from the input");
  den_cmd->add_option("--noise", den.noise, "gaussian | poisson-gaussian")->capture_default_str();
  den_cmd->add_option("--gain", den.gain, "Poisson gain")->capture_default_str();
  den_cmd->add_option("--st", den.st, "Sampling steps per inference")->capture_default_str();
  den_cmd->add_option("--rt", den.rt, "Inference repeats to average")->capture_default_str();
  den_cmd->add_option("--gamma", den.gamma, "Sampling stochasticity in [0, 1]")->capture_default_str();
  den_cmd->add_option("--seed", den.seed)->envname("DMID_SEED");
  den_cmd->add_option("--denoiser", den.denoiser,
                      "gaussian:<mu>,<s> | gmm:<file> | dct[:<patch>,<stride>,<k>] | zero")
      ->capture_default_str();
  den_cmd->add_option("--variant", den.variant, "distortion | perception (overrides --st/--rt)");
  den_cmd->add_option("--rounding", den.rounding, "Timestep selection: nearest | up")
      ->capture_default_str();
  den_cmd->add_option("--crop", den.crop, "Center crop size before denoising");
  den_cmd->add_option("--jobs", den.jobs, "Worker threads")->capture_default_str();
  den.schedule.add(den_cmd);

  BaselineOptions base;
  auto* base_cmd = app.add_subcommand("baseline", "Plug-in iterative denoising baseline");
  base_cmd->add_option("--in", base.in)->required();
  base_cmd->add_option("--out", base.out)->required();
  base_cmd->add_option("--ref", base.ref);
  base_cmd->add_option("--sigma", base.sigma, "Noise std in source units")->required();
  base_cmd->add_option("--iters", base.iters)->capture_default_str();
  base_cmd->add_option("--gamma-decay", base.gamma_decay)->capture_default_str();
  base_cmd->add_option("--gamma-end", base.gamma_end)->capture_default_str();
  base_cmd->add_option("--denoiser", base.denoiser, "gaussian:<mu>,<s> | gmm:<file> | dct[...]")
      ->capture_default_str();

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "S_t x R_t x seed ablation grid");
  sweep_cmd->add_option("--grid", sweep.grid, "Axes, e.g. st=1,2,5 rt=1,10");
  sweep_cmd->add_option("--seeds", sweep.seeds, "Sampling seeds (default: --seed)")->delimiter(',');
  sweep_cmd->add_option("--seed", sweep.seed)->envname("DMID_SEED");
  sweep_cmd->add_option("--csv", sweep.csv, "Output CSV")->required();
  sweep_cmd->add_option("--task", sweep.task, "image | oracle (default: image when --in is given)");
  sweep_cmd->add_option("--in", sweep.in, "Clean image for the image task");
  sweep_cmd->add_option("--image-id", sweep.image_id);
  sweep_cmd->add_option("--sigma", sweep.sigma, "Noise std on the 8-bit scale")->capture_default_str();
  sweep_cmd->add_option("--denoiser", sweep.denoiser);
  sweep_cmd->add_option("--oracle-n", sweep.oracle_n)->capture_default_str();
  sweep_cmd->add_option("--oracle-std", sweep.oracle_std)->capture_default_str();
  sweep_cmd->add_option("--noise-seed", sweep.noise_seed)->capture_default_str();
  sweep_cmd->add_option("--gamma", sweep.gamma)->capture_default_str();
  sweep_cmd->add_option("--jobs", sweep.jobs)->capture_default_str();
  sweep.schedule.add(sweep_cmd);

  SyntheticOptions syn;
  auto* syn_cmd = app.add_subcommand("synthetic", "Write a paired clean/noisy dataset");
  syn_cmd->add_option("--out", syn.out, "Output directory")->required();
  syn_cmd->add_option("--prior", syn.prior, "gaussian:<mu>,<s> | gmm:<file>");
  syn_cmd->add_option("--image", syn.image, "Clean image to corrupt instead of a prior");
  syn_cmd->add_option("--n", syn.n, "Samples drawn from the prior")->capture_default_str();
  syn_cmd->add_option("--sigma", syn.sigma, "Noise std (source units)")->capture_default_str();
  syn_cmd->add_option("--seed", syn.seed)->envname("DMID_SEED");
  syn_cmd->add_flag("--force", syn.force, "Overwrite existing files");

  ReplayOptions replay;
  auto* replay_cmd = app.add_subcommand("replay", "Re-execute a run from its manifest and compare");
  replay_cmd->add_option("manifest", replay.manifest)->required();
  replay_cmd->add_option("--suffix", replay.suffix)->capture_default_str();
  replay_cmd->add_option("--jobs", replay.jobs, "Override the recorded --jobs");

  try {
    std::vector<std::string> args = apply_config_file(std::move(raw_args));
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);

    if (embed_cmd->parsed()) {
      cmd_embed_info(embed_info);
    } else if (dump_cmd->parsed()) {
      cmd_schedule_dump(dump, {"schedule", args, {"--out"}});
    } else if (add_cmd->parsed()) {
      cmd_noise_add(noise_add, {"noise add", with_seed(args, noise_add.seed), {"--out"}});
    } else if (estimate_cmd->parsed()) {
      cmd_noise_estimate(estimate_in);
    } else if (den_cmd->parsed()) {
      cmd_denoise(den, {"denoise", with_seed(args, den.seed), {"--out"}});
    } else if (base_cmd->parsed()) {
      cmd_baseline(base, {"baseline", args, {"--out"}});
    } else if (sweep_cmd->parsed()) {
      cmd_sweep(sweep, {"sweep", with_seed(args, sweep.seed), {"--csv"}});
    } else if (syn_cmd->parsed()) {
      cmd_synthetic(syn, {"synthetic", with_seed(args, syn.seed), {"--out"}});
    } else if (replay_cmd->parsed()) {
      return cmd_replay(replay);
    }
    return kOk;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  } catch (const SaturationError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kSaturated;
  } catch (const OutputExists& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kOutputExists;
  } catch (const ReplayMismatch& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kReplayMismatch;
  } catch (const IoError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kIoError;
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUsageError;
  } catch (const fs::filesystem_error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kIoError;
  } catch (const std::exception& e) {
    fmt::print(stderr, "internal error: {}\n", e.what());
    return kInternalError;
  }
}

}  // namespace dmid::cli
