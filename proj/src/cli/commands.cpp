// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "relit/cli.hpp"
#include "relit/dataset_synthesis.hpp"
#include "relit/image_io.hpp"
#include "relit/image_quality.hpp"
#include "relit/lighting_correction.hpp"
#include "relit/logging.hpp"
#include "relit/neural/demo_training.hpp"
#include "relit/neural/gradcheck.hpp"
#include "relit/soft_rasterizer.hpp"

namespace relit {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string model;
  std::string coeffs;
  std::string sh;
  std::string input;
  std::string target;
  std::string out_dir;
  std::string config;
  std::string manifest;
  std::string size;
  std::string reference = "input";
  std::uint64_t seed = 0;
  std::optional<int> steps;
  double lambda_crt = 1.0;
  std::optional<double> sigma;
  std::optional<double> gamma_depth;
  int threads = 1;
  double split = 0.0;
  int scenes = 20;
};

const std::set<std::string> kPathFlags = {"--model",  "--coeffs", "--sh",      "--input",
                                          "--target", "--out-dir", "--config", "--manifest"};

// Makes every path-valued argument absolute so a manifest can be replayed from any cwd.
std::vector<std::string> normalise_args(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    const auto eq = a.find('=');
    if (eq != std::string::npos && kPathFlags.count(a.substr(0, eq)) != 0) {
      out.push_back(a.substr(0, eq + 1) + fs::absolute(a.substr(eq + 1)).lexically_normal().string());
    } else if (kPathFlags.count(a) != 0 && i + 1 < args.size()) {
      out.push_back(a);
      out.push_back(fs::absolute(args[++i]).lexically_normal().string());
    } else {
      out.push_back(a);
    }
  }
  return out;
}

std::pair<int, int> parse_size(const std::string& s, int default_h, int default_w) {
  if (s.empty()) {
    return {default_h, default_w};
  }
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) {
      throw std::invalid_argument(s);
    }
    std::size_t used_h = 0;
    std::size_t used_w = 0;
    const int h = std::stoi(s.substr(0, x), &used_h);
    const int w = std::stoi(s.substr(x + 1), &used_w);
    if (used_h != x || used_w != s.size() - x - 1 || h < 1 || w < 1) {
      throw std::invalid_argument(s);
    }
    return {h, w};
  } catch (const std::exception&) {
    throw InputError("--size expects HxW with positive integers, got '" + s + "'");
  }
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) {
    throw InputError(std::string(flag) + " is required");
  }
}

RasterConfig raster_for(const Camera& cam, const Options& o) {
  RasterConfig cfg = RasterConfig::defaults_for(cam);
  if (o.sigma) {
    cfg.sigma = *o.sigma;
  }
  if (o.gamma_depth) {
    cfg.gamma_depth = *o.gamma_depth;
  }
  cfg.threads = o.threads;
  cfg.validate();
  return cfg;
}

Json raster_json(const RasterConfig& r) {
  return {{"sigma", r.sigma},
          {"gamma_depth", r.gamma_depth},
          {"min_influence", r.min_influence},
          {"threads", r.threads}};
}

std::string num(double v) {
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  return fmt::format("{}", v);
}

// JSON has no infinity; identical images report null.
Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) {
      throw InputError("cannot write " + path.string());
    }
    f << text;
  }
  fs::rename(tmp, path);
}

void write_loss_csv(const fs::path& path, const std::vector<LossRecord>& history) {
  std::string s = "step,total,term_est,term_crt\n";
  for (const LossRecord& r : history) {
    s += fmt::format("{},{},{},{}\n", r.step, num(r.total), num(r.term_est), num(r.term_crt));
  }
  write_text(path, s);
}

struct Run {
  RunManifest manifest;
  fs::path out;

  fs::path output(const std::string& name) {
    manifest.outputs.push_back(name);
    return out / name;
  }
  void input(const std::string& path) {
    manifest.inputs.push_back(fs::absolute(path).lexically_normal().string());
  }
};

struct Geometry {
  MorphableModel model;
  FaceCoefficients coeffs;
  Mesh mesh;
};

Geometry load_geometry(const Options& o, Run& run) {
  require(o.model, "--model");
  require(o.coeffs, "--coeffs");
  run.input(o.model);
  run.input(o.coeffs);
  Geometry g{load_model(o.model), load_coefficients(o.coeffs), {}};
  g.mesh = evaluate_model(g.model, g.coeffs);
  return g;
}

RasterImage load_image(const std::string& path, const char* flag, Run& run) {
  require(path, flag);
  run.input(path);
  return read_png(path);
}

CorrectionConfig correction_config(const Options& o) {
  CorrectionConfig cfg;
  cfg.steps = o.steps.value_or(cfg.steps);
  cfg.lambda_crt = o.lambda_crt;
  cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

Json correction_json(const CorrectionConfig& c) {
  return {{"steps", c.steps},
          {"lambda_crt", c.lambda_crt},
          {"step_size", c.step_size},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"final_step_fraction", c.final_step_fraction}};
}

// ---------------------------------------------------------------------------------------

void cmd_render(const Options& o, Run& run) {
  const Geometry g = load_geometry(o, run);
  require(o.sh, "--sh");
  run.input(o.sh);
  const ShCoeffs sh = load_sh(o.sh);
  const auto [h, w] = parse_size(o.size, 64, 64);
  const Camera cam = Camera::orthographic(h, w);
  const RasterConfig raster = raster_for(cam, o);
  write_png(run.output("render.png"), render(g.mesh, cam, sh, raster));
  run.manifest.config = {{"height", h}, {"width", w}, {"raster", raster_json(raster)}};
}

void cmd_estimate(const Options& o, Run& run) {
  const Geometry g = load_geometry(o, run);
  const RasterImage input = load_image(o.input, "--input", run);
  const Camera cam = Camera::orthographic(input.height(), input.width());
  const RasterConfig raster = raster_for(cam, o);
  const ShCoeffs sh = initial_lighting_estimate(rasterize(g.mesh, cam, raster), input);
  save_json(run.output("sh_estimate.json"), to_json(sh));
  run.manifest.config = {{"raster", raster_json(raster)}};
}

struct CorrectionOutputs {
  CorrectionState state;
  RasterImage guidance;
  ShCoeffs initial;
};

CorrectionOutputs run_correction(const Options& o, Run& run, const Geometry& g,
                                 const RasterImage& input, const RasterImage* target) {
  if (target != nullptr && !target->same_size(input)) {
    throw InputError("--target size differs from --input size");
  }
  const Camera cam = Camera::orthographic(input.height(), input.width());
  const RasterConfig raster = raster_for(cam, o);
  const CorrectionConfig cfg = correction_config(o);
  CorrectionOutputs out;
  const FragmentBuffer frags = rasterize(g.mesh, cam, raster);
  out.initial = initial_lighting_estimate(frags, input);
  out.state = fit_lighting(g.mesh, cam, raster, input, target, cfg);
  out.guidance = shade(frags, out.state.eps_crt());
  write_png(run.output("guidance.png"), out.guidance);
  save_json(run.output("sh_estimate.json"), to_json(out.state.eps_est));
  save_json(run.output("sh_corrected.json"), to_json(out.state.eps_crt()));
  write_loss_csv(run.output("loss_history.csv"), out.state.loss_history);
  run.manifest.config = {{"raster", raster_json(raster)}, {"correction", correction_json(cfg)}};
  return out;
}

void cmd_correct(const Options& o, Run& run) {
  const Geometry g = load_geometry(o, run);
  const RasterImage input = load_image(o.input, "--input", run);
  std::optional<RasterImage> target;
  if (!o.target.empty()) {
    target = load_image(o.target, "--target", run);
  }
  run_correction(o, run, g, input, target ? &*target : nullptr);
}

void cmd_pipeline(const Options& o, Run& run) {
  const Geometry g = load_geometry(o, run);
  const RasterImage input = load_image(o.input, "--input", run);
  std::optional<RasterImage> target;
  if (!o.target.empty()) {
    target = load_image(o.target, "--target", run);
  }
  const CorrectionOutputs c = run_correction(o, run, g, input, target ? &*target : nullptr);
  save_json(run.output("sh_initial.json"), to_json(c.initial));
  Json metrics = {{"schema_version", kSchemaVersion},
                  {"final_loss", c.state.loss_history.back().total},
                  {"steps", c.state.loss_history.size() - 1}};
  if (target) {
    const RasterImage g8 = quantize_8bit(c.guidance);
    const double p_in = psnr(input, *target);
    const double p_g = psnr(g8, *target);
    metrics["psnr_input_db"] = json_number(p_in);
    metrics["psnr_guidance_db"] = json_number(p_g);
    metrics["ssim_input"] = ssim(input, *target);
    metrics["ssim_guidance"] = ssim(g8, *target);
    metrics["psnr_improvement_db"] = json_number(p_g - p_in);
  }
  save_json(run.output("metrics.json"), metrics);
}

struct Sidecar {
  std::string stem;
  RasterImage target;
  ShCoeffs sh_target;
  FaceCoefficients coeffs;
};

void cmd_degrade(const Options& o, Run& run) {
  require(o.input, "--input");
  require(o.model, "--model");
  if (!fs::is_directory(o.input)) {
    throw InputError("--input must be a directory of target PNGs for degrade: " + o.input);
  }
  if (!(o.split >= 0.0 && o.split <= 1.0)) {
    throw InputError("--split must lie in [0, 1]");
  }
  run.input(o.model);
  const MorphableModel model = load_model(o.model);
  DegradeConfig cfg;
  if (!o.config.empty()) {
    run.input(o.config);
    cfg = DegradeConfig::from_json(load_json(o.config));
  }
  cfg.seed = o.seed;
  cfg.validate();

  std::vector<fs::path> pngs;
  for (const auto& entry : fs::directory_iterator(o.input)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      pngs.push_back(entry.path());
    }
  }
  std::sort(pngs.begin(), pngs.end());
  if (pngs.empty()) {
    throw InputError("no PNG files in " + o.input);
  }
  std::vector<Sidecar> items;
  std::vector<ShCoeffs> targets;
  for (const fs::path& png : pngs) {
    fs::path side = png;
    side.replace_extension(".json");
    if (!fs::exists(side)) {
      throw InputError("missing sidecar " + side.string());
    }
    run.input(png.string());
    run.input(side.string());
    const Json doc = load_json(side);
    Sidecar s;
    s.stem = png.stem().string();
    s.target = read_png(png);
    try {
      s.sh_target = sh_from_json(doc.at("sh_target"));
      s.coeffs = coefficients_from_json(doc.at("coefficients"));
    } catch (const Json::exception& e) {
      throw InputError(side.string() + ": " + e.what());
    }
    targets.push_back(s.sh_target);
    items.push_back(std::move(s));
  }
  const ShCoeffs mean = mean_sh(targets);

  fs::create_directories(run.out / "pairs");
  Json pairs = Json::array();
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Sidecar& s = items[i];
    const Camera cam = Camera::orthographic(s.target.height(), s.target.width());
    const RasterConfig raster = raster_for(cam, o);
    const FragmentBuffer frags = rasterize(evaluate_model(model, s.coeffs), cam, raster);
    const GeometryBuffer gbuf = geometry_buffer(frags, kCoveredThreshold);
    const std::uint64_t seed = pair_seed(cfg.seed, i);
    Rng rng(seed);
    TrainingPair pair = build_pair_from_image(s.target, gbuf.normals, s.sh_target, mean, cfg, rng);
    pair.provenance.seed = seed;
    const bool pass = passes_brightness_filter(pair, gbuf.normals);
    write_png(run.output("pairs/" + s.stem + "_input.png"), pair.input);
    write_png(run.output("pairs/" + s.stem + "_target.png"), pair.target);
    Json rec = {{"schema_version", kSchemaVersion},
                {"name", s.stem},
                {"seed", seed},
                {"lambda_used", pair.provenance.lambda_used},
                {"resolved_radius", pair.provenance.resolved_radius},
                {"ideal_point", to_json(pair.provenance.ideal_point)},
                {"sh_input", to_json(pair.sh_input)},
                {"sh_target", to_json(pair.sh_target)},
                {"passes_brightness_filter", pass}};
    save_json(run.output("pairs/" + s.stem + ".json"), rec);
    if (pass) {
      kept.push_back(i);
    }
    pairs.push_back({{"name", s.stem},
                     {"seed", seed},
                     {"lambda_used", pair.provenance.lambda_used},
                     {"kept", pass}});
  }
  // Deterministic split over the kept pairs.
  Rng split_rng(cfg.seed);
  std::shuffle(kept.begin(), kept.end(), split_rng);
  const auto n_test = static_cast<std::size_t>(std::llround(o.split * static_cast<double>(kept.size())));
  std::map<std::size_t, std::string> split;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    split[kept[k]] = k < n_test ? "test" : "train";
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    pairs[i]["split"] = split.count(i) != 0 ? Json(split[i]) : Json(nullptr);
  }
  save_json(run.output("pairs.json"), {{"schema_version", kSchemaVersion},
                                       {"config", cfg.to_json()},
                                       {"mean_sh", to_json(mean)},
                                       {"split_fraction", o.split},
                                       {"pairs", pairs}});
  run.manifest.config = {{"degrade", cfg.to_json()}, {"split", o.split}};
}

std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> metric_pairs(const Options& o) {
  require(o.input, "--input");
  require(o.target, "--target");
  std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> out;
  if (fs::is_directory(o.input) != fs::is_directory(o.target)) {
    throw InputError("--input and --target must both be files or both be directories");
  }
  if (!fs::is_directory(o.input)) {
    out.push_back({fs::path(o.input).filename().string(), {o.input, o.target}});
    return out;
  }
  std::vector<fs::path> names;
  for (const auto& entry : fs::directory_iterator(o.input)) {
    if (entry.path().extension() == ".png" && fs::exists(fs::path(o.target) / entry.path().filename())) {
      names.push_back(entry.path().filename());
    }
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) {
    throw InputError("no matching PNG names in " + o.input + " and " + o.target);
  }
  for (const fs::path& n : names) {
    out.push_back({n.string(), {fs::path(o.input) / n, fs::path(o.target) / n}});
  }
  return out;
}

void cmd_metrics(const Options& o, Run& run) {
  std::vector<MetricEntry> entries;
  for (const auto& [name, paths] : metric_pairs(o)) {
    run.input(paths.first.string());
    run.input(paths.second.string());
    const RasterImage a = read_png(paths.first);
    const RasterImage b = read_png(paths.second);
    entries.push_back({name, psnr(a, b), ssim(a, b)});
  }
  const MetricReport report = summarize(entries);
  std::string csv = "name,psnr_db,ssim\n";
  Json per = Json::array();
  for (const MetricEntry& e : report.per_image) {
    csv += fmt::format("{},{},{}\n", e.name, num(e.psnr_db), num(e.ssim));
    per.push_back({{"name", e.name}, {"psnr_db", json_number(e.psnr_db)}, {"ssim", e.ssim}});
  }
  csv += fmt::format("mean,{},{}\n", num(report.psnr_db), num(report.ssim));
  write_text(run.output("metrics.csv"), csv);
  save_json(run.output("metrics.json"), {{"schema_version", kSchemaVersion},
                                         {"mean_psnr_db", json_number(report.psnr_db)},
                                         {"mean_ssim", report.ssim},
                                         {"per_image", per}});
}

int cmd_gradcheck(const Options& o, Run& run) {
  if (o.scenes < 1) {
    throw InputError("--scenes must be positive");
  }
  nn::GradcheckReport report = nn::gradcheck_neural(o.seed);
  report.append(nn::gradcheck_renderer(o.scenes, 8, o.seed));
  Json doc = report.to_json();
  doc.erase("seconds");  // keeps the report byte-identical across runs
  save_json(run.output("gradcheck.json"), doc);
  run.manifest.config = {{"scenes", o.scenes}, {"renderer_size", 8}};
  if (!report.passed()) {
    spdlog::error("gradcheck failed; see {}", (run.out / "gradcheck.json").string());
    return kExitInternal;
  }
  return kExitOk;
}

void cmd_demo_train(const Options& o, Run& run) {
  nn::DemoConfig cfg;
  cfg.steps = o.steps.value_or(cfg.steps);
  cfg.seed = o.seed;
  if (o.reference == "input") {
    cfg.reference = nn::PerceptualReference::kInput;
  } else if (o.reference == "target") {
    cfg.reference = nn::PerceptualReference::kTarget;
  } else {
    throw InputError("--reference must be 'input' or 'target'");
  }
  const nn::DemoResult result = nn::run_demo_training(cfg);
  std::string csv = "step,loss_d,gan_g,fm,percep,objective,guided\n";
  for (const nn::DemoRecord& r : result.history) {
    csv += fmt::format("{},{},{},{},{},{},{}\n", r.step, num(r.loss_d), num(r.gan_g), num(r.fm),
                       num(r.percep), num(r.objective), num(r.guided));
  }
  write_text(run.output("demo_history.csv"), csv);
  const double first = result.history.front().guided;
  const double last = result.history.back().guided;
  save_json(run.output("demo_summary.json"), {{"schema_version", kSchemaVersion},
                                              {"steps", cfg.steps},
                                              {"guided_initial", first},
                                              {"guided_final", last},
                                              {"guided_ratio", last / first}});
  run.manifest.config = {{"steps", cfg.steps},
                         {"pairs", cfg.pairs},
                         {"size", cfg.size},
                         {"channels", cfg.channels},
                         {"generator_lr", cfg.generator_lr},
                         {"discriminator_lr", cfg.discriminator_lr},
                         {"lambda_fm", cfg.weights.lambda_fm},
                         {"lambda_percep", cfg.weights.lambda_percep},
                         {"reference", o.reference}};
}

void cmd_make_fixture(const Options& o, Run& run) {
  const auto [h, w] = parse_size(o.size, 64, 64);
  Rng rng(o.seed);
  const MorphableModel model = make_synthetic_model(16, o.seed);
  FaceCoefficients coeffs = FaceCoefficients::zeros_for(model);
  std::normal_distribution<double> normal(0.0, 0.3);
  for (Eigen::Index k = 0; k < coeffs.alpha.size(); ++k) {
    coeffs.alpha(k) = normal(rng);
  }
  for (Eigen::Index k = 0; k < coeffs.zeta.size(); ++k) {
    coeffs.zeta(k) = normal(rng);
  }
  std::vector<ShCoeffs> pool;
  for (int i = 0; i < 8; ++i) {
    pool.push_back(random_lighting(rng));
  }
  const ShCoeffs sh_target = pool.front();
  const ShCoeffs mean = mean_sh(pool);
  DegradeConfig dcfg;
  dcfg.seed = o.seed;
  const DegradedLighting degraded = degrade_sh(sh_target, mean, dcfg, rng);

  const Camera cam = Camera::orthographic(h, w);
  const RasterConfig raster = raster_for(cam, o);
  const Mesh mesh = evaluate_model(model, coeffs);
  save_json(run.output("model.json"), to_json(model));
  save_json(run.output("coeffs.json"), to_json(coeffs));
  save_json(run.output("sh_target.json"), to_json(sh_target));
  save_json(run.output("sh_input.json"), to_json(degraded.sh_input));
  write_png(run.output("target.png"), render(mesh, cam, sh_target, raster));
  write_png(run.output("input.png"), render(mesh, cam, degraded.sh_input, raster));
  run.manifest.config = {{"height", h},
                         {"width", w},
                         {"lambda_used", degraded.lambda_used},
                         {"raster", raster_json(raster)}};
}

int dispatch(const std::string& name, const Options& o, Run& run) {
  if (name == "render") {
    cmd_render(o, run);
  } else if (name == "estimate") {
    cmd_estimate(o, run);
  } else if (name == "correct") {
    cmd_correct(o, run);
  } else if (name == "pipeline") {
    cmd_pipeline(o, run);
  } else if (name == "degrade") {
    cmd_degrade(o, run);
  } else if (name == "metrics") {
    cmd_metrics(o, run);
  } else if (name == "gradcheck") {
    return cmd_gradcheck(o, run);
  } else if (name == "demo-train") {
    cmd_demo_train(o, run);
  } else if (name == "make-fixture") {
    cmd_make_fixture(o, run);
  } else {
    throw InputError("unknown subcommand " + name);
  }
  return kExitOk;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--out-dir", o.out_dir, "Output directory")->required();
  sub->add_option("--seed", o.seed, "Random seed");
  sub->add_option("--threads", o.threads, "Worker threads for rasterization");
  sub->add_option("--sigma", o.sigma, "Soft rasterizer edge sharpness");
  sub->add_option("--gamma-depth", o.gamma_depth, "Soft rasterizer depth temperature");
}

void add_geometry(CLI::App* sub, Options& o) {
  sub->add_option("--model", o.model, "Morphable model JSON");
  sub->add_option("--coeffs", o.coeffs, "Coefficient JSON");
}

int execute(const std::vector<std::string>& args);

int rerun(const Options& o) {
  require(o.manifest, "--manifest");
  const RunManifest m = read_manifest(o.manifest);
  std::vector<std::string> args{m.subcommand};
  for (std::size_t i = 0; i < m.args.size(); ++i) {
    if (m.args[i] == "--out-dir" && i + 1 < m.args.size() && !o.out_dir.empty()) {
      args.push_back(m.args[i]);
      args.push_back(o.out_dir);
      ++i;
    } else if (m.args[i].rfind("--out-dir=", 0) == 0 && !o.out_dir.empty()) {
      args.push_back("--out-dir=" + o.out_dir);
    } else {
      args.push_back(m.args[i]);
    }
  }
  return execute(args);
}

int execute(const std::vector<std::string>& args) {
  Options o;
  CLI::App app{"relit: lighting estimation, correction and evaluation toolkit"};
  app.set_version_flag("--version", std::string(kToolkitVersion));
  app.require_subcommand(1);

  auto* render = app.add_subcommand("render", "Render a model under SH lighting");
  add_geometry(render, o);
  render->add_option("--sh", o.sh, "SH lighting JSON");
  render->add_option("--size", o.size, "Image size HxW (default 64x64)");

  auto* estimate = app.add_subcommand("estimate", "Estimate SH lighting of an image");
  add_geometry(estimate, o);
  estimate->add_option("--input", o.input, "Input PNG");

  auto* correct = app.add_subcommand("correct", "Fit estimated and corrected lighting");
  auto* pipeline = app.add_subcommand("pipeline", "Estimate, correct and emit the guidance image");
  for (auto* sub : {correct, pipeline}) {
    add_geometry(sub, o);
    sub->add_option("--input", o.input, "Input PNG (I_s)");
    sub->add_option("--target", o.target, "Target PNG (I_t)");
    sub->add_option("--steps", o.steps, "Optimizer steps");
    sub->add_option("--lambda-crt", o.lambda_crt, "Weight of the correction branch");
  }

  auto* degrade = app.add_subcommand("degrade", "Synthesize degraded training pairs");
  degrade->add_option("--model", o.model, "Morphable model JSON");
  degrade->add_option("--input", o.input, "Directory of target PNGs with JSON sidecars");
  degrade->add_option("--config", o.config, "Degradation config JSON");
  degrade->add_option("--split", o.split, "Fraction of kept pairs assigned to the test split");

  auto* metrics = app.add_subcommand("metrics", "PSNR and SSIM between images or directories");
  metrics->add_option("--input", o.input, "Image or directory");
  metrics->add_option("--target", o.target, "Reference image or directory");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gradcheck->add_option("--scenes", o.scenes, "Random renderer scenes");

  auto* demo = app.add_subcommand("demo-train", "Toy generator/discriminator training");
  demo->add_option("--steps", o.steps, "Optimizer steps (default 300)");
  demo->add_option("--reference", o.reference, "Perceptual reference: input or target");

  auto* fixture = app.add_subcommand("make-fixture", "Write a synthetic end-to-end fixture");
  fixture->add_option("--size", o.size, "Image size HxW (default 64x64)");

  for (auto* sub : {render, estimate, correct, pipeline, degrade, metrics, gradcheck, demo, fixture}) {
    add_common(sub, o);
  }

  auto* rerun_cmd = app.add_subcommand("rerun", "Replay a run manifest");
  rerun_cmd->add_option("--manifest", o.manifest, "run_manifest.json to replay")->required();
  rerun_cmd->add_option("--out-dir", o.out_dir, "Output directory override");

  std::vector<std::string> argv_store{"relit"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& a : argv_store) {
    argv.push_back(a.data());
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  if (name == "rerun") {
    return rerun(o);
  }
  const auto t0 = std::chrono::steady_clock::now();
  Run run;
  run.out = o.out_dir;
  run.manifest.subcommand = name;
  run.manifest.args = normalise_args({args.begin() + 1, args.end()});
  run.manifest.seed = o.seed;
  fs::create_directories(run.out);
  const int code = dispatch(name, o, run);
  run.manifest.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(run.out, run.manifest);
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  init_logging();
  try {
    return execute(args);
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return kExitInternal;
  }
}

}  // namespace relit
