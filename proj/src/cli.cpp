#include <algorithm>
#include <fstream>
#include <optional>

#include <CLI11.hpp>

#include "koopnet/analysis.hpp"
#include "koopnet/cli.hpp"
#include "koopnet/pipeline.hpp"

namespace koopnet::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> layer;
  std::optional<int> h;
  std::optional<std::size_t> r;
  bool clamp_relu = false;
  std::string model, scaled, dmd, input, kind;
  std::optional<std::size_t> resolution;
  std::optional<std::size_t> sample;
};

pipeline::RunConfig resolve(const Options& o) {
  pipeline::RunConfig cfg = o.config.empty() ? pipeline::yinyang_defaults() : pipeline::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out = o.out;
  if (o.layer) cfg.layer = *o.layer;
  if (o.h) cfg.dmd.h = *o.h;
  if (o.r) cfg.dmd.r = *o.r;
  if (o.clamp_relu) cfg.dmd.clamp_relu = true;
  if (o.resolution) cfg.exports.resolution = *o.resolution;
  if (o.sample) cfg.exports.sample_index = *o.sample;
  cfg.validate();
  return cfg;
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return json::parse(is);
}

fs::path or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback : fs::path(given);
}

void write_json(const fs::path& path, const json& j) { pipeline::write_text(path, j.dump(2) + '\n'); }

json cmd_train(const pipeline::RunConfig& cfg) {
  const auto ds = pipeline::load_datasets(cfg);
  const auto base = pipeline::train_baseline(cfg, ds.train);
  const fs::path path = pipeline::model_path(cfg);
  pipeline::write_text(path, nn::to_json(base.model).dump() + '\n');
  json summary = {{"command", "train"},
                  {"model", path.string()},
                  {"seed", cfg.seed},
                  {"dataset", cfg.dataset.name},
                  {"restart_losses", base.restart_losses},
                  {"chosen_restart", base.chosen},
                  {"final_loss", base.report.final_loss()},
                  {"train_accuracy", hybrid::evaluate(base.model, ds.train).accuracy},
                  {"test_accuracy", hybrid::evaluate(base.model, ds.test).accuracy}};
  write_json(fs::path(cfg.out) / "config.json", pipeline::to_json(cfg));
  write_json(fs::path(cfg.out) / "train_summary.json", summary);
  return summary;
}

json cmd_scale(const pipeline::RunConfig& cfg, const Options& o) {
  const nn::MlpModel model = nn::load_model(or_default(o.model, pipeline::model_path(cfg)));
  const auto ds = pipeline::load_datasets(cfg);
  const auto res = pipeline::scale_layer(cfg, model, cfg.layer, ds.train, &ds.test);
  const fs::path path = pipeline::scaled_path(cfg, cfg.layer);
  pipeline::write_text(path, scaling::to_json(res.scaled).dump() + '\n');
  json summary = {{"command", "scale"},
                  {"scaled", path.string()},
                  {"layer", cfg.layer},
                  {"k", res.scaled.k()},
                  {"d1", res.scaled.state_dim()},
                  {"d2", res.scaled.target_output_dim()},
                  {"initial_loss", res.report.initial_loss},
                  {"final_loss", res.report.final_loss},
                  {"base_accuracy", res.report.base_accuracy},
                  {"scaled_accuracy", res.report.scaled_accuracy}};
  write_json(fs::path(cfg.out) / ("scale_summary_L" + std::to_string(cfg.layer) + ".json"), summary);
  return summary;
}

json cmd_fit(const pipeline::RunConfig& cfg, const Options& o) {
  const auto scaled = scaling::load_scaled(or_default(o.scaled, pipeline::scaled_path(cfg, cfg.layer)));
  const auto ds = pipeline::load_datasets(cfg);
  const auto dmd = pipeline::fit_layer(cfg, scaled, ds.train, cfg.dmd.h, cfg.dmd.r);
  const fs::path path = pipeline::dmd_path(cfg, scaled.target_index, cfg.dmd.h, cfg.dmd.r);
  pipeline::write_text(path, koopman::to_json(dmd).dump() + '\n');
  double radius = 0.0;
  for (Eigen::Index i = 0; i < dmd.eigenvalues.size(); ++i) radius = std::max(radius, std::abs(dmd.eigenvalues(i)));
  return {{"command", "fit"},       {"dmd", path.string()},          {"layer", scaled.target_index},
          {"h", dmd.h},             {"r", cfg.dmd.r},                {"rank", dmd.rank},
          {"pairs", dmd.pairs},     {"residual", dmd.residual},      {"max_residual", dmd.max_residual},
          {"spectral_radius", radius}};
}

json cmd_replace(const pipeline::RunConfig& cfg, const Options& o) {
  const auto scaled = scaling::load_scaled(or_default(o.scaled, pipeline::scaled_path(cfg, cfg.layer)));
  const auto dmd =
      koopman::load_dmd(or_default(o.dmd, pipeline::dmd_path(cfg, scaled.target_index, cfg.dmd.h, cfg.dmd.r)));
  const auto model = hybrid::build_hybrid(scaled, dmd, cfg.dmd.clamp_relu);
  const fs::path path = pipeline::hybrid_path(cfg, scaled.target_index, dmd.h, cfg.dmd.r);
  pipeline::write_text(path, hybrid::to_json(model).dump() + '\n');
  return {{"command", "replace"}, {"hybrid", path.string()}, {"layer", model.target_index},
          {"h", model.h()},       {"k", model.k()},          {"d1", model.d1()},
          {"d2", model.d2},       {"clamp_relu", model.clamp_relu}};
}

// model, scaled network or hybrid, told apart by the document's shape
std::string detect_kind(const json& j) {
  if (j.value("kind", std::string()) == "hybrid") return "hybrid";
  if (j.contains("scaling")) return "scaled";
  return "model";
}

json cmd_eval(const pipeline::RunConfig& cfg, const Options& o) {
  const fs::path input = or_default(o.input, pipeline::model_path(cfg));
  const json doc = read_json(input);
  const std::string kind = detect_kind(doc);
  const auto ds = pipeline::load_datasets(cfg);
  hybrid::EvalReport rep;
  if (kind == "hybrid") {
    rep = hybrid::evaluate(hybrid::hybrid_from_json(doc), ds.test);
  } else if (kind == "scaled") {
    rep = hybrid::evaluate(scaling::scaled_from_json(doc), ds.test);
  } else {
    rep = hybrid::evaluate(nn::model_from_json(doc), ds.test);
  }
  json report = hybrid::to_json(rep);
  report["input"] = input.string();
  report["kind"] = kind;
  report["seed"] = cfg.seed;
  const fs::path path = fs::path(cfg.out) / ("eval_" + input.stem().string() + ".json");
  write_json(path, report);
  return {{"command", "eval"}, {"input", input.string()}, {"kind", kind}, {"report", path.string()},
          {"accuracy", rep.accuracy}, {"samples", rep.samples}};
}

json cmd_sweep(const pipeline::RunConfig& cfg, std::ostream& err) {
  std::map<std::size_t, scaling::ScaledNetwork> scaled;
  for (const std::size_t layer : cfg.sweep.layers) {
    const fs::path p = pipeline::scaled_path(cfg, layer);
    if (!fs::exists(p)) throw std::invalid_argument("sweep: missing " + p.string() + " (run `scale --layer " +
                                                    std::to_string(layer) + "` first)");
    scaled.emplace(layer, scaling::load_scaled(p));
  }
  const auto ds = pipeline::load_datasets(cfg);
  const auto result = analysis::run_sweep(cfg, scaled, ds.train, ds.test, analysis::ledger_path(cfg),
                                          [&](const analysis::SweepCell& c, bool fresh) {
                                            if (!fresh) return;
                                            err << "sweep L" << c.layer << " h=" << c.h << " r=" << c.r << ' '
                                                << (c.accuracy ? analysis::format_double(*c.accuracy) : c.status)
                                                << '\n';
                                          });
  const fs::path json_path = fs::path(cfg.out) / "sweep.json";
  const fs::path csv_path = fs::path(cfg.out) / "sweep.csv";
  write_json(json_path, analysis::sweep_json(result, cfg));
  pipeline::write_text(csv_path, analysis::sweep_csv(result));
  return {{"command", "sweep"},        {"json", json_path.string()}, {"csv", csv_path.string()},
          {"cells", result.cells.size()}, {"evaluated", result.evaluated}, {"reused", result.reused}};
}

std::string hr_suffix(std::size_t layer, int h, std::size_t r) {
  return "_L" + std::to_string(layer) + "_h" + std::to_string(h) + "_r" + std::to_string(r) + ".csv";
}

json cmd_export(const pipeline::RunConfig& cfg, const Options& o) {
  const fs::path out(cfg.out);
  fs::path path;
  json extra = json::object();
  if (o.kind == "spectrum") {
    const auto dmd = koopman::load_dmd(or_default(o.dmd, pipeline::dmd_path(cfg, cfg.layer, cfg.dmd.h, cfg.dmd.r)));
    path = out / ("spectrum" + hr_suffix(cfg.layer, dmd.h, cfg.dmd.r));
    analysis::export_spectrum(dmd, path);
    extra["rows"] = dmd.eigenvalues.size();
  } else if (o.kind == "rsv") {
    const auto scaled = scaling::load_scaled(or_default(o.scaled, pipeline::scaled_path(cfg, cfg.layer)));
    const auto ds = pipeline::load_datasets(cfg);
    const auto samples = pipeline::trajectory_samples(cfg, ds.train, cfg.dmd.r);
    const auto batch = koopman::collect_trajectories(scaled, samples, cfg.dmd.r);
    path = out / ("rsv" + hr_suffix(scaled.target_index, cfg.dmd.h, cfg.dmd.r));
    analysis::export_rsv(koopman::hankelize(batch, cfg.dmd.h), cfg.exports.rsv_top, path);
  } else if (o.kind == "boundary") {
    const fs::path input = or_default(o.input, pipeline::model_path(cfg));
    const json doc = read_json(input);
    const std::string kind = detect_kind(doc);
    analysis::Classifier classify;
    Eigen::Index dim = 0;
    if (kind == "hybrid") {
      const auto m = hybrid::hybrid_from_json(doc);
      dim = m.input_dim();
      classify = analysis::classifier(m);
    } else {
      const auto m = kind == "scaled" ? scaling::scaled_from_json(doc).flattened() : nn::model_from_json(doc);
      dim = m.input_dim();
      classify = analysis::classifier(m);
    }
    if (dim != 2) throw std::invalid_argument("export boundary: needs a 2-D input model, got " + std::to_string(dim));
    path = out / ("boundary_" + input.stem().string() + ".csv");
    analysis::export_boundary(classify, cfg.exports.resolution, path);
    extra["rows"] = cfg.exports.resolution * cfg.exports.resolution;
  } else if (o.kind == "trajectory") {
    const auto scaled = scaling::load_scaled(or_default(o.scaled, pipeline::scaled_path(cfg, cfg.layer)));
    const auto ds = pipeline::load_datasets(cfg);
    const std::size_t n = cfg.exports.sample_index + 1;
    const auto batch = koopman::collect_trajectories(scaled, pipeline::trajectory_samples(cfg, ds.train, n), n);
    path = out / ("trajectory_L" + std::to_string(scaled.target_index) + ".csv");
    analysis::export_trajectory(batch, cfg.exports.sample_index, path);
    extra["states"] = batch.d1;
    extra["steps"] = batch.snapshots_per_sample();
  } else {
    throw std::invalid_argument("export: --kind must be spectrum, rsv, boundary or trajectory");
  }
  json summary = {{"command", "export"}, {"kind", o.kind}, {"csv", path.string()}};
  summary.update(extra);
  return summary;
}

std::string error_type(const std::exception& e) {
  if (dynamic_cast<const pipeline::ConfigError*>(&e)) return "config";
  if (dynamic_cast<const data::FetchError*>(&e)) return "fetch";
  if (dynamic_cast<const data::FormatError*>(&e)) return "format";
  if (dynamic_cast<const json::exception*>(&e)) return "json";
  if (dynamic_cast<const LinalgError*>(&e)) return "linalg";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid_argument";
  if (dynamic_cast<const std::out_of_range*>(&e)) return "out_of_range";
  return "runtime";
}

void report_error(std::ostream& err, const std::string& command, const std::string& type, const std::string& msg) {
  err << json{{"error", {{"command", command}, {"type", type}, {"message", msg}}}}.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Koopman/DMD layer replacement for small MLPs", "koopnet"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print help");  // -h would clash with --h
  Options o;
  app.add_option("--config", o.config, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--out", o.out, "artifact directory");
  app.add_option("--layer", o.layer, "target layer index");
  app.add_option("--h", o.h, "delay window length");
  app.add_option("--r", o.r, "number of trajectories");
  app.add_flag("--clamp-relu", o.clamp_relu, "clamp the replaced activation at 0");
  app.add_option("--model", o.model, "model file");
  app.add_option("--scaled", o.scaled, "scaled network file");
  app.add_option("--dmd", o.dmd, "DMD model file");
  app.add_option("--input", o.input, "model, scaled or hybrid file");
  app.add_option("--kind", o.kind, "export kind: spectrum | rsv | boundary | trajectory");
  app.add_option("--resolution", o.resolution, "boundary grid resolution");
  app.add_option("--sample", o.sample, "sample index for trajectory export");

  const char* names[][2] = {{"train", "train the baseline MLP"},
                            {"scale", "insert and distill the g layers before --layer"},
                            {"fit", "fit a DMD model on scaled trajectories"},
                            {"replace", "build a hybrid from a scaled network and a DMD model"},
                            {"eval", "test accuracy of a model, scaled network or hybrid"},
                            {"sweep", "(layer, h, r) accuracy grid"},
                            {"export", "CSV data for the figures"}};
  for (const auto& n : names) app.add_subcommand(n[0], n[1])->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error(err, "", "usage", e.what());
    return 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const pipeline::RunConfig cfg = resolve(o);
    json summary;
    if (command == "train") {
      summary = cmd_train(cfg);
    } else if (command == "scale") {
      summary = cmd_scale(cfg, o);
    } else if (command == "fit") {
      summary = cmd_fit(cfg, o);
    } else if (command == "replace") {
      summary = cmd_replace(cfg, o);
    } else if (command == "eval") {
      summary = cmd_eval(cfg, o);
    } else if (command == "sweep") {
      summary = cmd_sweep(cfg, err);
    } else {
      summary = cmd_export(cfg, o);
    }
    out << summary.dump() << '\n';
    return 0;
  } catch (const std::exception& e) {
    report_error(err, command, error_type(e), e.what());
    return 1;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, out, err);
}

}  // namespace koopnet::cli
