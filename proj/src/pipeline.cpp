#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "koopnet/pipeline.hpp"
#include "koopnet/seed.hpp"

namespace koopnet::pipeline {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.contains(key)) throw ConfigError("config: unknown key '" + key + "' in '" + where + "'");
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for '" + where + "." + key + "': " + e.what());
  }
}

nn::TrainConfig yinyang_train() {
  nn::TrainConfig c;
  c.epochs = 5000;
  c.lr = 5e-3;
  c.beta1 = 0.9;
  c.beta2 = 0.999;
  c.weight_decay = 1e-2;
  c.batch_size = 1000;
  return c;
}

nn::TrainConfig distill_config(int epochs, double lr, double b1, double b2, double wd, Eigen::Index batch) {
  nn::TrainConfig c;
  c.epochs = epochs;
  c.lr = lr;
  c.beta1 = b1;
  c.beta2 = b2;
  c.weight_decay = wd;
  c.batch_size = batch;
  c.loss = nn::Huber{1.0};
  return c;
}

}  // namespace

const nn::TrainConfig& ScalingSpec::train_for(std::size_t layer) const {
  const auto it = per_layer.find(layer);
  return it != per_layer.end() ? it->second : train;
}

void RunConfig::validate() const {
  if (schema_version != kSchemaVersion) {
    throw ConfigError("config: schema_version " + std::to_string(schema_version) + " is not supported (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  if (dataset.name != "yinyang" && dataset.name != "mnist") {
    throw ConfigError("config: dataset.name must be 'yinyang' or 'mnist'");
  }
  if (model.widths.size() < 2) throw ConfigError("config: model.widths needs at least two entries");
  if (model.restarts < 1) throw ConfigError("config: model.restarts must be >= 1");
  if (scaling.k < 1) throw ConfigError("config: scaling.k must be >= 1");
  if (dmd.h < 1) throw ConfigError("config: dmd.h must be >= 1");
  if (dmd.r < 1) throw ConfigError("config: dmd.r must be >= 1");
  if (exports.resolution < 2) throw ConfigError("config: export.resolution must be >= 2");
  model.train.validate();
  scaling.train.validate();
  for (const auto& [layer, c] : scaling.per_layer) c.validate();
}

RunConfig yinyang_defaults() {
  RunConfig c;
  c.out = "runs/yinyang";
  c.layer = 1;
  c.dataset = {"yinyang", 2000, 1000, ""};
  c.model.widths = {2, 8, 6, 4, 3, 2};
  c.model.restarts = 5;
  c.model.train = yinyang_train();
  c.scaling.train = distill_config(200, 2e-3, 0.8, 0.8, 1e-4, 512);
  c.dmd.h = 10;
  c.dmd.r = 1000;
  c.sweep.r_values = {10, 50, 500, 1000};
  return c;
}

RunConfig mnist_defaults() {
  RunConfig c;
  c.out = "runs/mnist";
  c.layer = 1;
  c.dataset = {"mnist", 0, 0, ""};
  c.model.widths = {784, 256, 32, 16, 10, 10};
  c.model.restarts = 1;
  nn::TrainConfig t;
  t.epochs = 30;
  t.lr = 1e-2;
  t.weight_decay = 1e-1;
  t.batch_size = 4096;
  t.scheduler = nn::PlateauScheduler{0.5, 2, 1e-4};
  c.model.train = t;
  c.scaling.train = distill_config(20, 2e-3, 0.9, 0.85, 1e-2, 4096);
  c.scaling.per_layer[1] = distill_config(20, 2e-3, 0.7, 0.7, 1e-2, 4096);
  c.scaling.per_layer[2] = distill_config(20, 2e-3, 0.9, 0.85, 1e-2, 4096);
  c.scaling.per_layer[3] = distill_config(20, 3e-3, 0.9, 0.99, 1e-2, 4096);
  c.dmd.h = 10;
  c.dmd.r = 500;
  return c;
}

json train_config_to_json(const nn::TrainConfig& c) {
  json j = {{"epochs", c.epochs},
            {"lr", c.lr},
            {"betas", {c.beta1, c.beta2}},
            {"weight_decay", c.weight_decay},
            {"eps", c.eps},
            {"batch_size", c.batch_size}};
  j["scheduler"] = c.scheduler ? json{{"factor", c.scheduler->factor},
                                      {"patience", c.scheduler->patience},
                                      {"threshold", c.scheduler->threshold}}
                               : json(nullptr);
  if (const auto* h = std::get_if<nn::Huber>(&c.loss)) {
    j["loss"] = {{"huber", h->delta}};
  } else {
    j["loss"] = "cross_entropy";
  }
  return j;
}

nn::TrainConfig train_config_from_json(const json& j, nn::TrainConfig c) {
  const std::string w = "train";
  check_keys(j, {"epochs", "lr", "betas", "weight_decay", "eps", "batch_size", "scheduler", "loss"}, w);
  if (j.contains("epochs")) c.epochs = get<int>(j, "epochs", w);
  if (j.contains("lr")) c.lr = get<double>(j, "lr", w);
  if (j.contains("betas")) {
    const auto b = get<std::vector<double>>(j, "betas", w);
    if (b.size() != 2) throw ConfigError("config: train.betas must hold two numbers");
    c.beta1 = b[0];
    c.beta2 = b[1];
  }
  if (j.contains("weight_decay")) c.weight_decay = get<double>(j, "weight_decay", w);
  if (j.contains("eps")) c.eps = get<double>(j, "eps", w);
  if (j.contains("batch_size")) c.batch_size = get<Eigen::Index>(j, "batch_size", w);
  if (j.contains("scheduler")) {
    const json& s = j.at("scheduler");
    if (s.is_null()) {
      c.scheduler.reset();
    } else {
      check_keys(s, {"factor", "patience", "threshold"}, "train.scheduler");
      nn::PlateauScheduler p;
      if (s.contains("factor")) p.factor = get<double>(s, "factor", "train.scheduler");
      if (s.contains("patience")) p.patience = get<int>(s, "patience", "train.scheduler");
      if (s.contains("threshold")) p.threshold = get<double>(s, "threshold", "train.scheduler");
      c.scheduler = p;
    }
  }
  if (j.contains("loss")) {
    const json& l = j.at("loss");
    if (l.is_string() && l.get<std::string>() == "cross_entropy") {
      c.loss = nn::CrossEntropy{};
    } else if (l.is_object()) {
      check_keys(l, {"huber"}, "train.loss");
      c.loss = nn::Huber{get<double>(l, "huber", "train.loss")};
    } else {
      throw ConfigError("config: train.loss must be \"cross_entropy\" or {\"huber\": delta}");
    }
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig parse_config(const json& j) {
  check_keys(j, {"schema_version", "seed", "out", "layer", "dataset", "model", "scaling", "dmd", "sweep", "export"},
             "root");
  if (!j.contains("schema_version")) throw ConfigError("config: missing schema_version");
  std::string name = "yinyang";
  if (j.contains("dataset") && j.at("dataset").contains("name")) name = get<std::string>(j.at("dataset"), "name", "dataset");
  RunConfig c = name == "mnist" ? mnist_defaults() : yinyang_defaults();
  c.schema_version = get<int>(j, "schema_version", "root");
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed", "root");
  if (j.contains("out")) c.out = get<std::string>(j, "out", "root");
  if (j.contains("layer")) c.layer = get<std::size_t>(j, "layer", "root");

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    check_keys(d, {"name", "train_samples", "test_samples", "cache_dir"}, "dataset");
    c.dataset.name = name;
    if (d.contains("train_samples")) c.dataset.train_samples = get<std::size_t>(d, "train_samples", "dataset");
    if (d.contains("test_samples")) c.dataset.test_samples = get<std::size_t>(d, "test_samples", "dataset");
    if (d.contains("cache_dir")) c.dataset.cache_dir = get<std::string>(d, "cache_dir", "dataset");
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, {"widths", "relu_output", "restarts", "train"}, "model");
    if (m.contains("widths")) c.model.widths = get<std::vector<Eigen::Index>>(m, "widths", "model");
    if (m.contains("relu_output")) c.model.relu_output = get<bool>(m, "relu_output", "model");
    if (m.contains("restarts")) c.model.restarts = get<int>(m, "restarts", "model");
    if (m.contains("train")) c.model.train = train_config_from_json(m.at("train"), c.model.train);
  }
  if (j.contains("scaling")) {
    const json& s = j.at("scaling");
    check_keys(s, {"k", "init", "noise", "train", "per_layer"}, "scaling");
    if (s.contains("k")) c.scaling.k = get<int>(s, "k", "scaling");
    if (s.contains("init")) {
      try {
        c.scaling.init = scaling::parse_ginit(get<std::string>(s, "init", "scaling"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    }
    if (s.contains("noise")) c.scaling.noise = get<double>(s, "noise", "scaling");
    if (s.contains("train")) c.scaling.train = train_config_from_json(s.at("train"), c.scaling.train);
    if (s.contains("per_layer")) {
      const json& p = s.at("per_layer");
      if (!p.is_object()) throw ConfigError("config: scaling.per_layer must map layer indices to train configs");
      c.scaling.per_layer.clear();
      for (const auto& [key, value] : p.items()) {
        std::size_t layer = 0;
        try {
          std::size_t used = 0;
          layer = std::stoul(key, &used);
          if (used != key.size()) throw std::invalid_argument(key);
        } catch (const std::exception&) {
          throw ConfigError("config: scaling.per_layer key '" + key + "' is not a layer index");
        }
        c.scaling.per_layer[layer] = train_config_from_json(value, c.scaling.train);
      }
    }
  }
  if (j.contains("dmd")) {
    const json& d = j.at("dmd");
    check_keys(d, {"h", "r", "rank", "clamp_relu"}, "dmd");
    if (d.contains("h")) c.dmd.h = get<int>(d, "h", "dmd");
    if (d.contains("r")) c.dmd.r = get<std::size_t>(d, "r", "dmd");
    if (d.contains("clamp_relu")) c.dmd.clamp_relu = get<bool>(d, "clamp_relu", "dmd");
    if (d.contains("rank")) {
      const json& r = d.at("rank");
      check_keys(r, {"energy", "fixed", "drop"}, "dmd.rank");
      if (r.contains("energy") && r.contains("fixed")) throw ConfigError("config: dmd.rank takes energy or fixed, not both");
      if (r.contains("fixed")) c.dmd.rank = koopman::RankPolicy::Fixed(get<Eigen::Index>(r, "fixed", "dmd.rank"));
      if (r.contains("energy")) c.dmd.rank = koopman::RankPolicy::Energy(get<double>(r, "energy", "dmd.rank"));
      if (r.contains("drop")) c.dmd.rank.drop = get<double>(r, "drop", "dmd.rank");
    }
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(s, {"layers", "h", "r"}, "sweep");
    if (s.contains("layers")) c.sweep.layers = get<std::vector<std::size_t>>(s, "layers", "sweep");
    if (s.contains("h")) c.sweep.h_values = get<std::vector<int>>(s, "h", "sweep");
    if (s.contains("r")) c.sweep.r_values = get<std::vector<std::size_t>>(s, "r", "sweep");
  }
  if (j.contains("export")) {
    const json& e = j.at("export");
    check_keys(e, {"resolution", "rsv_top", "sample_index"}, "export");
    if (e.contains("resolution")) c.exports.resolution = get<std::size_t>(e, "resolution", "export");
    if (e.contains("rsv_top")) c.exports.rsv_top = get<Eigen::Index>(e, "rsv_top", "export");
    if (e.contains("sample_index")) c.exports.sample_index = get<std::size_t>(e, "sample_index", "export");
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot read " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& c) {
  json per_layer = json::object();
  for (const auto& [layer, t] : c.scaling.per_layer) per_layer[std::to_string(layer)] = train_config_to_json(t);
  json rank = c.dmd.rank.kind == koopman::RankPolicy::Kind::Fixed ? json{{"fixed", c.dmd.rank.fixed}}
                                                                   : json{{"energy", c.dmd.rank.energy}};
  rank["drop"] = c.dmd.rank.drop;
  return {{"schema_version", c.schema_version},
          {"seed", c.seed},
          {"out", c.out},
          {"layer", c.layer},
          {"dataset",
           {{"name", c.dataset.name},
            {"train_samples", c.dataset.train_samples},
            {"test_samples", c.dataset.test_samples},
            {"cache_dir", c.dataset.cache_dir}}},
          {"model",
           {{"widths", c.model.widths},
            {"relu_output", c.model.relu_output},
            {"restarts", c.model.restarts},
            {"train", train_config_to_json(c.model.train)}}},
          {"scaling",
           {{"k", c.scaling.k},
            {"init", scaling::to_string(c.scaling.init)},
            {"noise", c.scaling.noise},
            {"train", train_config_to_json(c.scaling.train)},
            {"per_layer", per_layer}}},
          {"dmd", {{"h", c.dmd.h}, {"r", c.dmd.r}, {"rank", rank}, {"clamp_relu", c.dmd.clamp_relu}}},
          {"sweep", {{"layers", c.sweep.layers}, {"h", c.sweep.h_values}, {"r", c.sweep.r_values}}},
          {"export",
           {{"resolution", c.exports.resolution},
            {"rsv_top", c.exports.rsv_top},
            {"sample_index", c.exports.sample_index}}}};
}

Datasets load_datasets(const RunConfig& cfg) {
  Datasets out;
  if (cfg.dataset.name == "yinyang") {
    out.train = data::generate_yinyang(cfg.dataset.train_samples, derive_seed(cfg.seed, seed_stream::kTrainData));
    out.test = data::generate_yinyang(cfg.dataset.test_samples, derive_seed(cfg.seed, seed_stream::kTestData));
    out.train.name = "yinyang-train";
    out.test.name = "yinyang-test";
    return out;
  }
  const std::filesystem::path cache =
      cfg.dataset.cache_dir.empty() ? data::default_cache_dir() : std::filesystem::path(cfg.dataset.cache_dir);
  const auto dir = data::ensure_mnist(cache);
  auto splits = data::load_mnist(dir);
  out.train = std::move(splits.train);
  out.test = std::move(splits.test);
  return out;
}

BaselineResult train_baseline(const RunConfig& cfg, const data::LabeledDataset& train) {
  BaselineResult best;
  double best_loss = std::numeric_limits<double>::infinity();
  const std::uint64_t init_root = derive_seed(cfg.seed, seed_stream::kInit);
  const std::uint64_t shuffle_root = derive_seed(cfg.seed, seed_stream::kShuffle);
  for (int i = 0; i < cfg.model.restarts; ++i) {
    const auto stream = static_cast<std::uint64_t>(i);
    nn::MlpModel m = nn::make_mlp(cfg.model.widths, derive_seed(init_root, stream), cfg.model.relu_output);
    nn::TrainConfig t = cfg.model.train;
    t.seed = derive_seed(shuffle_root, stream);
    nn::TrainReport rep = nn::train(m, train, t);
    best.restart_losses.push_back(rep.final_loss());
    if (rep.final_loss() < best_loss) {
      best_loss = rep.final_loss();
      best.model = std::move(m);
      best.report = std::move(rep);
      best.chosen = i;
    }
  }
  return best;
}

ScaleResult scale_layer(const RunConfig& cfg, const nn::MlpModel& model, std::size_t layer,
                        const data::LabeledDataset& train, const data::LabeledDataset* eval) {
  scaling::ScalingOptions opts;
  opts.k = cfg.scaling.k;
  opts.init = cfg.scaling.init;
  opts.noise = cfg.scaling.noise;
  opts.seed = derive_seed(cfg.seed, seed_stream::kScalingBase + layer);
  ScaleResult out{scaling::insert_scaling(model, layer, opts), {}};
  nn::TrainConfig t = cfg.scaling.train_for(layer);
  t.seed = derive_seed(opts.seed, seed_stream::kShuffle);
  out.report = scaling::distill(out.scaled, train, t, eval);
  return out;
}

data::LabeledDataset trajectory_samples(const RunConfig& cfg, const data::LabeledDataset& train, std::size_t r) {
  if (static_cast<Eigen::Index>(r) > train.size()) {
    throw std::invalid_argument("trajectory_samples: r = " + std::to_string(r) + " exceeds the " +
                                std::to_string(train.size()) + " training samples");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(derive_seed(cfg.seed, seed_stream::kTrajectories));
  // partial Fisher-Yates keeps smaller r a prefix of larger r
  for (std::size_t i = 0; i < r; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(r);
  return train.subset(order);
}

koopman::DmdModel fit_layer(const RunConfig& cfg, const scaling::ScaledNetwork& scaled,
                            const data::LabeledDataset& train, int h, std::size_t r) {
  const data::LabeledDataset samples = trajectory_samples(cfg, train, r);
  const koopman::TrajectoryBatch batch = koopman::collect_trajectories(scaled, samples, r);
  return koopman::fit_dmd(koopman::hankelize(batch, h), cfg.dmd.rank);
}

std::filesystem::path model_path(const RunConfig& cfg) { return std::filesystem::path(cfg.out) / "model.json"; }

std::filesystem::path scaled_path(const RunConfig& cfg, std::size_t layer) {
  return std::filesystem::path(cfg.out) / ("scaled_L" + std::to_string(layer) + ".json");
}

std::filesystem::path dmd_path(const RunConfig& cfg, std::size_t layer, int h, std::size_t r) {
  return std::filesystem::path(cfg.out) /
         ("dmd_L" + std::to_string(layer) + "_h" + std::to_string(h) + "_r" + std::to_string(r) + ".json");
}

std::filesystem::path hybrid_path(const RunConfig& cfg, std::size_t layer, int h, std::size_t r) {
  return std::filesystem::path(cfg.out) /
         ("hybrid_L" + std::to_string(layer) + "_h" + std::to_string(h) + "_r" + std::to_string(r) + ".json");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp);
    os << text;
    if (!os) throw std::runtime_error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace koopnet::pipeline
