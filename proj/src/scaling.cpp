#include <fstream>
#include <random>
#include <stdexcept>

#include "koopnet/scaling.hpp"
#include "koopnet/seed.hpp"

namespace koopnet::scaling {

using nlohmann::json;

std::span<const nn::DenseLayer> ScaledNetwork::prefix() const {
  return std::span<const nn::DenseLayer>(base.layers).first(target_index);
}

std::span<const nn::DenseLayer> ScaledNetwork::suffix() const {
  return std::span<const nn::DenseLayer>(base.layers).subspan(target_index + 1);
}

nn::MlpModel ScaledNetwork::flattened() const {
  nn::MlpModel out;
  out.seed = base.seed;
  for (const auto& l : prefix()) out.layers.push_back(l);
  for (const auto& g : g_layers) out.layers.push_back(g);
  out.layers.push_back(target());
  for (const auto& l : suffix()) out.layers.push_back(l);
  return out;
}

void ScaledNetwork::validate() const {
  base.validate();
  if (target_index >= base.layers.size()) throw std::invalid_argument("scaled network: target_index out of range");
  const Eigen::Index d = state_dim();
  for (std::size_t j = 0; j < g_layers.size(); ++j) {
    const auto& g = g_layers[j];
    if (g.in_dim() != d || g.out_dim() != d || g.bias.size() != d) {
      throw std::invalid_argument("scaled network: g layer " + std::to_string(j) + " is " +
                                  shape_string(g.out_dim(), g.in_dim()) + ", expected " + shape_string(d, d));
    }
  }
}

std::string to_string(GInit init) {
  return init == GInit::NearIdentity ? "near_identity" : "framework_default";
}

GInit parse_ginit(const std::string& name) {
  if (name == "near_identity") return GInit::NearIdentity;
  if (name == "framework_default") return GInit::FrameworkDefault;
  throw std::invalid_argument("unknown g-layer init '" + name + "' (near_identity | framework_default)");
}

ScaledNetwork insert_scaling(const nn::MlpModel& base, std::size_t target_index, const ScalingOptions& options) {
  base.validate();
  if (target_index >= base.layers.size()) {
    throw std::invalid_argument("insert_scaling: target index " + std::to_string(target_index) + " but the model has " +
                                std::to_string(base.layers.size()) + " layers");
  }
  if (!base.layers[target_index].relu) {
    throw std::invalid_argument("insert_scaling: layer " + std::to_string(target_index) +
                                " has no ReLU; only Linear+ReLU layers can be replaced");
  }
  if (options.k < 1) throw std::invalid_argument("insert_scaling: k must be >= 1");
  if (options.noise < 0.0) throw std::invalid_argument("insert_scaling: noise must be >= 0");

  ScaledNetwork out;
  out.base = base;
  out.target_index = target_index;
  const Eigen::Index d = out.state_dim();
  std::mt19937_64 rng(options.seed);
  for (int j = 0; j < options.k; ++j) {
    if (options.init == GInit::FrameworkDefault) {
      out.g_layers.push_back(nn::make_layer(d, d, true, rng));
      continue;
    }
    std::normal_distribution<double> noise(0.0, options.noise > 0.0 ? options.noise : 1.0);
    nn::DenseLayer g;
    g.weight = RealMatrix::Identity(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index c = 0; c < d; ++c) g.weight(r, c) += options.noise > 0.0 ? noise(rng) : 0.0;
    }
    g.bias = RealVector::Zero(d);
    for (Eigen::Index r = 0; r < d; ++r) g.bias(r) = options.noise > 0.0 ? noise(rng) : 0.0;
    g.relu = true;
    out.g_layers.push_back(std::move(g));
  }
  return out;
}

namespace {

struct DistillData {
  RealMatrix inputs;   // prefix outputs, d1 x n
  RealMatrix teacher;  // target outputs, d2 x n
};

DistillData distill_data(const ScaledNetwork& scaled, const data::LabeledDataset& data) {
  DistillData out;
  out.inputs = nn::apply_layers(scaled.prefix(), data.columns());
  out.teacher = nn::apply_layers(std::span<const nn::DenseLayer>(&scaled.target(), 1), out.inputs);
  return out;
}

nn::MlpModel student(const ScaledNetwork& scaled) {
  nn::MlpModel m;
  m.layers = scaled.g_layers;
  for (auto& g : m.layers) g.trainable = true;
  nn::DenseLayer t = scaled.target();
  t.trainable = false;
  m.layers.push_back(std::move(t));
  return m;
}

double mean_huber(const RealMatrix& pred, const RealMatrix& target, double delta) {
  const Eigen::ArrayXXd r = (pred - target).array().abs();
  const Eigen::ArrayXXd quad = 0.5 * r.square();
  const Eigen::ArrayXXd lin = delta * (r - 0.5 * delta);
  return (r <= delta).select(quad, lin).mean();
}

}  // namespace

double distillation_loss(const ScaledNetwork& scaled, const data::LabeledDataset& data, double delta) {
  const DistillData d = distill_data(scaled, data);
  const nn::MlpModel s = student(scaled);
  return mean_huber(nn::forward_batch(s, d.inputs), d.teacher, delta);
}

DistillReport distill(ScaledNetwork& scaled, const data::LabeledDataset& train, const nn::TrainConfig& cfg,
                      const data::LabeledDataset* eval) {
  scaled.validate();
  train.validate();
  const auto* huber = std::get_if<nn::Huber>(&cfg.loss);
  if (huber == nullptr) throw std::invalid_argument("distill: the distillation loss must be Huber");

  const DistillData d = distill_data(scaled, train);
  nn::MlpModel s = student(scaled);
  DistillReport report;
  report.initial_loss = mean_huber(nn::forward_batch(s, d.inputs), d.teacher, huber->delta);
  report.training = nn::fit(s, d.inputs, &d.teacher, cfg);
  for (std::size_t j = 0; j < scaled.g_layers.size(); ++j) {
    scaled.g_layers[j].weight = s.layers[j].weight;
    scaled.g_layers[j].bias = s.layers[j].bias;
  }
  report.final_loss = mean_huber(nn::forward_batch(s, d.inputs), d.teacher, huber->delta);
  const data::LabeledDataset& probe = eval != nullptr ? *eval : train;
  report.base_accuracy = nn::accuracy(scaled.base, probe);
  report.scaled_accuracy = nn::accuracy(scaled.flattened(), probe);
  return report;
}

nn::MlpModel ablate(const ScaledNetwork& scaled) { return scaled.base; }

json to_json(const ScaledNetwork& scaled) {
  json j = nn::to_json(scaled.base);
  j["scaling"] = {{"target_index", scaled.target_index},
                  {"k", scaled.k()},
                  {"g_layers", nn::layers_to_json(scaled.g_layers)}};
  return j;
}

ScaledNetwork scaled_from_json(const json& j) {
  if (!j.contains("scaling")) throw std::invalid_argument("scaled json: missing 'scaling' section");
  ScaledNetwork out;
  out.base = nn::model_from_json(j);
  const json& s = j.at("scaling");
  out.target_index = s.at("target_index").get<std::size_t>();
  out.g_layers = nn::layers_from_json(s.at("g_layers"));
  if (static_cast<int>(out.g_layers.size()) != s.at("k").get<int>()) {
    throw std::invalid_argument("scaled json: k disagrees with the number of g layers");
  }
  out.validate();
  return out;
}

void save_scaled(const ScaledNetwork& scaled, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << to_json(scaled).dump() << '\n';
}

ScaledNetwork load_scaled(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return scaled_from_json(json::parse(is));
}

}  // namespace koopnet::scaling
