#include <fstream>
#include <stdexcept>

#include "koopnet/nn.hpp"

namespace koopnet::nn {

using nlohmann::json;

json layers_to_json(std::span<const DenseLayer> layers) {
  json out = json::array();
  for (const DenseLayer& l : layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weight.size()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    }
    out.push_back({{"rows", l.weight.rows()},
                   {"cols", l.weight.cols()},
                   {"relu", l.relu},
                   {"weight", std::move(w)},
                   {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return out;
}

std::vector<DenseLayer> layers_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("model json: 'layers' must be an array");
  std::vector<DenseLayer> layers;
  for (const json& item : j) {
    const auto rows = item.at("rows").get<Eigen::Index>();
    const auto cols = item.at("cols").get<Eigen::Index>();
    const auto w = item.at("weight").get<std::vector<double>>();
    const auto b = item.at("bias").get<std::vector<double>>();
    if (rows < 1 || cols < 1 || static_cast<Eigen::Index>(w.size()) != rows * cols ||
        static_cast<Eigen::Index>(b.size()) != rows) {
      throw std::invalid_argument("model json: layer " + std::to_string(layers.size()) + " has inconsistent sizes");
    }
    DenseLayer l;
    l.weight.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) l.weight(r, c) = w[static_cast<std::size_t>(r * cols + c)];
    }
    l.bias = Eigen::Map<const RealVector>(b.data(), rows);
    l.relu = item.at("relu").get<bool>();
    layers.push_back(std::move(l));
  }
  return layers;
}

json to_json(const MlpModel& model) {
  return {{"format_version", 1}, {"layers", layers_to_json(model.layers)}, {"seed", model.seed}};
}

MlpModel model_from_json(const json& j) {
  if (j.value("format_version", 0) != 1) throw std::invalid_argument("model json: unsupported format_version");
  MlpModel model;
  model.layers = layers_from_json(j.at("layers"));
  model.seed = j.value("seed", std::uint64_t{0});
  model.validate();
  return model;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << to_json(model).dump() << '\n';
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return model_from_json(json::parse(is));
}

}  // namespace koopnet::nn
