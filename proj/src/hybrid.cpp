#include <fstream>
#include <stdexcept>

#include "koopnet/hybrid.hpp"

namespace koopnet::hybrid {

using nlohmann::json;

Eigen::Index HybridModel::input_dim() const {
  if (!prefix.empty()) return prefix.front().in_dim();
  if (!g_layers.empty()) return g_layers.front().in_dim();
  return d1();
}

void HybridModel::validate() const {
  if (h() < 1 || h() > k()) {
    throw std::invalid_argument("hybrid: h = " + std::to_string(h()) + " needs h <= k = " + std::to_string(k()) +
                                " (only k+1 snapshots exist at inference)");
  }
  if (d2 < 1 || d2 > d1()) throw std::invalid_argument("hybrid: d2 must lie in [1, d1]");
  Eigen::Index width = input_dim();
  for (const auto& l : prefix) {
    if (l.in_dim() != width) throw std::invalid_argument("hybrid: prefix layers do not chain");
    width = l.out_dim();
  }
  if (width != d1()) {
    throw std::invalid_argument("hybrid: prefix produces " + std::to_string(width) + " features but the DMD state is " +
                                std::to_string(d1()));
  }
  for (const auto& g : g_layers) {
    if (g.in_dim() != d1() || g.out_dim() != d1()) throw std::invalid_argument("hybrid: g layers must be d1 x d1");
  }
  width = d2;
  for (const auto& l : suffix) {
    if (l.in_dim() != width) throw std::invalid_argument("hybrid: suffix layers do not chain");
    width = l.out_dim();
  }
  if (step.rows() != d1() || step.cols() != dmd.lifted_dim()) throw std::invalid_argument("hybrid: stale step operator");
}

HybridModel build_hybrid(const scaling::ScaledNetwork& scaled, const koopman::DmdModel& dmd, bool clamp_relu) {
  scaled.validate();
  if (dmd.d1 != scaled.state_dim()) {
    throw std::invalid_argument("build_hybrid: DMD state dimension " + std::to_string(dmd.d1) +
                                " differs from the target layer input width " + std::to_string(scaled.state_dim()));
  }
  if (dmd.h > scaled.k()) {
    throw std::invalid_argument("build_hybrid: h = " + std::to_string(dmd.h) + " exceeds k = " +
                                std::to_string(scaled.k()) + "; inference only has k+1 snapshots");
  }
  HybridModel out;
  out.prefix.assign(scaled.prefix().begin(), scaled.prefix().end());
  out.g_layers = scaled.g_layers;
  out.suffix.assign(scaled.suffix().begin(), scaled.suffix().end());
  out.dmd = dmd;
  out.target_index = scaled.target_index;
  out.d2 = scaled.target_output_dim();
  out.clamp_relu = clamp_relu;
  out.step = koopman::one_step_operator(dmd);
  out.validate();
  return out;
}

RealMatrix replaced_activation(const HybridModel& model, const RealMatrix& x) {
  if (x.rows() != model.input_dim()) {
    throw std::invalid_argument("hybrid: input has " + std::to_string(x.rows()) + " features, model expects " +
                                std::to_string(model.input_dim()));
  }
  const Eigen::Index d1 = model.d1();
  const int h = model.h();
  const int k = model.k();
  // snapshots 0..k; the window is the last h of them
  RealMatrix window(static_cast<Eigen::Index>(h) * d1, x.cols());
  RealMatrix s = nn::apply_layers(model.prefix, x);
  const int first = k + 1 - h;
  for (int j = 0; j <= k; ++j) {
    if (j > 0) s = nn::apply_layers(std::span<const nn::DenseLayer>(&model.g_layers[j - 1], 1), std::move(s));
    if (j >= first) window.middleRows(static_cast<Eigen::Index>(j - first) * d1, d1) = s;
  }
  RealMatrix out = (model.step * window).topRows(model.d2);
  if (model.clamp_relu) out = out.cwiseMax(0.0);
  return out;
}

RealMatrix hybrid_forward_batch(const HybridModel& model, const RealMatrix& x) {
  return nn::apply_layers(model.suffix, replaced_activation(model, x));
}

RealVector hybrid_forward(const HybridModel& model, const RealVector& x) {
  return hybrid_forward_batch(model, x).col(0);
}

EvalReport score(const RealMatrix& logits, std::span<const int> labels, int n_classes) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.cols()) {
    throw std::invalid_argument("score: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(logits.cols()) + " predictions");
  }
  if (logits.rows() < n_classes) throw std::invalid_argument("score: fewer logits than classes");
  EvalReport out;
  out.samples = logits.cols();
  out.confusion.assign(static_cast<std::size_t>(n_classes), std::vector<std::int64_t>(n_classes, 0));
  std::int64_t hits = 0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    Eigen::Index pred = 0;
    logits.col(j).head(n_classes).maxCoeff(&pred);
    const int y = labels[static_cast<std::size_t>(j)];
    ++out.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(pred)];
    if (pred == y) ++hits;
  }
  out.accuracy = out.samples > 0 ? static_cast<double>(hits) / static_cast<double>(out.samples) : 0.0;
  return out;
}

EvalReport evaluate(const nn::MlpModel& model, const data::LabeledDataset& data) {
  data.validate();
  return score(nn::forward_batch(model, data.columns()), data.labels, data.n_classes);
}

EvalReport evaluate(const scaling::ScaledNetwork& scaled, const data::LabeledDataset& data) {
  return evaluate(scaled.flattened(), data);
}

EvalReport evaluate(const HybridModel& model, const data::LabeledDataset& data) {
  data.validate();
  return score(hybrid_forward_batch(model, data.columns()), data.labels, data.n_classes);
}

json to_json(const EvalReport& report) {
  return {{"accuracy", report.accuracy}, {"samples", report.samples}, {"confusion", report.confusion}};
}

json to_json(const HybridModel& model) {
  return {{"format_version", 1},
          {"kind", "hybrid"},
          {"target_index", model.target_index},
          {"h", model.h()},
          {"d2", model.d2},
          {"clamp_relu", model.clamp_relu},
          {"prefix", nn::layers_to_json(model.prefix)},
          {"g_layers", nn::layers_to_json(model.g_layers)},
          {"suffix", nn::layers_to_json(model.suffix)},
          {"dmd", koopman::to_json(model.dmd)}};
}

HybridModel hybrid_from_json(const json& j) {
  if (j.value("kind", std::string()) != "hybrid") throw std::invalid_argument("hybrid json: kind is not 'hybrid'");
  HybridModel m;
  m.target_index = j.at("target_index").get<std::size_t>();
  m.d2 = j.at("d2").get<Eigen::Index>();
  m.clamp_relu = j.value("clamp_relu", false);
  m.prefix = nn::layers_from_json(j.at("prefix"));
  m.g_layers = nn::layers_from_json(j.at("g_layers"));
  m.suffix = nn::layers_from_json(j.at("suffix"));
  m.dmd = koopman::dmd_from_json(j.at("dmd"));
  if (j.at("h").get<int>() != m.dmd.h) throw std::invalid_argument("hybrid json: h disagrees with the DMD model");
  m.step = koopman::one_step_operator(m.dmd);
  m.validate();
  return m;
}

void save_hybrid(const HybridModel& model, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << to_json(model).dump() << '\n';
}

HybridModel load_hybrid(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return hybrid_from_json(json::parse(is));
}

}  // namespace koopnet::hybrid
