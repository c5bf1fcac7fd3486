#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "koopnet/analysis.hpp"

namespace koopnet::analysis {

using nlohmann::json;

std::string format_double(double v) {
  if (v == 0.0) v = 0.0;  // drops the sign of -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::vector<int> argmax_columns(const RealMatrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    Eigen::Index k = 0;
    logits.col(j).maxCoeff(&k);
    out[static_cast<std::size_t>(j)] = static_cast<int>(k);
  }
  return out;
}

}  // namespace

std::string spectrum_csv(const koopman::DmdModel& model) {
  std::string out = "re,im,modulus\n";
  for (const auto& p : koopman::spectrum(model)) {
    out += format_double(p.re) + ',' + format_double(p.im) + ',' + format_double(p.modulus) + '\n';
  }
  return out;
}

void export_spectrum(const koopman::DmdModel& model, const std::filesystem::path& path) {
  pipeline::write_text(path, spectrum_csv(model));
}

std::string rsv_csv(const koopman::HankelEmbedding& emb, Eigen::Index top) {
  const koopman::RsvCurves c = koopman::rsv_curves(emb, top);
  std::string out = "vector_index,position,value,sigma\n";
  for (Eigen::Index i = 0; i < c.vectors.rows(); ++i) {
    const std::string sigma = format_double(c.sigma(i));
    for (Eigen::Index p = 0; p < c.vectors.cols(); ++p) {
      out += std::to_string(i) + ',' + std::to_string(p) + ',' + format_double(c.vectors(i, p)) + ',' + sigma + '\n';
    }
  }
  return out;
}

void export_rsv(const koopman::HankelEmbedding& emb, Eigen::Index top, const std::filesystem::path& path) {
  pipeline::write_text(path, rsv_csv(emb, top));
}

Classifier classifier(const nn::MlpModel& model) {
  return [model](const RealMatrix& x) { return argmax_columns(nn::forward_batch(model, x)); };
}

Classifier classifier(const hybrid::HybridModel& model) {
  return [model](const RealMatrix& x) { return argmax_columns(hybrid::hybrid_forward_batch(model, x)); };
}

std::string boundary_csv(const Classifier& classify, std::size_t resolution) {
  const RealMatrix grid = data::decision_grid(resolution);
  const std::vector<int> cls = classify(grid.transpose());
  if (static_cast<Eigen::Index>(cls.size()) != grid.rows()) {
    throw std::invalid_argument("boundary_csv: classifier returned the wrong number of labels");
  }
  std::string out = "x,y,class\n";
  out.reserve(out.size() + cls.size() * 48);
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    out += format_double(grid(i, 0)) + ',' + format_double(grid(i, 1)) + ',' +
           std::to_string(cls[static_cast<std::size_t>(i)]) + '\n';
  }
  return out;
}

void export_boundary(const Classifier& classify, std::size_t resolution, const std::filesystem::path& path) {
  pipeline::write_text(path, boundary_csv(classify, resolution));
}

std::string trajectory_csv(const koopman::TrajectoryBatch& batch, std::size_t sample_index) {
  if (sample_index >= batch.size()) {
    throw std::out_of_range("trajectory_csv: sample " + std::to_string(sample_index) + " of " +
                            std::to_string(batch.size()));
  }
  const RealMatrix& scaled = batch.per_sample[sample_index];
  const RealMatrix& original = batch.original[sample_index];
  const int last = batch.k + 1;
  std::string out = "state_index,step,value,network\n";
  for (Eigen::Index s = 0; s < batch.d1; ++s) {
    out += std::to_string(s) + ",0," + format_double(original(s, 0)) + ",original\n";
    out += std::to_string(s) + ',' + std::to_string(last) + ',' + format_double(original(s, 1)) + ",original\n";
  }
  for (Eigen::Index s = 0; s < batch.d1; ++s) {
    for (Eigen::Index t = 0; t < scaled.cols(); ++t) {
      out += std::to_string(s) + ',' + std::to_string(t) + ',' + format_double(scaled(s, t)) + ",scaled\n";
    }
  }
  return out;
}

void export_trajectory(const koopman::TrajectoryBatch& batch, std::size_t sample_index,
                       const std::filesystem::path& path) {
  pipeline::write_text(path, trajectory_csv(batch, sample_index));
}

// ---------------------------------------------------------------------------
// Sweep

namespace {

using CellKey = std::tuple<std::size_t, int, std::size_t>;

std::map<CellKey, SweepCell> read_ledger(const std::filesystem::path& path, std::uint64_t seed) {
  std::map<CellKey, SweepCell> out;
  std::ifstream is(path);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    // a torn last line from an interrupted run is simply recomputed
    if (j.is_discarded() || !j.is_object()) continue;
    if (j.value("seed", std::uint64_t{0}) != seed) continue;
    SweepCell c;
    try {
      c.layer = j.at("layer").get<std::size_t>();
      c.h = j.at("h").get<int>();
      c.r = j.at("r").get<std::size_t>();
      c.status = j.at("status").get<std::string>();
      if (!j.at("accuracy").is_null()) c.accuracy = j.at("accuracy").get<double>();
      c.reason = j.value("reason", std::string());
    } catch (const json::exception&) {
      continue;
    }
    out[{c.layer, c.h, c.r}] = c;
  }
  return out;
}

void append_ledger(const std::filesystem::path& path, const SweepCell& c, double wall_ms, std::uint64_t seed) {
  json j = {{"layer", c.layer},
            {"h", c.h},
            {"r", c.r},
            {"accuracy", c.accuracy ? json(*c.accuracy) : json(nullptr)},
            {"wall_ms", wall_ms},
            {"status", c.status},
            {"seed", seed}};
  if (!c.reason.empty()) j["reason"] = c.reason;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::app | std::ios::binary);
  if (!os) throw std::runtime_error("cannot append to " + path.string());
  const std::string line = j.dump() + '\n';
  os.write(line.data(), static_cast<std::streamsize>(line.size()));
  os.flush();
  if (!os) throw std::runtime_error("short write to " + path.string());
}

std::string infeasible_reason(int h, int k, std::size_t r, Eigen::Index available) {
  if (h < 1) return "h must be >= 1";
  if (h > k) return "h = " + std::to_string(h) + " exceeds k = " + std::to_string(k);
  if (r < 1) return "r must be >= 1";
  if (static_cast<Eigen::Index>(r) > available) {
    return "r = " + std::to_string(r) + " exceeds the " + std::to_string(available) + " training samples";
  }
  return {};
}

}  // namespace

std::filesystem::path ledger_path(const pipeline::RunConfig& cfg) {
  return std::filesystem::path(cfg.out) / "sweep_ledger.jsonl";
}

SweepResult run_sweep(const pipeline::RunConfig& cfg, const std::map<std::size_t, scaling::ScaledNetwork>& scaled,
                      const data::LabeledDataset& train, const data::LabeledDataset& test,
                      const std::filesystem::path& ledger, const SweepCallback& progress) {
  for (const std::size_t layer : cfg.sweep.layers) {
    if (!scaled.contains(layer)) {
      throw std::invalid_argument("run_sweep: no scaled network for layer " + std::to_string(layer));
    }
  }
  const auto done = read_ledger(ledger, cfg.seed);
  SweepResult result;
  for (const std::size_t layer : cfg.sweep.layers) {
    const scaling::ScaledNetwork& net = scaled.at(layer);
    for (const std::size_t r : cfg.sweep.r_values) {
      for (const int h : cfg.sweep.h_values) {
        if (const auto it = done.find({layer, h, r}); it != done.end()) {
          result.cells.push_back(it->second);
          ++result.reused;
          if (progress) progress(it->second, false);
          continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        SweepCell c{layer, h, r, std::nullopt, "ok", {}};
        c.reason = infeasible_reason(h, net.k(), r, train.size());
        if (!c.reason.empty()) {
          c.status = "skipped";
        } else {
          const koopman::DmdModel dmd = pipeline::fit_layer(cfg, net, train, h, r);
          const hybrid::HybridModel model = hybrid::build_hybrid(net, dmd, cfg.dmd.clamp_relu);
          c.accuracy = hybrid::evaluate(model, test).accuracy;
          ++result.evaluated;
        }
        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        append_ledger(ledger, c, wall_ms, cfg.seed);
        result.cells.push_back(c);
        if (progress) progress(c, true);
      }
    }
  }
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  std::string out = "layer,h,r,accuracy,status\n";
  for (const auto& c : result.cells) {
    out += std::to_string(c.layer) + ',' + std::to_string(c.h) + ',' + std::to_string(c.r) + ',' +
           (c.accuracy ? format_double(*c.accuracy) : std::string()) + ',' + c.status + '\n';
  }
  return out;
}

json sweep_json(const SweepResult& result, const pipeline::RunConfig& cfg) {
  json cells = json::array();
  for (const auto& c : result.cells) {
    json j = {{"layer", c.layer},
              {"h", c.h},
              {"r", c.r},
              {"accuracy", c.accuracy ? json(*c.accuracy) : json(nullptr)},
              {"status", c.status}};
    if (!c.reason.empty()) j["reason"] = c.reason;
    cells.push_back(std::move(j));
  }
  return {{"seed", cfg.seed}, {"dataset", cfg.dataset.name}, {"cells", std::move(cells)}};
}

}  // namespace koopnet::analysis
