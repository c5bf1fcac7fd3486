#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "koopnet/koopman.hpp"

namespace koopnet::koopman {

using nlohmann::json;

namespace {

constexpr double kAmplitudeRcond = 1e-10;

Eigen::Index choose_rank(const RealVector& sigma, const RankPolicy& policy) {
  const double smax = sigma.size() > 0 ? sigma(0) : 0.0;
  Eigen::Index usable = 0;
  while (usable < sigma.size() && sigma(usable) > 0.0 && sigma(usable) >= policy.drop * smax) ++usable;
  if (usable == 0) return 0;
  if (policy.kind == RankPolicy::Kind::Fixed) {
    if (policy.fixed < 1) throw std::invalid_argument("fit_dmd: fixed rank must be >= 1");
    return std::min(policy.fixed, usable);
  }
  if (!(policy.energy > 0.0 && policy.energy <= 1.0)) {
    throw std::invalid_argument("fit_dmd: energy threshold must lie in (0, 1]");
  }
  const double total = sigma.squaredNorm();
  double acc = 0.0;
  for (Eigen::Index p = 0; p < usable; ++p) {
    acc += sigma(p) * sigma(p);
    if (acc >= policy.energy * total) return p + 1;
  }
  return usable;
}

// Modes^+ = W^-1 Q^+ when Q = X' V S^-1 has full column rank; the general
// complex pseudoinverse otherwise.
ComplexMatrix amplitude_map(const RealMatrix& q, const ComplexMatrix& w, const ComplexMatrix& modes) {
  const linalg::SvdResult s = linalg::thin_svd(q);
  const Eigen::Index p = q.cols();
  if (s.sigma.size() == p && s.sigma(p - 1) > kAmplitudeRcond * s.sigma(0)) {
    const RealMatrix q_pinv = s.vt.transpose() * s.sigma.cwiseInverse().asDiagonal() * s.u.transpose();
    return linalg::inverse(w) * q_pinv.cast<Complex>();
  }
  return linalg::pinv(modes, kAmplitudeRcond);
}

void fill_residuals(DmdModel& model, const RealMatrix& x, const RealMatrix& next_last) {
  const RealMatrix b = one_step_operator(model);
  const RealVector err = (b * x - next_last).colwise().norm().transpose();
  model.residual = err.size() > 0 ? err.mean() : 0.0;
  model.max_residual = err.size() > 0 ? err.maxCoeff() : 0.0;
}

}  // namespace

DmdModel fit_dmd(const HankelEmbedding& emb, const RankPolicy& rank) {
  const Eigen::Index pairs = emb.total_pairs();
  if (emb.blocks.empty() || pairs < 1) throw std::invalid_argument("fit_dmd: embedding has no snapshot pairs");
  const Eigen::Index m = emb.lifted_dim();

  // X drops each sample's last window, X' its first
  RealMatrix x(m, pairs), xp(m, pairs);
  Eigen::Index c = 0;
  for (const RealMatrix& b : emb.blocks) {
    const Eigen::Index n = b.cols() - 1;
    x.middleCols(c, n) = b.leftCols(n);
    xp.middleCols(c, n) = b.rightCols(n);
    c += n;
  }
  if (!x.allFinite() || !xp.allFinite()) throw std::invalid_argument("fit_dmd: snapshots contain non-finite values");
  if (x.isZero(0.0)) throw std::invalid_argument("fit_dmd: degenerate data, X is all zeros");

  const linalg::SvdResult svd = linalg::thin_svd(x);
  DmdModel model;
  model.h = emb.h;
  model.d1 = emb.d1;
  model.pairs = pairs;
  model.singular_values = svd.sigma;
  model.rank = choose_rank(svd.sigma, rank);
  if (model.rank < 1) throw std::invalid_argument("fit_dmd: degenerate data, no usable singular values");
  const Eigen::Index p = model.rank;

  const RealMatrix q = xp * svd.vt.topRows(p).transpose() * svd.sigma.head(p).cwiseInverse().asDiagonal();
  const RealMatrix a_tilde = svd.u.leftCols(p).transpose() * q;
  const linalg::EigResult eig = linalg::eig_general(a_tilde);
  model.eigenvalues = eig.values;
  model.modes = q.cast<Complex>() * eig.vectors;
  model.amplitude_map = amplitude_map(q, eig.vectors, model.modes);
  fill_residuals(model, x, xp.bottomRows(emb.d1));
  return model;
}

ComplexVector amplitudes(const DmdModel& model, const RealVector& window) {
  if (window.size() != model.lifted_dim()) {
    throw std::invalid_argument("dmd: window has length " + std::to_string(window.size()) + ", expected h*d1 = " +
                                std::to_string(model.lifted_dim()));
  }
  return model.amplitude_map * window.cast<Complex>();
}

RealVector predict_step(const DmdModel& model, const RealVector& window) {
  const ComplexVector xi = amplitudes(model, window);
  const ComplexVector advanced =
      model.modes.bottomRows(model.d1) * (model.eigenvalues.array() * xi.array()).matrix();
  const RealVector pred = advanced.real();
  const double imag = advanced.imag().norm();
  if (imag > 1e-6 * pred.norm() + 1e-14) {
    throw std::runtime_error("dmd: prediction has an imaginary part of norm " + std::to_string(imag) +
                             " against a real part of norm " + std::to_string(pred.norm()));
  }
  return pred;
}

RealMatrix one_step_operator(const DmdModel& model) {
  const ComplexMatrix scaled = model.modes.bottomRows(model.d1) * model.eigenvalues.asDiagonal();
  return (scaled * model.amplitude_map).real();
}

RealMatrix CompanionModel::companion() const {
  const Eigen::Index n = c.size();
  RealMatrix out = RealMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) out(i + 1, i) = 1.0;
  out.col(n - 1) = c;
  return out;
}

CompanionModel fit_companion(const HankelEmbedding& emb) {
  if (emb.blocks.size() != 1) {
    throw std::invalid_argument("fit_companion: expects a single-sample embedding, got " +
                                std::to_string(emb.blocks.size()) + " samples");
  }
  const RealMatrix& b = emb.blocks.front();
  if (b.cols() < 2) throw std::invalid_argument("fit_companion: need at least 2 windows");
  const Eigen::Index n = b.cols() - 1;
  CompanionModel out;
  out.c = linalg::lstsq(b.leftCols(n), b.col(n)).col(0);
  out.eigenvalues = linalg::eigenvalues(out.companion());
  return out;
}

std::vector<SpectrumPoint> spectrum(const DmdModel& model) {
  std::vector<Complex> values(model.eigenvalues.data(), model.eigenvalues.data() + model.eigenvalues.size());
  std::sort(values.begin(), values.end(), linalg::spectral_before);
  std::vector<SpectrumPoint> out;
  out.reserve(values.size());
  for (const Complex& v : values) out.push_back({v.real(), v.imag(), std::abs(v)});
  return out;
}

RsvCurves rsv_curves(const HankelEmbedding& emb, Eigen::Index top) {
  if (top < 1) throw std::invalid_argument("rsv_curves: top must be >= 1");
  const linalg::SvdResult s = linalg::thin_svd(emb.stacked());
  const Eigen::Index n = std::min(top, s.sigma.size());
  return {s.vt.topRows(n), s.sigma.head(n)};
}

json complex_matrix_to_json(const ComplexMatrix& m) {
  std::vector<double> re, im;
  re.reserve(static_cast<std::size_t>(m.size()));
  im.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      re.push_back(m(r, c).real());
      im.push_back(m(r, c).imag());
    }
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"re", std::move(re)}, {"im", std::move(im)}};
}

ComplexMatrix complex_matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto re = j.at("re").get<std::vector<double>>();
  const auto im = j.at("im").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(re.size()) != rows * cols || re.size() != im.size()) {
    throw std::invalid_argument("complex matrix json: inconsistent sizes");
  }
  ComplexMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto i = static_cast<std::size_t>(r * cols + c);
      m(r, c) = {re[i], im[i]};
    }
  }
  return m;
}

json to_json(const DmdModel& model) {
  json eigs = json::array();
  for (Eigen::Index i = 0; i < model.eigenvalues.size(); ++i) {
    eigs.push_back({model.eigenvalues(i).real(), model.eigenvalues(i).imag()});
  }
  return {{"format_version", 1},
          {"h", model.h},
          {"d1", model.d1},
          {"rank", model.rank},
          {"pairs", model.pairs},
          {"eigenvalues", std::move(eigs)},
          {"modes", complex_matrix_to_json(model.modes)},
          {"amplitude_map", complex_matrix_to_json(model.amplitude_map)},
          {"singular_values",
           std::vector<double>(model.singular_values.data(),
                               model.singular_values.data() + model.singular_values.size())},
          {"residual", model.residual},
          {"max_residual", model.max_residual}};
}

DmdModel dmd_from_json(const json& j) {
  DmdModel m;
  m.h = j.at("h").get<int>();
  m.d1 = j.at("d1").get<Eigen::Index>();
  m.rank = j.at("rank").get<Eigen::Index>();
  m.pairs = j.value("pairs", Eigen::Index{0});
  const json& eigs = j.at("eigenvalues");
  m.eigenvalues.resize(static_cast<Eigen::Index>(eigs.size()));
  for (std::size_t i = 0; i < eigs.size(); ++i) {
    m.eigenvalues(static_cast<Eigen::Index>(i)) = {eigs[i].at(0).get<double>(), eigs[i].at(1).get<double>()};
  }
  m.modes = complex_matrix_from_json(j.at("modes"));
  m.amplitude_map = complex_matrix_from_json(j.at("amplitude_map"));
  const auto sv = j.value("singular_values", std::vector<double>{});
  m.singular_values = Eigen::Map<const RealVector>(sv.data(), static_cast<Eigen::Index>(sv.size()));
  m.residual = j.value("residual", 0.0);
  m.max_residual = j.value("max_residual", 0.0);
  if (m.h < 1 || m.d1 < 1 || m.modes.rows() != m.lifted_dim() || m.modes.cols() != m.rank ||
      m.eigenvalues.size() != m.rank || m.amplitude_map.rows() != m.rank || m.amplitude_map.cols() != m.lifted_dim()) {
    throw std::invalid_argument("dmd json: inconsistent shapes");
  }
  return m;
}

void save_dmd(const DmdModel& model, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << to_json(model).dump() << '\n';
}

DmdModel load_dmd(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return dmd_from_json(json::parse(is));
}

}  // namespace koopnet::koopman
