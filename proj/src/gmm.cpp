// Copyright 2026 The saim Authors.
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

#include "saim/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "saim/errors.hpp"
#include "saim/io.hpp"

namespace saim {

using json = nlohmann::json;

Matrix cholesky(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("cholesky: matrix is not square");
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) {
      std::ostringstream msg;
      msg << "cholesky: matrix not positive definite (pivot " << j << " = " << d << ")";
      throw NumericError(msg.str());
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

// ------------------------------------------------------------------ GmmModel

double GmmModel::default_eps(const Matrix& cov) {
  double tr = 0.0;
  for (std::size_t i = 0; i < cov.rows(); ++i) tr += cov(i, i);
  return cov.rows() ? 1e-6 * tr / static_cast<double>(cov.rows()) : 0.0;
}

GmmModel::GmmModel(Vector weights, Matrix means, std::vector<Matrix> covariances, Vector eps)
    : weights_(std::move(weights)),
      means_(std::move(means)),
      covs_(std::move(covariances)),
      eps_(std::move(eps)) {
  const std::size_t k = weights_.size();
  if (k == 0) throw ContractError("gmm: needs at least one component");
  if (means_.rows() != k || covs_.size() != k || eps_.size() != k)
    throw ShapeError("gmm: component counts disagree");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0 && w <= 1.0)) throw ContractError("gmm: weights must lie in [0, 1]");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ContractError("gmm: weights must sum to 1");
  const std::size_t p = means_.cols();
  chol_.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    const Matrix& c = covs_[j];
    if (c.rows() != p || c.cols() != p) throw ShapeError("gmm: covariance has wrong shape");
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t s = 0; s < r; ++s)
        if (std::abs(c(r, s) - c(s, r)) > 1e-12)
          throw ContractError("gmm: covariance is not symmetric");
    if (!(eps_[j] >= 0.0)) throw ContractError("gmm: eps must be >= 0");
    Matrix reg = c;
    for (std::size_t r = 0; r < p; ++r) reg(r, r) += eps_[j];
    try {
      chol_.push_back(saim::cholesky(reg));
    } catch (const NumericError& e) {
      std::ostringstream msg;
      msg << "gmm component " << j << ": covariance singular after regularization (eps="
          << eps_[j] << "): " << e.what();
      throw NumericError(msg.str());
    }
  }
}

// ------------------------------------------------------------ Support sets

std::size_t SupportSet::total() const {
  std::size_t n = 0;
  for (const auto& m : members) n += m.size();
  return n;
}

SupportSet build_support_sets(const ModelParams& params, const LabeledDataset& data) {
  const std::size_t k = params.classes();
  data.validate(k);
  SupportSet s;
  s.members.resize(k);
  const std::vector<int> pred = predict(params, data.features);
  for (std::size_t i = 0; i < data.size(); ++i)
    if (pred[i] == data.labels[i]) s.members[static_cast<std::size_t>(pred[i])].push_back(i);
  for (std::size_t j = 0; j < k; ++j)
    if (s.members[j].empty())
      throw DegenerateError("support set for class " + std::to_string(j) +
                            " is empty: no correctly classified source samples");
  return s;
}

// -------------------------------------------------------------- Estimation

GmmModel estimate_gmm(const ModelParams& params, const LabeledDataset& data,
                      const SupportSet& supports, EstimationProbe* probe) {
  const std::size_t k = supports.classes();
  const std::size_t p = params.hidden();
  if (k != params.classes()) throw ShapeError("estimate_gmm: support/class count mismatch");

  // Owner class of every source row (or k if unused), so a single ordered
  // sweep over the data feeds all components.
  std::vector<std::size_t> owner(data.size(), k);
  for (std::size_t j = 0; j < k; ++j) {
    if (supports.members[j].size() < 2)
      throw DegenerateError("estimate_gmm: class " + std::to_string(j) +
                            " has fewer than two support samples");
    for (std::size_t i : supports.members[j]) {
      if (i >= data.size()) throw BoundsError("estimate_gmm: support index out of range");
      if (owner[i] != k) throw ContractError("estimate_gmm: support sets overlap");
      owner[i] = j;
    }
  }

  std::vector<std::size_t> count(k, 0);
  Matrix mean(k, p);
  std::vector<Matrix> comoment(k, Matrix(p, p));
  Vector delta(p);

  constexpr std::size_t kChunk = 256;
  std::vector<SparseVector> chunk;
  std::vector<std::size_t> chunk_owner;
  std::size_t embedded = 0;
  auto flush = [&]() {
    if (chunk.empty()) return;
    const Matrix z = encode(params, chunk);
    embedded += chunk.size();
    for (std::size_t r = 0; r < z.rows(); ++r) {
      const std::size_t j = chunk_owner[r];
      auto x = z.row(r);
      auto mu = mean.row(j);
      const double n = static_cast<double>(++count[j]);
      for (std::size_t a = 0; a < p; ++a) {
        delta[a] = x[a] - mu[a];
        mu[a] += delta[a] / n;
      }
      Matrix& c = comoment[j];
      for (std::size_t a = 0; a < p; ++a) {
        const double after = x[a] - mu[a];
        for (std::size_t b = 0; b <= a; ++b) c(a, b) += after * delta[b];
      }
    }
    chunk.clear();
    chunk_owner.clear();
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (owner[i] == k) continue;
    chunk.push_back(data.features[i]);
    chunk_owner.push_back(owner[i]);
    if (chunk.size() == kChunk) flush();
  }
  flush();
  if (probe) {
    probe->embedding_passes += 1;
    probe->rows_embedded += embedded;
  }

  const double total = static_cast<double>(supports.total());
  Vector weights(k), eps(k);
  std::vector<Matrix> covs;
  covs.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    weights[j] = static_cast<double>(count[j]) / total;
    Matrix cov(p, p);
    const double inv = 1.0 / static_cast<double>(count[j]);
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b <= a; ++b) cov(a, b) = cov(b, a) = comoment[j](a, b) * inv;
    eps[j] = GmmModel::default_eps(cov);
    covs.push_back(std::move(cov));
  }
  return GmmModel(std::move(weights), std::move(mean), std::move(covs), std::move(eps));
}

// ---------------------------------------------------------------- Sampling

namespace {

std::size_t pick_component(const Vector& weights, double u) {
  double c = 0.0;
  for (std::size_t j = 0; j + 1 < weights.size(); ++j) {
    c += weights[j];
    if (u < c) return j;
  }
  // guard against rounding in the cumulative sum: never land on a zero-weight tail
  std::size_t j = weights.size() - 1;
  while (j > 0 && weights[j] == 0.0) --j;
  return j;
}

}  // namespace

Matrix sample_gmm(const GmmModel& gmm, std::size_t n, Rng& rng,
                  std::vector<std::size_t>* components) {
  const std::size_t p = gmm.dim();
  Matrix out(n, p);
  Vector u(p);
  if (components) components->assign(n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t j = pick_component(gmm.weights(), rng.uniform());
    if (components) (*components)[r] = j;
    for (double& v : u) v = rng.normal();
    const Matrix& l = gmm.cholesky(j);
    auto mu = gmm.mean(j);
    auto o = out.row(r);
    for (std::size_t a = 0; a < p; ++a) {
      double s = mu[a];
      for (std::size_t b = 0; b <= a; ++b) s += l(a, b) * u[b];
      o[a] = s;
    }
  }
  return out;
}

Matrix sample_gmm(const GmmModel& gmm, std::size_t n, Rng& rng) {
  return sample_gmm(gmm, n, rng, nullptr);
}

double gmm_log_density(const GmmModel& gmm, std::span<const double> z) {
  const std::size_t p = gmm.dim();
  if (z.size() != p) throw ShapeError("gmm_log_density: point has wrong dimension");
  const double log2pi = std::log(2.0 * std::numbers::pi);
  std::vector<double> terms;
  Vector y(p);
  for (std::size_t j = 0; j < gmm.components(); ++j) {
    if (gmm.weights()[j] == 0.0) continue;
    const Matrix& l = gmm.cholesky(j);
    auto mu = gmm.mean(j);
    double logdet = 0.0;
    double quad = 0.0;
    for (std::size_t a = 0; a < p; ++a) {
      double s = z[a] - mu[a];
      for (std::size_t b = 0; b < a; ++b) s -= l(a, b) * y[b];
      y[a] = s / l(a, a);
      quad += y[a] * y[a];
      logdet += std::log(l(a, a));
    }
    terms.push_back(std::log(gmm.weights()[j]) - 0.5 * (static_cast<double>(p) * log2pi + quad) -
                    logdet);
  }
  const double mx = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

// ------------------------------------------------------------ Pseudo-data

PseudoDataset generate_pseudo_dataset(const GmmModel& gmm, const ModelParams& params,
                                      std::size_t n_target, double tau, Rng& rng,
                                      std::size_t max_draw_factor) {
  if (!(tau >= 0.0 && tau < 1.0)) throw ContractError("generate_pseudo_dataset: tau must be in [0, 1)");
  if (gmm.dim() != params.hidden()) throw ShapeError("generate_pseudo_dataset: gmm/model width mismatch");
  PseudoDataset out;
  out.tau = tau;
  out.requested = n_target;
  out.z = Matrix(0, gmm.dim());
  const std::size_t cap = n_target * max_draw_factor;
  const std::size_t chunk = std::max<std::size_t>(n_target, 64);
  while (out.accepted < n_target && out.attempted < cap) {
    const std::size_t draw = std::min(chunk, cap - out.attempted);
    const Matrix z = sample_gmm(gmm, draw, rng);
    const Matrix probs = classify(params, z);
    for (std::size_t r = 0; r < draw && out.accepted < n_target; ++r) {
      ++out.attempted;
      auto pr = probs.row(r);
      const std::size_t c = argmax(pr);
      if (pr[c] > tau) {
        out.z.append_row(z.row(r));
        out.labels.push_back(static_cast<int>(c));
        ++out.accepted;
      }
    }
  }
  out.shortfall = out.accepted < n_target;
  return out;
}

// --------------------------------------------------------------------- I/O

namespace {

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what(), 0);
  }
}

}  // namespace

std::string gmm_to_json(const GmmModel& gmm) {
  json j;
  j["format"] = "saim.gmm";
  j["version"] = 1;
  j["k"] = gmm.components();
  j["dim"] = gmm.dim();
  j["weights"] = gmm.weights();
  j["eps"] = gmm.eps();
  json means = json::array(), covs = json::array();
  for (std::size_t c = 0; c < gmm.components(); ++c) {
    auto m = gmm.mean(c);
    means.push_back(std::vector<double>(m.begin(), m.end()));
    covs.push_back(gmm.covariance(c).values());
  }
  j["means"] = std::move(means);
  j["covariances"] = std::move(covs);
  return j.dump() + "\n";
}

GmmModel gmm_from_json(const std::string& text) {
  json j = parse_json(text, "gmm");
  if (j.value("format", "") != "saim.gmm" || j.value("version", 0) != 1)
    throw ParseError("not a version-1 gmm file", 0);
  const auto k = j.at("k").get<std::size_t>();
  const auto p = j.at("dim").get<std::size_t>();
  Matrix means(k, p);
  std::vector<Matrix> covs;
  for (std::size_t c = 0; c < k; ++c) {
    auto m = j.at("means").at(c).get<std::vector<double>>();
    if (m.size() != p) throw ShapeError("gmm file: mean has wrong length");
    std::copy(m.begin(), m.end(), means.row(c).begin());
    covs.emplace_back(p, p, j.at("covariances").at(c).get<std::vector<double>>());
  }
  return GmmModel(j.at("weights").get<Vector>(), std::move(means), std::move(covs),
                  j.at("eps").get<Vector>());
}

void save_gmm(const std::filesystem::path& path, const GmmModel& gmm) {
  write_text_file(path, gmm_to_json(gmm));
}

GmmModel load_gmm(const std::filesystem::path& path) {
  return gmm_from_json(read_text_file(path));
}

std::string pseudo_to_json(const PseudoDataset& pseudo) {
  json j;
  j["format"] = "saim.pseudo";
  j["version"] = 1;
  j["tau"] = pseudo.tau;
  j["requested"] = pseudo.requested;
  j["attempted"] = pseudo.attempted;
  j["accepted"] = pseudo.accepted;
  j["shortfall"] = pseudo.shortfall;
  j["dim"] = pseudo.z.cols();
  j["labels"] = pseudo.labels;
  j["z"] = pseudo.z.values();
  return j.dump() + "\n";
}

PseudoDataset pseudo_from_json(const std::string& text) {
  json j = parse_json(text, "pseudo dataset");
  if (j.value("format", "") != "saim.pseudo" || j.value("version", 0) != 1)
    throw ParseError("not a version-1 pseudo dataset file", 0);
  PseudoDataset p;
  p.tau = j.at("tau").get<double>();
  p.requested = j.at("requested").get<std::size_t>();
  p.attempted = j.at("attempted").get<std::size_t>();
  p.accepted = j.at("accepted").get<std::size_t>();
  p.shortfall = j.at("shortfall").get<bool>();
  p.labels = j.at("labels").get<std::vector<int>>();
  const auto dim = j.at("dim").get<std::size_t>();
  p.z = Matrix(p.labels.size(), dim, j.at("z").get<std::vector<double>>());
  return p;
}

void save_pseudo(const std::filesystem::path& path, const PseudoDataset& pseudo) {
  write_text_file(path, pseudo_to_json(pseudo));
}

PseudoDataset load_pseudo(const std::filesystem::path& path) {
  return pseudo_from_json(read_text_file(path));
}

}  // namespace saim
