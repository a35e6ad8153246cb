// Copyright 2026 The mirl Authors. All Rights Reserved.
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

#include "mirl/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "mirl/error.hpp"
#include "text_io.hpp"

namespace mirl {

double LinearModel::decision(std::span<const double> features) const {
  if (static_cast<Eigen::Index>(features.size()) != w.size())
    throw dimension_error("decision: feature length " + std::to_string(features.size()) +
                          " != model dimension " + std::to_string(w.size()));
  double s = b;
  for (std::size_t k = 0; k < features.size(); ++k)
    s += w[static_cast<Eigen::Index>(k)] * features[k];
  return s;
}

void SvmConfig::validate() const {
  if (!(C > 0.0) || !std::isfinite(C)) throw invalid_argument("svm: C must be positive");
  if (!(tolerance > 0.0)) throw invalid_argument("svm: tolerance must be positive");
  if (max_epochs < 1) throw invalid_argument("svm: max_epochs must be positive");
}

double primal_objective(const LinearModel& model, const FeatureMatrix& x, std::span<const int> y,
                        double C) {
  const Eigen::VectorXd s = x * model.w;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    loss += std::max(0.0, 1.0 - y[static_cast<std::size_t>(i)] * (s[i] + model.b));
  return 0.5 * model.w.squaredNorm() + C * loss;
}

namespace {

// Exact minimizer of the primal over b for fixed w. The hinge sum is convex
// piecewise linear with breakpoints y_i - w.x_i and slope -n_pos + k after the
// k-th breakpoint, so the optimum is the interval between order statistics
// n_pos - 1 and n_pos. `hint` is clamped into that interval.
double best_bias(const Eigen::VectorXd& w, const FeatureMatrix& x, std::span<const int> y,
                 std::size_t n_pos, double hint) {
  const Eigen::VectorXd s = x * w;
  std::vector<double> t(static_cast<std::size_t>(x.rows()));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = y[i] - s[static_cast<Eigen::Index>(i)];
  auto nth = [&](std::size_t k) {
    std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(k), t.end());
    return t[k];
  };
  const double lo = nth(n_pos - 1);
  const double hi = nth(n_pos);
  return std::clamp(hint, std::min(lo, hi), std::max(lo, hi));
}

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double step = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) step = std::min(step, -v[i] / dv[i]);
  return step;
}

}  // namespace

// Mehrotra predictor-corrector on
//   min 1/2 |w|^2 + C 1'xi  s.t.  Y(Xw + b) + xi - 1 = s >= 0, xi >= 0,
// with multipliers alpha (margins) and eta (slacks). Eliminating the
// per-example blocks leaves a (d+1) x (d+1) positive definite system in
// (dw, db), so each iteration costs O(n d^2).
SvmSolution train_svm(const FeatureMatrix& x, std::span<const int> y, const SvmConfig& config) {
  config.validate();
  if (static_cast<Eigen::Index>(y.size()) != x.rows())
    throw dimension_error("svm: " + std::to_string(y.size()) + " labels for " +
                          std::to_string(x.rows()) + " examples");
  std::size_t n_pos = 0, n_neg = 0;
  for (int label : y) {
    if (label == 1) ++n_pos;
    else if (label == -1) ++n_neg;
    else throw invalid_argument("svm: labels must be +1 or -1");
  }
  if (n_pos == 0 || n_neg == 0) throw invalid_argument("svm: training data has a single class");

  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const double C = config.C;
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv[i] = y[static_cast<std::size_t>(i)];

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0.0;
  Eigen::VectorXd xi = Eigen::VectorXd::Constant(n, 2.0);
  Eigen::VectorXd s = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd alpha = Eigen::VectorXd::Constant(n, 0.5 * C);
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, 0.5 * C);

  SvmSolution out;
  out.objective = std::numeric_limits<double>::infinity();
  auto record = [&] {
    LinearModel m{w, 0.0};
    m.b = best_bias(m.w, x, y, n_pos, b);
    const double p = primal_objective(m, x, y, C);
    if (p < out.objective) {
      out.objective = p;
      out.model = std::move(m);
    }
    out.objective_trace.push_back(out.objective);
  };

  Eigen::MatrixXd system(d + 1, d + 1);
  Eigen::VectorXd rhs(d + 1);
  Eigen::VectorXd dinv(n), g(n), r_sa(n), r_xe(n);
  Eigen::VectorXd da(n), ds(n), dxi(n), deta(n);
  FeatureMatrix scaled(n, d);
  Eigen::LDLT<Eigen::MatrixXd> ldlt;

  // Solves the Newton system for given complementarity targets; fills the
  // direction vectors and returns (dw, db) packed.
  auto direction = [&](const Eigen::VectorXd& r_w, double r_b, const Eigen::VectorXd& r_c,
                       const Eigen::VectorXd& r_p) {
    g = -r_p - (r_xe - xi.cwiseProduct(r_c)).cwiseQuotient(eta) + r_sa.cwiseQuotient(alpha);
    const Eigen::VectorXd dg = dinv.cwiseProduct(g);
    rhs.head(d) = x.transpose() * yv.cwiseProduct(dg) - r_w;
    rhs[d] = yv.dot(dg) + r_b;
    const Eigen::VectorXd step = ldlt.solve(rhs);
    const Eigen::VectorXd dw = step.head(d);
    const double db = step[d];
    da = dinv.cwiseProduct(g - yv.cwiseProduct(x * dw) - yv * db);
    ds = (r_sa - s.cwiseProduct(da)).cwiseQuotient(alpha);
    deta = r_c - da;
    dxi = (r_xe - xi.cwiseProduct(deta)).cwiseQuotient(eta);
    return step;
  };

  const int max_iter = std::min(config.max_epochs, 500);
  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::VectorXd margin = (yv.array() * ((x * w).array() + b)).matrix();
    const Eigen::VectorXd r_w = w - x.transpose() * yv.cwiseProduct(alpha);
    const double r_b = yv.dot(alpha);
    const Eigen::VectorXd r_c = Eigen::VectorXd::Constant(n, C) - alpha - eta;
    const Eigen::VectorXd r_p = margin + xi - Eigen::VectorXd::Ones(n) - s;
    const double comp = s.dot(alpha) + xi.dot(eta);
    const double mu = comp / static_cast<double>(2 * n);
    const double pobj = 0.5 * w.squaredNorm() + C * xi.sum();

    ++out.epochs;
    record();
    const double scale = 1.0 + std::abs(pobj);
    const double infeas = std::max({r_w.lpNorm<Eigen::Infinity>(), std::abs(r_b),
                                    r_c.lpNorm<Eigen::Infinity>(), r_p.lpNorm<Eigen::Infinity>()});
    if (comp <= 1e-2 * config.tolerance * scale && infeas <= 1e-9 * scale) break;

    dinv = (xi.cwiseQuotient(eta) + s.cwiseQuotient(alpha)).cwiseInverse();
    scaled = dinv.cwiseSqrt().asDiagonal() * x;
    system.topLeftCorner(d, d) = scaled.transpose() * scaled;
    system.topLeftCorner(d, d).diagonal().array() += 1.0;
    const Eigen::VectorXd col = x.transpose() * dinv;
    system.topRightCorner(d, 1) = col;
    system.bottomLeftCorner(1, d) = col.transpose();
    system(d, d) = dinv.sum();
    ldlt.compute(system);

    // Predictor.
    r_sa = -s.cwiseProduct(alpha);
    r_xe = -xi.cwiseProduct(eta);
    direction(r_w, r_b, r_c, r_p);
    const double ap = std::min({max_step(s, ds), max_step(xi, dxi)});
    const double ad = std::min({max_step(alpha, da), max_step(eta, deta)});
    const double mu_aff = ((s + ap * ds).dot(alpha + ad * da) + (xi + ap * dxi).dot(eta + ad * deta)) /
                          static_cast<double>(2 * n);
    double sigma = std::pow(mu_aff / mu, 3.0);
    // Keep complementarity from collapsing ahead of feasibility.
    if (mu < infeas) sigma = std::max(sigma, 0.5);

    // Corrector.
    r_sa = Eigen::VectorXd::Constant(n, sigma * mu) - s.cwiseProduct(alpha) - ds.cwiseProduct(da);
    r_xe = Eigen::VectorXd::Constant(n, sigma * mu) - xi.cwiseProduct(eta) - dxi.cwiseProduct(deta);
    const Eigen::VectorXd step = direction(r_w, r_b, r_c, r_p);
    // Near the optimum the scaling can overflow; the incumbent is kept.
    if (!step.allFinite() || !da.allFinite() || !ds.allFinite() || !dxi.allFinite() ||
        !deta.allFinite())
      break;
    const double tp = 0.995 * std::min({max_step(s, ds), max_step(xi, dxi)});
    const double td = 0.995 * std::min({max_step(alpha, da), max_step(eta, deta)});
    const double t = std::min(tp, td);
    w += t * step.head(d);
    b += t * step[d];
    s += t * ds;
    xi += t * dxi;
    alpha += t * da;
    eta += t * deta;
    if (!w.allFinite() || !std::isfinite(b)) throw runtime_error("svm: solver diverged");
  }
  return out;
}

LinearModel train(const FeatureMatrix& x, std::span<const int> y, const SvmConfig& config) {
  return train_svm(x, y, config).model;
}

std::string serialize_model(const LinearModel& model) {
  std::string s = "mirl-linear-model v1\ndim " + std::to_string(model.w.size()) + "\nw";
  for (Eigen::Index i = 0; i < model.w.size(); ++i) {
    s += ' ';
    text::append_double(s, model.w[i]);
  }
  s += "\nb ";
  text::append_double(s, model.b);
  s += '\n';
  return s;
}

LinearModel parse_model(std::string_view text_in) {
  const auto lines = text::split_lines(text_in);
  if (lines.size() < 4) throw format_error("model: truncated file");
  {
    text::TokenReader rd(lines[0], "model header");
    rd.expect("mirl-linear-model");
    if (rd.next() != "v1") throw format_error("model: unsupported schema version");
  }
  text::TokenReader dim_rd(lines[1], "model dim");
  dim_rd.expect("dim");
  const auto dim = static_cast<Eigen::Index>(dim_rd.next_uint());
  text::TokenReader w_rd(lines[2], "model weights");
  w_rd.expect("w");
  if (w_rd.remaining_tokens() != static_cast<std::size_t>(dim))
    throw dimension_error("model: weight count does not match declared dimension");
  LinearModel m;
  m.w.resize(dim);
  for (Eigen::Index i = 0; i < dim; ++i) m.w[i] = w_rd.next_double();
  text::TokenReader b_rd(lines[3], "model bias");
  b_rd.expect("b");
  m.b = b_rd.next_double();
  if (!m.w.allFinite() || !std::isfinite(m.b)) throw format_error("model: non-finite parameters");
  return m;
}

}  // namespace mirl
