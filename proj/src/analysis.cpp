#include "cldyn/analysis.hpp"

#include "cldyn/fixedpoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cldyn {

MatchingReport matching_scores(const Matrix& W, Index K, Index M, const TokenEmbedding& emb,
                               const GeneratorPool& pool) {
  if (W.rows() != K * M || W.cols() != emb.dim()) throw DimensionError("W layout mismatch");
  if (pool.K != K || pool.d_tokens != emb.tokens()) throw DimensionError("pool mismatch");
  for (Index a = 0; a < emb.tokens(); ++a)
    if (!(emb.table.row(a).norm() > 0.0)) throw DegenerateFilter("zero-norm embedding row");
  MatchingReport r;
  r.chi_plus_per_rf = Vector::Zero(K);
  r.chi_minus_per_rf = Vector::Zero(K);
  const double inv_p = 1.0 / double(pool.P);
  for (Index k = 0; k < K; ++k) {
    Matrix wk = W.middleRows(k * M, M);
    for (Index m = 0; m < M; ++m) {
      double n = wk.row(m).norm();
      if (!(n > 0.0))
        throw DegenerateFilter("filter k=" + std::to_string(k) + " m=" + std::to_string(m) +
                               " has zero norm");
      wk.row(m) /= n;
    }
    for (Index a = 0; a < emb.tokens(); ++a) {
      Vector u = emb.table.row(a).transpose().normalized();
      double best = (wk * u).maxCoeff();
      if (pool.in_candidates(k, int(a)))
        r.chi_plus_per_rf[k] += inv_p * best;
      else
        r.chi_minus_per_rf[k] += inv_p * best;
    }
  }
  r.chi_plus = r.chi_plus_per_rf.mean();
  r.chi_minus = r.chi_minus_per_rf.mean();
  return r;
}

BasinReport basin_estimate(const GatedOperator& a, const std::vector<Vector>& targets, Index trials,
                           double angle_tol, std::uint64_t seed, double dt, long max_steps,
                           double residual_tol) {
  if (trials < 1) throw InvalidConfiguration("need at least one trial");
  Rng rng = make_rng(seed);
  BasinReport r;
  r.trials = trials;
  r.frequency.assign(targets.size(), 0.0);
  const double cos_tol = std::cos(angle_tol);
  for (Index t = 0; t < trials; ++t) {
    Vector w = random_unit_vector(a.dim(), rng);
    bool converged = false;
    for (long s = 0; s < max_steps; ++s) {
      Matrix m = a(w);
      Vector g = m * w;
      g -= w * w.dot(g);
      if (g.norm() <= residual_tol * std::max(1.0, spectral_norm(m))) {
        converged = true;
        break;
      }
      w += dt * g;
      w /= w.norm();
    }
    if (!converged) {
      r.unconverged += 1.0;
      continue;
    }
    bool hit = false;
    for (size_t j = 0; j < targets.size() && !hit; ++j) {
      if (std::abs(w.dot(targets[j].normalized())) >= cos_tol) {
        r.frequency[j] += 1.0;
        hit = true;
      }
    }
    if (!hit) r.unassigned += 1.0;
  }
  for (double& f : r.frequency) f /= double(trials);
  r.unassigned /= double(trials);
  r.unconverged /= double(trials);
  return r;
}

double blowup_time(double b, double y0) {
  if (!(b > 0.0) || !(y0 > 0.0)) throw DomainError("blow-up time needs b > 0 and y0 > 0");
  return std::log1p(b / y0) / b;
}

Trajectory1D simulate_1d(double b, double y0, double dt, double t_max, double threshold,
                         double rel_cap) {
  if (!(dt > 0.0)) throw InvalidConfiguration("dt must be positive");
  Trajectory1D tr;
  double t = 0.0, y = y0;
  tr.t.push_back(t);
  tr.y.push_back(y);
  // record roughly every dt of simulated time
  double next_record = dt;
  while (t < t_max) {
    double rate = (y + b) * y;
    double h = std::min(dt, t_max - t);
    double cap = rel_cap * std::max(std::abs(y), 1.0);
    if (std::abs(rate) * h > cap) h = cap / std::abs(rate);
    y += h * rate;
    t += h;
    if (std::abs(y) > threshold) {
      tr.blew_up = true;
      tr.blowup_at = t;
      tr.t.push_back(t);
      tr.y.push_back(y);
      return tr;
    }
    if (t >= next_record || t >= t_max) {
      tr.t.push_back(t);
      tr.y.push_back(y);
      next_record = t + dt;
    }
  }
  return tr;
}

double modulation_probability(double eps, Index d) {
  if (!(eps > -1.0)) throw DomainError("modulation probability needs eps > -1");
  if (d < 1) throw DomainError("dimension must be >= 1");
  const double dd = double(d);
  if (eps > 1.0) return 0.5;
  if (eps >= 0.0) return (1.0 - std::pow((1.0 + eps) / 2.0, dd)) / dd + eps / 2.0;
  return (std::pow(1.0 + eps / 2.0, dd) - std::pow((1.0 + eps) / 2.0, dd)) / dd;
}

MonteCarloEstimate modulation_probability_mc(double eps, Index d, Index draws, std::uint64_t seed) {
  if (d < 1 || draws < 1) throw InvalidConfiguration("need d >= 1 and draws >= 1");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Index hits = 0;
  for (Index i = 0; i < draws; ++i) {
    double y = u(rng);
    double others = -std::numeric_limits<double>::infinity();
    for (Index l = 1; l < d; ++l) others = std::max(others, u(rng));
    if (y > 0.0 && y + eps >= others) ++hits;
  }
  MonteCarloEstimate e;
  e.mean = double(hits) / double(draws);
  e.standard_error = std::sqrt(std::max(e.mean * (1.0 - e.mean), 1e-300) / double(draws));
  return e;
}

}  // namespace cldyn
