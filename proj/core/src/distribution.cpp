#include "calibra/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "calibra/errors.hpp"

namespace calibra {

FiniteDistribution FiniteDistribution::from_atoms(std::vector<double> ys,
                                                  std::vector<double> ps) {
  if (ys.size() != ps.size())
    throw DataError("distribution: support and probability lengths differ");
  if (ys.empty()) throw DataError("distribution: empty support");

  std::vector<std::size_t> order(ys.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ys[a] < ys[b]; });

  FiniteDistribution d;
  double total = 0.0;
  for (std::size_t k : order) {
    double y = ys[k], p = ps[k];
    if (!std::isfinite(y)) throw DataError("distribution: non-finite atom");
    if (!(p >= 0.0)) throw DataError("distribution: negative probability");
    total += p;
    if (p == 0.0) continue;
    if (!d.support.empty() && d.support.back() == y) {
      d.probs.back() += p;
    } else {
      d.support.push_back(y);
      d.probs.push_back(p);
    }
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw DataError("distribution: probabilities sum to " + std::to_string(total));
  if (d.support.empty()) throw DataError("distribution: all atoms have zero mass");
  return d;
}

double FiniteDistribution::mean() const {
  double s = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) s += probs[i] * support[i];
  return s;
}

double FiniteDistribution::variance() const {
  const double mu = mean();
  double s = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    const double d = support[i] - mu;
    s += probs[i] * d * d;
  }
  return s;
}

double FiniteDistribution::cdf(double y) const {
  auto it = std::upper_bound(support.begin(), support.end(), y);
  double s = 0.0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(it - support.begin()); ++i)
    s += probs[i];
  return s;
}

double FiniteDistribution::quantile(double tau) const {
  if (tau <= 0.0) return support.front();
  double cum = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    cum += probs[i];
    if (cum >= tau - 1e-12) return support[i];
  }
  return support.back();
}

double FiniteDistribution::partial_expectation_above(double g) const {
  double s = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i)
    if (support[i] > g) s += probs[i] * (support[i] - g);
  return s;
}

double FiniteDistribution::cvar(double tau) const {
  if (!(tau >= 0.0 && tau < 1.0))
    throw DataError("cvar: tau must lie in [0,1)");
  const double q = quantile(tau);
  return q + partial_expectation_above(q) / (1.0 - tau);
}

FiniteDistribution mix(const std::vector<const FiniteDistribution*>& parts,
                       const std::vector<double>& weights) {
  if (parts.size() != weights.size() || parts.empty())
    throw EmptyRegionError("mixture: no components");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DataError("mixture: negative weight");
    total += w;
  }
  if (total <= 0.0) throw EmptyRegionError("mixture: zero total weight");

  std::vector<double> ys, ps;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (weights[k] == 0.0) continue;
    const FiniteDistribution& d = *parts[k];
    const double w = weights[k] / total;
    for (std::size_t i = 0; i < d.support.size(); ++i) {
      ys.push_back(d.support[i]);
      ps.push_back(w * d.probs[i]);
    }
  }
  return FiniteDistribution::from_atoms(std::move(ys), std::move(ps));
}

FiniteDistribution mix2(const FiniteDistribution& a, const FiniteDistribution& b,
                        double weight_a) {
  return mix({&a, &b}, {weight_a, 1.0 - weight_a});
}

}  // namespace calibra
