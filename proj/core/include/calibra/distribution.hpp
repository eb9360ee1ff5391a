#pragma once

#include <cstddef>
#include <vector>

namespace calibra {

// Finitely supported label distribution. Support is strictly ascending with
// no duplicates; probabilities are positive and sum to 1 within 1e-12.
struct FiniteDistribution {
  std::vector<double> support;
  std::vector<double> probs;

  // Sorts, merges duplicate atoms, drops zero-probability atoms, validates.
  static FiniteDistribution from_atoms(std::vector<double> ys, std::vector<double> ps);

  std::size_t size() const { return support.size(); }

  double mean() const;
  double variance() const;

  // Pr[Y <= y].
  double cdf(double y) const;

  // inf{y : F(y) >= tau} for tau in (0,1); tau <= 0 returns the smallest atom.
  double quantile(double tau) const;

  // E[(Y - g)+].
  double partial_expectation_above(double g) const;

  // quantile(tau) + E[(Y - quantile)+] / (1 - tau); tau = 0 gives the mean.
  double cvar(double tau) const;

  bool operator==(const FiniteDistribution&) const = default;
};

// Convex combination of distributions; weights must be non-negative with a
// positive sum and are renormalized.
FiniteDistribution mix(const std::vector<const FiniteDistribution*>& parts,
                       const std::vector<double>& weights);

FiniteDistribution mix2(const FiniteDistribution& a, const FiniteDistribution& b,
                        double weight_a);

}  // namespace calibra
