#include "calibra/property.hpp"

#include <algorithm>
#include <cmath>

#include "calibra/errors.hpp"

namespace calibra {

PropertySpec mean_property() {
  PropertySpec p;
  p.name = "mean";
  p.kind = PropertyKind::mean;
  p.id_eval = [](double g, double y) { return g - y; };
  p.score_eval = [](double g, double y) { return 0.5 * (g - y) * (g - y); };
  p.lipschitz_L = 1.0;
  p.anti_lipschitz_La = 1.0;
  p.id_bound_C = 1.0;
  p.score_lo = 0.0;
  p.score_hi = 0.5;
  p.score_lipschitz = 1.0;
  return p;
}

PropertySpec quantile_property(double tau, double density_upper_M2) {
  if (!(tau > 0.0 && tau < 1.0))
    throw ConfigError("quantile_property: tau must lie in (0,1)");
  if (!(density_upper_M2 > 0.0))
    throw ConfigError("quantile_property: density bound must be positive");
  PropertySpec p;
  p.name = "quantile";
  p.kind = PropertyKind::quantile;
  p.tau = tau;
  p.id_eval = [tau](double g, double y) { return (y <= g ? 1.0 : 0.0) - tau; };
  p.score_eval = [tau](double g, double y) {
    return (1.0 - tau) * g + std::max(y - g, 0.0);
  };
  p.lipschitz_L = density_upper_M2;
  p.anti_lipschitz_La = std::nullopt;
  p.id_bound_C = std::max(tau, 1.0 - tau);
  p.score_lo = 0.0;
  p.score_hi = 1.0;
  p.score_lipschitz = std::max(tau, 1.0 - tau);
  return p;
}

std::function<double(double, double)> rescaled_pinball_score(double tau) {
  if (!(tau >= 0.0 && tau < 1.0))
    throw ConfigError("rescaled_pinball_score: tau must lie in [0,1)");
  const double scale = 1.0 / (1.0 - tau);
  return [scale](double g, double y) { return g + scale * std::max(y - g, 0.0); };
}

ConditionalIdFamily bayes_pair_family(const PropertySpec& base) {
  ConditionalIdFamily f;
  f.name = "bayes_risk(" + base.name + ")";
  f.outer = base;
  auto s = base.score_eval;
  f.cond_id_eval = [s](double g0, double g1, double y) { return g1 - s(g0, y); };
  f.cond_score_eval = [s](double g0, double g1, double y) {
    const double v = g1 - s(g0, y);
    return 0.5 * v * v;
  };
  f.level_lipschitz_L1 = 1.0;
  f.cross_lipschitz_Lc = base.score_lipschitz;
  // g1 - S spans [-score_hi, 1 - score_lo] over [0,1]^2, and both endpoints
  // straddle zero for any score with score_lo <= 1 and score_hi >= 0.
  const double extreme = std::max(base.score_hi, 1.0 - base.score_lo);
  f.cond_score_range_B1 = 0.5 * extreme * extreme;
  return f;
}

std::pair<PropertySpec, ConditionalIdFamily> mean_variance_pair() {
  PropertySpec outer = mean_property();
  return {outer, bayes_pair_family(outer)};
}

std::pair<PropertySpec, ConditionalIdFamily> quantile_cvar_pair(double tau, double m1,
                                                                double m2) {
  if (!(m1 > 0.0 && m1 <= 1.0 && m2 >= 1.0))
    throw ConfigError("quantile_cvar_pair: density band must satisfy 0 < m1 <= 1 <= m2");
  PropertySpec outer = quantile_property(tau, m2);
  outer.anti_lipschitz_La = 1.0 / m1;

  // The CVaR head measures against the rescaled pinball, whose Bayes risk is
  // CVaR itself; only the base score differs from the outer property.
  PropertySpec rescaled = outer;
  rescaled.name = "quantile_rescaled";
  rescaled.score_eval = rescaled_pinball_score(tau);
  rescaled.score_lo = 0.0;
  rescaled.score_hi = 1.0 / (1.0 - tau);
  rescaled.score_lipschitz = std::max(1.0, tau / (1.0 - tau));

  ConditionalIdFamily fam = bayes_pair_family(rescaled);
  fam.name = "bayes_risk(cvar)";
  return {outer, fam};
}

double expected_id(const PropertySpec& p, double gamma, const FiniteDistribution& d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.support.size(); ++i)
    s += d.probs[i] * p.id_eval(gamma, d.support[i]);
  return s;
}

double expected_score(const PropertySpec& p, double gamma, const FiniteDistribution& d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.support.size(); ++i)
    s += d.probs[i] * p.score_eval(gamma, d.support[i]);
  return s;
}

double expected_cond_id(const ConditionalIdFamily& f, double g0, double g1,
                        const FiniteDistribution& d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.support.size(); ++i)
    s += d.probs[i] * f.cond_id_eval(g0, g1, d.support[i]);
  return s;
}

double expected_cond_score(const ConditionalIdFamily& f, double g0, double g1,
                           const FiniteDistribution& d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.support.size(); ++i)
    s += d.probs[i] * f.cond_score_eval(g0, g1, d.support[i]);
  return s;
}

}  // namespace calibra
