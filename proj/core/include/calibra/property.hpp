#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "calibra/distribution.hpp"

namespace calibra {

enum class PropertyKind { mean, quantile };

// An elicitable property packaged as its identification function V(gamma, y),
// a scoring function S(gamma, y) with dS/dgamma = V, and the caller-asserted
// regularity constants the convergence bounds consume. V is oriented:
// E[V(gamma, Y)] < 0 for gamma below the property value and > 0 above.
struct PropertySpec {
  std::string name;
  PropertyKind kind = PropertyKind::mean;
  double tau = 0.0;  // quantile level; unused for mean
  std::function<double(double, double)> id_eval;
  std::function<double(double, double)> score_eval;
  double lipschitz_L = 1.0;                 // E[V(., Y)] treated as L-Lipschitz
  std::optional<double> anti_lipschitz_La;  // |gamma - Gamma(Y)| <= La * |E V|
  double id_bound_C = 1.0;                  // sup |V| over [0,1]^2
  double score_lo = 0.0;                    // range of S over [0,1]^2
  double score_hi = 1.0;
  double score_lipschitz = 1.0;             // Lipschitz constant of S in gamma

  double score_range_B() const { return score_hi - score_lo; }
};

// Conditionally elicitable second component: V1 indexed by the level gamma0
// of the first component, with an antiderivative in gamma1.
struct ConditionalIdFamily {
  std::string name;
  PropertySpec outer;  // the first component this family conditions on
  std::function<double(double, double, double)> cond_id_eval;     // (g0, g1, y)
  std::function<double(double, double, double)> cond_score_eval;  // (g0, g1, y)
  double level_lipschitz_L1 = 1.0;   // Lipschitz of E[V1_{g0}(., Y)] in g1
  double cross_lipschitz_Lc = 1.0;   // Lipschitz of V1_.(g1, y) in g0
  double cond_score_range_B1 = 0.5;  // range of the conditional score
};

// Squared-error mean: V = gamma - y, S = (gamma - y)^2 / 2. The halving makes
// the score-gap sandwich exact with Lipschitz constant 1.
PropertySpec mean_property();

// tau-quantile with the pinball score S = (1-tau)*gamma + (y-gamma)+.
// density_upper_M2 is the caller's density upper bound for the label family,
// asserted as the Lipschitz constant of E[V(., Y)].
PropertySpec quantile_property(double tau, double density_upper_M2);

// S_tau(gamma, y) = gamma + (y - gamma)+ / (1 - tau). Its Bayes risk is CVaR.
std::function<double(double, double)> rescaled_pinball_score(double tau);

// Pair (Gamma_base, Bayes risk of S_base): V^B_{g0}(g1, y) = g1 - S_base(g0, y)
// with conditional score (g1 - S_base(g0, y))^2 / 2.
ConditionalIdFamily bayes_pair_family(const PropertySpec& base);

// (mean, variance-via-Bayes-risk) ready for joint calibration. The second
// component tracks E[(g0 - y)^2/2] on level sets; at the true mean this is
// half the conditional variance's scoring identity.
std::pair<PropertySpec, ConditionalIdFamily> mean_variance_pair();

// (tau-quantile, CVaR) with density band [m1, m2] asserted by the caller:
// L = m2, anti-Lipschitz 1/m1, CVaR head built on the rescaled pinball.
std::pair<PropertySpec, ConditionalIdFamily> quantile_cvar_pair(double tau, double m1,
                                                                double m2);

double expected_id(const PropertySpec& p, double gamma, const FiniteDistribution& d);
double expected_score(const PropertySpec& p, double gamma, const FiniteDistribution& d);
double expected_cond_id(const ConditionalIdFamily& f, double g0, double g1,
                        const FiniteDistribution& d);
double expected_cond_score(const ConditionalIdFamily& f, double g0, double g1,
                           const FiniteDistribution& d);

}  // namespace calibra
