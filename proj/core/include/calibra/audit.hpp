#pragma once

#include <functional>
#include <string>
#include <vector>

#include "calibra/dataset.hpp"
#include "calibra/distribution.hpp"
#include "calibra/property.hpp"
#include "calibra/transcript.hpp"

namespace calibra {

enum class EvalKind { mean, quantile, variance, cvar };

struct EvalProperty {
  EvalKind kind = EvalKind::mean;
  double tau = 0.0;  // used by quantile and cvar
};

// Exact property value of a finite distribution. The quantile rule is
// inf{y : F(y) >= tau}; cvar uses the quantile-plus-tail identity.
double eval_property(const EvalProperty& p, const FiniteDistribution& d);

EvalProperty eval_for(const PropertySpec& p);

struct GroupError {
  std::string group_id;
  double mass = 0.0;
  double error = 0.0;             // sum over predictor levels, see mode
  double alpha_equivalent = 0.0;  // error * mass
};

struct CalibrationReport {
  std::string mode;  // "v" (identification residuals) or "gamma" (value gaps)
  std::vector<GroupError> per_group;  // in group-family order
  double max_alpha_equivalent = 0.0;
};

using IdEval = std::function<double(double, double)>;

// Per group G: sum over predictor levels gamma of
//   Pr[f = gamma | G] * E[V(gamma, Y) | f = gamma, G]^2.
CalibrationReport batch_error_v(const std::vector<double>& predictor,
                                const ExactDataset& data, const GroupFamily& groups,
                                const IdEval& id_fn);

// Same weighting with (gamma - Gamma(Y_{f=gamma,G}))^2 in place of the
// identification residual.
CalibrationReport batch_error_gamma(const std::vector<double>& predictor,
                                    const ExactDataset& data, const GroupFamily& groups,
                                    const EvalProperty& prop);

struct JointGroupLevelError {
  std::string group_id;
  double level = 0.0;  // the conditioning level (gamma1 for eq1, gamma0 for eq2)
  double mass = 0.0;
  double error = 0.0;
  double alpha_equivalent = 0.0;
};

struct JointCalibrationReport {
  // First-component errors, one row per (G, gamma1) with positive mass.
  std::vector<JointGroupLevelError> eq1;
  // Second-component errors, one row per (G, gamma0). The conditional
  // identification is indexed by the exact first-component property value of
  // each (gamma0, gamma1) sub-slice, not by the predicted gamma0.
  std::vector<JointGroupLevelError> eq2;
  double alpha0_equivalent = 0.0;  // max over eq1 rows
  double alpha1_equivalent = 0.0;  // max over eq2 rows
};

JointCalibrationReport joint_error(const std::vector<double>& f0,
                                   const std::vector<double>& f1,
                                   const ExactDataset& data, const GroupFamily& groups,
                                   const PropertySpec& prop0,
                                   const ConditionalIdFamily& fam);

// K2(G) = sum over grid values gamma with n(gamma, G) > 0 of
//   (sum of V over rounds with p=gamma, context in G)^2 / n(gamma, G),
// recomputed from scratch in round order.
std::vector<GroupError> online_k2(const Transcript& tr, const GroupFamily& groups,
                                  const IdEval& id_fn);

std::string calibration_report_json(const CalibrationReport& r);
std::string calibration_report_csv(const CalibrationReport& r);
std::string joint_report_csv(const JointCalibrationReport& r);

}  // namespace calibra
