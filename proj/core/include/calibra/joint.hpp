#pragma once

#include <string>
#include <utility>
#include <vector>

#include "calibra/batch.hpp"
#include "calibra/dataset.hpp"
#include "calibra/predictor.hpp"
#include "calibra/property.hpp"

namespace calibra {

// Thresholds and budgets for one joint run, derived from the caller-asserted
// regularity constants of the pair.
struct JointConfig {
  int m = 0;
  double L0 = 1.0;  // Lipschitz constant of E[V0(., Y)]
  double La = 1.0;  // anti-Lipschitz constant of the first component
  double Lc = 1.0;  // Lipschitz constant of V1_.(g1, y) in the level g0
  double L1 = 1.0;  // Lipschitz constant of E[V1_g0(., Y)]
  double B0 = 1.0;  // first-component score range
  double B1 = 1.0;  // conditional score range
  double alpha0 = 0.0;       // 4 L0^2 / m, outer trigger threshold
  double alpha1 = 0.0;       // 4 L1^2 / m, threshold of every inner f1 call
  double alpha1_star = 0.0;  // 8((L0 La Lc)^2 + L1^2)/m, second-component guarantee
  // 8((L0 Lc / La)^2 + L1^2)/m. The guarantee's anti-Lipschitz factor admits
  // two placements; both are reported and audits accept the larger.
  double alpha1_star_alt = 0.0;
  double budget = 0.0;   // B0 B1 m^4 / (L0 L1), cap on total updates
  double budget0 = 0.0;  // B0 m^2 / L0, cap on f0 updates across the whole run
  double budget1 = 0.0;  // B1 m^2 / L1, cap on f1 updates per outer iteration
};

// Requires prop0.anti_lipschitz_La; all constants must be positive.
JointConfig make_joint_config(const PropertySpec& prop0, const ConditionalIdFamily& fam,
                              int m);

// One predictor update, attributed to the component it touched. Masks are
// resolved at replay time: component 0 updates apply inside base_group
// intersected with {f1 == cond_level}, component 1 updates inside base_group
// intersected with {f0 == cond_level}.
struct InterleaveRecord {
  int step = 0;       // global update counter across both components
  int component = 0;  // 0 or 1
  double gamma_from = 0.0;
  double gamma_to = 0.0;
  std::string base_group;
  double cond_level = 0.0;
};

// Both components share the grid. The per-component logs keep the composite
// group ids of the drifting families they were produced against and are
// informational; joint_replay consumes the interleave instead.
struct JointPredictor {
  DiscretizedPredictor f0, f1;
  std::vector<InterleaveRecord> interleave;
};

struct OuterIterationStats {
  int outer = 0;  // 1-based
  double trigger_gamma0 = 0.0;
  double trigger_gamma1 = 0.0;
  std::string trigger_group;  // base group id
  double trigger_weight = 0.0;
  double trigger_expv0 = 0.0;
  int f0_updates = 0;
  int f1_updates = 0;
};

struct JointResult {
  JointPredictor predictor;
  JointConfig config;
  std::vector<OuterIterationStats> outer;
  int f0_updates_total = 0;
  int f1_updates_total = 0;
};

// Intersections of the base groups with the level sets of one component's
// value assignment. Base-group-major, levels ascending, empty intersections
// dropped; ids composed as `group×level`. origin[i] maps family.groups[i]
// back to its base group index and conditioning level.
struct LevelSetGroups {
  struct Origin {
    std::size_t base = 0;
    double level = 0.0;
  };
  GroupFamily family;
  std::vector<Origin> origin;
};

LevelSetGroups build_level_set_groups(const GroupFamily& base,
                                      const std::vector<double>& component_values);

// Alternates first-component recalibration against the f1-sliced group
// family with per-level recalibration of f1 on the f0 level sets, until no
// (gamma0, gamma1, G) region carries weighted squared first-component
// residual at or above alpha0/m. The scan is gamma0 ascending, then gamma1
// ascending, then group order. threads > 1 runs the per-level f1 calls of
// each iteration concurrently; level sets are disjoint and logs merge in
// grid order, so the output is identical to the sequential mode.
JointResult joint_multicalibrate(const PropertySpec& prop0,
                                 const ConditionalIdFamily& fam,
                                 const ExactDataset& data, const GroupFamily& groups,
                                 int m, const std::vector<double>& f0_init = {},
                                 const std::vector<double>& f1_init = {},
                                 int threads = 1);

// (f0 values, f1 values) reconstructed from the interleave against the base
// family, resolving each record's mask against the evolving assignments.
std::pair<std::vector<double>, std::vector<double>> joint_replay(
    const JointPredictor& p, const ExactDataset& data, const GroupFamily& base_groups);

std::string joint_predictor_json(const JointPredictor& p);
JointPredictor joint_predictor_from_json(const std::string& text);
std::string joint_trace_csv(const std::vector<OuterIterationStats>& outer);

}  // namespace calibra
