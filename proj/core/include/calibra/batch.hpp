#pragma once

#include <functional>
#include <string>
#include <vector>

#include "calibra/dataset.hpp"
#include "calibra/predictor.hpp"
#include "calibra/property.hpp"

namespace calibra {

// Identification function handed to the level-set recalibration loop together
// with the constants its stopping threshold and budget consume. `score` is an
// antiderivative of `eval` in gamma; when present the trace carries the
// potential, otherwise the phi column is 0.
struct IdFunction {
  std::string name;
  std::function<double(double, double)> eval;
  double lipschitz_L = 1.0;
  double score_range_B = 1.0;
  std::function<double(double, double)> score;
};

IdFunction id_function_of(const PropertySpec& prop);

struct BatchResult {
  DiscretizedPredictor predictor;
  ConvergenceTrace trace;
};

// Level-set correction loop at alpha = 4L^2/m. A (gamma, G) pair violates
// when Pr[f=gamma, x in G] * E[V(gamma, Y_region)]^2 >= alpha/m; the pair
// with the largest violation is corrected (ties: grid index, then group
// order) by moving the region to the grid value minimizing |E[V]| (ties to
// the smaller value). Halts when no pair violates, which puts every group's
// summed error below alpha / mass(G).
//
// f_init: empty -> constant grid point nearest 1/2; one value -> that
// constant snapped to the grid; one value per cell -> per-cell assignment,
// each value required to sit on the grid.
BatchResult batch_multicalibrate(const PropertySpec& prop, const ExactDataset& data,
                                 const GroupFamily& groups, int m,
                                 const std::vector<double>& f_init = {});

// Same loop at caller-supplied alpha, correcting the lexicographically first
// violating pair (grid index ascending, then group order) instead of the
// largest. Budget keys to score_range_B * m^2 / L.
BatchResult batch_multicalibrate_v(const IdFunction& id_fn, const ExactDataset& data,
                                   const GroupFamily& groups, int m,
                                   const std::vector<double>& f_init, double alpha);

}  // namespace calibra
