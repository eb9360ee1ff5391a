#pragma once

#include <string>
#include <vector>

#include "calibra/dataset.hpp"

namespace calibra {

// The calibration grid [1/m] = {1/(m+1), ..., m/(m+1)}.
std::vector<double> make_grid(int m);

// Index of the grid value nearest to x; ties go to the smaller value.
std::size_t nearest_grid_index(const std::vector<double>& grid, double x);

// Materializes an initial assignment over n cells: empty -> constant grid
// point nearest 1/2; one value -> that constant snapped to the grid; n
// values -> per-cell, each required to sit on the grid.
std::vector<double> snap_init_values(const std::vector<double>& grid, std::size_t n,
                                     const std::vector<double>& f_init);

struct UpdateRecord {
  int step = 0;
  double gamma_from = 0.0;
  std::string group_id;
  double gamma_to = 0.0;
};

// Grid-valued predictor stored as init + ordered update log. `current` is a
// cache: replaying the log over init reproduces it bit-exactly.
struct DiscretizedPredictor {
  int m = 0;
  std::vector<double> grid;
  bool constant_init = true;
  double init_value = 0.0;          // when constant_init
  std::vector<double> init_cells;   // otherwise, one value per training cell
  std::vector<UpdateRecord> log;
  std::vector<double> current;

  // Initial assignment for a population of n cells. Non-constant init only
  // applies to populations of the original size.
  std::vector<double> init_for(std::size_t n) const;
};

// Applies the log to an initial assignment: at each record, cells currently
// valued gamma_from and inside the named group move to gamma_to. Grid values
// compare exactly; every value the solver writes is a grid element.
std::vector<double> replay(const std::vector<double>& init,
                           const std::vector<UpdateRecord>& log,
                           const GroupFamily& groups);

std::vector<double> apply_predictor(const DiscretizedPredictor& p,
                                    const ExactDataset& data,
                                    const GroupFamily& groups);

struct TraceRow {
  int step = 0;
  double gamma = 0.0;     // level that was corrected
  std::string group_id;
  double mass = 0.0;      // joint mass of the corrected region
  double expected_v = 0.0;  // E[V(gamma, Y_region)] before the update
  double gamma_to = 0.0;
  double phi = 0.0;       // expected score after the update; 0 if no score
};

struct ConvergenceTrace {
  double c_init = 0.0;       // expected score of the initial predictor
  double c_opt_bound = 0.0;  // expected score of the grid-rounded true predictor
  std::vector<TraceRow> rows;
};

std::string predictor_json(const DiscretizedPredictor& p);
// `current` is not persisted; callers rebuild it via replay.
DiscretizedPredictor predictor_from_json(const std::string& text);
std::string trace_csv(const ConvergenceTrace& t);

}  // namespace calibra
