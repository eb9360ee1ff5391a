#pragma once

#include <string>
#include <vector>

namespace calibra {

// Mixed solution of a zero-sum matrix game: the row player minimizes and the
// column player maximizes p^T A q. q doubles as the optimality certificate:
// max_j (p^T A)_j and min_i (A q)_i sandwich the value within 1e-7.
struct StageGameSolution {
  std::vector<double> p;
  std::vector<double> q;
  double value = 0.0;
};

// FNV-1a over the row-major entry bytes, for solver diagnostics.
std::string matrix_hash(const std::vector<std::vector<double>>& a);

// Dense primal simplex with Bland's rule on the shifted unit-payoff LP,
// falling back to capped multiplicative weights. Throws SolverError with the
// matrix hash when neither route certifies the 1e-7 duality gap.
StageGameSolution solve_stage_game(const std::vector<std::vector<double>>& a);

}  // namespace calibra
