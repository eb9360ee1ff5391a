#include "calibra/batch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "calibra/audit.hpp"
#include "calibra/errors.hpp"

namespace calibra {

namespace {

// Per-cell expected id / score at every grid value. Region expectations are
// weight averages of these rows, so the loop never re-touches raw atoms.
struct Tables {
  std::vector<std::vector<double>> vbar;
  std::vector<std::vector<double>> sbar;  // empty when the id has no score
};

Tables build_tables(const IdFunction& id_fn, const ExactDataset& data,
                    const std::vector<double>& grid) {
  Tables t;
  t.vbar.resize(data.cells.size(), std::vector<double>(grid.size(), 0.0));
  if (id_fn.score) t.sbar.resize(data.cells.size(), std::vector<double>(grid.size(), 0.0));
  for (std::size_t c = 0; c < data.cells.size(); ++c) {
    const FiniteDistribution& d = data.cells[c].dist;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      double v = 0.0, s = 0.0;
      for (std::size_t i = 0; i < d.support.size(); ++i) {
        v += d.probs[i] * id_fn.eval(grid[j], d.support[i]);
        if (id_fn.score) s += d.probs[i] * id_fn.score(grid[j], d.support[i]);
      }
      t.vbar[c][j] = v;
      if (id_fn.score) t.sbar[c][j] = s;
    }
  }
  return t;
}

std::vector<std::size_t> snap_init(const std::vector<double>& grid,
                                   const ExactDataset& data,
                                   const std::vector<double>& f_init) {
  const std::size_t n = data.cells.size();
  if (f_init.empty())
    return std::vector<std::size_t>(n, nearest_grid_index(grid, 0.5));
  if (f_init.size() == 1)
    return std::vector<std::size_t>(n, nearest_grid_index(grid, f_init[0]));
  if (f_init.size() != n)
    throw ConfigError("f_init must be empty, one value, or one value per cell");
  std::vector<std::size_t> idx(n);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t j = nearest_grid_index(grid, f_init[c]);
    if (std::abs(f_init[c] - grid[j]) > 1e-12)
      throw ConfigError("per-cell f_init value off the grid: " +
                        std::to_string(f_init[c]));
    idx[c] = j;
  }
  return idx;
}

enum class Select { largest, first };

struct Candidate {
  std::size_t gi = 0, j = 0;
  double mass = 0.0;
  double vbar = 0.0;
  double q = 0.0;  // mass * vbar^2
};

struct LoopOutput {
  std::vector<std::size_t> val;
  std::vector<UpdateRecord> log;
  std::vector<TraceRow> rows;
};

double phi_of(const Tables& t, const ExactDataset& data,
              const std::vector<std::size_t>& val) {
  if (t.sbar.empty()) return 0.0;
  double phi = 0.0;
  for (std::size_t c = 0; c < data.cells.size(); ++c)
    phi += data.cells[c].weight * t.sbar[c][val[c]];
  return phi;
}

LoopOutput run_loop(const IdFunction& id_fn, const ExactDataset& data,
                    const GroupFamily& groups, const std::vector<double>& grid,
                    std::vector<std::size_t> val, double alpha, double budget,
                    Select select, const Tables& tables) {
  const std::size_t m = grid.size();
  const std::size_t ng = groups.groups.size();
  for (const Group& g : groups.groups)
    if (g.mask.size() != data.cells.size())
      throw ConfigError("group mask size does not match the dataset");
  const double threshold = alpha / static_cast<double>(m);
  const double guard = 10.0 * std::max(1.0, std::ceil(budget));

  LoopOutput out;
  std::vector<double> mass(ng * m), num(ng * m);
  std::vector<double> rnum(m);
  int step = 0;
  for (;;) {
    std::fill(mass.begin(), mass.end(), 0.0);
    std::fill(num.begin(), num.end(), 0.0);
    for (std::size_t gi = 0; gi < ng; ++gi) {
      const Group& g = groups.groups[gi];
      for (std::size_t c = 0; c < data.cells.size(); ++c) {
        if (!g.mask[c]) continue;
        const double w = data.cells[c].weight;
        mass[gi * m + val[c]] += w;
        num[gi * m + val[c]] += w * tables.vbar[c][val[c]];
      }
    }
    std::vector<Candidate> viol;
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t gi = 0; gi < ng; ++gi) {
        const double w = mass[gi * m + j];
        if (w <= 0.0) continue;
        const double vb = num[gi * m + j] / w;
        const double q = w * vb * vb;
        if (q >= threshold) viol.push_back({gi, j, w, vb, q});
      }
    }
    if (viol.empty()) break;
    if (select == Select::largest) {
      std::stable_sort(viol.begin(), viol.end(),
                       [](const Candidate& a, const Candidate& b) {
                         if (a.q != b.q) return a.q > b.q;
                         if (a.j != b.j) return a.j < b.j;
                         return a.gi < b.gi;
                       });
    }
    // Candidates are tried in selection order; a correction must strictly
    // shrink |E[V]| on its region, otherwise the next candidate is tried.
    bool applied = false;
    for (const Candidate& cand : viol) {
      const Group& g = groups.groups[cand.gi];
      std::fill(rnum.begin(), rnum.end(), 0.0);
      for (std::size_t c = 0; c < data.cells.size(); ++c) {
        if (!g.mask[c] || val[c] != cand.j) continue;
        const double w = data.cells[c].weight;
        for (std::size_t k = 0; k < m; ++k) rnum[k] += w * tables.vbar[c][k];
      }
      std::size_t best_k = 0;
      double best_abs = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < m; ++k) {
        const double a = std::abs(rnum[k] / cand.mass);
        if (a < best_abs) {
          best_abs = a;
          best_k = k;
        }
      }
      if (!(best_abs < std::abs(cand.vbar))) continue;
      ++step;
      if (static_cast<double>(step) > guard)
        throw NonTerminationError(
            id_fn.name + ": exceeded 10x the theoretical update budget (" +
            std::to_string(step - 1) + " updates, budget " + std::to_string(budget) +
            "); a Lipschitz assertion is likely violated");
      for (std::size_t c = 0; c < data.cells.size(); ++c)
        if (g.mask[c] && val[c] == cand.j) val[c] = best_k;
      out.log.push_back({step, grid[cand.j], g.id, grid[best_k]});
      out.rows.push_back({step, grid[cand.j], g.id, cand.mass, cand.vbar, grid[best_k],
                          phi_of(tables, data, val)});
      applied = true;
      break;
    }
    if (!applied)
      throw NonTerminationError(
          id_fn.name + ": " + std::to_string(viol.size()) +
          " violating regions but no grid value strictly shrinks |E[V]| on any "
          "of them; a monotonicity assertion is likely violated");
  }
  out.val = std::move(val);
  return out;
}

BatchResult package(const ExactDataset& data, const GroupFamily& groups, int m,
                    const std::vector<double>& grid,
                    const std::vector<std::size_t>& init_idx, LoopOutput&& loop,
                    const std::vector<double>& f_init) {
  BatchResult res;
  res.predictor.m = m;
  res.predictor.grid = grid;
  if (f_init.size() == data.cells.size() && data.cells.size() > 1) {
    res.predictor.constant_init = false;
    res.predictor.init_cells.resize(init_idx.size());
    for (std::size_t c = 0; c < init_idx.size(); ++c)
      res.predictor.init_cells[c] = grid[init_idx[c]];
  } else {
    res.predictor.constant_init = true;
    res.predictor.init_value = grid[init_idx.empty() ? 0 : init_idx[0]];
  }
  res.predictor.log = std::move(loop.log);
  res.predictor.current.resize(loop.val.size());
  for (std::size_t c = 0; c < loop.val.size(); ++c)
    res.predictor.current[c] = grid[loop.val[c]];
  res.trace.rows = std::move(loop.rows);
  (void)groups;
  return res;
}

}  // namespace

IdFunction id_function_of(const PropertySpec& prop) {
  IdFunction f;
  f.name = prop.name;
  f.eval = prop.id_eval;
  f.lipschitz_L = prop.lipschitz_L;
  f.score_range_B = prop.score_range_B();
  f.score = prop.score_eval;
  return f;
}

BatchResult batch_multicalibrate(const PropertySpec& prop, const ExactDataset& data,
                                 const GroupFamily& groups, int m,
                                 const std::vector<double>& f_init) {
  data.validate();
  const std::vector<double> grid = make_grid(m);
  const std::vector<std::size_t> init_idx = snap_init(grid, data, f_init);
  const IdFunction id_fn = id_function_of(prop);
  const double L = prop.lipschitz_L;
  const double alpha = 4.0 * L * L / m;

  // Budget from the potential argument: expected score starts at c_init and
  // can never drop below the score of the grid-rounded true predictor.
  const Tables tables = build_tables(id_fn, data, grid);
  double c_init = 0.0, c_opt_bound = 0.0;
  const EvalProperty ev = eval_for(prop);
  for (std::size_t c = 0; c < data.cells.size(); ++c) {
    c_init += data.cells[c].weight * tables.sbar[c][init_idx[c]];
    const std::size_t k = nearest_grid_index(grid, eval_property(ev, data.cells[c].dist));
    c_opt_bound += data.cells[c].weight * tables.sbar[c][k];
  }
  const double budget = std::max(0.0, c_init - c_opt_bound) * m * m / L;

  LoopOutput loop = run_loop(id_fn, data, groups, grid, init_idx, alpha, budget,
                             Select::largest, tables);
  BatchResult res = package(data, groups, m, grid, init_idx, std::move(loop), f_init);
  res.trace.c_init = c_init;
  res.trace.c_opt_bound = c_opt_bound;
  return res;
}

BatchResult batch_multicalibrate_v(const IdFunction& id_fn, const ExactDataset& data,
                                   const GroupFamily& groups, int m,
                                   const std::vector<double>& f_init, double alpha) {
  if (alpha <= 0.0) throw ConfigError("alpha must be positive");
  data.validate();
  const std::vector<double> grid = make_grid(m);
  const std::vector<std::size_t> init_idx = snap_init(grid, data, f_init);
  const double budget = id_fn.score_range_B * m * m / id_fn.lipschitz_L;
  const Tables tables = build_tables(id_fn, data, grid);

  LoopOutput loop = run_loop(id_fn, data, groups, grid, init_idx, alpha, budget,
                             Select::first, tables);
  BatchResult res = package(data, groups, m, grid, init_idx, std::move(loop), f_init);
  if (id_fn.score)
    for (std::size_t c = 0; c < data.cells.size(); ++c)
      res.trace.c_init += data.cells[c].weight * tables.sbar[c][init_idx[c]];
  return res;
}

}  // namespace calibra
