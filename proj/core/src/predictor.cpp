#include "calibra/predictor.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "calibra/errors.hpp"
#include "calibra/io.hpp"

namespace calibra {

std::vector<double> make_grid(int m) {
  if (m < 1) throw ConfigError("grid granularity m must be >= 1");
  std::vector<double> grid(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    grid[static_cast<std::size_t>(i)] = static_cast<double>(i + 1) / (m + 1);
  return grid;
}

std::size_t nearest_grid_index(const std::vector<double>& grid, double x) {
  if (grid.empty()) throw ConfigError("empty grid");
  std::size_t best = 0;
  double best_d = std::abs(x - grid[0]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double d = std::abs(x - grid[i]);
    if (d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

std::vector<double> snap_init_values(const std::vector<double>& grid, std::size_t n,
                                     const std::vector<double>& f_init) {
  if (f_init.empty())
    return std::vector<double>(n, grid[nearest_grid_index(grid, 0.5)]);
  if (f_init.size() == 1)
    return std::vector<double>(n, grid[nearest_grid_index(grid, f_init[0])]);
  if (f_init.size() != n)
    throw ConfigError("initial predictor covers " + std::to_string(f_init.size()) +
                      " cells, population has " + std::to_string(n));
  std::vector<double> values(n);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t k = nearest_grid_index(grid, f_init[c]);
    if (std::abs(grid[k] - f_init[c]) > 1e-12)
      throw ConfigError("per-cell initial value " + fmt_double(f_init[c]) +
                        " does not sit on the prediction grid");
    values[c] = grid[k];
  }
  return values;
}

std::vector<double> DiscretizedPredictor::init_for(std::size_t n) const {
  if (constant_init) return std::vector<double>(n, init_value);
  if (init_cells.size() != n)
    throw ConfigError("per-cell init covers " + std::to_string(init_cells.size()) +
                      " cells, population has " + std::to_string(n));
  return init_cells;
}

std::vector<double> replay(const std::vector<double>& init,
                           const std::vector<UpdateRecord>& log,
                           const GroupFamily& groups) {
  std::vector<double> values = init;
  for (const UpdateRecord& rec : log) {
    const Group* g = groups.find(rec.group_id);
    if (!g) throw ConfigError("update log references unknown group " + rec.group_id);
    if (g->mask.size() != values.size())
      throw ConfigError("group mask size does not match the population");
    for (std::size_t c = 0; c < values.size(); ++c)
      if (g->mask[c] && values[c] == rec.gamma_from) values[c] = rec.gamma_to;
  }
  return values;
}

std::vector<double> apply_predictor(const DiscretizedPredictor& p,
                                    const ExactDataset& data,
                                    const GroupFamily& groups) {
  return replay(p.init_for(data.cells.size()), p.log, groups);
}

std::string predictor_json(const DiscretizedPredictor& p) {
  nlohmann::json j;
  j["m"] = p.m;
  j["grid"] = p.grid;
  if (p.constant_init)
    j["init"] = p.init_value;
  else
    j["init"] = p.init_cells;
  j["log"] = nlohmann::json::array();
  for (const UpdateRecord& rec : p.log)
    j["log"].push_back({{"step", rec.step},
                        {"from", rec.gamma_from},
                        {"group", rec.group_id},
                        {"to", rec.gamma_to}});
  return j.dump(2) + "\n";
}

DiscretizedPredictor predictor_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad predictor JSON: ") + e.what());
  }
  DiscretizedPredictor p;
  try {
    p.m = j.at("m").get<int>();
    p.grid = j.at("grid").get<std::vector<double>>();
    const auto& init = j.at("init");
    if (init.is_number()) {
      p.constant_init = true;
      p.init_value = init.get<double>();
    } else {
      p.constant_init = false;
      p.init_cells = init.get<std::vector<double>>();
    }
    for (const auto& rec : j.at("log")) {
      UpdateRecord r;
      r.step = rec.at("step").get<int>();
      r.gamma_from = rec.at("from").get<double>();
      r.group_id = rec.at("group").get<std::string>();
      r.gamma_to = rec.at("to").get<double>();
      p.log.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad predictor JSON: ") + e.what());
  }
  if (p.grid.size() != static_cast<std::size_t>(p.m))
    throw ConfigError("predictor grid size does not match m");
  return p;
}

std::string trace_csv(const ConvergenceTrace& t) {
  std::ostringstream ss;
  ss << "step,gamma,group,mass,expV,gamma_to,phi\n";
  for (const TraceRow& r : t.rows)
    ss << r.step << ',' << fmt_double(r.gamma) << ',' << r.group_id << ','
       << fmt_double(r.mass) << ',' << fmt_double(r.expected_v) << ','
       << fmt_double(r.gamma_to) << ',' << fmt_double(r.phi) << '\n';
  return ss.str();
}

}  // namespace calibra
