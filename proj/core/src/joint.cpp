#include "calibra/joint.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "calibra/errors.hpp"
#include "calibra/io.hpp"

namespace calibra {

namespace {

std::vector<double> occupied_levels(const std::vector<double>& values) {
  std::vector<double> levels = values;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  return levels;
}

// Per-level conditional identification with the level baked in.
IdFunction level_id_function(const ConditionalIdFamily& fam, const JointConfig& cfg,
                             double level) {
  IdFunction f;
  f.name = fam.name + "@" + fmt_double(level);
  f.eval = [&fam, level](double g1, double y) { return fam.cond_id_eval(level, g1, y); };
  f.lipschitz_L = cfg.L1;
  f.score_range_B = cfg.B1;
  if (fam.cond_score_eval)
    f.score = [&fam, level](double g1, double y) {
      return fam.cond_score_eval(level, g1, y);
    };
  return f;
}

void check_masks(const GroupFamily& groups, std::size_t n) {
  for (const Group& g : groups.groups)
    if (g.mask.size() != n)
      throw ConfigError("group mask size does not match the dataset");
}

struct LevelJob {
  double level = 0.0;
  GroupFamily family;
  std::vector<LevelSetGroups::Origin> origin;
  BatchResult result;
};

void run_jobs(std::vector<LevelJob>& jobs, const ConditionalIdFamily& fam,
              const JointConfig& cfg, const ExactDataset& data, int m,
              const std::vector<double>& snapshot, int threads) {
  const int workers =
      std::min<int>(std::max(threads, 1), static_cast<int>(jobs.size()));
  if (workers <= 1) {
    for (LevelJob& job : jobs)
      job.result = batch_multicalibrate_v(level_id_function(fam, cfg, job.level), data,
                                          job.family, m, snapshot, cfg.alpha1);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs.size());
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        jobs[i].result =
            batch_multicalibrate_v(level_id_function(fam, cfg, jobs[i].level), data,
                                   jobs[i].family, m, snapshot, cfg.alpha1);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

JointConfig make_joint_config(const PropertySpec& prop0, const ConditionalIdFamily& fam,
                              int m) {
  if (m < 1) throw ConfigError("grid granularity m must be >= 1");
  if (!prop0.anti_lipschitz_La)
    throw ConfigError(prop0.name +
                      " carries no anti-Lipschitz constant; joint calibration "
                      "needs one for the second-component guarantee");
  JointConfig c;
  c.m = m;
  c.L0 = prop0.lipschitz_L;
  c.La = *prop0.anti_lipschitz_La;
  c.Lc = fam.cross_lipschitz_Lc;
  c.L1 = fam.level_lipschitz_L1;
  c.B0 = prop0.score_range_B();
  c.B1 = fam.cond_score_range_B1;
  if (c.L0 <= 0 || c.La <= 0 || c.Lc <= 0 || c.L1 <= 0 || c.B0 <= 0 || c.B1 <= 0)
    throw ConfigError("joint calibration constants must be positive");
  c.alpha0 = 4.0 * c.L0 * c.L0 / m;
  c.alpha1 = 4.0 * c.L1 * c.L1 / m;
  const double head = c.L0 * c.La * c.Lc;
  const double head_alt = c.L0 * c.Lc / c.La;
  c.alpha1_star = 8.0 * (head * head + c.L1 * c.L1) / m;
  c.alpha1_star_alt = 8.0 * (head_alt * head_alt + c.L1 * c.L1) / m;
  c.budget0 = c.B0 * m * m / c.L0;
  c.budget1 = c.B1 * m * m / c.L1;
  c.budget = c.budget0 * c.budget1;
  return c;
}

LevelSetGroups build_level_set_groups(const GroupFamily& base,
                                      const std::vector<double>& component_values) {
  LevelSetGroups out;
  check_masks(base, component_values.size());
  const std::vector<double> levels = occupied_levels(component_values);
  for (std::size_t bi = 0; bi < base.groups.size(); ++bi) {
    const Group& g = base.groups[bi];
    for (double level : levels) {
      Group slice;
      slice.id = g.id + "×" + fmt_double(level);
      slice.mask.assign(component_values.size(), 0);
      bool any = false;
      for (std::size_t c = 0; c < component_values.size(); ++c)
        if (g.mask[c] && component_values[c] == level) {
          slice.mask[c] = 1;
          any = true;
        }
      if (!any) continue;
      out.family.groups.push_back(std::move(slice));
      out.origin.push_back({bi, level});
    }
  }
  return out;
}

JointResult joint_multicalibrate(const PropertySpec& prop0,
                                 const ConditionalIdFamily& fam,
                                 const ExactDataset& data, const GroupFamily& groups,
                                 int m, const std::vector<double>& f0_init,
                                 const std::vector<double>& f1_init, int threads) {
  data.validate();
  const std::vector<double> grid = make_grid(m);
  const std::size_t n = data.cells.size();
  check_masks(groups, n);

  JointResult res;
  res.config = make_joint_config(prop0, fam, m);
  const JointConfig& cfg = res.config;

  std::vector<double> v0 = snap_init_values(grid, n, f0_init);
  std::vector<double> v1 = snap_init_values(grid, n, f1_init);
  const std::vector<double> init0 = v0;
  const std::vector<double> init1 = v1;

  std::vector<std::vector<double>> vbar0(n, std::vector<double>(grid.size(), 0.0));
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t j = 0; j < grid.size(); ++j)
      vbar0[c][j] = expected_id(prop0, grid[j], data.cells[c].dist);

  const double threshold = cfg.alpha0 / m;
  const double guard = 10.0 * std::max(1.0, std::ceil(cfg.budget));
  const IdFunction id0 = id_function_of(prop0);
  int step = 0;

  auto guard_check = [&](int candidate_step) {
    if (static_cast<double>(candidate_step) > guard)
      throw NonTerminationError(
          "joint " + prop0.name + "/" + fam.name +
          ": exceeded 10x the theoretical update budget (" + std::to_string(guard) +
          "); a Lipschitz assertion is likely violated");
  };

  for (;;) {
    OuterIterationStats st;
    bool found = false;
    for (std::size_t i0 = 0; i0 < grid.size() && !found; ++i0)
      for (std::size_t i1 = 0; i1 < grid.size() && !found; ++i1)
        for (std::size_t gi = 0; gi < groups.groups.size() && !found; ++gi) {
          const Group& g = groups.groups[gi];
          double w = 0.0, num = 0.0;
          for (std::size_t c = 0; c < n; ++c) {
            if (!g.mask[c] || v0[c] != grid[i0] || v1[c] != grid[i1]) continue;
            w += data.cells[c].weight;
            num += data.cells[c].weight * vbar0[c][i0];
          }
          if (w <= 0.0) continue;
          const double vb = num / w;
          if (w * vb * vb >= threshold) {
            found = true;
            st.trigger_gamma0 = grid[i0];
            st.trigger_gamma1 = grid[i1];
            st.trigger_group = g.id;
            st.trigger_weight = w;
            st.trigger_expv0 = vb;
          }
        }
    if (!found) break;
    st.outer = static_cast<int>(res.outer.size()) + 1;

    // First component against the f1-sliced family. The trigger region is a
    // violating pair of that family, so at least one update must land.
    LevelSetGroups sliced = build_level_set_groups(groups, v1);
    BatchResult r0 = batch_multicalibrate_v(id0, data, sliced.family, m, v0, cfg.alpha0);
    if (r0.predictor.log.empty())
      throw NonTerminationError(
          "joint " + prop0.name + "/" + fam.name +
          ": a region violates the trigger threshold but the first-component "
          "recalibration made no update");
    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < sliced.family.groups.size(); ++i)
      by_id[sliced.family.groups[i].id] = i;
    for (const UpdateRecord& rec : r0.predictor.log) {
      guard_check(step + 1);
      ++step;
      const LevelSetGroups::Origin& o = sliced.origin[by_id.at(rec.group_id)];
      res.predictor.f0.log.push_back({step, rec.gamma_from, rec.group_id, rec.gamma_to});
      res.predictor.interleave.push_back({step, 0, rec.gamma_from, rec.gamma_to,
                                          groups.groups[o.base].id, o.level});
    }
    st.f0_updates = static_cast<int>(r0.predictor.log.size());
    v0 = r0.predictor.current;

    // Second component, one call per occupied f0 level on its disjoint slice.
    LevelSetGroups sliced1 = build_level_set_groups(groups, v0);
    std::vector<LevelJob> jobs;
    for (double level : occupied_levels(v0)) {
      LevelJob job;
      job.level = level;
      for (std::size_t i = 0; i < sliced1.family.groups.size(); ++i)
        if (sliced1.origin[i].level == level) {
          job.family.groups.push_back(sliced1.family.groups[i]);
          job.origin.push_back(sliced1.origin[i]);
        }
      if (!job.family.groups.empty()) jobs.push_back(std::move(job));
    }
    run_jobs(jobs, fam, cfg, data, m, v1, threads);
    for (const LevelJob& job : jobs) {
      for (const UpdateRecord& rec : job.result.predictor.log) {
        guard_check(step + 1);
        ++step;
        std::size_t oi = 0;
        while (job.family.groups[oi].id != rec.group_id) ++oi;
        res.predictor.f1.log.push_back({step, rec.gamma_from, rec.group_id,
                                        rec.gamma_to});
        res.predictor.interleave.push_back({step, 1, rec.gamma_from, rec.gamma_to,
                                            groups.groups[job.origin[oi].base].id,
                                            job.level});
        ++st.f1_updates;
      }
      for (std::size_t c = 0; c < n; ++c)
        if (v0[c] == job.level) v1[c] = job.result.predictor.current[c];
    }
    res.outer.push_back(st);
  }

  auto package = [&](DiscretizedPredictor& p, const std::vector<double>& init,
                     const std::vector<double>& current,
                     const std::vector<double>& f_init) {
    p.m = m;
    p.grid = grid;
    if (f_init.size() == n && n > 1) {
      p.constant_init = false;
      p.init_cells = init;
    } else {
      p.constant_init = true;
      p.init_value = init[0];
    }
    p.current = current;
  };
  package(res.predictor.f0, init0, v0, f0_init);
  package(res.predictor.f1, init1, v1, f1_init);
  res.f0_updates_total = static_cast<int>(res.predictor.f0.log.size());
  res.f1_updates_total = static_cast<int>(res.predictor.f1.log.size());
  return res;
}

std::pair<std::vector<double>, std::vector<double>> joint_replay(
    const JointPredictor& p, const ExactDataset& data, const GroupFamily& base_groups) {
  const std::size_t n = data.cells.size();
  check_masks(base_groups, n);
  std::vector<double> v0 = p.f0.init_for(n);
  std::vector<double> v1 = p.f1.init_for(n);
  for (const InterleaveRecord& rec : p.interleave) {
    const Group* g = base_groups.find(rec.base_group);
    if (!g) throw ConfigError("interleave references unknown group " + rec.base_group);
    if (rec.component == 0) {
      for (std::size_t c = 0; c < n; ++c)
        if (g->mask[c] && v1[c] == rec.cond_level && v0[c] == rec.gamma_from)
          v0[c] = rec.gamma_to;
    } else if (rec.component == 1) {
      for (std::size_t c = 0; c < n; ++c)
        if (g->mask[c] && v0[c] == rec.cond_level && v1[c] == rec.gamma_from)
          v1[c] = rec.gamma_to;
    } else {
      throw ConfigError("interleave component must be 0 or 1");
    }
  }
  return {std::move(v0), std::move(v1)};
}

std::string joint_predictor_json(const JointPredictor& p) {
  nlohmann::json j;
  j["m"] = p.f0.m;
  j["f0"] = nlohmann::json::parse(predictor_json(p.f0));
  j["f1"] = nlohmann::json::parse(predictor_json(p.f1));
  j["interleave"] = nlohmann::json::array();
  for (const InterleaveRecord& rec : p.interleave)
    j["interleave"].push_back({{"step", rec.step},
                               {"component", rec.component},
                               {"from", rec.gamma_from},
                               {"to", rec.gamma_to},
                               {"group", rec.base_group},
                               {"level", rec.cond_level}});
  return j.dump(2) + "\n";
}

JointPredictor joint_predictor_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad joint predictor JSON: ") + e.what());
  }
  JointPredictor p;
  try {
    const int m = j.at("m").get<int>();
    p.f0 = predictor_from_json(j.at("f0").dump());
    p.f1 = predictor_from_json(j.at("f1").dump());
    if (p.f0.m != m || p.f1.m != m)
      throw ConfigError("joint predictor components disagree on grid granularity");
    for (const auto& rec : j.at("interleave")) {
      InterleaveRecord r;
      r.step = rec.at("step").get<int>();
      r.component = rec.at("component").get<int>();
      r.gamma_from = rec.at("from").get<double>();
      r.gamma_to = rec.at("to").get<double>();
      r.base_group = rec.at("group").get<std::string>();
      r.cond_level = rec.at("level").get<double>();
      p.interleave.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad joint predictor JSON: ") + e.what());
  }
  return p;
}

std::string joint_trace_csv(const std::vector<OuterIterationStats>& outer) {
  std::ostringstream ss;
  ss << "outer,gamma0,gamma1,group,weight,expV0,f0_updates,f1_updates\n";
  for (const OuterIterationStats& st : outer)
    ss << st.outer << ',' << fmt_double(st.trigger_gamma0) << ','
       << fmt_double(st.trigger_gamma1) << ',' << st.trigger_group << ','
       << fmt_double(st.trigger_weight) << ',' << fmt_double(st.trigger_expv0) << ','
       << st.f0_updates << ',' << st.f1_updates << '\n';
  return ss.str();
}

}  // namespace calibra
