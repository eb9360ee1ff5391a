#include "commands.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <vector>

#include <json.hpp>

#include "calibra/audit.hpp"
#include "calibra/batch.hpp"
#include "calibra/dataset.hpp"
#include "calibra/errors.hpp"
#include "calibra/io.hpp"
#include "calibra/joint.hpp"
#include "calibra/online.hpp"
#include "calibra/predictor.hpp"
#include "calibra/property.hpp"
#include "run_config.hpp"

namespace calibra::cli {

namespace {

constexpr double kAuditTol = 1e-9;

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void ensure_out_dir(const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + out_dir);
}

std::vector<double> parse_double_array(const nlohmann::json& arr,
                                       const std::string& where) {
  if (!arr.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<double> out;
  for (const auto& v : arr) {
    if (!v.is_number()) throw ConfigError(where + ": expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

GroupFamily groups_from(const nlohmann::json& cfg, const ExactDataset& data) {
  std::vector<GroupPredicate> preds;
  if (cfg.contains("groups")) preds = parse_group_predicates(cfg.at("groups"));
  return groups_from_config(preds, data);
}

void write_batch_reports(const std::string& out_dir, const CalibrationReport& rep_v,
                         const CalibrationReport& rep_g) {
  atomic_write_file(join(out_dir, "report_v.json"), calibration_report_json(rep_v));
  atomic_write_file(join(out_dir, "report_v.csv"), calibration_report_csv(rep_v));
  atomic_write_file(join(out_dir, "report_gamma.json"), calibration_report_json(rep_g));
  atomic_write_file(join(out_dir, "report_gamma.csv"), calibration_report_csv(rep_g));
}

nlohmann::json joint_rows_json(const std::vector<JointGroupLevelError>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"group_id", r.group_id},
                   {"level", r.level},
                   {"mass", r.mass},
                   {"error", r.error},
                   {"alpha_equivalent", r.alpha_equivalent}});
  return arr;
}

std::string joint_report_json_text(const JointCalibrationReport& rep,
                                   const JointConfig& cfg, int f0_updates,
                                   int f1_updates, std::optional<int> outer) {
  nlohmann::json j;
  j["m"] = cfg.m;
  j["constants"] = {{"L0", cfg.L0}, {"La", cfg.La}, {"Lc", cfg.Lc},
                    {"L1", cfg.L1}, {"B0", cfg.B0}, {"B1", cfg.B1}};
  j["alpha0"] = cfg.alpha0;
  j["alpha1"] = cfg.alpha1;
  j["alpha1_star"] = cfg.alpha1_star;
  j["alpha1_star_alt"] = cfg.alpha1_star_alt;
  j["budget"] = cfg.budget;
  j["budget0"] = cfg.budget0;
  j["budget1"] = cfg.budget1;
  j["f0_updates"] = f0_updates;
  j["f1_updates"] = f1_updates;
  if (outer) j["outer_iterations"] = *outer;
  j["alpha0_equivalent"] = rep.alpha0_equivalent;
  j["alpha1_equivalent"] = rep.alpha1_equivalent;
  j["eq1"] = joint_rows_json(rep.eq1);
  j["eq2"] = joint_rows_json(rep.eq2);
  return j.dump(2) + "\n";
}

struct JointAuditOutcome {
  bool ok = false;
  double alpha1_allowed = 0.0;
};

JointAuditOutcome joint_audit(const JointCalibrationReport& rep,
                              const JointConfig& cfg) {
  JointAuditOutcome o;
  o.alpha1_allowed = std::max(cfg.alpha1_star, cfg.alpha1_star_alt);
  o.ok = rep.alpha0_equivalent <= cfg.alpha0 + kAuditTol &&
         rep.alpha1_equivalent <= o.alpha1_allowed + kAuditTol;
  return o;
}

}  // namespace

int cmd_calibrate_batch(const std::string& config_path, const std::string& out_dir,
                        bool quiet) {
  const nlohmann::json cfg = load_config(config_path);
  require_keys(cfg, {"schema_version", "dataset", "property", "m"},
               {"groups", "f_init"}, "config");
  const ExactDataset data = load_dataset(cfg.at("dataset"), dirname_of(config_path));
  const GroupFamily groups = groups_from(cfg, data);
  const PropertySpec prop = parse_property(get_string(cfg, "property", "config"));
  const int m = get_int(cfg, "m", "config");
  if (m < 1) throw ConfigError("config.m: must be positive");
  std::vector<double> f_init;
  if (cfg.contains("f_init"))
    f_init = parse_double_array(cfg.at("f_init"), "config.f_init");

  const BatchResult res = batch_multicalibrate(prop, data, groups, m, f_init);

  ensure_out_dir(out_dir);
  atomic_write_file(join(out_dir, "predictor.json"), predictor_json(res.predictor));
  atomic_write_file(join(out_dir, "trace.csv"), trace_csv(res.trace));
  const CalibrationReport rep_v =
      batch_error_v(res.predictor.current, data, groups, prop.id_eval);
  const CalibrationReport rep_g =
      batch_error_gamma(res.predictor.current, data, groups, eval_for(prop));
  write_batch_reports(out_dir, rep_v, rep_g);

  const double alpha = 4.0 * prop.lipschitz_L * prop.lipschitz_L / m;
  const bool ok = rep_v.max_alpha_equivalent <= alpha + kAuditTol;
  if (!quiet) {
    std::cout << "calibrate-batch: " << data.cells.size() << " cells, "
              << groups.groups.size() << " groups, property " << prop.name
              << ", m=" << m << "\n"
              << "  updates " << res.predictor.log.size() << ", max alpha-equivalent "
              << fmt_double(rep_v.max_alpha_equivalent) << " vs alpha "
              << fmt_double(alpha) << "\n"
              << "  wrote predictor.json trace.csv report_v.{json,csv} "
                 "report_gamma.{json,csv} to "
              << out_dir << "\n"
              << "  audit: " << (ok ? "pass" : "FAIL") << "\n";
  }
  if (!ok)
    std::cerr << "audit failure: max alpha-equivalent "
              << fmt_double(rep_v.max_alpha_equivalent) << " exceeds "
              << fmt_double(alpha) << "\n";
  return ok ? 0 : 2;
}

int cmd_calibrate_joint(const std::string& config_path, const std::string& out_dir,
                        bool quiet) {
  const nlohmann::json cfg = load_config(config_path);
  require_keys(cfg, {"schema_version", "dataset", "pair", "m"},
               {"groups", "f0_init", "f1_init"}, "config");
  const ExactDataset data = load_dataset(cfg.at("dataset"), dirname_of(config_path));
  const GroupFamily groups = groups_from(cfg, data);
  const auto [prop0, fam] = parse_pair_property(get_string(cfg, "pair", "config"));
  const int m = get_int(cfg, "m", "config");
  if (m < 1) throw ConfigError("config.m: must be positive");
  std::vector<double> f0_init, f1_init;
  if (cfg.contains("f0_init"))
    f0_init = parse_double_array(cfg.at("f0_init"), "config.f0_init");
  if (cfg.contains("f1_init"))
    f1_init = parse_double_array(cfg.at("f1_init"), "config.f1_init");

  const JointResult res = joint_multicalibrate(prop0, fam, data, groups, m, f0_init,
                                               f1_init, env_threads());

  ensure_out_dir(out_dir);
  atomic_write_file(join(out_dir, "joint_predictor.json"),
                    joint_predictor_json(res.predictor));
  atomic_write_file(join(out_dir, "joint_trace.csv"), joint_trace_csv(res.outer));
  const JointCalibrationReport rep =
      joint_error(res.predictor.f0.current, res.predictor.f1.current, data, groups,
                  prop0, fam);
  atomic_write_file(join(out_dir, "joint_report.json"),
                    joint_report_json_text(rep, res.config, res.f0_updates_total,
                                           res.f1_updates_total,
                                           static_cast<int>(res.outer.size())));
  atomic_write_file(join(out_dir, "joint_report.csv"), joint_report_csv(rep));

  const JointAuditOutcome audit = joint_audit(rep, res.config);
  if (!quiet) {
    std::cout << "calibrate-joint: " << data.cells.size() << " cells, "
              << groups.groups.size() << " groups, pair " << fam.name << ", m=" << m
              << "\n"
              << "  outer iterations " << res.outer.size() << ", f0 updates "
              << res.f0_updates_total << ", f1 updates " << res.f1_updates_total
              << " (budget " << fmt_double(res.config.budget) << ")\n"
              << "  eq1 max " << fmt_double(rep.alpha0_equivalent) << " vs alpha0 "
              << fmt_double(res.config.alpha0) << "; eq2 max "
              << fmt_double(rep.alpha1_equivalent) << " vs alpha1* "
              << fmt_double(audit.alpha1_allowed) << "\n"
              << "  wrote joint_predictor.json joint_trace.csv "
                 "joint_report.{json,csv} to "
              << out_dir << "\n"
              << "  audit: " << (audit.ok ? "pass" : "FAIL") << "\n";
  }
  if (!audit.ok)
    std::cerr << "audit failure: eq1 " << fmt_double(rep.alpha0_equivalent) << " vs "
              << fmt_double(res.config.alpha0) << ", eq2 "
              << fmt_double(rep.alpha1_equivalent) << " vs "
              << fmt_double(audit.alpha1_allowed) << "\n";
  return audit.ok ? 0 : 2;
}

int cmd_simulate_online(const std::string& config_path, const std::string& out_dir,
                        bool quiet) {
  const nlohmann::json cfg = load_config(config_path);
  require_keys(cfg,
               {"schema_version", "property", "m", "T", "contexts", "groups",
                "adversary", "seeds"},
               {"label_points"}, "config");
  const PropertySpec prop = parse_property(get_string(cfg, "property", "config"));
  OnlineConfig ocfg;
  ocfg.m = get_int(cfg, "m", "config");
  ocfg.T = get_int(cfg, "T", "config");
  ocfg.C = prop.id_bound_C;
  ocfg.label_points =
      cfg.contains("label_points") ? get_int(cfg, "label_points", "config") : 101;
  if (ocfg.m < 1) throw ConfigError("config.m: must be positive");
  if (ocfg.T < 1) throw ConfigError("config.T: must be positive");
  if (ocfg.label_points < 2)
    throw ConfigError("config.label_points: need at least 2 grid points");

  const auto& ctx = cfg.at("contexts");
  if (!ctx.is_array() || ctx.empty())
    throw ConfigError("config.contexts: expected a non-empty array");
  std::vector<std::string> context_ids;
  for (const auto& c : ctx) {
    if (!c.is_string() || c.get<std::string>().empty())
      throw ConfigError("config.contexts: expected non-empty strings");
    context_ids.push_back(c.get<std::string>());
  }
  if (std::set<std::string>(context_ids.begin(), context_ids.end()).size() !=
      context_ids.size())
    throw ConfigError("config.contexts: duplicate context id");
  auto context_index = [&](const std::string& name) {
    const auto it = std::find(context_ids.begin(), context_ids.end(), name);
    if (it == context_ids.end())
      throw ConfigError("config.groups: unknown context '" + name + "'");
    return static_cast<std::size_t>(it - context_ids.begin());
  };

  GroupFamily gf;
  gf.groups.push_back(
      {"all", std::vector<std::uint8_t>(context_ids.size(), std::uint8_t{1})});
  const auto& garr = cfg.at("groups");
  if (!garr.is_array()) throw ConfigError("config.groups: expected an array");
  for (const auto& g : garr) {
    require_keys(g, {"id", "members"}, {}, "groups[]");
    Group grp;
    grp.id = get_string(g, "id", "groups[]");
    if (grp.id == "all")
      throw ConfigError("config.groups: id 'all' is reserved for the full universe");
    if (gf.find(grp.id)) throw ConfigError("config.groups: duplicate id " + grp.id);
    grp.mask.assign(context_ids.size(), 0);
    const auto& members = g.at("members");
    if (members.is_string() && members.get<std::string>() == "*") {
      grp.mask.assign(context_ids.size(), 1);
    } else if (members.is_array() && !members.empty()) {
      for (const auto& mref : members) {
        if (!mref.is_string())
          throw ConfigError("config.groups: members must be context ids or \"*\"");
        grp.mask[context_index(mref.get<std::string>())] = 1;
      }
    } else {
      throw ConfigError("config.groups: members must be context ids or \"*\"");
    }
    gf.groups.push_back(std::move(grp));
  }

  const auto& adv_spec = cfg.at("adversary");
  const std::string kind = get_string(adv_spec, "kind", "adversary");
  Adversary adv;
  const int nc = static_cast<int>(context_ids.size());
  if (kind == "iid_window") {
    require_keys(adv_spec, {"kind", "lo", "hi", "L"}, {}, "adversary");
    adv = iid_window_adversary(get_double(adv_spec, "lo", "adversary"),
                               get_double(adv_spec, "hi", "adversary"), nc,
                               ocfg.label_points, get_double(adv_spec, "L", "adversary"));
  } else if (kind == "two_phase_window") {
    require_keys(adv_spec, {"kind", "lo1", "hi1", "lo2", "hi2", "switch_t", "L"}, {},
                 "adversary");
    adv = two_phase_window_adversary(get_double(adv_spec, "lo1", "adversary"),
                                     get_double(adv_spec, "hi1", "adversary"),
                                     get_double(adv_spec, "lo2", "adversary"),
                                     get_double(adv_spec, "hi2", "adversary"),
                                     get_int(adv_spec, "switch_t", "adversary"), nc,
                                     ocfg.label_points,
                                     get_double(adv_spec, "L", "adversary"));
  } else {
    throw ConfigError("adversary.kind: expected iid_window or two_phase_window");
  }

  const auto& sarr = cfg.at("seeds");
  if (!sarr.is_array() || sarr.empty())
    throw ConfigError("config.seeds: expected a non-empty array");
  std::vector<std::uint64_t> seeds;
  for (const auto& s : sarr) {
    if (!s.is_number_integer() || s.get<long long>() < 0)
      throw ConfigError("config.seeds: expected non-negative integers");
    seeds.push_back(s.get<std::uint64_t>());
  }
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("config.seeds: duplicate seed");

  const MultiSeedResult msr = run_online_seeds(prop.id_eval, ocfg, gf, context_ids,
                                               adv, seeds, env_threads());

  ensure_out_dir(out_dir);
  nlohmann::json jrep;
  jrep["m"] = ocfg.m;
  jrep["T"] = ocfg.T;
  jrep["C"] = ocfg.C;
  jrep["L"] = adv.avg_lipschitz_L;
  jrep["label_points"] = ocfg.label_points;
  jrep["adversary"] = adv.name;
  jrep["coordinates"] = gf.groups.size() * static_cast<std::size_t>(ocfg.m);
  jrep["bound"] = msr.bound;
  jrep["mean_max_alpha"] = msr.mean_max_alpha;
  jrep["seeds"] = seeds;
  nlohmann::json per_seed = nlohmann::json::array();
  std::string table = "seed,group_id,k2,alpha_equivalent\n";
  for (std::size_t i = 0; i < msr.runs.size(); ++i) {
    const OnlineResult& run = msr.runs[i];
    atomic_write_file(
        join(out_dir, "transcript_seed" + std::to_string(seeds[i]) + ".csv"),
        transcript_csv(run.transcript, gf));
    nlohmann::json k2 = nlohmann::json::array();
    for (const auto& ge : run.k2) {
      k2.push_back({{"group_id", ge.group_id},
                    {"k2", ge.error},
                    {"alpha_equivalent", ge.alpha_equivalent}});
      table += std::to_string(seeds[i]) + "," + ge.group_id + "," +
               fmt_double(ge.error) + "," + fmt_double(ge.alpha_equivalent) + "\n";
    }
    per_seed.push_back(
        {{"seed", seeds[i]}, {"max_alpha", run.max_alpha}, {"k2", std::move(k2)}});
  }
  jrep["per_seed"] = std::move(per_seed);
  atomic_write_file(join(out_dir, "online_report.json"), jrep.dump(2) + "\n");
  atomic_write_file(join(out_dir, "online_table.csv"), table);

  const bool ok = msr.mean_max_alpha <= msr.bound + kAuditTol;
  if (!quiet) {
    std::cout << "simulate-online: " << context_ids.size() << " contexts, "
              << gf.groups.size() << " groups, m=" << ocfg.m << ", T=" << ocfg.T
              << ", " << seeds.size() << " seeds, adversary " << adv.name << "\n"
              << "  mean max-group alpha " << fmt_double(msr.mean_max_alpha)
              << " vs bound " << fmt_double(msr.bound) << "\n"
              << "  wrote online_report.json online_table.csv transcript_seed*.csv to "
              << out_dir << "\n"
              << "  audit: " << (ok ? "pass" : "FAIL") << "\n";
  }
  if (!ok)
    std::cerr << "audit failure: mean max-group alpha "
              << fmt_double(msr.mean_max_alpha) << " exceeds bound "
              << fmt_double(msr.bound) << "\n";
  return ok ? 0 : 2;
}

int cmd_audit(const std::string& config_path, const std::string& out_dir, bool quiet) {
  const nlohmann::json cfg = load_config(config_path);
  require_keys(cfg, {"schema_version", "dataset"},
               {"groups", "property", "pair", "predictor", "joint_predictor", "m"},
               "config");
  const std::string base = dirname_of(config_path);
  const ExactDataset data = load_dataset(cfg.at("dataset"), base);
  const GroupFamily groups = groups_from(cfg, data);
  const bool batch_mode = cfg.contains("predictor");
  const bool joint_mode = cfg.contains("joint_predictor");
  if (batch_mode == joint_mode)
    throw ConfigError("config: expected exactly one of 'predictor', 'joint_predictor'");

  ensure_out_dir(out_dir);
  if (batch_mode) {
    if (!cfg.contains("property"))
      throw ConfigError("config: 'predictor' requires 'property'");
    if (cfg.contains("pair"))
      throw ConfigError("config: 'pair' only applies to 'joint_predictor'");
    const PropertySpec prop = parse_property(get_string(cfg, "property", "config"));
    const DiscretizedPredictor p = predictor_from_json(
        read_file(resolve_path(base, get_string(cfg, "predictor", "config"))));
    if (cfg.contains("m") && get_int(cfg, "m", "config") != p.m)
      throw ConfigError("config.m: does not match the predictor grid, m=" +
                        std::to_string(p.m));
    const std::vector<double> values = apply_predictor(p, data, groups);
    const CalibrationReport rep_v = batch_error_v(values, data, groups, prop.id_eval);
    const CalibrationReport rep_g =
        batch_error_gamma(values, data, groups, eval_for(prop));
    write_batch_reports(out_dir, rep_v, rep_g);
    const double alpha = 4.0 * prop.lipschitz_L * prop.lipschitz_L / p.m;
    const bool ok = rep_v.max_alpha_equivalent <= alpha + kAuditTol;
    if (!quiet) {
      std::cout << "audit: predictor m=" << p.m << ", " << data.cells.size()
                << " cells, " << groups.groups.size() << " groups\n"
                << "  max alpha-equivalent " << fmt_double(rep_v.max_alpha_equivalent)
                << " (v), " << fmt_double(rep_g.max_alpha_equivalent)
                << " (gamma) vs alpha " << fmt_double(alpha) << "\n"
                << "  audit: " << (ok ? "pass" : "FAIL") << "\n";
    }
    if (!ok)
      std::cerr << "audit failure: max alpha-equivalent "
                << fmt_double(rep_v.max_alpha_equivalent) << " exceeds "
                << fmt_double(alpha) << "\n";
    return ok ? 0 : 2;
  }

  if (!cfg.contains("pair"))
    throw ConfigError("config: 'joint_predictor' requires 'pair'");
  if (cfg.contains("property"))
    throw ConfigError("config: 'property' only applies to 'predictor'");
  const auto [prop0, fam] = parse_pair_property(get_string(cfg, "pair", "config"));
  const JointPredictor jp = joint_predictor_from_json(
      read_file(resolve_path(base, get_string(cfg, "joint_predictor", "config"))));
  if (cfg.contains("m") && get_int(cfg, "m", "config") != jp.f0.m)
    throw ConfigError("config.m: does not match the predictor grid, m=" +
                      std::to_string(jp.f0.m));
  const auto [f0, f1] = joint_replay(jp, data, groups);
  const JointConfig jcfg = make_joint_config(prop0, fam, jp.f0.m);
  const JointCalibrationReport rep = joint_error(f0, f1, data, groups, prop0, fam);
  int f0_updates = 0;
  for (const auto& r : jp.interleave) f0_updates += r.component == 0 ? 1 : 0;
  const int f1_updates = static_cast<int>(jp.interleave.size()) - f0_updates;
  atomic_write_file(join(out_dir, "joint_report.json"),
                    joint_report_json_text(rep, jcfg, f0_updates, f1_updates, {}));
  atomic_write_file(join(out_dir, "joint_report.csv"), joint_report_csv(rep));
  const JointAuditOutcome audit = joint_audit(rep, jcfg);
  if (!quiet) {
    std::cout << "audit: joint predictor m=" << jp.f0.m << ", " << data.cells.size()
              << " cells, " << groups.groups.size() << " groups\n"
              << "  eq1 max " << fmt_double(rep.alpha0_equivalent) << " vs alpha0 "
              << fmt_double(jcfg.alpha0) << "; eq2 max "
              << fmt_double(rep.alpha1_equivalent) << " vs alpha1* "
              << fmt_double(audit.alpha1_allowed) << "\n"
              << "  audit: " << (audit.ok ? "pass" : "FAIL") << "\n";
  }
  if (!audit.ok)
    std::cerr << "audit failure: eq1 " << fmt_double(rep.alpha0_equivalent) << " vs "
              << fmt_double(jcfg.alpha0) << ", eq2 "
              << fmt_double(rep.alpha1_equivalent) << " vs "
              << fmt_double(audit.alpha1_allowed) << "\n";
  return audit.ok ? 0 : 2;
}

int cmd_demo(const std::string& which) {
  if (which == "variance") {
    const ExactDataset data = make_variance_counterexample();
    std::vector<std::size_t> all;
    for (std::size_t c = 0; c < data.cells.size(); ++c) {
      all.push_back(c);
      std::cout << "cell " << data.cells[c].id << ": weight "
                << fmt_double(data.cells[c].weight) << ", Var(Y | cell) = "
                << fmt_double(data.cells[c].dist.variance()) << "\n";
    }
    const double pooled = mixture_distribution(data, all).variance();
    std::cout << "pooled mixture: Var(Y) = " << fmt_double(pooled) << "\n"
              << "constant prediction 0 is variance-calibrated on every cell yet "
                 "off by "
              << fmt_double(pooled) << " on the population\n";
    return 0;
  }
  if (which == "cvar") {
    const double tau = 0.5;
    const auto w =
        find_cvar_cxls_violation(tau, default_cxls_atom_grid(), default_cxls_prob_grid());
    if (!w) {
      std::cerr << "no level-set witness found on the default grids\n";
      return 2;
    }
    auto show = [](const char* name, const FiniteDistribution& d) {
      std::cout << name << ":";
      for (std::size_t i = 0; i < d.size(); ++i)
        std::cout << " " << fmt_double(d.support[i]) << "@" << fmt_double(d.probs[i]);
      std::cout << "\n";
    };
    show("P1", w->p1);
    show("P2", w->p2);
    std::cout << "CVaR_" << fmt_double(tau) << "(P1) = " << fmt_double(w->cvar1)
              << ", CVaR_" << fmt_double(tau) << "(P2) = " << fmt_double(w->cvar2)
              << "\n"
              << "CVaR of the even mixture = " << fmt_double(w->cvar_mix)
              << ", gap = " << fmt_double(w->gap) << "\n"
              << "equal CVaR at the components, different CVaR at the mixture: the "
                 "level set is not convex\n";
    return 0;
  }
  throw ConfigError("demo: expected 'variance' or 'cvar', got '" + which + "'");
}

}  // namespace calibra::cli
