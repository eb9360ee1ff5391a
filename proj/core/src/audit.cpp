#include "calibra/audit.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <json.hpp>

#include "calibra/errors.hpp"
#include "calibra/io.hpp"

namespace calibra {

namespace {

// Cells covered by the mask, bucketed by exact predictor value, ascending.
std::map<double, std::vector<std::size_t>> levels_in_mask(
    const std::vector<double>& predictor, const std::vector<std::uint8_t>& mask) {
  std::map<double, std::vector<std::size_t>> out;
  for (std::size_t c = 0; c < mask.size(); ++c)
    if (mask[c]) out[predictor[c]].push_back(c);
  return out;
}

double expected_over(const FiniteDistribution& d,
                     const std::function<double(double)>& f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d.support.size(); ++i) acc += d.probs[i] * f(d.support[i]);
  return acc;
}

void check_coverage(const std::vector<double>& predictor, const ExactDataset& data) {
  if (predictor.size() != data.cells.size())
    throw ConfigError("predictor covers " + std::to_string(predictor.size()) +
                      " cells, dataset has " + std::to_string(data.cells.size()));
}

}  // namespace

double eval_property(const EvalProperty& p, const FiniteDistribution& d) {
  switch (p.kind) {
    case EvalKind::mean:
      return d.mean();
    case EvalKind::quantile:
      return d.quantile(p.tau);
    case EvalKind::variance:
      return d.variance();
    case EvalKind::cvar:
      return d.cvar(p.tau);
  }
  throw ConfigError("unknown property kind");
}

EvalProperty eval_for(const PropertySpec& p) {
  if (p.kind == PropertyKind::quantile) return {EvalKind::quantile, p.tau};
  return {EvalKind::mean, 0.0};
}

CalibrationReport batch_error_v(const std::vector<double>& predictor,
                                const ExactDataset& data, const GroupFamily& groups,
                                const IdEval& id_fn) {
  check_coverage(predictor, data);
  CalibrationReport rep;
  rep.mode = "v";
  for (const Group& g : groups.groups) {
    GroupError ge;
    ge.group_id = g.id;
    for (std::size_t c = 0; c < data.cells.size(); ++c)
      if (g.mask[c]) ge.mass += data.cells[c].weight;
    for (const auto& [gamma, idx] : levels_in_mask(predictor, g.mask)) {
      const FiniteDistribution mixd = mixture_distribution(data, idx);
      const double vbar =
          expected_over(mixd, [&](double y) { return id_fn(gamma, y); });
      ge.alpha_equivalent += region_mass(data, idx) * vbar * vbar;
    }
    if (ge.mass > 0.0) ge.error = ge.alpha_equivalent / ge.mass;
    rep.max_alpha_equivalent = std::max(rep.max_alpha_equivalent, ge.alpha_equivalent);
    rep.per_group.push_back(std::move(ge));
  }
  return rep;
}

CalibrationReport batch_error_gamma(const std::vector<double>& predictor,
                                    const ExactDataset& data,
                                    const GroupFamily& groups,
                                    const EvalProperty& prop) {
  check_coverage(predictor, data);
  CalibrationReport rep;
  rep.mode = "gamma";
  for (const Group& g : groups.groups) {
    GroupError ge;
    ge.group_id = g.id;
    for (std::size_t c = 0; c < data.cells.size(); ++c)
      if (g.mask[c]) ge.mass += data.cells[c].weight;
    for (const auto& [gamma, idx] : levels_in_mask(predictor, g.mask)) {
      const FiniteDistribution mixd = mixture_distribution(data, idx);
      const double gap = gamma - eval_property(prop, mixd);
      ge.alpha_equivalent += region_mass(data, idx) * gap * gap;
    }
    if (ge.mass > 0.0) ge.error = ge.alpha_equivalent / ge.mass;
    rep.max_alpha_equivalent = std::max(rep.max_alpha_equivalent, ge.alpha_equivalent);
    rep.per_group.push_back(std::move(ge));
  }
  return rep;
}

JointCalibrationReport joint_error(const std::vector<double>& f0,
                                   const std::vector<double>& f1,
                                   const ExactDataset& data, const GroupFamily& groups,
                                   const PropertySpec& prop0,
                                   const ConditionalIdFamily& fam) {
  check_coverage(f0, data);
  check_coverage(f1, data);
  const EvalProperty gamma0_eval = eval_for(prop0);
  JointCalibrationReport rep;
  for (const Group& g : groups.groups) {
    // Rows conditioning on f1 = gamma1: the first component must identify
    // prop0 on every (gamma0, gamma1) sub-slice.
    for (const auto& [gamma1, slice] : levels_in_mask(f1, g.mask)) {
      JointGroupLevelError row;
      row.group_id = g.id;
      row.level = gamma1;
      row.mass = region_mass(data, slice);
      std::vector<std::uint8_t> slice_mask(data.cells.size(), 0);
      for (std::size_t c : slice) slice_mask[c] = 1;
      for (const auto& [gamma0, sub] : levels_in_mask(f0, slice_mask)) {
        const FiniteDistribution mixd = mixture_distribution(data, sub);
        const double vbar =
            expected_over(mixd, [&](double y) { return prop0.id_eval(gamma0, y); });
        row.alpha_equivalent += region_mass(data, sub) * vbar * vbar;
      }
      if (row.mass > 0.0) row.error = row.alpha_equivalent / row.mass;
      rep.alpha0_equivalent = std::max(rep.alpha0_equivalent, row.alpha_equivalent);
      rep.eq1.push_back(std::move(row));
    }
    // Rows conditioning on f0 = gamma0: the second component must identify
    // the conditional property at the sub-slice's exact first-component value.
    for (const auto& [gamma0, slice] : levels_in_mask(f0, g.mask)) {
      JointGroupLevelError row;
      row.group_id = g.id;
      row.level = gamma0;
      row.mass = region_mass(data, slice);
      std::vector<std::uint8_t> slice_mask(data.cells.size(), 0);
      for (std::size_t c : slice) slice_mask[c] = 1;
      for (const auto& [gamma1, sub] : levels_in_mask(f1, slice_mask)) {
        const FiniteDistribution mixd = mixture_distribution(data, sub);
        const double g0_true = eval_property(gamma0_eval, mixd);
        const double vbar = expected_over(
            mixd, [&](double y) { return fam.cond_id_eval(g0_true, gamma1, y); });
        row.alpha_equivalent += region_mass(data, sub) * vbar * vbar;
      }
      if (row.mass > 0.0) row.error = row.alpha_equivalent / row.mass;
      rep.alpha1_equivalent = std::max(rep.alpha1_equivalent, row.alpha_equivalent);
      rep.eq2.push_back(std::move(row));
    }
  }
  return rep;
}

std::vector<GroupError> online_k2(const Transcript& tr, const GroupFamily& groups,
                                  const IdEval& id_fn) {
  std::vector<GroupError> out;
  for (const Group& g : groups.groups) {
    if (g.mask.size() != tr.context_ids.size())
      throw ConfigError("group mask does not cover the transcript contexts");
    // n and R per grid value seen under this group, accumulated in round order.
    std::map<double, std::pair<long long, double>> stats;
    long long in_group = 0;
    for (const OnlineRound& r : tr.rounds) {
      if (!g.mask[static_cast<std::size_t>(r.context)]) continue;
      ++in_group;
      auto& [n, R] = stats[r.p];
      n += 1;
      R += id_fn(r.p, r.y);
    }
    GroupError ge;
    ge.group_id = g.id;
    double k2 = 0.0;
    for (const auto& [gamma, nr] : stats)
      if (nr.first > 0) k2 += nr.second * nr.second / static_cast<double>(nr.first);
    ge.error = k2;
    const double t = tr.rounds.empty() ? 1.0 : static_cast<double>(tr.rounds.size());
    ge.mass = static_cast<double>(in_group) / t;
    // K2(G) <= alpha * T is the online guarantee, so K2 / T plays the alpha role.
    ge.alpha_equivalent = k2 / t;
    out.push_back(std::move(ge));
  }
  return out;
}

std::string calibration_report_json(const CalibrationReport& r) {
  nlohmann::json j;
  j["mode"] = r.mode;
  j["max_alpha_equivalent"] = r.max_alpha_equivalent;
  j["per_group"] = nlohmann::json::array();
  for (const GroupError& ge : r.per_group) {
    j["per_group"].push_back({{"group_id", ge.group_id},
                              {"mass", ge.mass},
                              {"error", ge.error},
                              {"alpha_equivalent", ge.alpha_equivalent}});
  }
  return j.dump(2) + "\n";
}

std::string calibration_report_csv(const CalibrationReport& r) {
  std::ostringstream ss;
  ss << "group_id,mode,error,alpha_equivalent\n";
  for (const GroupError& ge : r.per_group)
    ss << ge.group_id << ',' << r.mode << ',' << fmt_double(ge.error) << ','
       << fmt_double(ge.alpha_equivalent) << '\n';
  return ss.str();
}

std::string joint_report_csv(const JointCalibrationReport& r) {
  std::ostringstream ss;
  ss << "eq,group_id,level,mass,error,alpha_equivalent\n";
  const auto emit = [&](const char* eq, const std::vector<JointGroupLevelError>& rows) {
    for (const JointGroupLevelError& row : rows)
      ss << eq << ',' << row.group_id << ',' << fmt_double(row.level) << ','
         << fmt_double(row.mass) << ',' << fmt_double(row.error) << ','
         << fmt_double(row.alpha_equivalent) << '\n';
  };
  emit("1", r.eq1);
  emit("2", r.eq2);
  return ss.str();
}

}  // namespace calibra
