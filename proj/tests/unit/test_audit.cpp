#include <cmath>
#include <vector>

#include <doctest.h>

#include "calibra/audit.hpp"
#include "calibra/errors.hpp"
#include "calibra/predictor.hpp"
#include "calibra/property.hpp"
#include "test_util.hpp"

using namespace calibra;

namespace {

const IdEval kMeanId = [](double g, double y) { return g - y; };

Transcript dyadic_transcript() {
  Transcript tr;
  tr.m = 3;
  tr.grid = make_grid(3);
  tr.context_ids = {"a", "b"};
  tr.rounds.push_back({1, 0, 0.5, 0.25});
  tr.rounds.push_back({2, 0, 0.5, 0.25});
  tr.rounds.push_back({3, 1, 0.25, 0.75});
  tr.rounds.push_back({4, 1, 0.25, 0.75});
  return tr;
}

}  // namespace

TEST_CASE("eval_property on known distributions") {
  const FiniteDistribution coin = FiniteDistribution::from_atoms({0.0, 1.0}, {0.5, 0.5});
  CHECK(eval_property({EvalKind::mean, 0.0}, coin) == 0.5);
  CHECK(eval_property({EvalKind::variance, 0.0}, coin) == 0.25);
  CHECK(eval_property({EvalKind::cvar, 0.5}, coin) == 1.0);
  const FiniteDistribution d = FiniteDistribution::from_atoms({0.2, 0.6}, {0.3, 0.7});
  CHECK(eval_property({EvalKind::quantile, 0.5}, d) == 0.6);

  CHECK(eval_for(mean_property()).kind == EvalKind::mean);
  const EvalProperty q = eval_for(quantile_property(0.7, 1.0));
  CHECK(q.kind == EvalKind::quantile);
  CHECK(q.tau == 0.7);
}

TEST_CASE("batch error, constant predictor on the variance counterexample") {
  const ExactDataset data = make_variance_counterexample();
  GroupFamily fam;
  fam.groups.push_back({"all", {1, 1}});
  fam.groups.push_back({"x0", {1, 0}});
  const std::vector<double> f(2, 0.75);

  const CalibrationReport rv = batch_error_v(f, data, fam, kMeanId);
  CHECK(rv.mode == "v");
  REQUIRE(rv.per_group.size() == 2);
  // all: one level 0.75 over the pool, E[V] = 0.75 - 0.5 = 0.25.
  CHECK(rv.per_group[0].mass == 1.0);
  CHECK(rv.per_group[0].alpha_equivalent == 0.0625);
  CHECK(rv.per_group[0].error == 0.0625);
  // x0: the region is the point mass at 0, E[V] = 0.75.
  CHECK(rv.per_group[1].mass == 0.5);
  CHECK(rv.per_group[1].alpha_equivalent == 0.28125);
  CHECK(rv.per_group[1].error == 0.5625);
  CHECK(rv.max_alpha_equivalent == 0.28125);

  const CalibrationReport rg = batch_error_gamma(f, data, fam, {EvalKind::mean, 0.0});
  CHECK(rg.mode == "gamma");
  CHECK(rg.per_group[0].alpha_equivalent == 0.0625);
  CHECK(rg.per_group[1].alpha_equivalent == 0.28125);

  // Auditing the same predictor as a variance estimate: pooled variance 0.25,
  // gap 0.5 on the whole population; each cell alone has zero variance.
  const CalibrationReport rvar =
      batch_error_gamma(f, data, fam, {EvalKind::variance, 0.0});
  CHECK(rvar.per_group[0].alpha_equivalent == 0.25);
  CHECK(rvar.per_group[1].alpha_equivalent == 0.28125);

  CHECK_THROWS_AS(batch_error_v({0.5}, data, fam, kMeanId), ConfigError);
}

TEST_CASE("batch error agrees with a direct per-level recomputation") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const ExactDataset data = testutil::random_dataset(seed, 7);
    const GroupFamily fam = testutil::random_groups(seed, 7, 3);
    const std::vector<double> grid = make_grid(9);
    std::vector<double> f(7);
    for (std::size_t c = 0; c < 7; ++c)
      f[c] = grid[testutil::uni_int(seed, 600 + c, 9)];

    const CalibrationReport rep = batch_error_v(f, data, fam, kMeanId);
    REQUIRE(rep.per_group.size() == fam.groups.size());
    double max_alpha = 0.0;
    for (std::size_t gi = 0; gi < fam.groups.size(); ++gi) {
      const Group& g = fam.groups[gi];
      // Independent route: loop grid levels, not observed ones.
      double total = 0.0, mass = 0.0;
      for (double gamma : grid) {
        std::vector<std::size_t> idx;
        for (std::size_t c = 0; c < 7; ++c)
          if (g.mask[c] && f[c] == gamma) idx.push_back(c);
        if (idx.empty()) continue;
        const FiniteDistribution mixd = mixture_distribution(data, idx);
        const double vbar = expected_id(mean_property(), gamma, mixd);
        total += region_mass(data, idx) * vbar * vbar;
      }
      for (std::size_t c = 0; c < 7; ++c)
        if (g.mask[c]) mass += data.cells[c].weight;
      CHECK(std::abs(rep.per_group[gi].alpha_equivalent - total) <= 1e-12);
      CHECK(std::abs(rep.per_group[gi].mass - mass) <= 1e-15);
      CHECK(std::abs(rep.per_group[gi].error * rep.per_group[gi].mass -
                     rep.per_group[gi].alpha_equivalent) <= 1e-15);
      max_alpha = std::max(max_alpha, rep.per_group[gi].alpha_equivalent);
    }
    CHECK(rep.max_alpha_equivalent == max_alpha);
  }
}

TEST_CASE("per-cell grid means are a zero-error fixed point") {
  ExactDataset d;
  d.cells.push_back({"c0", 0.5, FiniteDistribution::from_atoms({0.25}, {1.0})});
  d.cells.push_back({"c1", 0.5, FiniteDistribution::from_atoms({0.75}, {1.0})});
  d.validate();
  GroupFamily fam;
  fam.groups.push_back({"all", {1, 1}});
  fam.groups.push_back({"g0", {1, 0}});
  const std::vector<double> f = {0.25, 0.75};
  const CalibrationReport rep = batch_error_v(f, d, fam, kMeanId);
  for (const GroupError& ge : rep.per_group) CHECK(ge.alpha_equivalent == 0.0);
  const CalibrationReport repg = batch_error_gamma(f, d, fam, {EvalKind::mean, 0.0});
  CHECK(repg.max_alpha_equivalent == 0.0);
}

TEST_CASE("online K2 on a hand transcript") {
  const Transcript tr = dyadic_transcript();
  GroupFamily fam;
  fam.groups.push_back({"all", {1, 1}});
  fam.groups.push_back({"ga", {1, 0}});
  fam.groups.push_back({"gb", {0, 1}});

  const std::vector<GroupError> k2 = online_k2(tr, fam, kMeanId);
  REQUIRE(k2.size() == 3);
  // all: level 0.5 has n=2, R=0.5 -> 0.125; level 0.25 has n=2, R=-1 -> 0.5.
  CHECK(k2[0].error == 0.625);
  CHECK(k2[0].mass == 1.0);
  CHECK(k2[0].alpha_equivalent == 0.15625);
  CHECK(k2[1].error == 0.125);
  CHECK(k2[1].mass == 0.5);
  CHECK(k2[1].alpha_equivalent == 0.03125);
  CHECK(k2[2].error == 0.5);
  CHECK(k2[2].alpha_equivalent == 0.125);

  GroupFamily bad;
  bad.groups.push_back({"all", {1, 1, 1}});
  CHECK_THROWS_AS(online_k2(tr, bad, kMeanId), ConfigError);
}

TEST_CASE("joint error conditions eq2 on the exact first-component value") {
  ExactDataset d;
  d.cells.push_back({"c0", 1.0, FiniteDistribution::from_atoms({0.0, 1.0}, {0.5, 0.5})});
  d.validate();
  GroupFamily fam;
  fam.groups.push_back({"all", {1}});
  const auto [prop0, pair_fam] = mean_variance_pair();

  const JointCalibrationReport rep =
      joint_error({0.5}, {0.25}, d, fam, prop0, pair_fam);
  REQUIRE(rep.eq1.size() == 1);
  REQUIRE(rep.eq2.size() == 1);
  CHECK(rep.eq1[0].level == 0.25);
  CHECK(rep.eq1[0].mass == 1.0);
  CHECK(rep.eq1[0].alpha_equivalent == 0.0);  // f0 matches the mean exactly
  CHECK(rep.eq2[0].level == 0.5);
  // E[V1] = 0.25 - E[(0.5 - y)^2 / 2] = 0.25 - 0.125.
  CHECK(rep.eq2[0].alpha_equivalent == 0.015625);
  CHECK(rep.alpha0_equivalent == 0.0);
  CHECK(rep.alpha1_equivalent == 0.015625);

  // Mispredicting f0 relabels the row but the residual still measures against
  // the slice's true mean, so the eq2 error is unchanged.
  const JointCalibrationReport rep2 =
      joint_error({0.75}, {0.25}, d, fam, prop0, pair_fam);
  CHECK(rep2.eq2[0].level == 0.75);
  CHECK(rep2.eq2[0].alpha_equivalent == 0.015625);
  // eq1 now sees the miss: E[V0] = 0.75 - 0.5.
  CHECK(rep2.eq1[0].alpha_equivalent == 0.0625);

  CHECK_THROWS_AS(joint_error({0.5, 0.5}, {0.25}, d, fam, prop0, pair_fam),
                  ConfigError);
}

TEST_CASE("report serializations") {
  CalibrationReport r;
  r.mode = "v";
  r.max_alpha_equivalent = 0.0625;
  r.per_group.push_back({"all", 1.0, 0.0625, 0.0625});
  r.per_group.push_back({"g0", 0.5, 0.125, 0.0625});

  CHECK(calibration_report_csv(r) ==
        "group_id,mode,error,alpha_equivalent\n"
        "all,v,0.0625,0.0625\n"
        "g0,v,0.125,0.0625\n");

  CHECK(calibration_report_json(r) ==
        "{\n"
        "  \"max_alpha_equivalent\": 0.0625,\n"
        "  \"mode\": \"v\",\n"
        "  \"per_group\": [\n"
        "    {\n"
        "      \"alpha_equivalent\": 0.0625,\n"
        "      \"error\": 0.0625,\n"
        "      \"group_id\": \"all\",\n"
        "      \"mass\": 1.0\n"
        "    },\n"
        "    {\n"
        "      \"alpha_equivalent\": 0.0625,\n"
        "      \"error\": 0.125,\n"
        "      \"group_id\": \"g0\",\n"
        "      \"mass\": 0.5\n"
        "    }\n"
        "  ]\n"
        "}\n");

  JointCalibrationReport jr;
  jr.eq1.push_back({"all", 0.25, 1.0, 0.0, 0.0});
  jr.eq2.push_back({"all", 0.5, 1.0, 0.015625, 0.015625});
  CHECK(joint_report_csv(jr) ==
        "eq,group_id,level,mass,error,alpha_equivalent\n"
        "1,all,0.25,1,0,0\n"
        "2,all,0.5,1,0.015625,0.015625\n");
}
