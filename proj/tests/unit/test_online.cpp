#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <doctest.h>

#include "calibra/audit.hpp"
#include "calibra/errors.hpp"
#include "calibra/online.hpp"
#include "calibra/predictor.hpp"
#include "calibra/property.hpp"
#include "test_util.hpp"

using namespace calibra;

TEST_CASE("counter RNG is deterministic with frozen reference values") {
  CHECK(unit_uniform(0, 1, 0) == 0.26913031959045408);
  CHECK(unit_uniform(0, 1, 1) == 0.27471265698820735);
  CHECK(unit_uniform(42, 7, 9000) == 0.040615712816846061);
  CHECK(unit_uniform(1, 2, 0) == 0.90061090889315842);
  for (std::uint64_t t = 1; t <= 50; ++t) {
    const double u = unit_uniform(3, t, 5);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == unit_uniform(3, t, 5));
  }
}

TEST_CASE("iid window adversary plays a uniform grid window, cycling contexts") {
  const Adversary adv = iid_window_adversary(0.2, 0.7, 4, 11, 2.0);
  CHECK(adv.name == "iid_window");
  CHECK(adv.avg_lipschitz_L == 2.0);
  Transcript empty;
  const AdversaryRound r1 = adv.next(1, empty);
  CHECK(r1.context == 0);
  CHECK(adv.next(5, empty).context == 0);
  CHECK(adv.next(6, empty).context == 1);
  CHECK(r1.labels.support == std::vector<double>{0.2, 0.3, 0.4, 0.5, 0.6, 0.7});
  for (double p : r1.labels.probs) CHECK(p == 1.0 / 6.0);

  CHECK_THROWS_AS(iid_window_adversary(0.21, 0.24, 2, 11, 1.0), ConfigError);
  CHECK_THROWS_AS(iid_window_adversary(0.0, 1.0, 2, 1, 1.0), ConfigError);
  CHECK_THROWS_AS(iid_window_adversary(0.0, 1.0, 0, 11, 1.0), ConfigError);
}

TEST_CASE("two-phase adversary switches windows after switch_t") {
  const Adversary adv = two_phase_window_adversary(0.0, 0.3, 0.6, 1.0, 5, 3, 11, 1.5);
  CHECK(adv.name == "two_phase_window");
  Transcript empty;
  CHECK(adv.next(5, empty).labels.support == std::vector<double>{0.0, 0.1, 0.2, 0.3});
  CHECK(adv.next(6, empty).labels.support ==
        std::vector<double>{0.6, 0.7, 0.8, 0.9, 1.0});
  CHECK(adv.next(7, empty).context == 0);
  CHECK(adv.next(8, empty).context == 1);
}

TEST_CASE("stage loss matches the indicator-gated surrogate") {
  const IdEval id_fn = mean_property().id_eval;
  Transcript tr;
  tr.m = 4;
  tr.grid = make_grid(4);
  tr.context_ids = {"a", "b"};
  const Group g{"ga", {1, 0}};

  // Empty prefix: denominator clamps to 1, loss is V^2.
  const double v0 = id_fn(0.5, 0.3);
  CHECK(stage_loss(tr, g, 0, 0.5, 0.5, 0.3, id_fn) == v0 * v0);
  CHECK(stage_loss(tr, g, 1, 0.5, 0.5, 0.3, id_fn) == 0.0);      // off group
  CHECK(stage_loss(tr, g, 0, 0.5, 0.25, 0.3, id_fn) == 0.0);     // p != gamma
  CHECK_THROWS_AS(stage_loss(tr, g, 2, 0.5, 0.5, 0.3, id_fn), ConfigError);

  // Four in-coordinate rounds plus an off-group and an off-level round.
  tr.rounds.push_back({1, 0, 0.4, 0.3});
  tr.rounds.push_back({2, 0, 0.4, 0.3});
  tr.rounds.push_back({3, 0, 0.4, 0.2});
  tr.rounds.push_back({4, 0, 0.4, 0.2});
  tr.rounds.push_back({5, 1, 0.4, 0.9});
  tr.rounds.push_back({6, 0, 0.6, 0.9});
  double r = 0.0;
  for (double y : {0.3, 0.3, 0.2, 0.2}) r += id_fn(0.4, y);
  const double v = id_fn(0.4, 0.3);
  const double got = stage_loss(tr, g, 0, 0.4, 0.4, 0.3, id_fn);
  CHECK(got == (2.0 * v * r + v * v) / 4.0);
  CHECK(got == doctest::Approx(0.0325).epsilon(1e-12));
}

TEST_CASE("K2 accumulates exactly over every transcript prefix") {
  const IdEval id_fn = mean_property().id_eval;
  GroupFamily fam;
  fam.groups.push_back({"all", {1, 1, 1}});
  fam.groups.push_back({"g0", {1, 0, 1}});
  fam.groups.push_back({"g1", {0, 1, 1}});
  const std::vector<double> grid = make_grid(4);

  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Transcript tr;
    tr.m = 4;
    tr.grid = grid;
    tr.context_ids = {"a", "b", "c"};
    // Mirror of the audit bookkeeping: per group, (n, R) per grid value.
    std::vector<std::map<double, std::pair<long long, double>>> stats(3);
    std::vector<double> prev_k2(3, 0.0);
    for (int t = 1; t <= 40; ++t) {
      const int ctx = testutil::uni_int(seed, 3 * t, 3);
      const double p = grid[static_cast<std::size_t>(testutil::uni_int(seed, 3 * t + 1, 4))];
      const double y = testutil::uni(seed, 3 * t + 2);
      std::vector<double> surrogate(3, 0.0);
      for (std::size_t gi = 0; gi < 3; ++gi)
        surrogate[gi] = stage_loss(tr, fam.groups[gi], ctx, p, p, y, id_fn);
      tr.rounds.push_back({t, ctx, p, y});
      for (std::size_t gi = 0; gi < 3; ++gi) {
        if (fam.groups[gi].mask[static_cast<std::size_t>(ctx)]) {
          auto& [n, R] = stats[gi][p];
          n += 1;
          R += id_fn(p, y);
        }
      }
      const std::vector<GroupError> k2 = online_k2(tr, fam, id_fn);
      REQUIRE(k2.size() == 3);
      for (std::size_t gi = 0; gi < 3; ++gi) {
        double expect = 0.0;
        for (const auto& [gamma, nr] : stats[gi])
          if (nr.first > 0)
            expect += nr.second * nr.second / static_cast<double>(nr.first);
        CHECK(k2[gi].error == expect);
        CHECK(k2[gi].alpha_equivalent == expect / static_cast<double>(t));
        long long in_group = 0;
        for (const OnlineRound& r : tr.rounds)
          if (fam.groups[gi].mask[static_cast<std::size_t>(r.context)]) ++in_group;
        CHECK(k2[gi].mass ==
              static_cast<double>(in_group) / static_cast<double>(t));
        // One-step growth never exceeds the stage-loss surrogate.
        CHECK(expect - prev_k2[gi] <= surrogate[gi] + 1e-12);
        prev_k2[gi] = expect;
      }
    }
  }
}

TEST_CASE("online run invariants, determinism and K2 consistency") {
  const IdEval id_fn = mean_property().id_eval;
  GroupFamily fam;
  fam.groups.push_back({"all", {1, 1}});
  fam.groups.push_back({"g0", {1, 0}});
  fam.groups.push_back({"g1", {0, 1}});
  const std::vector<std::string> ctx = {"a", "b"};
  OnlineConfig cfg;
  cfg.m = 4;
  cfg.T = 60;
  cfg.C = 1.0;
  cfg.label_points = 11;
  cfg.seed = 7;
  const Adversary adv = iid_window_adversary(0.2, 0.7, 2, 11, 2.0);
  const std::vector<double> grid = make_grid(cfg.m);
  const std::size_t d = fam.groups.size() * static_cast<std::size_t>(cfg.m);

  int seen = 0;
  std::vector<std::pair<double, double>> choices;
  OnlineObserver obs = [&](const RoundView& rv) {
    ++seen;
    CHECK(rv.t == seen);
    CHECK(rv.context == (rv.t - 1) % 2);
    REQUIRE(rv.chi != nullptr);
    REQUIRE(rv.P != nullptr);
    REQUIRE(rv.n != nullptr);
    REQUIRE(rv.R != nullptr);
    CHECK(rv.chi->size() == d);
    CHECK(rv.P->size() == grid.size());
    double cs = 0.0;
    for (double w : *rv.chi) {
      CHECK(w >= 0.0);
      cs += w;
    }
    CHECK(std::abs(cs - 1.0) <= 1e-9);
    double ps = 0.0;
    for (double w : *rv.P) {
      CHECK(w >= -1e-12);
      ps += w;
    }
    CHECK(std::abs(ps - 1.0) <= 1e-9);
    if (rv.t == 1) {
      for (double w : *rv.chi) CHECK(std::abs(w - 1.0 / double(d)) <= 1e-12);
      for (long long nv : *rv.n) CHECK(nv == 0);
      for (double rvv : *rv.R) CHECK(rvv == 0.0);
    }
    // The sampled mixed loss against the committed law never beats the
    // stage-game value by more than the solver's duality gap.
    CHECK(rv.weighted_loss <= rv.game_value + 1e-7);
    CHECK(std::abs(rv.game_value) <= 3.0 * cfg.C * cfg.C + 1e-6);
    choices.emplace_back(rv.p, rv.y);
  };

  const OnlineResult res = run_online(id_fn, cfg, fam, ctx, adv, obs);
  CHECK(seen == cfg.T);
  REQUIRE(res.transcript.rounds.size() == static_cast<std::size_t>(cfg.T));
  for (int t = 0; t < cfg.T; ++t) {
    const OnlineRound& r = res.transcript.rounds[static_cast<std::size_t>(t)];
    CHECK(r.t == t + 1);
    CHECK(r.context == t % 2);
    CHECK(std::count(grid.begin(), grid.end(), r.p) == 1);
    CHECK(r.y >= 0.2);
    CHECK(r.y <= 0.7);
    CHECK(r.p == choices[static_cast<std::size_t>(t)].first);
    CHECK(r.y == choices[static_cast<std::size_t>(t)].second);
  }

  // Result caches match a from-scratch audit of the transcript.
  const std::vector<GroupError> again = online_k2(res.transcript, fam, id_fn);
  REQUIRE(again.size() == res.k2.size());
  double mx = 0.0;
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(res.k2[i].group_id == again[i].group_id);
    CHECK(res.k2[i].error == again[i].error);
    CHECK(res.k2[i].alpha_equivalent == again[i].alpha_equivalent);
    mx = std::max(mx, again[i].alpha_equivalent);
  }
  CHECK(res.max_alpha == mx);
  CHECK(res.bound == online_bound(cfg.C, adv.avg_lipschitz_L, cfg.m, cfg.T, d));

  const OnlineResult rerun = run_online(id_fn, cfg, fam, ctx, adv);
  CHECK(transcript_csv(rerun.transcript, fam) == transcript_csv(res.transcript, fam));
}

TEST_CASE("multi-seed runs are independent of the thread count") {
  const IdEval id_fn = mean_property().id_eval;
  GroupFamily fam;
  fam.groups.push_back({"all", {1, 1}});
  fam.groups.push_back({"g0", {1, 0}});
  const std::vector<std::string> ctx = {"a", "b"};
  OnlineConfig cfg;
  cfg.m = 4;
  cfg.T = 40;
  cfg.label_points = 11;
  const Adversary adv = iid_window_adversary(0.1, 0.9, 2, 11, 1.0);
  const std::vector<std::uint64_t> seeds = {11, 12, 13, 14, 15};

  const MultiSeedResult a = run_online_seeds(id_fn, cfg, fam, ctx, adv, seeds, 1);
  const MultiSeedResult b = run_online_seeds(id_fn, cfg, fam, ctx, adv, seeds, 4);
  REQUIRE(a.runs.size() == 5);
  REQUIRE(b.runs.size() == 5);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(transcript_csv(a.runs[i].transcript, fam) ==
          transcript_csv(b.runs[i].transcript, fam));
  CHECK(a.mean_max_alpha == b.mean_max_alpha);
  CHECK(a.bound == b.bound);
  double acc = 0.0;
  for (const OnlineResult& r : a.runs) acc += r.max_alpha;
  CHECK(a.mean_max_alpha == acc / 5.0);

  CHECK_THROWS_AS(run_online_seeds(id_fn, cfg, fam, ctx, adv, {}, 1), ConfigError);
}

TEST_CASE("online run rejects malformed setups") {
  const IdEval id_fn = mean_property().id_eval;
  GroupFamily fam;
  fam.groups.push_back({"all", {1, 1}});
  const std::vector<std::string> ctx = {"a", "b"};
  const Adversary adv = iid_window_adversary(0.0, 1.0, 2, 11, 1.0);
  OnlineConfig cfg;
  cfg.m = 4;
  cfg.T = 30;
  cfg.label_points = 11;

  OnlineConfig bad = cfg;
  bad.m = 0;
  CHECK_THROWS_AS(run_online(id_fn, bad, fam, ctx, adv), ConfigError);
  bad = cfg;
  bad.T = 0;
  CHECK_THROWS_AS(run_online(id_fn, bad, fam, ctx, adv), ConfigError);
  bad = cfg;
  bad.C = 0.0;
  CHECK_THROWS_AS(run_online(id_fn, bad, fam, ctx, adv), ConfigError);
  // |V| reaches 1 for the mean, above a declared C of 0.3.
  bad = cfg;
  bad.C = 0.3;
  CHECK_THROWS_WITH_AS(run_online(id_fn, bad, fam, ctx, adv),
                       "identification value exceeds the declared bound C",
                       ConfigError);
  // T below ln(|groups| * m).
  bad = cfg;
  bad.m = 30;
  bad.T = 3;
  CHECK_THROWS_WITH_AS(run_online(id_fn, bad, fam, ctx, adv),
                       "T must be at least ln(|groups| * m)", ConfigError);

  CHECK_THROWS_AS(run_online(id_fn, cfg, fam, {}, adv), ConfigError);
  CHECK_THROWS_AS(run_online({}, cfg, fam, ctx, adv), ConfigError);
  GroupFamily none;
  CHECK_THROWS_AS(run_online(id_fn, cfg, none, ctx, adv), ConfigError);
  GroupFamily short_mask;
  short_mask.groups.push_back({"all", {1}});
  CHECK_THROWS_AS(run_online(id_fn, cfg, short_mask, ctx, adv), ConfigError);

  Adversary off_grid;
  off_grid.name = "off";
  off_grid.next = [](int, const Transcript&) {
    return AdversaryRound{0, FiniteDistribution::from_atoms({0.05}, {1.0})};
  };
  CHECK_THROWS_WITH_AS(run_online(id_fn, cfg, fam, ctx, off_grid),
                       "adversary label 0.05 is not on the label grid", ConfigError);
  Adversary out_of_range;
  out_of_range.name = "oor";
  out_of_range.next = [](int, const Transcript&) {
    return AdversaryRound{7, FiniteDistribution::from_atoms({0.5}, {1.0})};
  };
  CHECK_THROWS_AS(run_online(id_fn, cfg, fam, ctx, out_of_range), ConfigError);
  Adversary hollow;
  hollow.name = "hollow";
  CHECK_THROWS_AS(run_online(id_fn, cfg, fam, ctx, hollow), ConfigError);
}

TEST_CASE("exponential-weights learner keeps regret at zero on flat games") {
  BilinearGame zero;
  zero.payoff.assign(3, {{0.0, 0.0}, {0.0, 0.0}});
  const AmfReport rz = run_amf_matrix_game(std::vector<BilinearGame>(5, zero), 1.0);
  CHECK(std::abs(rz.regret) <= 1e-9);
  CHECK(rz.cum_loss == std::vector<double>(3, 0.0));

  BilinearGame flat;
  flat.payoff.assign(3, {{0.5, 0.5}, {0.5, 0.5}});
  const AmfReport rf = run_amf_matrix_game(std::vector<BilinearGame>(5, flat), 1.0);
  CHECK(std::abs(rf.regret) <= 1e-9);
  for (double c : rf.cum_loss) CHECK(std::abs(c - 2.5) <= 1e-9);
  CHECK(rf.bound == 4.0 * std::sqrt(5.0 * std::log(3.0)));
}

TEST_CASE("exponential-weights learner beats its regret bound on random games") {
  const int T = 200;
  std::vector<BilinearGame> games(static_cast<std::size_t>(T));
  for (int t = 1; t <= T; ++t) {
    BilinearGame& g = games[static_cast<std::size_t>(t - 1)];
    g.payoff.assign(3, std::vector<std::vector<double>>(
                           4, std::vector<double>(5, 0.0)));
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 5; ++b)
          g.payoff[j][a][b] =
              2.0 * unit_uniform(90, static_cast<std::uint64_t>(t) * 1000 +
                                         j * 25 + a * 5 + b, 777) - 1.0;
  }
  const AmfReport rep = run_amf_matrix_game(games, 1.0);
  CHECK(rep.bound == 4.0 * std::sqrt(200.0 * std::log(3.0)));
  CHECK(rep.regret <= rep.bound);
  // Deterministic across reruns.
  const AmfReport rep2 = run_amf_matrix_game(games, 1.0);
  CHECK(rep2.regret == rep.regret);
  CHECK(rep2.cum_loss == rep.cum_loss);

  CHECK_THROWS_AS(run_amf_matrix_game({}, 1.0), ConfigError);
  CHECK_THROWS_AS(run_amf_matrix_game(games, 0.0), ConfigError);
  CHECK_THROWS_AS(run_amf_matrix_game(games, 0.5), ConfigError);  // losses reach 1
  BilinearGame ragged;
  ragged.payoff = {{{0.1, 0.2}, {0.3}}, {{0.1, 0.2}, {0.3, 0.4}}};
  CHECK_THROWS_AS(run_amf_matrix_game({ragged}, 1.0), ConfigError);
  BilinearGame varying;
  varying.payoff.assign(2, {{0.0}});
  CHECK_THROWS_AS(run_amf_matrix_game({games[0], varying}, 1.0), ConfigError);
}

TEST_CASE("transcript CSV lists the covering groups per round") {
  Transcript tr;
  tr.m = 4;
  tr.grid = make_grid(4);
  tr.context_ids = {"a", "b"};
  tr.rounds.push_back({1, 0, 0.5, 0.3});
  tr.rounds.push_back({2, 1, 0.25, 0.7});
  GroupFamily fam;
  fam.groups.push_back({"all", {1, 1}});
  fam.groups.push_back({"ga", {1, 0}});
  CHECK(transcript_csv(tr, fam) ==
        "t,cell,groups,p,y\n"
        "1,a,all;ga,0.5,0.3\n"
        "2,b,all,0.25,0.7\n");
  GroupFamily bad;
  bad.groups.push_back({"all", {1}});
  CHECK_THROWS_AS(transcript_csv(tr, bad), ConfigError);
}
