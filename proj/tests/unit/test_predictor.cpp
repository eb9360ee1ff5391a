#include <string>
#include <vector>

#include <doctest.h>

#include "calibra/errors.hpp"
#include "calibra/predictor.hpp"
#include "test_util.hpp"

using namespace calibra;

TEST_CASE("grid construction") {
  CHECK(make_grid(3) == std::vector<double>{0.25, 0.5, 0.75});
  CHECK(make_grid(1) == std::vector<double>{0.5});
  const std::vector<double> g19 = make_grid(19);
  CHECK(g19.size() == 19);
  CHECK(g19[9] == 0.5);
  CHECK(g19[0] == 1.0 / 20.0);
  CHECK_THROWS_AS(make_grid(0), ConfigError);
}

TEST_CASE("nearest grid index breaks ties toward the smaller value") {
  const std::vector<double> grid = make_grid(3);  // 0.25 0.5 0.75
  CHECK(nearest_grid_index(grid, 0.0) == 0);
  CHECK(nearest_grid_index(grid, 0.3) == 0);
  CHECK(nearest_grid_index(grid, 0.375) == 0);  // exact midpoint
  CHECK(nearest_grid_index(grid, 0.4) == 1);
  CHECK(nearest_grid_index(grid, 1.0) == 2);
  CHECK_THROWS_AS(nearest_grid_index({}, 0.5), ConfigError);
}

TEST_CASE("snap_init_values") {
  const std::vector<double> grid = make_grid(4);  // 0.2 0.4 0.6 0.8
  // Empty: constant nearest 1/2, tie toward the smaller value.
  CHECK(snap_init_values(grid, 3, {}) == std::vector<double>(3, 0.4));
  // Single value: snapped, no on-grid requirement.
  CHECK(snap_init_values(grid, 2, {0.33}) == std::vector<double>(2, 0.4));
  // Per-cell values must sit on the grid exactly.
  CHECK(snap_init_values(grid, 2, {grid[0], grid[3]}) ==
        std::vector<double>{0.2, 0.8});
  CHECK_THROWS_AS(snap_init_values(grid, 2, {0.21, 0.8}), ConfigError);
  CHECK_THROWS_AS(snap_init_values(grid, 3, {0.2, 0.4}), ConfigError);
}

TEST_CASE("replay applies records to group-and-level regions") {
  GroupFamily fam;
  fam.groups.push_back({"all", {1, 1, 1, 1}});
  fam.groups.push_back({"left", {1, 1, 0, 0}});

  const std::vector<double> init(4, 0.5);
  std::vector<UpdateRecord> log;
  log.push_back({1, 0.5, "left", 0.25});   // cells 0,1 -> 0.25
  log.push_back({2, 0.5, "all", 0.75});    // cells 2,3 -> 0.75
  log.push_back({3, 0.25, "all", 0.5});    // cells 0,1 back to 0.5
  log.push_back({4, 0.9, "all", 0.1});     // matches nothing, no-op

  CHECK(replay(init, log, fam) == std::vector<double>{0.5, 0.5, 0.75, 0.75});

  CHECK_THROWS_AS(replay(init, {{1, 0.5, "ghost", 0.25}}, fam), ConfigError);
  GroupFamily short_fam;
  short_fam.groups.push_back({"all", {1, 1}});
  CHECK_THROWS_AS(replay(init, {{1, 0.5, "all", 0.25}}, short_fam), ConfigError);
}

TEST_CASE("predictor init_for") {
  DiscretizedPredictor p;
  p.m = 3;
  p.grid = make_grid(3);
  p.constant_init = true;
  p.init_value = 0.5;
  CHECK(p.init_for(5) == std::vector<double>(5, 0.5));

  p.constant_init = false;
  p.init_cells = {0.25, 0.75};
  CHECK(p.init_for(2) == std::vector<double>{0.25, 0.75});
  CHECK_THROWS_AS(p.init_for(3), ConfigError);
}

TEST_CASE("predictor JSON round trip drops the cache") {
  DiscretizedPredictor p;
  p.m = 3;
  p.grid = make_grid(3);
  p.constant_init = true;
  p.init_value = 0.5;
  p.log.push_back({1, 0.5, "all", 0.25});
  p.log.push_back({2, 0.25, "left", 0.75});
  p.current = {0.75, 0.25};  // must not be persisted

  const std::string j = predictor_json(p);
  CHECK(j.find("current") == std::string::npos);
  const DiscretizedPredictor q = predictor_from_json(j);
  CHECK(q.m == 3);
  CHECK(q.grid == p.grid);
  CHECK(q.constant_init);
  CHECK(q.init_value == 0.5);
  REQUIRE(q.log.size() == 2);
  CHECK(q.log[1].step == 2);
  CHECK(q.log[1].gamma_from == 0.25);
  CHECK(q.log[1].group_id == "left");
  CHECK(q.log[1].gamma_to == 0.75);
  CHECK(q.current.empty());
  CHECK(predictor_json(q) == j);

  // Per-cell init survives as an array.
  p.constant_init = false;
  p.init_cells = {0.25, 0.5, 0.5};
  const DiscretizedPredictor r = predictor_from_json(predictor_json(p));
  CHECK(!r.constant_init);
  CHECK(r.init_cells == p.init_cells);

  CHECK_THROWS_AS(predictor_from_json("{oops"), ConfigError);
  CHECK_THROWS_AS(predictor_from_json(R"({"m":2,"grid":[0.5],"init":0.5,"log":[]})"),
                  ConfigError);
  CHECK_THROWS_AS(predictor_from_json(R"({"grid":[0.5],"init":0.5,"log":[]})"),
                  ConfigError);
}

TEST_CASE("trace CSV golden") {
  ConvergenceTrace t;
  t.c_init = 0.25;
  t.c_opt_bound = 0.0;
  t.rows.push_back({1, 0.5, "all", 0.125, -0.25, 0.75, 0.4375});
  t.rows.push_back({2, 0.75, "g1", 0.5, 0.1, 0.5, 0.0});
  CHECK(trace_csv(t) ==
        "step,gamma,group,mass,expV,gamma_to,phi\n"
        "1,0.5,all,0.125,-0.25,0.75,0.4375\n"
        "2,0.75,g1,0.5,0.1,0.5,0\n");
}
