#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "calibra/audit.hpp"
#include "calibra/dataset.hpp"
#include "calibra/distribution.hpp"
#include "calibra/transcript.hpp"

namespace calibra {

// Deterministic counter-based uniform draw in [0,1), stable across platforms
// and independent of call order.
double unit_uniform(std::uint64_t seed, std::uint64_t t, std::uint64_t stream);

struct AdversaryRound {
  int context = 0;  // index into the context universe
  FiniteDistribution labels;
};

// next(t, prefix) commits the round-t context and label law before the
// learner moves. avg_lipschitz_L is the declared bound on the average
// Lipschitz constant of E[V(., Y_t)], consumed by the guarantee arithmetic.
struct Adversary {
  std::string name;
  std::function<AdversaryRound(int, const Transcript&)> next;
  double avg_lipschitz_L = 1.0;
};

// Uniform point masses on the label grid points inside [lo, hi]; contexts
// cycle round-robin. declared_L is the caller's density bound for the
// discretized law.
Adversary iid_window_adversary(double lo, double hi, int n_contexts, int label_points,
                               double declared_L);

// Plays [lo1, hi1] through round switch_t, then [lo2, hi2].
Adversary two_phase_window_adversary(double lo1, double hi1, double lo2, double hi2,
                                     int switch_t, int n_contexts, int label_points,
                                     double declared_L);

// Indicator-gated loss increment for coordinate (g, gamma) at round
// (context, p, y), with n and R read from the prefix and the max(n, 1)
// denominator convention.
double stage_loss(const Transcript& prefix, const Group& g, int context, double gamma,
                  double p, double y, const IdEval& id_fn);

struct OnlineConfig {
  int m = 20;
  int T = 1000;
  double C = 1.0;  // sup |V| over [0,1]^2
  int label_points = 101;
  std::uint64_t seed = 0;
};

// Snapshot handed to the observer each round before bookkeeping updates.
// Vector fields point at engine state: chi, n and R are group-major
// (index = group * m + grid index).
struct RoundView {
  int t = 0;
  int context = 0;
  const FiniteDistribution* labels = nullptr;
  const std::vector<double>* chi = nullptr;
  const std::vector<double>* P = nullptr;
  double game_value = 0.0;
  double weighted_loss = 0.0;  // chi-weighted expected loss against labels
  double p = 0.0;
  double y = 0.0;
  const std::vector<long long>* n = nullptr;
  const std::vector<double>* R = nullptr;
};

using OnlineObserver = std::function<void(const RoundView&)>;

struct OnlineResult {
  Transcript transcript;
  std::vector<GroupError> k2;  // error = K2(G), alpha_equivalent = K2(G)/T
  double max_alpha = 0.0;
  double bound = 0.0;  // 2CL/m + 2C^2 ln(T)/T + 12C^2 sqrt(ln(|G|m)/T)
};

double online_bound(double C, double L, int m, int T, std::size_t d);

// One adversarial run of the exponential-weights learner over d = |groups|*m
// coordinates, solving the label-grid stage game each round and sampling the
// prediction by inverse CDF. Group masks index the context universe.
OnlineResult run_online(const IdEval& id_fn, const OnlineConfig& cfg,
                        const GroupFamily& groups,
                        const std::vector<std::string>& context_ids,
                        const Adversary& adv, const OnlineObserver& observer = {});

struct MultiSeedResult {
  std::vector<std::uint64_t> seeds;
  std::vector<OnlineResult> runs;  // seed order
  double mean_max_alpha = 0.0;
  double bound = 0.0;
};

// Independent runs, optionally threaded; aggregation is keyed by seed order
// so the result does not depend on the thread count.
MultiSeedResult run_online_seeds(const IdEval& id_fn, const OnlineConfig& cfg,
                                 const GroupFamily& groups,
                                 const std::vector<std::string>& context_ids,
                                 const Adversary& adv,
                                 const std::vector<std::uint64_t>& seeds, int threads);

// payoff[j][a][b]: loss to coordinate j when the learner plays a and the
// adversary plays b. One game per round.
struct BilinearGame {
  std::vector<std::vector<std::vector<double>>> payoff;
};

struct AmfReport {
  std::vector<double> cum_loss;      // per coordinate after all rounds
  std::vector<double> round_values;  // per-round adversary-enumerated value
  double regret = 0.0;               // max_j cum_loss[j] - sum round_values
  double bound = 0.0;                // 4 C sqrt(T ln d)
};

// Generic exponential-weights learner against a best-responding adversary.
// The per-round benchmark value enumerates the adversary's pure actions.
AmfReport run_amf_matrix_game(const std::vector<BilinearGame>& games, double C);

// CSV rows `t,cell,groups,p,y`; the groups column joins the ids of the
// groups containing the round's context with ';'.
std::string transcript_csv(const Transcript& tr, const GroupFamily& groups);

}  // namespace calibra
