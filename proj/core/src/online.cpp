#include "calibra/online.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "calibra/errors.hpp"
#include "calibra/io.hpp"
#include "calibra/matrix_game.hpp"
#include "calibra/predictor.hpp"

namespace calibra {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<double> label_grid(int points) {
  if (points < 2) throw ConfigError("label grid needs at least 2 points");
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    g[static_cast<std::size_t>(i)] = static_cast<double>(i) / (points - 1);
  return g;
}

FiniteDistribution window_distribution(const std::vector<double>& labels, double lo,
                                       double hi) {
  FiniteDistribution d;
  for (double v : labels)
    if (v >= lo - 1e-12 && v <= hi + 1e-12) d.support.push_back(v);
  if (d.support.empty()) throw ConfigError("label window contains no grid points");
  d.probs.assign(d.support.size(), 1.0 / static_cast<double>(d.support.size()));
  return d;
}

std::size_t sample_index(const std::vector<double>& probs, double u) {
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return i;
  }
  return probs.size() - 1;
}

void softmax_into(const std::vector<double>& cum, double eta, std::vector<double>& chi) {
  const double mx = *std::max_element(cum.begin(), cum.end());
  double tot = 0.0;
  for (std::size_t j = 0; j < cum.size(); ++j) {
    chi[j] = std::exp(eta * (cum[j] - mx));
    tot += chi[j];
  }
  for (double& v : chi) v /= tot;
}

}  // namespace

double unit_uniform(std::uint64_t seed, std::uint64_t t, std::uint64_t stream) {
  const std::uint64_t r = mix64(mix64(mix64(seed) ^ t) ^ stream);
  return static_cast<double>(r >> 11) * 0x1.0p-53;
}

Adversary iid_window_adversary(double lo, double hi, int n_contexts, int label_points,
                               double declared_L) {
  if (n_contexts < 1) throw ConfigError("adversary needs at least one context");
  const FiniteDistribution dist = window_distribution(label_grid(label_points), lo, hi);
  Adversary adv;
  adv.name = "iid_window";
  adv.avg_lipschitz_L = declared_L;
  adv.next = [dist, n_contexts](int t, const Transcript&) {
    return AdversaryRound{(t - 1) % n_contexts, dist};
  };
  return adv;
}

Adversary two_phase_window_adversary(double lo1, double hi1, double lo2, double hi2,
                                     int switch_t, int n_contexts, int label_points,
                                     double declared_L) {
  if (n_contexts < 1) throw ConfigError("adversary needs at least one context");
  const std::vector<double> labels = label_grid(label_points);
  const FiniteDistribution d1 = window_distribution(labels, lo1, hi1);
  const FiniteDistribution d2 = window_distribution(labels, lo2, hi2);
  Adversary adv;
  adv.name = "two_phase_window";
  adv.avg_lipschitz_L = declared_L;
  adv.next = [d1, d2, switch_t, n_contexts](int t, const Transcript&) {
    return AdversaryRound{(t - 1) % n_contexts, t <= switch_t ? d1 : d2};
  };
  return adv;
}

double stage_loss(const Transcript& prefix, const Group& g, int context, double gamma,
                  double p, double y, const IdEval& id_fn) {
  if (context < 0 || static_cast<std::size_t>(context) >= g.mask.size())
    throw ConfigError("context index out of range for the group mask");
  if (!g.mask[static_cast<std::size_t>(context)] || p != gamma) return 0.0;
  long long n = 0;
  double r = 0.0;
  for (const OnlineRound& round : prefix.rounds) {
    if (!g.mask[static_cast<std::size_t>(round.context)] || round.p != gamma) continue;
    ++n;
    r += id_fn(gamma, round.y);
  }
  const double v = id_fn(gamma, y);
  return (2.0 * v * r + v * v) / static_cast<double>(std::max<long long>(n, 1));
}

double online_bound(double C, double L, int m, int T, std::size_t d) {
  return 2.0 * C * L / m + 2.0 * C * C * std::log(static_cast<double>(T)) / T +
         12.0 * C * C * std::sqrt(std::log(static_cast<double>(d)) / T);
}

OnlineResult run_online(const IdEval& id_fn, const OnlineConfig& cfg,
                        const GroupFamily& groups,
                        const std::vector<std::string>& context_ids,
                        const Adversary& adv, const OnlineObserver& observer) {
  const std::size_t nc = context_ids.size();
  if (nc == 0) throw ConfigError("online run needs at least one context");
  if (groups.groups.empty()) throw ConfigError("online run needs at least one group");
  for (const Group& g : groups.groups)
    if (g.mask.size() != nc)
      throw ConfigError("group mask size does not match the context universe");
  if (cfg.m < 1) throw ConfigError("grid granularity m must be >= 1");
  if (cfg.T < 1) throw ConfigError("T must be positive");
  if (cfg.C <= 0.0) throw ConfigError("C must be positive");
  if (!adv.next) throw ConfigError("adversary has no next function");
  if (!id_fn) throw ConfigError("missing identification function");

  const std::size_t ng = groups.groups.size();
  const std::size_t m = static_cast<std::size_t>(cfg.m);
  const std::size_t d = ng * m;
  if (static_cast<double>(cfg.T) < std::log(static_cast<double>(d)))
    throw ConfigError("T must be at least ln(|groups| * m)");

  const std::vector<double> grid = make_grid(cfg.m);
  const std::vector<double> labels = label_grid(cfg.label_points);
  const std::size_t k = labels.size();

  std::vector<std::vector<double>> V(m, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t jl = 0; jl < k; ++jl) {
      V[i][jl] = id_fn(grid[i], labels[jl]);
      if (std::abs(V[i][jl]) > cfg.C + 1e-9)
        throw ConfigError("identification value exceeds the declared bound C");
    }

  const double c_prime = 3.0 * cfg.C * cfg.C;
  const double eta =
      std::sqrt(std::log(static_cast<double>(d)) / (4.0 * cfg.T * c_prime * c_prime));

  std::vector<double> cum(d, 0.0), chi(d, 0.0), R(d, 0.0);
  std::vector<long long> n(d, 0);
  Transcript tr;
  tr.m = cfg.m;
  tr.grid = grid;
  tr.context_ids = context_ids;
  tr.rounds.reserve(static_cast<std::size_t>(cfg.T));

  std::vector<std::size_t> covering;
  std::vector<double> acoef(m), bcoef(m), col(m), colval;
  std::vector<std::size_t> rep(k);
  std::string key(m * sizeof(double), '\0');

  for (int t = 1; t <= cfg.T; ++t) {
    AdversaryRound ar = adv.next(t, tr);
    if (ar.context < 0 || static_cast<std::size_t>(ar.context) >= nc)
      throw ConfigError("adversary returned an out-of-range context");
    std::vector<std::size_t> sup_idx(ar.labels.support.size());
    for (std::size_t si = 0; si < ar.labels.support.size(); ++si) {
      const double atom = ar.labels.support[si];
      const long long q = std::llround(atom * (k - 1));
      const std::size_t idx =
          static_cast<std::size_t>(std::clamp<long long>(q, 0, (long long)k - 1));
      if (std::abs(labels[idx] - atom) > 1e-9)
        throw ConfigError("adversary label " + fmt_double(atom) +
                          " is not on the label grid");
      sup_idx[si] = idx;
    }

    softmax_into(cum, eta, chi);

    covering.clear();
    for (std::size_t gi = 0; gi < ng; ++gi)
      if (groups.groups[gi].mask[static_cast<std::size_t>(ar.context)])
        covering.push_back(gi);

    // Column jl of the stage matrix is a[i]*V[i][jl] + b[i]*V[i][jl]^2;
    // identical columns are collapsed before the solve.
    std::fill(acoef.begin(), acoef.end(), 0.0);
    std::fill(bcoef.begin(), bcoef.end(), 0.0);
    for (std::size_t gi : covering)
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t c = gi * m + i;
        const double den = static_cast<double>(std::max<long long>(n[c], 1));
        acoef[i] += chi[c] * 2.0 * R[c] / den;
        bcoef[i] += chi[c] / den;
      }
    std::unordered_map<std::string, std::size_t> seen;
    std::vector<std::vector<double>> uniq;
    for (std::size_t jl = 0; jl < k; ++jl) {
      for (std::size_t i = 0; i < m; ++i)
        col[i] = acoef[i] * V[i][jl] + bcoef[i] * V[i][jl] * V[i][jl];
      std::memcpy(key.data(), col.data(), m * sizeof(double));
      const auto [it, inserted] = seen.emplace(key, uniq.size());
      if (inserted) uniq.push_back(col);
      rep[jl] = it->second;
    }
    std::vector<std::vector<double>> A(m, std::vector<double>(uniq.size(), 0.0));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t u = 0; u < uniq.size(); ++u) A[i][u] = uniq[u][i];
    const StageGameSolution sol = solve_stage_game(A);

    const std::size_t pi = sample_index(sol.p, unit_uniform(cfg.seed, t, 0));
    const double p = grid[pi];
    const std::size_t si = sample_index(ar.labels.probs, unit_uniform(cfg.seed, t, 1));
    const double y = ar.labels.support[si];
    const std::size_t yi = sup_idx[si];

    if (observer) {
      colval.assign(uniq.size(), 0.0);
      for (std::size_t u = 0; u < uniq.size(); ++u)
        for (std::size_t i = 0; i < m; ++i) colval[u] += sol.p[i] * uniq[u][i];
      double val = 0.0;
      for (std::size_t s2 = 0; s2 < ar.labels.support.size(); ++s2)
        val += ar.labels.probs[s2] * colval[rep[sup_idx[s2]]];
      RoundView rv;
      rv.t = t;
      rv.context = ar.context;
      rv.labels = &ar.labels;
      rv.chi = &chi;
      rv.P = &sol.p;
      rv.game_value = sol.value;
      rv.weighted_loss = val;
      rv.p = p;
      rv.y = y;
      rv.n = &n;
      rv.R = &R;
      observer(rv);
    }

    const double v = V[pi][yi];
    for (std::size_t gi : covering) {
      const std::size_t c = gi * m + pi;
      const double den = static_cast<double>(std::max<long long>(n[c], 1));
      cum[c] += (2.0 * v * R[c] + v * v) / den;
      n[c] += 1;
      R[c] += v;
    }
    tr.rounds.push_back({t, ar.context, p, y});
  }

  OnlineResult res;
  res.transcript = std::move(tr);
  res.k2 = online_k2(res.transcript, groups, id_fn);
  for (const GroupError& ge : res.k2)
    res.max_alpha = std::max(res.max_alpha, ge.alpha_equivalent);
  res.bound = online_bound(cfg.C, adv.avg_lipschitz_L, cfg.m, cfg.T, d);
  return res;
}

MultiSeedResult run_online_seeds(const IdEval& id_fn, const OnlineConfig& cfg,
                                 const GroupFamily& groups,
                                 const std::vector<std::string>& context_ids,
                                 const Adversary& adv,
                                 const std::vector<std::uint64_t>& seeds, int threads) {
  if (seeds.empty()) throw ConfigError("no seeds given");
  MultiSeedResult out;
  out.seeds = seeds;
  out.runs.resize(seeds.size());
  const int workers =
      std::min<int>(std::max(threads, 1), static_cast<int>(seeds.size()));
  auto run_one = [&](std::size_t i) {
    OnlineConfig c = cfg;
    c.seed = seeds[i];
    out.runs[i] = run_online(id_fn, c, groups, context_ids, adv);
  };
  if (workers <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(seeds.size());
    auto work = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= seeds.size()) return;
        try {
          run_one(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
    for (const std::exception_ptr& e : errors)
      if (e) std::rethrow_exception(e);
  }
  double acc = 0.0;
  for (const OnlineResult& r : out.runs) acc += r.max_alpha;
  out.mean_max_alpha = acc / static_cast<double>(out.runs.size());
  out.bound = out.runs[0].bound;
  return out;
}

AmfReport run_amf_matrix_game(const std::vector<BilinearGame>& games, double C) {
  if (games.empty()) throw ConfigError("no games given");
  if (C <= 0.0) throw ConfigError("C must be positive");
  const std::size_t d = games[0].payoff.size();
  if (d == 0) throw ConfigError("games need at least one coordinate");
  const int T = static_cast<int>(games.size());
  for (const BilinearGame& g : games) {
    if (g.payoff.size() != d)
      throw ConfigError("coordinate count varies across games");
    const std::size_t na = g.payoff[0].size();
    if (na == 0) throw ConfigError("games need at least one learner action");
    for (const auto& mat : g.payoff) {
      if (mat.size() != na) throw ConfigError("ragged game payoff");
      const std::size_t nb = mat[0].size();
      if (nb == 0) throw ConfigError("games need at least one adversary action");
      for (const auto& row : mat) {
        if (row.size() != nb) throw ConfigError("ragged game payoff");
        for (double e : row) {
          if (!std::isfinite(e)) throw ConfigError("game losses must be finite");
          if (std::abs(e) > C + 1e-9)
            throw ConfigError("game loss exceeds the declared bound C");
        }
      }
    }
  }

  const double eta =
      d > 1 ? std::sqrt(std::log(static_cast<double>(d)) / (4.0 * T * C * C)) : 0.0;
  std::vector<double> cum(d, 0.0), chi(d, 0.0);
  AmfReport rep;
  rep.round_values.reserve(games.size());
  for (const BilinearGame& g : games) {
    const std::size_t na = g.payoff[0].size();
    const std::size_t nb = g.payoff[0][0].size();
    softmax_into(cum, eta, chi);
    std::vector<std::vector<double>> M(na, std::vector<double>(nb, 0.0));
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t a2 = 0; a2 < na; ++a2)
        for (std::size_t b2 = 0; b2 < nb; ++b2)
          M[a2][b2] += chi[j] * g.payoff[j][a2][b2];
    const StageGameSolution sol = solve_stage_game(M);
    std::size_t bstar = 0;
    double bbest = -std::numeric_limits<double>::infinity();
    for (std::size_t b2 = 0; b2 < nb; ++b2) {
      double s = 0.0;
      for (std::size_t a2 = 0; a2 < na; ++a2) s += sol.p[a2] * M[a2][b2];
      if (s > bbest) {
        bbest = s;
        bstar = b2;
      }
    }
    double w = -std::numeric_limits<double>::infinity();
    for (std::size_t b2 = 0; b2 < nb; ++b2) {
      std::vector<std::vector<double>> B(na, std::vector<double>(d, 0.0));
      for (std::size_t a2 = 0; a2 < na; ++a2)
        for (std::size_t j = 0; j < d; ++j) B[a2][j] = g.payoff[j][a2][b2];
      w = std::max(w, solve_stage_game(B).value);
    }
    rep.round_values.push_back(w);
    for (std::size_t j = 0; j < d; ++j) {
      double l = 0.0;
      for (std::size_t a2 = 0; a2 < na; ++a2) l += sol.p[a2] * g.payoff[j][a2][bstar];
      cum[j] += l;
    }
  }
  rep.cum_loss = cum;
  double sumw = 0.0;
  for (double w : rep.round_values) sumw += w;
  rep.regret = *std::max_element(cum.begin(), cum.end()) - sumw;
  rep.bound =
      4.0 * C * std::sqrt(static_cast<double>(T) * std::log(static_cast<double>(d)));
  return rep;
}

std::string transcript_csv(const Transcript& tr, const GroupFamily& groups) {
  for (const Group& g : groups.groups)
    if (g.mask.size() != tr.context_ids.size())
      throw ConfigError("group mask size does not match the context universe");
  std::ostringstream ss;
  ss << "t,cell,groups,p,y\n";
  for (const OnlineRound& r : tr.rounds) {
    ss << r.t << ',' << tr.context_ids[static_cast<std::size_t>(r.context)] << ',';
    bool first = true;
    for (const Group& g : groups.groups) {
      if (!g.mask[static_cast<std::size_t>(r.context)]) continue;
      if (!first) ss << ';';
      ss << g.id;
      first = false;
    }
    ss << ',' << fmt_double(r.p) << ',' << fmt_double(r.y) << '\n';
  }
  return ss.str();
}

}  // namespace calibra
