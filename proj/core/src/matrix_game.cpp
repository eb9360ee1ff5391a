#include "calibra/matrix_game.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <utility>

#include "calibra/errors.hpp"

namespace calibra {

namespace {

constexpr double kGapTol = 1e-7;
constexpr double kPivotTol = 1e-9;

void validate(const std::vector<std::vector<double>>& a) {
  if (a.empty() || a[0].empty()) throw ConfigError("empty game matrix");
  for (const std::vector<double>& row : a) {
    if (row.size() != a[0].size()) throw ConfigError("ragged game matrix");
    for (double v : row)
      if (!std::isfinite(v)) throw ConfigError("game matrix entries must be finite");
  }
}

// max_j (p^T A)_j and min_i (A q)_i; any feasible pair sandwiches the value.
std::pair<double, double> certificates(const std::vector<std::vector<double>>& a,
                                       const std::vector<double>& p,
                                       const std::vector<double>& q) {
  const std::size_t n = a.size(), k = a[0].size();
  double maxcol = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i] * a[i][j];
    maxcol = std::max(maxcol, s);
  }
  double minrow = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += a[i][j] * q[j];
    minrow = std::min(minrow, s);
  }
  return {maxcol, minrow};
}

// Primal simplex on: maximize sum x  s.t.  A'^T x <= 1, x >= 0, where
// A' = A + shift has entries >= 1. Then p = x / sum x, value = 1/sum x, and
// the slack reduced costs recover the dual (column) mixture.
bool simplex(const std::vector<std::vector<double>>& a, StageGameSolution& out) {
  const std::size_t n = a.size(), k = a[0].size();
  double lo = a[0][0];
  for (const auto& row : a)
    for (double v : row) lo = std::min(lo, v);
  const double shift = 1.0 - lo;

  const std::size_t cols = n + k + 1;
  std::vector<std::vector<double>> t(k, std::vector<double>(cols, 0.0));
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t i = 0; i < n; ++i) t[r][i] = a[i][r] + shift;
    t[r][n + r] = 1.0;
    t[r][cols - 1] = 1.0;
  }
  std::vector<double> d(cols, 0.0);
  for (std::size_t i = 0; i < n; ++i) d[i] = 1.0;
  std::vector<std::size_t> basis(k);
  for (std::size_t r = 0; r < k; ++r) basis[r] = n + r;

  const int cap = 50000;
  for (int it = 0; it < cap; ++it) {
    std::size_t enter = cols - 1;
    for (std::size_t j = 0; j + 1 < cols; ++j)
      if (d[j] > kPivotTol) {
        enter = j;
        break;
      }
    if (enter == cols - 1) break;
    std::size_t leave = k;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < k; ++r) {
      if (t[r][enter] <= kPivotTol) continue;
      const double ratio = t[r][cols - 1] / t[r][enter];
      if (ratio < best - 1e-15 ||
          (std::abs(ratio - best) <= 1e-15 && (leave == k || basis[r] < basis[leave]))) {
        best = ratio;
        leave = r;
      }
    }
    if (leave == k) return false;
    const double piv = t[leave][enter];
    for (std::size_t j = 0; j < cols; ++j) t[leave][j] /= piv;
    for (std::size_t r = 0; r < k; ++r) {
      if (r == leave || t[r][enter] == 0.0) continue;
      const double f = t[r][enter];
      for (std::size_t j = 0; j < cols; ++j) t[r][j] -= f * t[leave][j];
    }
    const double f = d[enter];
    for (std::size_t j = 0; j < cols; ++j) d[j] -= f * t[leave][j];
    basis[leave] = enter;
  }
  if (*std::max_element(d.begin(), d.end() - 1) > kPivotTol) return false;

  std::vector<double> x(n, 0.0);
  for (std::size_t r = 0; r < k; ++r)
    if (basis[r] < n) x[basis[r]] = std::max(0.0, t[r][cols - 1]);
  double sx = 0.0;
  for (double v : x) sx += v;
  std::vector<double> u(k, 0.0);
  double su = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    u[r] = std::max(0.0, -d[n + r]);
    su += u[r];
  }
  if (sx <= 0.0 || su <= 0.0) return false;
  out.p.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out.p[i] = x[i] / sx;
  out.q.assign(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) out.q[j] = u[j] / su;
  return true;
}

// Row-player multiplicative weights against best-responding columns; the
// averaged pair is checked against the same certificates.
bool mw_fallback(const std::vector<std::vector<double>>& a, StageGameSolution& out) {
  const std::size_t n = a.size(), k = a[0].size();
  double lo = a[0][0], hi = a[0][0];
  for (const auto& row : a)
    for (double v : row) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double range = std::max(hi - lo, 1e-30);
  const int cap = 200000;
  std::vector<double> w(n, 1.0), psum(n, 0.0), qsum(k, 0.0);
  const double eta = std::sqrt(std::log(std::max<std::size_t>(n, 2)) / cap);
  for (int s = 0; s < cap; ++s) {
    double tot = 0.0;
    for (double v : w) tot += v;
    std::size_t bj = 0;
    double bval = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      double col = 0.0;
      for (std::size_t i = 0; i < n; ++i) col += (w[i] / tot) * a[i][j];
      if (col > bval) {
        bval = col;
        bj = j;
      }
    }
    qsum[bj] += 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      psum[i] += w[i] / tot;
      w[i] *= std::exp(-eta * (a[i][bj] - lo) / range);
    }
  }
  out.p.assign(n, 0.0);
  out.q.assign(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) out.p[i] = psum[i] / cap;
  for (std::size_t j = 0; j < k; ++j) out.q[j] = qsum[j] / cap;
  return true;
}

}  // namespace

std::string matrix_hash(const std::vector<std::vector<double>>& a) {
  std::uint64_t h = 14695981039346656037ULL;
  auto eat = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffULL;
      h *= 1099511628211ULL;
    }
  };
  eat(a.size());
  for (const auto& row : a) {
    eat(row.size());
    for (double v : row) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      eat(bits);
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

StageGameSolution solve_stage_game(const std::vector<std::vector<double>>& a) {
  validate(a);
  StageGameSolution s;
  if (simplex(a, s)) {
    const auto [maxcol, minrow] = certificates(a, s.p, s.q);
    if (maxcol - minrow <= kGapTol) {
      s.value = 0.5 * (maxcol + minrow);
      return s;
    }
  }
  StageGameSolution f;
  if (mw_fallback(a, f)) {
    const auto [maxcol, minrow] = certificates(a, f.p, f.q);
    if (maxcol - minrow <= kGapTol) {
      f.value = 0.5 * (maxcol + minrow);
      return f;
    }
  }
  throw SolverError("stage game solver missed the 1e-7 duality gap; matrix " +
                    matrix_hash(a));
}

}  // namespace calibra
