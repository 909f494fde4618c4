#include "trajphd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "trajphd/assignment.hpp"
#include "trajphd/errors.hpp"

namespace trajphd {

namespace {

// Pair and per-track costs of one time step. delta(i, j) is the change in
// cost from assigning A-track i to B-track j instead of leaving both
// unassigned: negative only if both exist closer than c.
struct StepCosts {
  double base = 0.0;
  Eigen::MatrixXd delta;
  Eigen::MatrixXd dist_pow;
  std::vector<char> exist_a;
  std::vector<char> exist_b;
};

Eigen::VectorXd compared(const Trajectory& t, int s, const MetricConfig& cfg) {
  const auto x = t.state_at(s);
  if (cfg.position_rows.empty()) return x;
  Eigen::VectorXd out(static_cast<Eigen::Index>(cfg.position_rows.size()));
  for (std::size_t r = 0; r < cfg.position_rows.size(); ++r) out(static_cast<Eigen::Index>(r)) = x(cfg.position_rows[r]);
  return out;
}

std::vector<StepCosts> step_costs(const TrajectorySet& a, const TrajectorySet& b,
                                  const MetricConfig& cfg, int k) {
  const double cp = std::pow(cfg.c, cfg.p);
  const double half = cp / 2.0;
  const auto na = static_cast<Eigen::Index>(a.size());
  const auto nb = static_cast<Eigen::Index>(b.size());
  std::vector<StepCosts> steps(static_cast<std::size_t>(std::max(k, 0)));
  for (int s = 1; s <= k; ++s) {
    StepCosts& sc = steps[static_cast<std::size_t>(s - 1)];
    sc.delta = Eigen::MatrixXd::Zero(na, nb);
    sc.dist_pow = Eigen::MatrixXd::Constant(na, nb, cp);
    sc.exist_a.resize(a.size());
    sc.exist_b.resize(b.size());
    std::vector<Eigen::VectorXd> pa(a.size()), pb(b.size());
    for (Eigen::Index i = 0; i < na; ++i) {
      sc.exist_a[i] = a[i].exists_at(s);
      if (sc.exist_a[i]) {
        sc.base += half;
        pa[i] = compared(a[i], s, cfg);
      }
    }
    for (Eigen::Index j = 0; j < nb; ++j) {
      sc.exist_b[j] = b[j].exists_at(s);
      if (sc.exist_b[j]) {
        sc.base += half;
        pb[j] = compared(b[j], s, cfg);
      }
    }
    for (Eigen::Index i = 0; i < na; ++i) {
      if (!sc.exist_a[i]) continue;
      for (Eigen::Index j = 0; j < nb; ++j) {
        if (!sc.exist_b[j]) continue;
        const double dp = std::pow((pa[i] - pb[j]).norm(), cfg.p);
        sc.dist_pow(i, j) = dp;
        if (dp < cp) sc.delta(i, j) = dp - cp;
      }
    }
  }
  return steps;
}

// Adds the cost of one step under assignment `assign` (A-track -> B-track or
// -1) to the breakdown. A is the ground truth unless `swapped`.
void attribute_step(const StepCosts& sc, const std::vector<int>& assign, double half, bool swapped,
                    MetricBreakdown& out) {
  std::vector<char> matched_b(sc.exist_b.size(), 0);
  double miss_a = 0.0, miss_b = 0.0;
  for (std::size_t i = 0; i < assign.size(); ++i) {
    const int j = assign[i];
    if (j >= 0 && sc.delta(static_cast<Eigen::Index>(i), j) < 0.0) {
      out.localization += sc.dist_pow(static_cast<Eigen::Index>(i), j);
      matched_b[static_cast<std::size_t>(j)] = 1;
    } else if (sc.exist_a[i]) {
      miss_a += half;
    }
  }
  for (std::size_t j = 0; j < sc.exist_b.size(); ++j) {
    if (sc.exist_b[j] && !matched_b[j]) miss_b += half;
  }
  out.missed += swapped ? miss_b : miss_a;
  out.false_targets += swapped ? miss_a : miss_b;
}

double switch_cost(const std::vector<int>& prev, const std::vector<int>& cur, double w) {
  double s = 0.0;
  for (std::size_t i = 0; i < prev.size(); ++i) {
    if (prev[i] == cur[i]) continue;
    s += (prev[i] >= 0 && cur[i] >= 0) ? 2.0 * w : w;
  }
  return s;
}

void finish(MetricBreakdown& b, double p) { b.total = std::pow(std::max(b.total_pow(), 0.0), 1.0 / p); }

// Minimum over partial matchings of sum delta(i, j); delta <= 0 so a full
// matching of the smaller side is optimal.
std::vector<int> best_matching(const Eigen::MatrixXd& delta) {
  std::vector<int> m = solve_assignment(delta);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] >= 0 && delta(static_cast<Eigen::Index>(i), m[i]) >= 0.0) m[i] = -1;
  }
  return m;
}

double matching_value(const Eigen::MatrixXd& delta, const std::vector<int>& m) {
  double v = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] >= 0) v += delta(static_cast<Eigen::Index>(i), m[i]);
  }
  return v;
}

// Assignment state space of the DP: injective partial maps A -> B encoded
// in mixed radix (|B| + 1)^{|A|}, digit 0 meaning unassigned.
struct AssignmentSpace {
  int na = 0;
  int nb = 0;
  std::vector<std::uint8_t> digits;  // states x na
  std::vector<std::uint64_t> used;   // bitmask of assigned B-tracks
  std::vector<std::int64_t> codes;
  std::vector<std::int32_t> index_of_code;
  std::vector<std::int64_t> radix_pow;

  std::size_t size() const { return codes.size(); }
  int digit(std::size_t s, int i) const { return digits[s * static_cast<std::size_t>(na) + i]; }
};

std::size_t count_states(int na, int nb) {
  // sum_j C(na, j) C(nb, j) j!
  double total = 0.0;
  for (int j = 0; j <= std::min(na, nb); ++j) {
    double term = 1.0;
    for (int r = 0; r < j; ++r) term *= static_cast<double>(na - r) * static_cast<double>(nb - r) / (r + 1);
    total += term;
  }
  return total > 1e18 ? std::numeric_limits<std::size_t>::max() : static_cast<std::size_t>(total);
}

AssignmentSpace build_space(int na, int nb, std::size_t cap) {
  const std::size_t count = count_states(na, nb);
  if (count > cap || nb > 63) {
    throw MetricIntractable("trajectory metric needs " + std::to_string(count) +
                            " assignment states per step (cap " + std::to_string(cap) + ")");
  }
  AssignmentSpace sp;
  sp.na = na;
  sp.nb = nb;
  sp.radix_pow.assign(static_cast<std::size_t>(na) + 1, 1);
  for (int i = 1; i <= na; ++i) {
    sp.radix_pow[i] = sp.radix_pow[i - 1] * (nb + 1);
    if (sp.radix_pow[i] > (std::int64_t{1} << 28)) {
      throw MetricIntractable("trajectory metric assignment encoding too large");
    }
  }
  sp.index_of_code.assign(static_cast<std::size_t>(sp.radix_pow[na]), -1);
  sp.codes.reserve(count);
  sp.digits.reserve(count * static_cast<std::size_t>(na));

  std::vector<std::uint8_t> cur(static_cast<std::size_t>(na), 0);
  auto rec = [&](auto&& self, int i, std::uint64_t mask, std::int64_t code) -> void {
    if (i == na) {
      sp.index_of_code[static_cast<std::size_t>(code)] = static_cast<std::int32_t>(sp.codes.size());
      sp.codes.push_back(code);
      sp.used.push_back(mask);
      sp.digits.insert(sp.digits.end(), cur.begin(), cur.end());
      return;
    }
    cur[i] = 0;
    self(self, i + 1, mask, code);
    for (int j = 1; j <= nb; ++j) {
      if (mask & (std::uint64_t{1} << (j - 1))) continue;
      cur[i] = static_cast<std::uint8_t>(j);
      self(self, i + 1, mask | (std::uint64_t{1} << (j - 1)), code + j * sp.radix_pow[i]);
    }
    cur[i] = 0;
  };
  rec(rec, 0, 0, 0);
  return sp;
}

std::vector<int> decode(const AssignmentSpace& sp, std::size_t s) {
  std::vector<int> a(static_cast<std::size_t>(sp.na));
  for (int i = 0; i < sp.na; ++i) a[i] = sp.digit(s, i) - 1;
  return a;
}

MetricBreakdown exact_dp(const std::vector<StepCosts>& steps, int na, int nb,
                         const MetricConfig& cfg, bool swapped) {
  const double half = std::pow(cfg.c, cfg.p) / 2.0;
  const double w = std::pow(cfg.gamma, cfg.p) / 2.0;
  const AssignmentSpace sp = build_space(na, nb, cfg.max_dp_states);
  const std::size_t S = sp.size();
  const std::size_t T = steps.size();

  std::vector<double> value(S), dist(S), cost(S);
  std::vector<std::int32_t> src(S);
  std::vector<std::vector<std::int32_t>> back(T);
  std::vector<std::size_t> order(S);
  std::vector<char> done(S);
  std::vector<std::int32_t> fifo;
  fifo.reserve(S);

  auto step_cost = [&](const StepCosts& sc) {
    for (std::size_t s = 0; s < S; ++s) {
      double v = sc.base;
      for (int i = 0; i < na; ++i) {
        const int d = sp.digit(s, i);
        if (d) v += sc.delta(i, d - 1);
      }
      cost[s] = v;
    }
  };

  for (std::size_t t = 0; t < T; ++t) {
    step_cost(steps[t]);
    if (t == 0) {
      value = cost;
      continue;
    }
    // min over predecessors of value + w * |symmetric difference|: a
    // multi-source Dijkstra over single add/remove moves, all of weight w.
    dist = value;
    std::iota(src.begin(), src.end(), 0);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return value[x] < value[y]; });
    std::fill(done.begin(), done.end(), 0);
    fifo.clear();
    std::size_t head = 0, next = 0;
    while (true) {
      while (next < S && (done[order[next]] || dist[order[next]] < value[order[next]])) ++next;
      while (head < fifo.size() && done[static_cast<std::size_t>(fifo[head])]) ++head;
      std::size_t cur;
      if (next < S && (head >= fifo.size() || value[order[next]] <= dist[static_cast<std::size_t>(fifo[head])])) {
        cur = order[next++];
      } else if (head < fifo.size()) {
        cur = static_cast<std::size_t>(fifo[head++]);
      } else {
        break;
      }
      done[cur] = 1;
      const double nd = dist[cur] + w;
      const std::int64_t code = sp.codes[cur];
      auto relax = [&](std::int64_t ncode) {
        const auto nbr = static_cast<std::size_t>(sp.index_of_code[static_cast<std::size_t>(ncode)]);
        if (!done[nbr] && nd < dist[nbr]) {
          dist[nbr] = nd;
          src[nbr] = src[cur];
          fifo.push_back(static_cast<std::int32_t>(nbr));
        }
      };
      for (int i = 0; i < na; ++i) {
        const int d = sp.digit(cur, i);
        if (d) {
          relax(code - d * sp.radix_pow[i]);
        } else {
          for (int j = 1; j <= nb; ++j) {
            if (!(sp.used[cur] & (std::uint64_t{1} << (j - 1)))) relax(code + j * sp.radix_pow[i]);
          }
        }
      }
    }
    back[t] = src;
    for (std::size_t s = 0; s < S; ++s) value[s] = dist[s] + cost[s];
  }

  std::size_t best = 0;
  for (std::size_t s = 1; s < S; ++s) {
    if (value[s] < value[best]) best = s;
  }
  std::vector<std::size_t> path(T);
  if (T > 0) {
    path[T - 1] = best;
    for (std::size_t t = T - 1; t > 0; --t) path[t - 1] = static_cast<std::size_t>(back[t][path[t]]);
  }

  MetricBreakdown out;
  std::vector<int> prev;
  for (std::size_t t = 0; t < T; ++t) {
    const std::vector<int> cur = decode(sp, path[t]);
    attribute_step(steps[t], cur, half, swapped, out);
    if (t > 0) out.switches += switch_cost(prev, cur, w);
    prev = cur;
  }
  finish(out, cfg.p);
  return out;
}

}  // namespace

void MetricConfig::validate() const {
  if (!(p >= 1) || !(c > 0) || !(gamma >= 0) || alpha != 2.0) {
    throw ConfigError("metric needs p >= 1, c > 0, gamma >= 0 and alpha = 2");
  }
}

MetricBreakdown gospa(const PointSet& truth, const PointSet& estimate, const MetricConfig& cfg) {
  cfg.validate();
  const double cp = std::pow(cfg.c, cfg.p);
  const auto n = static_cast<Eigen::Index>(truth.size());
  const auto m = static_cast<Eigen::Index>(estimate.size());
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(n, m);
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      dist(i, j) = std::pow((truth[i] - estimate[j]).norm(), cfg.p);
      if (dist(i, j) < cp) delta(i, j) = dist(i, j) - cp;
    }
  }
  const std::vector<int> match = best_matching(delta);
  MetricBreakdown out;
  int matched = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (match[i] >= 0) {
      out.localization += dist(i, match[i]);
      ++matched;
    }
  }
  out.missed = cp / 2.0 * static_cast<double>(n - matched);
  out.false_targets = cp / 2.0 * static_cast<double>(m - matched);
  finish(out, cfg.p);
  return out;
}

double ospa(const PointSet& x, const PointSet& y, const MetricConfig& cfg) {
  cfg.validate();
  const PointSet& small = x.size() <= y.size() ? x : y;
  const PointSet& large = x.size() <= y.size() ? y : x;
  if (large.empty()) return 0.0;
  const double cp = std::pow(cfg.c, cfg.p);
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(small.size()), static_cast<Eigen::Index>(large.size()));
  for (std::size_t i = 0; i < small.size(); ++i) {
    for (std::size_t j = 0; j < large.size(); ++j) {
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::min(std::pow((small[i] - large[j]).norm(), cfg.p), cp);
    }
  }
  const double matched = small.empty() ? 0.0 : assignment_cost(cost, solve_assignment(cost));
  const double total = matched + cp * static_cast<double>(large.size() - small.size());
  return std::pow(total / static_cast<double>(large.size()), 1.0 / cfg.p);
}

PointSet positions_at(const TrajectorySet& set, int k, const MetricConfig& cfg) {
  PointSet out;
  for (const auto& t : set) {
    if (t.exists_at(k)) out.push_back(compared(t, k, cfg));
  }
  return out;
}

MetricBreakdown trajectory_metric(const TrajectorySet& truth, const TrajectorySet& estimate,
                                  const MetricConfig& cfg, int k) {
  cfg.validate();
  const double half = std::pow(cfg.c, cfg.p) / 2.0;

  // Index DP states by the smaller set.
  const bool swapped = estimate.size() < truth.size();
  const TrajectorySet& a = swapped ? estimate : truth;
  const TrajectorySet& b = swapped ? truth : estimate;
  const std::vector<StepCosts> steps = step_costs(a, b, cfg, k);

  if (cfg.switch_free_shortcut) {
    // Sum of per-step optima is a lower bound on any assignment sequence;
    // if one constant assignment attains it, it is optimal.
    double lower = 0.0;
    Eigen::MatrixXd summed = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(a.size()),
                                                   static_cast<Eigen::Index>(b.size()));
    double base = 0.0;
    for (const auto& sc : steps) {
      lower += sc.base + matching_value(sc.delta, best_matching(sc.delta));
      summed += sc.delta;
      base += sc.base;
    }
    const std::vector<int> constant = best_matching(summed);
    const double value = base + matching_value(summed, constant);
    if (value <= lower + 1e-12 * std::max(1.0, std::abs(lower))) {
      MetricBreakdown out;
      for (const auto& sc : steps) attribute_step(sc, constant, half, swapped, out);
      finish(out, cfg.p);
      return out;
    }
  }
  return exact_dp(steps, static_cast<int>(a.size()), static_cast<int>(b.size()), cfg, swapped);
}

MetricBreakdown gospa_over_time(const TrajectorySet& truth, const TrajectorySet& estimate,
                                const MetricConfig& cfg, int k) {
  MetricBreakdown out;
  for (int s = 1; s <= k; ++s) {
    const MetricBreakdown g =
        gospa(positions_at(truth, s, cfg), positions_at(estimate, s, cfg), cfg);
    out.localization += g.localization;
    out.missed += g.missed;
    out.false_targets += g.false_targets;
  }
  finish(out, cfg.p);
  return out;
}

double ospa_pow_over_time(const TrajectorySet& truth, const TrajectorySet& estimate,
                          const MetricConfig& cfg, int k) {
  double total = 0.0;
  for (int s = 1; s <= k; ++s) {
    total += std::pow(ospa(positions_at(truth, s, cfg), positions_at(estimate, s, cfg), cfg), cfg.p);
  }
  return total;
}

double rms_over_runs(const std::vector<double>& squared_errors, int k) {
  if (squared_errors.empty() || k < 1) throw ConfigError("RMS needs at least one run and k >= 1");
  const double sum = std::accumulate(squared_errors.begin(), squared_errors.end(), 0.0);
  return std::sqrt(sum / (static_cast<double>(squared_errors.size()) * k));
}

double rms_over_time(const std::vector<double>& per_step) {
  if (per_step.empty()) throw ConfigError("RMS over time needs at least one step");
  double sum = 0.0;
  for (double d : per_step) sum += d * d;
  return std::sqrt(sum / static_cast<double>(per_step.size()));
}

}  // namespace trajphd
