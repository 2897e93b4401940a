#include "sensact/heuristic.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "sensact/error.hpp"

namespace sensact {

namespace {

int ceil_half(int a, int b) {
  return static_cast<int>(std::ceil(0.5 * (a + b)));
}

std::uint64_t random_subset(int q, int num_bits, Rng& rng) {
  // Partial Fisher-Yates over the bit positions.
  std::vector<int> idx(num_bits);
  std::iota(idx.begin(), idx.end(), 0);
  std::uint64_t mask = 0;
  for (int i = 0; i < q; ++i) {
    const int j = i + static_cast<int>(rng.below(num_bits - i));
    std::swap(idx[i], idx[j]);
    mask |= std::uint64_t{1} << idx[i];
  }
  return mask;
}

}  // namespace

std::uint64_t gen_candidate(int q, int num_nodes, const ForbiddenSet& forbidden,
                            const LogisticConstraint& constraint,
                            const HeuristicOptions& opts, Rng& rng, int& wmin,
                            HeuristicStats* stats) {
  const int nb = 2 * num_nodes;
  if (q < 0 || q > nb) throw InputError("candidate count outside [0, 2N]");
  int r = 1;
  while (r <= opts.max_random) {
    const std::uint64_t s = random_subset(q, nb, rng);
    if (stats) ++stats->draws;
    if (!forbidden.contains(s) && constraint.membership(s)) return s;
    if (stats) ++stats->rejected_draws;
    ++r;
    if (r > opts.max_random) wmin = q + 1;
  }
  return 0;
}

HeuristicResult heu(const LogisticConstraint& constraint, const HeuristicOptions& opts,
                    const FeasibilityOracle& oracle) {
  if (opts.max_iter < 1 || opts.max_infeasibility < 1 || opts.max_random < 1) {
    throw InputError("heuristic limits must be positive");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const int nn = constraint.num_nodes();
  HeuristicResult res;
  res.best = Selection::all_ones(nn);
  HeuristicStats& st = res.stats;

  int wmin = opts.wmin.value_or(constraint.wmin());
  int wmax = opts.wmax.value_or(constraint.wmax());
  if (wmin < 0 || wmax > 2 * nn || wmin > wmax) {
    throw InputError("heuristic window must satisfy 0 <= wmin <= wmax <= 2N");
  }
  st.initial_wmin = wmin;
  st.initial_wmax = wmax;

  ForbiddenSet Z;
  Rng rng(opts.seed);
  int t = 1;
  int p = 1;
  int q = ceil_half(wmin, wmax);
  while (p <= opts.max_iter && wmin <= q && q <= wmax) {
    while (p <= opts.max_iter && t <= opts.max_infeasibility) {
      const std::uint64_t s = gen_candidate(q, nn, Z, constraint, opts, rng, wmin, &st);
      if (s == 0) {
        ++st.zero_tuples;
        t = 1;
        break;
      }
      const Selection sel = Selection::from_mask(s, nn);
      SofResult r = oracle(sel);
      ++st.lmi_solves;
      if (r.feasible()) {
        res.best = sel;
        res.improved = true;
        res.certificate = std::move(r.certificate);
        wmax = q - 1;
        t = 1;
        ++p;
        break;
      }
      if (r.status == SofStatus::kInconclusive) {
        ++st.inconclusive;
      } else {
        ++st.infeasible;
      }
      Z.insert(s);
      ++t;
      ++p;
    }
    if (t > opts.max_infeasibility) {
      q = ceil_half(q, wmax);
      t = 1;
    } else {
      q = ceil_half(wmin, wmax);
    }
    st.window_trace.emplace_back(wmin, wmax);
  }
  st.final_wmin = wmin;
  st.final_wmax = wmax;
  st.final_q = q;
  st.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

HeuristicResult heu(const DynNetwork& net, const LogisticConstraint& constraint,
                    const HeuristicOptions& opts, const SofOptions& sof) {
  if (constraint.num_nodes() != net.num_nodes()) {
    throw DimensionError("constraint node count", net.num_nodes(),
                         constraint.num_nodes());
  }
  return heu(constraint, opts,
             [&](const Selection& s) { return selection_feasible(net, s, sof); });
}

}  // namespace sensact
