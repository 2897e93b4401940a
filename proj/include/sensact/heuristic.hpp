#pragma once

#include <cstdint>
#include <optional>
#include <unordered_set>
#include <vector>

#include "sensact/combsearch.hpp"
#include "sensact/netmodel.hpp"
#include "sensact/rng.hpp"
#include "sensact/sof.hpp"

namespace sensact {

/// Masks known to be useless: infeasible for the LMI test, or outside the
/// logistic constraint. Never shrinks.
class ForbiddenSet {
 public:
  bool contains(std::uint64_t mask) const { return masks_.count(mask) > 0; }
  void insert(std::uint64_t mask) {
    ++insertions_;
    masks_.insert(mask);
  }
  int size() const { return static_cast<int>(masks_.size()); }
  int insertions() const { return insertions_; }

 private:
  std::unordered_set<std::uint64_t> masks_;
  int insertions_ = 0;
};

struct HeuristicOptions {
  int max_iter = 50;
  int max_infeasibility = 10;
  int max_random = 10000;
  std::uint64_t seed = 1;
  /// Search window; defaults to the constraint's count bounds.
  std::optional<int> wmin, wmax;
};

struct HeuristicStats {
  int lmi_solves = 0;
  int infeasible = 0;
  int inconclusive = 0;
  int zero_tuples = 0;
  long draws = 0;
  long rejected_draws = 0;
  int initial_wmin = 0, initial_wmax = 0;
  int final_wmin = 0, final_wmax = 0;
  int final_q = 0;
  /// Window after every outer pass, for checking that it never re-expands.
  std::vector<std::pair<int, int>> window_trace;
  double wall_seconds = 0.0;
};

struct HeuristicResult {
  Selection best;  // all-ones unless improved
  bool improved = false;
  std::optional<SofCertificate> certificate;
  HeuristicStats stats;
};

/// Draws a uniformly random mask with exactly q of the 2N bits set until one
/// is admissible and not forbidden. After max_random rejected draws it
/// returns 0 (the zero tuple) and raises wmin to q + 1.
std::uint64_t gen_candidate(int q, int num_nodes, const ForbiddenSet& forbidden,
                            const LogisticConstraint& constraint,
                            const HeuristicOptions& opts, Rng& rng, int& wmin,
                            HeuristicStats* stats = nullptr);

/// Randomized forbidden-set search for a selection with few active bits.
HeuristicResult heu(const LogisticConstraint& constraint, const HeuristicOptions& opts,
                    const FeasibilityOracle& oracle);

HeuristicResult heu(const DynNetwork& net, const LogisticConstraint& constraint,
                    const HeuristicOptions& opts, const SofOptions& sof = {});

}  // namespace sensact
