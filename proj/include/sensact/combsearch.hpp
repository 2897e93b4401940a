#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sensact/netmodel.hpp"
#include "sensact/sof.hpp"

namespace sensact {

/// Largest N for which candidate sets are enumerated (4^12 masks).
inline constexpr int kEnumerationCap = 12;

/// Answers "is S feasible for the LMI test". Stubs may return a bare status
/// without a certificate.
using FeasibilityOracle = std::function<SofResult(const Selection&)>;

/// Memoizing oracle on a fixed network.
class CachedOracle {
 public:
  CachedOracle(const DynNetwork& net, SofOptions opts = {});

  SofResult operator()(const Selection& s);
  FeasibilityOracle as_function();

  int solves() const { return solves_; }
  int hits() const { return hits_; }
  const DynNetwork& net() const { return net_; }

 private:
  DynNetwork net_;
  SofOptions opts_;
  std::unordered_map<std::uint64_t, SofResult> cache_;
  int solves_ = 0;
  int hits_ = 0;
};

/// Admissible selections as 2N-bit masks, ordered by H and, within one H,
/// by the concatenated (pi, gamma) string read left to right with 1 before
/// 0, i.e. (1,0,0,0) precedes (0,1,0,0).
struct CandidateSet {
  int num_nodes = 0;
  std::uint64_t constraint_fingerprint = 0;
  std::vector<std::uint64_t> masks;

  int size() const { return static_cast<int>(masks.size()); }
  Selection at(int index) const { return Selection::from_mask(masks.at(index), num_nodes); }
};

/// Enumerates all 4^N strings, keeps the members of `constraint` and sorts
/// them. Throws CapExceededError for N > kEnumerationCap.
CandidateSet build_candidate_set(const LogisticConstraint& constraint, int num_nodes);

/// Ordering used by candidate sets: true when a comes strictly before b.
bool candidate_before(std::uint64_t a, std::uint64_t b, int num_nodes);

/// True iff every active bit of s is active in sq (sq | s == sq).
inline bool submask(std::uint64_t sq, std::uint64_t s) { return (sq | s) == sq; }
bool submask(const Selection& sq, const Selection& s);

struct BsaStep {
  int iteration = 0;
  int sigma = 0;               // |S_p| before the test
  int q = 0;                   // 1-based midpoint
  std::uint64_t mask = 0;      // S_q
  SofStatus status = SofStatus::kInconclusive;
  int removed = 0;
};

struct BsaResult {
  Selection best;          // all-ones when nothing was improved
  bool improved = false;
  std::optional<SofCertificate> certificate;
  int iterations = 0;
  int inconclusive = 0;
  std::vector<BsaStep> trace;
  /// Candidate set at the start of each iteration, when requested.
  std::vector<std::vector<std::uint64_t>> snapshots;
  double wall_seconds = 0.0;
};

/// Binary search over the ordered candidate set. An Inconclusive answer is
/// handled like Infeasible and counted.
BsaResult bsa(const CandidateSet& candidates, const FeasibilityOracle& oracle,
              bool record_snapshots = false);

BsaResult bsa(const DynNetwork& net, const CandidateSet& candidates,
              const SofOptions& opts = {});

struct OracleResult {
  bool found = false;
  Selection best;
  int H = -1;
  std::optional<SofCertificate> certificate;
  int tested = 0;
};

/// Tests candidates in order and returns the first feasible one, which is
/// optimal because the order is by H.
OracleResult exhaustive_oracle(const CandidateSet& candidates,
                               const FeasibilityOracle& oracle);

OracleResult exhaustive_oracle(const DynNetwork& net,
                               const LogisticConstraint& constraint,
                               const SofOptions& opts = {});

/// Pairs (infeasible S, feasible S' with S' a proper submask of S) that
/// contradict "subsets of infeasible selections are infeasible".
struct MonotonicityReport {
  int checked = 0;  // selections tested
  std::vector<std::pair<std::uint64_t, std::uint64_t>> violations;

  bool holds() const { return violations.empty(); }
};

/// Checks the premise where binary search relies on it: for every S_q the
/// search found infeasible, all admissible proper submasks must be
/// infeasible as well.
MonotonicityReport check_search_premise(const BsaResult& run,
                                        const CandidateSet& candidates,
                                        const FeasibilityOracle& oracle);

/// Checks the premise on the whole candidate set: every admissible
/// one-bit extension of a feasible selection must be feasible.
MonotonicityReport check_monotonicity(const CandidateSet& candidates,
                                      const FeasibilityOracle& oracle);

/// Newline-delimited hex masks after a small header.
void write_candidate_set(const CandidateSet& set, std::ostream& os);
CandidateSet read_candidate_set(std::istream& is);
void save_candidate_set(const CandidateSet& set, const std::string& path);
CandidateSet load_candidate_set(const std::string& path);

}  // namespace sensact
