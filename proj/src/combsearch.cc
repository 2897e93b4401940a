#include "sensact/combsearch.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "sensact/error.hpp"

namespace sensact {

CachedOracle::CachedOracle(const DynNetwork& net, SofOptions opts)
    : net_(net), opts_(std::move(opts)) {}

SofResult CachedOracle::operator()(const Selection& s) {
  const std::uint64_t key = s.to_mask();
  if (auto it = cache_.find(key); it != cache_.end()) {
    ++hits_;
    return it->second;
  }
  SofResult r = selection_feasible(net_, s, opts_);
  if (r.solver_called) ++solves_;
  return cache_.emplace(key, std::move(r)).first->second;
}

FeasibilityOracle CachedOracle::as_function() {
  return [this](const Selection& s) { return (*this)(s); };
}

namespace {

// Mask with bit k moved to position 2N-1-k, so that numeric order matches
// reading the tuple left to right.
std::uint64_t tuple_key(std::uint64_t mask, int num_bits) {
  std::uint64_t r = 0;
  for (int k = 0; k < num_bits; ++k) {
    if (mask >> k & 1u) r |= std::uint64_t{1} << (num_bits - 1 - k);
  }
  return r;
}

}  // namespace

bool candidate_before(std::uint64_t a, std::uint64_t b, int num_nodes) {
  const int ha = std::popcount(a), hb = std::popcount(b);
  if (ha != hb) return ha < hb;
  return tuple_key(a, 2 * num_nodes) > tuple_key(b, 2 * num_nodes);
}

CandidateSet build_candidate_set(const LogisticConstraint& constraint, int num_nodes) {
  if (num_nodes < 1) throw InputError("candidate set needs at least one node");
  if (num_nodes > kEnumerationCap) {
    throw CapExceededError(
        "candidate enumeration is limited; use the heuristic or the MI-SDP for "
        "larger networks",
        kEnumerationCap, num_nodes);
  }
  if (constraint.num_nodes() != num_nodes) {
    throw DimensionError("constraint node count", num_nodes, constraint.num_nodes());
  }
  const int nb = 2 * num_nodes;
  CandidateSet set;
  set.num_nodes = num_nodes;
  set.constraint_fingerprint = constraint.fingerprint();
  // Bucket by H, then order each bucket by its tuple key descending.
  std::vector<std::vector<std::uint64_t>> by_h(nb + 1);
  const std::uint64_t total = std::uint64_t{1} << nb;
  for (std::uint64_t m = 0; m < total; ++m) {
    const int h = std::popcount(m);
    if (h < constraint.wmin() || h > constraint.wmax()) continue;
    if (constraint.membership(m)) by_h[h].push_back(tuple_key(m, nb));
  }
  for (auto& bucket : by_h) {
    std::sort(bucket.begin(), bucket.end(), std::greater<>());
    for (std::uint64_t key : bucket) set.masks.push_back(tuple_key(key, nb));
  }
  return set;
}

bool submask(const Selection& sq, const Selection& s) {
  if (sq.num_nodes() != s.num_nodes()) {
    throw DimensionError("selection length", sq.num_nodes(), s.num_nodes());
  }
  for (int k = 0; k < sq.num_bits(); ++k) {
    if (s.bit(k) && !sq.bit(k)) return false;
  }
  return true;
}

BsaResult bsa(const CandidateSet& candidates, const FeasibilityOracle& oracle,
              bool record_snapshots) {
  const auto t0 = std::chrono::steady_clock::now();
  BsaResult res;
  res.best = Selection::all_ones(candidates.num_nodes);
  std::vector<std::uint64_t> set = candidates.masks;
  int p = 0;
  while (!set.empty()) {
    ++p;
    if (record_snapshots) res.snapshots.push_back(set);
    BsaStep step;
    step.iteration = p;
    step.sigma = static_cast<int>(set.size());
    step.q = (step.sigma + 1) / 2;
    step.mask = set[step.q - 1];
    const Selection sq = Selection::from_mask(step.mask, candidates.num_nodes);
    SofResult r = oracle(sq);
    step.status = r.status;
    const std::size_t before = set.size();
    if (r.status == SofStatus::kFeasible) {
      res.best = sq;
      res.improved = true;
      res.certificate = std::move(r.certificate);
      const int h = std::popcount(step.mask);
      std::erase_if(set, [h](std::uint64_t s) { return std::popcount(s) >= h; });
    } else {
      if (r.status == SofStatus::kInconclusive) ++res.inconclusive;
      const std::uint64_t m = step.mask;
      std::erase_if(set, [m](std::uint64_t s) { return submask(m, s); });
    }
    step.removed = static_cast<int>(before - set.size());
    res.trace.push_back(step);
  }
  res.iterations = p;
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

BsaResult bsa(const DynNetwork& net, const CandidateSet& candidates,
              const SofOptions& opts) {
  if (candidates.num_nodes != net.num_nodes()) {
    throw DimensionError("candidate set node count", net.num_nodes(),
                         candidates.num_nodes);
  }
  return bsa(candidates,
             [&](const Selection& s) { return selection_feasible(net, s, opts); });
}

OracleResult exhaustive_oracle(const CandidateSet& candidates,
                               const FeasibilityOracle& oracle) {
  OracleResult res;
  for (std::uint64_t m : candidates.masks) {
    const Selection s = Selection::from_mask(m, candidates.num_nodes);
    SofResult r = oracle(s);
    ++res.tested;
    if (r.feasible()) {
      res.found = true;
      res.best = s;
      res.H = count_active(s);
      res.certificate = std::move(r.certificate);
      return res;
    }
  }
  return res;
}

OracleResult exhaustive_oracle(const DynNetwork& net,
                               const LogisticConstraint& constraint,
                               const SofOptions& opts) {
  const CandidateSet set = build_candidate_set(constraint, net.num_nodes());
  return exhaustive_oracle(
      set, [&](const Selection& s) { return selection_feasible(net, s, opts); });
}

MonotonicityReport check_search_premise(const BsaResult& run,
                                        const CandidateSet& candidates,
                                        const FeasibilityOracle& oracle) {
  MonotonicityReport rep;
  std::unordered_set<std::uint64_t> seen;
  for (const BsaStep& step : run.trace) {
    if (step.status == SofStatus::kFeasible) continue;
    for (std::uint64_t s : candidates.masks) {
      if (s == step.mask || !submask(step.mask, s)) continue;
      const bool fresh = seen.insert(s).second;
      const SofResult r = oracle(Selection::from_mask(s, candidates.num_nodes));
      if (fresh) ++rep.checked;
      if (r.feasible()) rep.violations.emplace_back(step.mask, s);
    }
  }
  return rep;
}

MonotonicityReport check_monotonicity(const CandidateSet& candidates,
                                      const FeasibilityOracle& oracle) {
  MonotonicityReport rep;
  const int nb = 2 * candidates.num_nodes;
  std::unordered_map<std::uint64_t, bool> feasible;
  for (std::uint64_t m : candidates.masks) {
    feasible[m] = oracle(Selection::from_mask(m, candidates.num_nodes)).feasible();
    ++rep.checked;
  }
  for (std::uint64_t m : candidates.masks) {
    if (!feasible[m]) continue;
    for (int k = 0; k < nb; ++k) {
      const std::uint64_t sup = m | (std::uint64_t{1} << k);
      if (sup == m) continue;
      auto it = feasible.find(sup);
      if (it != feasible.end() && !it->second) rep.violations.emplace_back(sup, m);
    }
  }
  return rep;
}

void write_candidate_set(const CandidateSet& set, std::ostream& os) {
  os << "# sensact candidate set\n";
  os << "N " << set.num_nodes << "\n";
  os << fmt::format("constraint {:016x}\n", set.constraint_fingerprint);
  os << "count " << set.masks.size() << "\n";
  for (std::uint64_t m : set.masks) os << fmt::format("{:x}\n", m);
}

CandidateSet read_candidate_set(std::istream& is) {
  CandidateSet set;
  std::string line;
  auto next_line = [&]() {
    while (std::getline(is, line)) {
      if (!line.empty() && line[0] != '#') return true;
    }
    return false;
  };
  auto header = [&](const std::string& key) {
    if (!next_line()) throw InputError("candidate file: missing " + key);
    std::istringstream ls(line);
    std::string k, v;
    ls >> k >> v;
    if (k != key || v.empty()) throw InputError("candidate file: expected " + key);
    return v;
  };
  try {
    set.num_nodes = std::stoi(header("N"));
    set.constraint_fingerprint = std::stoull(header("constraint"), nullptr, 16);
    const std::size_t count = std::stoull(header("count"));
    if (set.num_nodes < 1 || set.num_nodes > kEnumerationCap) {
      throw InputError("candidate file: N out of range");
    }
    const std::uint64_t limit = std::uint64_t{1} << (2 * set.num_nodes);
    set.masks.reserve(count);
    while (next_line()) {
      const std::uint64_t m = std::stoull(line, nullptr, 16);
      if (m >= limit) throw InputError("candidate file: mask wider than 2N bits");
      set.masks.push_back(m);
    }
    if (set.masks.size() != count) {
      throw InputError(fmt::format("candidate file: expected {} masks, found {}", count,
                                   set.masks.size()));
    }
  } catch (const std::logic_error&) {
    throw InputError("candidate file: malformed number in line '" + line + "'");
  }
  for (std::size_t i = 1; i < set.masks.size(); ++i) {
    if (!candidate_before(set.masks[i - 1], set.masks[i], set.num_nodes)) {
      throw InputError("candidate file: masks are not in candidate order");
    }
  }
  return set;
}

void save_candidate_set(const CandidateSet& set, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot open " + path + " for writing");
  write_candidate_set(set, os);
}

CandidateSet load_candidate_set(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path);
  return read_candidate_set(is);
}

}  // namespace sensact
