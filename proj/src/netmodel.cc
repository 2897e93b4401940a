#include "sensact/netmodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

#include <fmt/format.h>
#include <json.hpp>

#include "sensact/rng.hpp"
#include "sensact/error.hpp"

namespace sensact {

namespace {

constexpr double kRankTol = 1e-9;

bool all_finite(const Eigen::MatrixXd& M) { return M.allFinite(); }

// Offsets of each node's block given per-node sizes.
std::vector<int> prefix_offsets(const std::vector<NodeDims>& dims,
                                int NodeDims::*field, int* total) {
  std::vector<int> off(dims.size());
  int acc = 0;
  for (size_t i = 0; i < dims.size(); ++i) {
    off[i] = acc;
    acc += dims[i].*field;
  }
  *total = acc;
  return off;
}

// Checks that every entry outside the node blocks is exactly zero.
void check_block_diagonal(const Eigen::MatrixXd& M,
                          const std::vector<int>& row_off,
                          const std::vector<int>& col_off,
                          const std::vector<NodeDims>& dims,
                          int NodeDims::*rows_field, int NodeDims::*cols_field,
                          const char* name) {
  const int n = static_cast<int>(dims.size());
  for (int bi = 0; bi < n; ++bi) {
    for (int bj = 0; bj < n; ++bj) {
      if (bi == bj) continue;
      const auto blk = M.block(row_off[bi], col_off[bj], dims[bi].*rows_field,
                               dims[bj].*cols_field);
      if (blk.size() > 0 && blk.cwiseAbs().maxCoeff() != 0.0) {
        throw InputError(fmt::format(
            "{} is not block diagonal: block ({}, {}) is nonzero", name,
            bi + 1, bj + 1));
      }
    }
  }
}

}  // namespace

DynNetwork::DynNetwork(std::vector<NodeDims> dims, Eigen::MatrixXd A,
                       Eigen::MatrixXd B, Eigen::MatrixXd C,
                       std::string meta_json)
    : dims_(std::move(dims)),
      A_(std::move(A)),
      B_(std::move(B)),
      C_(std::move(C)),
      meta_json_(std::move(meta_json)) {
  if (dims_.empty()) throw InputError("network must have at least one node");
  for (size_t i = 0; i < dims_.size(); ++i) {
    const auto& d = dims_[i];
    if (d.nx < 1 || d.nu < 1 || d.ny < 1) {
      throw InputError(fmt::format(
          "node {} has non-positive dimensions (nx={}, nu={}, ny={})", i + 1,
          d.nx, d.nu, d.ny));
    }
  }
  state_off_ = prefix_offsets(dims_, &NodeDims::nx, &nx_);
  input_off_ = prefix_offsets(dims_, &NodeDims::nu, &nu_);
  output_off_ = prefix_offsets(dims_, &NodeDims::ny, &ny_);

  if (A_.rows() != nx_) throw DimensionError("A rows", nx_, A_.rows());
  if (A_.cols() != nx_) throw DimensionError("A cols", nx_, A_.cols());
  if (B_.rows() != nx_) throw DimensionError("B rows", nx_, B_.rows());
  if (B_.cols() != nu_) throw DimensionError("B cols", nu_, B_.cols());
  if (C_.rows() != ny_) throw DimensionError("C rows", ny_, C_.rows());
  if (C_.cols() != nx_) throw DimensionError("C cols", nx_, C_.cols());
  if (!all_finite(A_) || !all_finite(B_) || !all_finite(C_)) {
    throw InputError("system matrices contain non-finite entries");
  }
  check_block_diagonal(B_, state_off_, input_off_, dims_, &NodeDims::nx,
                       &NodeDims::nu, "B");
  check_block_diagonal(C_, output_off_, state_off_, dims_, &NodeDims::ny,
                       &NodeDims::nx, "C");
  if (numerical_rank(B_, kRankTol) != nu_) {
    throw RankDeficiencyError("B does not have full column rank");
  }
  if (numerical_rank(C_, kRankTol) != ny_) {
    throw RankDeficiencyError("C does not have full row rank");
  }

  for (int i = 0; i < num_nodes(); ++i) {
    for (int k = 0; k < dims_[i].nu; ++k) input_node_.push_back(i);
    for (int k = 0; k < dims_[i].ny; ++k) output_node_.push_back(i);
  }
}

bool operator==(const DynNetwork& a, const DynNetwork& b) {
  return a.dims_ == b.dims_ && a.A_ == b.A_ && a.B_ == b.B_ && a.C_ == b.C_ &&
         a.meta_json_ == b.meta_json_;
}

// ---------------------------------------------------------------------------
// Selection

Selection::Selection(int num_nodes) : n_(num_nodes) {
  if (num_nodes < 0) throw InputError("negative node count");
  bits_.assign(2 * static_cast<size_t>(num_nodes), false);
}

Selection::Selection(std::vector<bool> pi, std::vector<bool> gamma) {
  if (pi.size() != gamma.size()) {
    throw DimensionError("selection gamma length",
                         static_cast<long>(pi.size()),
                         static_cast<long>(gamma.size()));
  }
  n_ = static_cast<int>(pi.size());
  bits_ = std::move(pi);
  bits_.insert(bits_.end(), gamma.begin(), gamma.end());
}

Selection Selection::all_ones(int num_nodes) {
  Selection s(num_nodes);
  std::fill(s.bits_.begin(), s.bits_.end(), true);
  return s;
}

Selection Selection::zeros(int num_nodes) { return Selection(num_nodes); }

Selection Selection::from_mask(std::uint64_t mask, int num_nodes) {
  if (2 * num_nodes > 64) {
    throw CapExceededError("mask representation", 32, num_nodes);
  }
  Selection s(num_nodes);
  for (int k = 0; k < 2 * num_nodes; ++k) s.bits_[k] = (mask >> k) & 1U;
  return s;
}

Selection Selection::from_strings(const std::string& pi,
                                  const std::string& gamma) {
  auto parse = [](const std::string& str, const char* what) {
    std::vector<bool> out;
    out.reserve(str.size());
    for (char c : str) {
      if (c == '0') {
        out.push_back(false);
      } else if (c == '1') {
        out.push_back(true);
      } else {
        throw InputError(
            fmt::format("{} bitstring contains '{}', expected 0/1", what, c));
      }
    }
    return out;
  };
  return Selection(parse(pi, "actuator"), parse(gamma, "sensor"));
}

int Selection::num_actuators() const {
  return static_cast<int>(std::count(bits_.begin(), bits_.begin() + n_, true));
}

int Selection::num_sensors() const {
  return static_cast<int>(std::count(bits_.begin() + n_, bits_.end(), true));
}

bool Selection::is_zero() const {
  return std::none_of(bits_.begin(), bits_.end(), [](bool b) { return b; });
}

std::uint64_t Selection::to_mask() const {
  if (2 * n_ > 64) throw CapExceededError("mask representation", 32, n_);
  std::uint64_t m = 0;
  for (int k = 0; k < 2 * n_; ++k) {
    if (bits_[k]) m |= std::uint64_t{1} << k;
  }
  return m;
}

std::string Selection::pi_string() const {
  std::string s;
  for (int i = 0; i < n_; ++i) s.push_back(bits_[i] ? '1' : '0');
  return s;
}

std::string Selection::gamma_string() const {
  std::string s;
  for (int i = 0; i < n_; ++i) s.push_back(bits_[n_ + i] ? '1' : '0');
  return s;
}

std::string Selection::tuple_string() const {
  std::string s = "(";
  for (size_t k = 0; k < bits_.size(); ++k) {
    if (k) s.push_back(',');
    s.push_back(bits_[k] ? '1' : '0');
  }
  s.push_back(')');
  return s;
}

int count_active(const Selection& s) {
  return s.num_actuators() + s.num_sensors();
}

// ---------------------------------------------------------------------------
// Selection matrices

namespace {

void check_selection_dims(const Selection& s, const DynNetwork& net) {
  if (s.num_nodes() != net.num_nodes()) {
    throw DimensionError("selection node count", net.num_nodes(),
                         s.num_nodes());
  }
}

}  // namespace

SelectionMatrices build_selection_matrices(const Selection& s,
                                           const DynNetwork& net) {
  check_selection_dims(s, net);
  Eigen::VectorXd pi_diag(net.nu()), gamma_diag(net.ny());
  for (int i = 0; i < net.num_nodes(); ++i) {
    pi_diag.segment(net.input_offset(i), net.node(i).nu)
        .setConstant(s.pi(i) ? 1.0 : 0.0);
    gamma_diag.segment(net.output_offset(i), net.node(i).ny)
        .setConstant(s.gamma(i) ? 1.0 : 0.0);
  }
  return {pi_diag.asDiagonal(), gamma_diag.asDiagonal()};
}

ReducedMatrices reduced_matrices(const DynNetwork& net, const Selection& s) {
  check_selection_dims(s, net);
  ReducedMatrices r;
  for (int k = 0; k < net.nu(); ++k) {
    if (s.pi(net.node_of_input(k))) r.input_channels.push_back(k);
  }
  for (int k = 0; k < net.ny(); ++k) {
    if (s.gamma(net.node_of_output(k))) r.output_channels.push_back(k);
  }
  r.Bq = net.B()(Eigen::all, r.input_channels);
  r.Cq = net.C()(r.output_channels, Eigen::all);
  return r;
}

// ---------------------------------------------------------------------------
// Assumption checks

int numerical_rank(const Eigen::MatrixXd& M, double rel_tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double thr = rel_tol * sv(0);
  return static_cast<int>((sv.array() > thr).count());
}

namespace {

int complex_rank(const Eigen::MatrixXcd& M, double rel_tol) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  return static_cast<int>((sv.array() > rel_tol * sv(0)).count());
}

// PBH: rank [lambda I - A, B] == n at every eigenvalue with Re >= 0.
bool pbh_passes(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                const Eigen::VectorXcd& spectrum) {
  const Eigen::Index n = A.rows();
  for (Eigen::Index k = 0; k < spectrum.size(); ++k) {
    const std::complex<double> lam = spectrum(k);
    if (lam.real() < -1e-10) continue;
    Eigen::MatrixXcd H(n, n + B.cols());
    H.leftCols(n) = lam * Eigen::MatrixXcd::Identity(n, n) - A.cast<std::complex<double>>();
    H.rightCols(B.cols()) = B.cast<std::complex<double>>();
    if (complex_rank(H, kRankTol) < n) return false;
  }
  return true;
}

}  // namespace

Assumption1Report check_assumption1(const DynNetwork& net) {
  Assumption1Report r;
  const Eigen::VectorXcd spec = eigenvalues(net.A());
  r.stabilizable = pbh_passes(net.A(), net.B(), spec);
  r.detectable =
      pbh_passes(net.A().transpose(), net.C().transpose(), spec.conjugate());
  r.fullrank_B = numerical_rank(net.B(), kRankTol) == net.nu();
  r.fullrank_C = numerical_rank(net.C(), kRankTol) == net.ny();
  return r;
}

// ---------------------------------------------------------------------------
// Spectra

Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw DimensionError("square matrix", M.rows(), M.cols());
  if (!M.allFinite()) throw InputError("matrix has non-finite entries");
  if (M.size() == 0) return {};
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw Error("nonsymmetric eigenvalue iteration did not converge");
  }
  return es.eigenvalues();
}

double max_real_part(const Eigen::VectorXcd& spectrum) {
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < spectrum.size(); ++k) {
    m = std::max(m, spectrum(k).real());
  }
  return m;
}

Eigen::VectorXcd closed_loop_spectrum(const DynNetwork& net,
                                      const Eigen::MatrixXd& Pi,
                                      const Eigen::MatrixXd& Gamma,
                                      const Eigen::MatrixXd& F) {
  if (Pi.rows() != net.nu() || Pi.cols() != net.nu()) {
    throw DimensionError("Pi size", net.nu(), Pi.rows());
  }
  if (Gamma.rows() != net.ny() || Gamma.cols() != net.ny()) {
    throw DimensionError("Gamma size", net.ny(), Gamma.rows());
  }
  if (F.rows() != net.nu()) throw DimensionError("F rows", net.nu(), F.rows());
  if (F.cols() != net.ny()) throw DimensionError("F cols", net.ny(), F.cols());
  if (!F.allFinite() || !Pi.allFinite() || !Gamma.allFinite()) {
    throw InputError("feedback data has non-finite entries");
  }
  const Eigen::MatrixXd Acl = net.A() + net.B() * Pi * F * Gamma * net.C();
  return eigenvalues(Acl);
}

// ---------------------------------------------------------------------------
// Generators

DynNetwork gen_random_network(const RandomNetworkParams& p) {
  if (p.num_nodes < 1) throw InputError("random network needs at least one node");
  if (p.states_per_node < 1) throw InputError("states_per_node must be >= 1");
  if (!(p.coupling_decay >= 0.0)) throw InputError("coupling_decay must be >= 0");
  if (!std::isfinite(p.instability_shift)) {
    throw InputError("instability_shift must be finite");
  }
  const int N = p.num_nodes;
  const int s = p.states_per_node;
  Rng rng(p.seed);

  std::vector<double> px(N), py(N);
  for (int i = 0; i < N; ++i) {
    px[i] = rng.uniform();
    py[i] = rng.uniform();
  }

  const int n = N * s;
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      double scale = 1.0;
      if (i != j) {
        const double d = std::hypot(px[i] - px[j], py[i] - py[j]);
        scale = std::isinf(p.coupling_decay) ? 0.0 : std::exp(-p.coupling_decay * d);
      }
      for (int r = 0; r < s; ++r) {
        for (int c = 0; c < s; ++c) {
          A(i * s + r, j * s + c) = scale * rng.uniform(-1.0, 1.0);
        }
      }
    }
  }
  const double abscissa = max_real_part(eigenvalues(A));
  A.diagonal().array() += p.instability_shift - abscissa;

  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, N);
  for (int i = 0; i < N; ++i) B(i * s, i) = 1.0;
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n);

  std::vector<NodeDims> dims(N, NodeDims{s, 1, s});
  const nlohmann::json meta = {{"generator", "random"},
                               {"nodes", N},
                               {"states_per_node", s},
                               {"coupling_decay", p.coupling_decay},
                               {"instability_shift", p.instability_shift},
                               {"seed", p.seed}};
  return DynNetwork(std::move(dims), std::move(A), std::move(B), std::move(C),
                    meta.dump());
}

Eigen::MatrixXd spring_laplacian(int n) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    T(i, i) = 2.0;
    if (i + 1 < n) T(i, i + 1) = T(i + 1, i) = -1.0;
  }
  return T;
}

double default_mass_spring_perturbation(int num_masses, double growth_rate) {
  if (num_masses < 1) throw InputError("mass count must be positive");
  const double lam_min =
      2.0 - 2.0 * std::cos(std::numbers::pi / (num_masses + 1));
  return lam_min + growth_rate * growth_rate;
}

DynNetwork gen_mass_spring(int num_masses, double stiffness_perturbation,
                           MassSpringSensors sensors) {
  if (num_masses < 2) throw InputError("mass-spring chain needs at least 2 masses");
  if (!std::isfinite(stiffness_perturbation)) {
    throw InputError("stiffness_perturbation must be finite");
  }
  const int N = num_masses;
  const Eigen::MatrixXd K =
      -spring_laplacian(N) + stiffness_perturbation * Eigen::MatrixXd::Identity(N, N);

  // State of node i: (position_i, velocity_i) at rows 2i, 2i+1.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * N, 2 * N);
  for (int i = 0; i < N; ++i) {
    A(2 * i, 2 * i + 1) = 1.0;
    for (int j = 0; j < N; ++j) A(2 * i + 1, 2 * j) = K(i, j);
  }
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2 * N, N);
  for (int i = 0; i < N; ++i) B(2 * i + 1, i) = 1.0;

  const bool full = sensors == MassSpringSensors::kPositionVelocity;
  const int ny_i = full ? 2 : 1;
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(N * ny_i, 2 * N);
  for (int i = 0; i < N; ++i) {
    C(i * ny_i, 2 * i) = 1.0;
    if (full) C(i * ny_i + 1, 2 * i + 1) = 1.0;
  }
  std::vector<NodeDims> dims(N, NodeDims{2, 1, ny_i});
  const nlohmann::json meta = {
      {"generator", "mass-spring"},
      {"masses", N},
      {"stiffness_perturbation", stiffness_perturbation},
      {"sensors", full ? "position-velocity" : "position"}};
  return DynNetwork(std::move(dims), std::move(A), std::move(B), std::move(C),
                    meta.dump());
}

// ---------------------------------------------------------------------------
// Logistic constraints

namespace {

constexpr double kMembershipTol = 1e-9;
constexpr int kEnumerateBoundsCap = 10;

}  // namespace

LogisticConstraint LogisticConstraint::unconstrained(int num_nodes) {
  return LogisticConstraint(num_nodes, Eigen::MatrixXd(0, 2 * num_nodes),
                            Eigen::VectorXd(0), 0, 2 * num_nodes);
}

LogisticConstraint::LogisticConstraint(int num_nodes, Eigen::MatrixXd Phi,
                                       Eigen::VectorXd phi,
                                       std::optional<int> wmin,
                                       std::optional<int> wmax)
    : n_(num_nodes), Phi_(std::move(Phi)), phi_(std::move(phi)) {
  if (n_ < 1) throw InputError("constraint needs at least one node");
  if (Phi_.cols() != 2 * n_) throw DimensionError("Phi cols", 2 * n_, Phi_.cols());
  if (phi_.size() != Phi_.rows()) {
    throw DimensionError("phi length", Phi_.rows(), phi_.size());
  }
  if (!Phi_.allFinite() || !phi_.allFinite()) {
    throw InputError("constraint data has non-finite entries");
  }
  int lo = 0, hi = 2 * n_;
  if ((!wmin || !wmax) && n_ <= kEnumerateBoundsCap && Phi_.rows() > 0) {
    int elo = 2 * n_ + 1, ehi = -1;
    const std::uint64_t total = std::uint64_t{1} << (2 * n_);
    for (std::uint64_t m = 0; m < total; ++m) {
      if (!membership(m)) continue;
      const int h = std::popcount(m);
      elo = std::min(elo, h);
      ehi = std::max(ehi, h);
    }
    if (ehi < 0) throw InputError("logistic constraint admits no selection");
    lo = elo;
    hi = ehi;
  }
  wmin_ = wmin.value_or(lo);
  wmax_ = wmax.value_or(hi);
  if (wmin_ < 0 || wmax_ > 2 * n_ || wmin_ > wmax_) {
    throw InputError(fmt::format(
        "activation bounds [{}, {}] outside 0 <= wmin <= wmax <= {}", wmin_,
        wmax_, 2 * n_));
  }
}

bool LogisticConstraint::membership(const Selection& s) const {
  if (s.num_nodes() != n_) throw DimensionError("selection node count", n_, s.num_nodes());
  for (Eigen::Index r = 0; r < Phi_.rows(); ++r) {
    double acc = 0.0;
    for (int k = 0; k < 2 * n_; ++k) {
      if (s.bit(k)) acc += Phi_(r, k);
    }
    if (acc > phi_(r) + kMembershipTol) return false;
  }
  return true;
}

bool LogisticConstraint::membership(std::uint64_t mask) const {
  for (Eigen::Index r = 0; r < Phi_.rows(); ++r) {
    double acc = 0.0;
    for (std::uint64_t m = mask; m; m &= m - 1) {
      acc += Phi_(r, std::countr_zero(m));
    }
    if (acc > phi_(r) + kMembershipTol) return false;
  }
  return true;
}

std::uint64_t LogisticConstraint::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  auto mix_int = [&](std::int64_t v) { mix(&v, sizeof v); };
  auto mix_double = [&](double v) {
    if (v == 0.0) v = 0.0;  // fold -0 into +0
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    mix(&bits, sizeof bits);
  };
  mix_int(n_);
  mix_int(Phi_.rows());
  for (Eigen::Index r = 0; r < Phi_.rows(); ++r) {
    for (Eigen::Index c = 0; c < Phi_.cols(); ++c) mix_double(Phi_(r, c));
    mix_double(phi_(r));
  }
  mix_int(wmin_);
  mix_int(wmax_);
  return h;
}

LogisticConstraint compile_constraint(const StructuredConstraint& sc,
                                      int N) {
  if (N < 1) throw InputError("constraint needs at least one node");
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  auto add_row = [&](int first, int count, double coef, double bound) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(2 * N);
    r.segment(first, count).setConstant(coef);
    rows.push_back(std::move(r));
    rhs.push_back(bound);
  };
  auto check_count = [&](const std::optional<int>& v, int cap, const char* name) {
    if (v && (*v < 0 || *v > cap)) {
      throw InputError(fmt::format("{} = {} outside [0, {}]", name, *v, cap));
    }
  };
  check_count(sc.min_actuators, N, "min_actuators");
  check_count(sc.max_actuators, N, "max_actuators");
  check_count(sc.min_sensors, N, "min_sensors");
  check_count(sc.max_sensors, N, "max_sensors");
  check_count(sc.min_total, 2 * N, "min_total");
  check_count(sc.max_total, 2 * N, "max_total");

  if (sc.min_actuators) add_row(0, N, -1.0, -*sc.min_actuators);
  if (sc.max_actuators) add_row(0, N, 1.0, *sc.max_actuators);
  if (sc.min_sensors) add_row(N, N, -1.0, -*sc.min_sensors);
  if (sc.max_sensors) add_row(N, N, 1.0, *sc.max_sensors);
  if (sc.min_total) add_row(0, 2 * N, -1.0, -*sc.min_total);
  if (sc.max_total) add_row(0, 2 * N, 1.0, *sc.max_total);

  std::vector<int> on(2 * N, 0), off(2 * N, 0);
  auto mark = [&](const std::vector<int>& nodes, int base, std::vector<int>& flag,
                  const char* name) {
    for (int i : nodes) {
      if (i < 0 || i >= N) {
        throw InputError(fmt::format("{} node index {} out of range", name, i + 1));
      }
      flag[base + i] = 1;
    }
  };
  mark(sc.forced_on_actuators, 0, on, "forced_on actuator");
  mark(sc.forced_on_sensors, N, on, "forced_on sensor");
  mark(sc.forced_off_actuators, 0, off, "forced_off actuator");
  mark(sc.forced_off_sensors, N, off, "forced_off sensor");
  for (int k = 0; k < 2 * N; ++k) {
    if (on[k]) add_row(k, 1, -1.0, -1.0);
    if (off[k]) add_row(k, 1, 1.0, 0.0);
  }

  // Exact count range of the structured part.
  auto count = [](const std::vector<int>& f, int b, int n) {
    return static_cast<int>(std::count(f.begin() + b, f.begin() + b + n, 1));
  };
  bool empty = false;
  for (int k = 0; k < 2 * N; ++k) empty |= on[k] && off[k];
  const int a_lo = std::max(sc.min_actuators.value_or(0), count(on, 0, N));
  const int a_hi = std::min(sc.max_actuators.value_or(N), N - count(off, 0, N));
  const int s_lo = std::max(sc.min_sensors.value_or(0), count(on, N, N));
  const int s_hi = std::min(sc.max_sensors.value_or(N), N - count(off, N, N));
  const int lo = std::max(a_lo + s_lo, sc.min_total.value_or(0));
  const int hi = std::min(a_hi + s_hi, sc.max_total.value_or(2 * N));
  empty |= a_lo > a_hi || s_lo > s_hi || lo > hi;
  if (empty) throw InputError("logistic constraint admits no selection");

  const Eigen::Index extra = sc.extra_Phi.rows();
  if (extra > 0 && sc.extra_Phi.cols() != 2 * N) {
    throw DimensionError("extra Phi cols", 2 * N, sc.extra_Phi.cols());
  }
  if (sc.extra_phi.size() != extra) {
    throw DimensionError("extra phi length", extra, sc.extra_phi.size());
  }
  const Eigen::Index nrows = static_cast<Eigen::Index>(rows.size()) + extra;
  Eigen::MatrixXd Phi(nrows, 2 * N);
  Eigen::VectorXd phi(nrows);
  for (size_t r = 0; r < rows.size(); ++r) {
    Phi.row(r) = rows[r].transpose();
    phi(r) = rhs[r];
  }
  if (extra > 0) {
    Phi.bottomRows(extra) = sc.extra_Phi;
    phi.tail(extra) = sc.extra_phi;
  }
  if (extra > 0 && N <= kEnumerateBoundsCap) {
    // Raw rows may tighten the window; let the constructor enumerate.
    return LogisticConstraint(N, std::move(Phi), std::move(phi));
  }
  return LogisticConstraint(N, std::move(Phi), std::move(phi), lo, hi);
}

LogisticConstraint at_least_one_each(int num_nodes) {
  StructuredConstraint sc;
  sc.min_actuators = 1;
  sc.min_sensors = 1;
  return compile_constraint(sc, num_nodes);
}

}  // namespace sensact
