#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "ipm.hpp"

namespace sensact::sdp::internal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Packed-position lookup tables for one block.
struct PackedMap {
  std::vector<int> row, col;
};

PackedMap packed_map(int n) {
  PackedMap pm;
  for (int r = 0; r < n; ++r) {
    for (int c = r; c < n; ++c) {
      pm.row.push_back(r);
      pm.col.push_back(c);
    }
  }
  return pm;
}

// Packed vector p with <A_j, M> = a_j' p for symmetric A_j (entries stored
// once per mirrored pair) and arbitrary square M.
Eigen::VectorXd pack_weighted(const Eigen::MatrixXd& M, const PackedMap& pm) {
  Eigen::VectorXd p(pm.row.size());
  for (size_t k = 0; k < pm.row.size(); ++k) {
    const int r = pm.row[k], c = pm.col[k];
    p(k) = r == c ? M(r, r) : M(r, c) + M(c, r);
  }
  return p;
}

// sum_j y_j A_j for one block.
Eigen::MatrixXd adjoint(const PsdBlock& b, const PackedMap& pm,
                        const Eigen::VectorXd& y) {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(b.dim, b.dim);
  for (int j = 0; j < b.A.outerSize(); ++j) {
    const double yj = y(b.vars[j]);
    if (yj == 0.0) continue;
    for (Eigen::SparseMatrix<double>::InnerIterator it(b.A, j); it; ++it) {
      const int r = pm.row[it.row()], c = pm.col[it.row()];
      S(r, c) += yj * it.value();
      if (r != c) S(c, r) += yj * it.value();
    }
  }
  return S;
}

// Adds <A_j, M> into out for every variable of the block.
void apply(const PsdBlock& b, const PackedMap& pm, const Eigen::MatrixXd& M,
           Eigen::VectorXd& out) {
  const Eigen::VectorXd p = pack_weighted(M, pm);
  const Eigen::VectorXd loc = b.A.transpose() * p;
  for (size_t j = 0; j < b.vars.size(); ++j) out(b.vars[j]) += loc(j);
}

double inner(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  return (A.array() * B.array()).sum();
}

Eigen::MatrixXd sym(const Eigen::MatrixXd& M) {
  return 0.5 * (M + M.transpose());
}

// Largest alpha with X + alpha dX >= 0 (infinite when dX >= 0).
double max_step(const Eigen::MatrixXd& X, const Eigen::MatrixXd& dX) {
  Eigen::LLT<Eigen::MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  Eigen::MatrixXd M = llt.matrixL().solve(dX);
  M = llt.matrixL().solve(M.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(M), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin < 0.0 ? -1.0 / lmin : kInf;
}

double max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) {
  double a = kInf;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (dx(i) < 0.0) a = std::min(a, -x(i) / dx(i));
  }
  return a;
}

struct Iterate {
  std::vector<Eigen::MatrixXd> X, Z;
  Eigen::VectorXd x, z;  // LP part
  Eigen::VectorXd y;
};

struct Direction {
  std::vector<Eigen::MatrixXd> dX, dZ;
  Eigen::VectorXd dx, dz, dy;
};

}  // namespace

SlackCheck dual_slack(const DualForm& f, const Eigen::VectorXd& y) {
  SlackCheck s;
  s.min_block_eig = kInf;
  for (const auto& b : f.blocks) {
    const PackedMap pm = packed_map(b.dim);
    const Eigen::MatrixXd S = b.C - adjoint(b, pm, y);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    s.min_block_eig = std::min(s.min_block_eig, es.eigenvalues()(0));
  }
  s.min_lp_slack = kInf;
  if (f.lp_c.size() > 0) {
    s.min_lp_slack = (f.lp_c - f.lp_G * y).minCoeff();
  }
  return s;
}

IpmResult run_ipm(const DualForm& f, const IpmOptions& opts) {
  IpmResult res;
  const int m = f.m;
  const int nb = static_cast<int>(f.blocks.size());
  const int nlp = static_cast<int>(f.lp_c.size());
  std::vector<PackedMap> pms;
  for (const auto& b : f.blocks) pms.push_back(packed_map(b.dim));
  const Eigen::SparseMatrix<double> G = f.lp_G;  // column-major copy
  const Eigen::SparseMatrix<double> Gt = G.transpose();

  double ntot = nlp;
  for (const auto& b : f.blocks) ntot += b.dim;

  // Starting point scaled to the data.
  Iterate it;
  it.y = Eigen::VectorXd::Zero(m);
  const double bmax = f.b.size() ? f.b.cwiseAbs().maxCoeff() : 0.0;
  for (int k = 0; k < nb; ++k) {
    const auto& b = f.blocks[k];
    const double n = b.dim;
    double xi = std::max(10.0, std::sqrt(n));
    double eta = std::max({10.0, std::sqrt(n), b.C.norm()});
    for (int j = 0; j < b.A.outerSize(); ++j) {
      const double an = b.A.col(j).norm();
      xi = std::max(xi, n * (1.0 + std::abs(f.b(b.vars[j]))) / (1.0 + an));
      eta = std::max(eta, an);
    }
    it.X.push_back(xi * Eigen::MatrixXd::Identity(b.dim, b.dim));
    it.Z.push_back(eta * Eigen::MatrixXd::Identity(b.dim, b.dim));
  }
  if (nlp > 0) {
    double xi = std::max(10.0, std::sqrt(static_cast<double>(nlp)));
    double eta = std::max({10.0, std::sqrt(static_cast<double>(nlp)), f.lp_c.norm()});
    for (int j = 0; j < G.outerSize(); ++j) {
      const double an = G.col(j).norm();
      if (an == 0.0) continue;
      xi = std::max(xi, (1.0 + bmax) / (1.0 + an));
      eta = std::max(eta, an);
    }
    it.x = Eigen::VectorXd::Constant(nlp, xi);
    it.z = Eigen::VectorXd::Constant(nlp, eta);
  } else {
    it.x.resize(0);
    it.z.resize(0);
  }

  double cnorm2 = f.lp_c.squaredNorm();
  for (const auto& b : f.blocks) cnorm2 += b.C.squaredNorm();
  const double cnorm = std::sqrt(cnorm2);
  const double bnorm = f.b.norm();

  double tau = 0.9;
  int small_steps = 0;
  std::vector<double> mu_hist;
  Eigen::MatrixXd H(m, m);
  std::vector<Eigen::MatrixXd> Rd(nb), Zinv(nb);
  Eigen::VectorXd rd;

  for (int iter = 0;; ++iter) {
    // Residuals and objectives.
    Eigen::VectorXd AX = Eigen::VectorXd::Zero(m);
    double pobj = 0.0, xz = 0.0, rdn2 = 0.0;
    for (int k = 0; k < nb; ++k) {
      const auto& b = f.blocks[k];
      apply(b, pms[k], it.X[k], AX);
      pobj += inner(b.C, it.X[k]);
      xz += inner(it.X[k], it.Z[k]);
      Rd[k] = b.C - adjoint(b, pms[k], it.y) - it.Z[k];
      rdn2 += Rd[k].squaredNorm();
    }
    if (nlp > 0) {
      AX += Gt * it.x;
      pobj += f.lp_c.dot(it.x);
      xz += it.x.dot(it.z);
      rd = f.lp_c - G * it.y - it.z;
      rdn2 += rd.squaredNorm();
    }
    const Eigen::VectorXd rp = f.b - AX;
    const double dobj = f.b.dot(it.y);
    const double mu = xz / ntot;

    res.y = it.y;
    res.pobj = pobj;
    res.dobj = dobj;
    res.pinf = rp.norm() / (1.0 + bnorm);
    res.dinf = std::sqrt(rdn2) / (1.0 + cnorm);
    res.relgap = (pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    res.duality_correction = std::abs(rp.dot(it.y));
    res.iterations = iter;
    if (opts.verbose) {
      fmt::print(stderr,
                 "ipm {:3d} pobj {:+.6e} dobj {:+.6e} pinf {:.1e} dinf {:.1e} "
                 "gap {:.1e} mu {:.1e}\n",
                 iter, pobj, dobj, res.pinf, res.dinf, res.relgap, mu);
    }
    if (opts.callback) {
      IpmIterate info{iter, pobj, dobj, res.pinf, res.dinf, res.relgap,
                      res.duality_correction, &res.y};
      if (opts.callback(info)) {
        res.status = IpmStatus::kStoppedByCallback;
        return res;
      }
    }
    if (res.pinf < opts.feas_tol && res.dinf < opts.feas_tol &&
        std::abs(res.relgap) < opts.gap_tol) {
      res.status = IpmStatus::kOptimal;
      return res;
    }
    // Farkas ray: X >= 0 with A(X) ~ 0 and <C, X> < 0 certifies that no y
    // satisfies the constraints.
    if (pobj < 0.0 && AX.norm() < 1e-8 * -pobj) {
      res.status = IpmStatus::kDualInfeasible;
      return res;
    }
    if (iter >= opts.max_iter) {
      res.status = IpmStatus::kMaxIter;
      return res;
    }
    // Once mu stops shrinking the iterates only lose accuracy; accept a
    // modestly converged point rather than drifting.
    mu_hist.push_back(mu);
    if (mu_hist.size() > 5 && mu > 0.5 * mu_hist[mu_hist.size() - 6]) {
      const double worst = std::max({res.pinf, res.dinf, std::abs(res.relgap)});
      res.status = worst < 1e-6 ? IpmStatus::kOptimal : IpmStatus::kStalled;
      return res;
    }

    // Schur complement.
    H.setZero();
    bool ok = true;
    for (int k = 0; k < nb && ok; ++k) {
      const auto& b = f.blocks[k];
      const int n = b.dim;
      Eigen::LLT<Eigen::MatrixXd> lz(it.Z[k]);
      if (lz.info() != Eigen::Success) {
        ok = false;
        break;
      }
      Zinv[k] = lz.solve(Eigen::MatrixXd::Identity(n, n));
      Zinv[k] = sym(Zinv[k]);
      const int mk = static_cast<int>(b.vars.size());
      Eigen::MatrixXd Wp(pms[k].row.size(), mk);
      Eigen::MatrixXd XA = Eigen::MatrixXd::Zero(n, n);
      std::vector<char> touched(n, 0);
      for (int j = 0; j < mk; ++j) {
        for (Eigen::SparseMatrix<double>::InnerIterator e(b.A, j); e; ++e) {
          const int r = pms[k].row[e.row()], c = pms[k].col[e.row()];
          XA.col(c) += e.value() * it.X[k].col(r);
          touched[c] = 1;
          if (r != c) {
            XA.col(r) += e.value() * it.X[k].col(c);
            touched[r] = 1;
          }
        }
        Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
        for (int c = 0; c < n; ++c) {
          if (!touched[c]) continue;
          W.noalias() += XA.col(c) * Zinv[k].row(c);
          XA.col(c).setZero();
          touched[c] = 0;
        }
        Wp.col(j) = pack_weighted(W, pms[k]);
      }
      const Eigen::MatrixXd Hk = b.A.transpose() * Wp;
      for (int i = 0; i < mk; ++i) {
        for (int j = 0; j < mk; ++j) H(b.vars[i], b.vars[j]) += Hk(i, j);
      }
    }
    if (nlp > 0) {
      const Eigen::VectorXd d = it.x.cwiseQuotient(it.z);
      const Eigen::SparseMatrix<double> GD = Gt * d.asDiagonal();
      const Eigen::SparseMatrix<double> HL = GD * G;
      H += Eigen::MatrixXd(HL);
    }
    if (!ok) {
      res.status = IpmStatus::kNumericalFailure;
      return res;
    }
    H = sym(H);
    Eigen::LLT<Eigen::MatrixXd> lh(H);
    if (lh.info() != Eigen::Success) {
      const double base = std::max(1e-300, H.diagonal().cwiseAbs().maxCoeff());
      for (double reg = 1e-14; reg <= 1e-8; reg *= 100.0) {
        Eigen::MatrixXd Hr = H;
        Hr.diagonal().array() += reg * base;
        lh.compute(Hr);
        if (lh.info() == Eigen::Success) break;
      }
      if (lh.info() != Eigen::Success) {
        res.status = IpmStatus::kNumericalFailure;
        return res;
      }
    }

    // Predictor (sigma = 0) then corrector with the second-order term.
    auto solve_dir = [&](double sigma_mu, const Direction* aff) {
      Direction d;
      Eigen::VectorXd rhs = f.b;
      std::vector<Eigen::MatrixXd> R(nb);
      for (int k = 0; k < nb; ++k) {
        // R = X Rd Zinv - sigma mu Zinv (+ dXa dZa Zinv)
        Eigen::MatrixXd T = it.X[k] * Rd[k] - sigma_mu * Eigen::MatrixXd::Identity(
                                                  f.blocks[k].dim, f.blocks[k].dim);
        if (aff) T += aff->dX[k] * aff->dZ[k];
        R[k] = T * Zinv[k];
        apply(f.blocks[k], pms[k], R[k], rhs);
      }
      Eigen::VectorXd rl;
      if (nlp > 0) {
        rl = (it.x.cwiseProduct(rd).array() - sigma_mu).matrix();
        if (aff) rl += aff->dx.cwiseProduct(aff->dz);
        rl = rl.cwiseQuotient(it.z);
        rhs += Gt * rl;
      }
      d.dy = lh.solve(rhs);
      d.dX.resize(nb);
      d.dZ.resize(nb);
      for (int k = 0; k < nb; ++k) {
        d.dZ[k] = Rd[k] - adjoint(f.blocks[k], pms[k], d.dy);
        // dX = sigma mu Zinv - X - X dZ Zinv (- dXa dZa Zinv)
        Eigen::MatrixXd T = -it.X[k] * d.dZ[k] +
                            sigma_mu * Eigen::MatrixXd::Identity(f.blocks[k].dim,
                                                                 f.blocks[k].dim);
        if (aff) T -= aff->dX[k] * aff->dZ[k];
        d.dX[k] = sym(T * Zinv[k] - it.X[k]);
      }
      if (nlp > 0) {
        d.dz = rd - G * d.dy;
        Eigen::VectorXd t = -it.x.cwiseProduct(d.dz).array() + sigma_mu;
        if (aff) t -= aff->dx.cwiseProduct(aff->dz);
        d.dx = t.cwiseQuotient(it.z) - it.x;
      }
      return d;
    };
    auto steps = [&](const Direction& d, double* ap, double* ad) {
      double a = kInf, b = kInf;
      for (int k = 0; k < nb; ++k) {
        a = std::min(a, max_step(it.X[k], d.dX[k]));
        b = std::min(b, max_step(it.Z[k], d.dZ[k]));
      }
      if (nlp > 0) {
        a = std::min(a, max_step(it.x, d.dx));
        b = std::min(b, max_step(it.z, d.dz));
      }
      *ap = a;
      *ad = b;
    };

    const Direction aff = solve_dir(0.0, nullptr);
    double ap, ad;
    steps(aff, &ap, &ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double xz_aff = 0.0;
    for (int k = 0; k < nb; ++k) {
      xz_aff += inner(it.X[k] + ap * aff.dX[k], it.Z[k] + ad * aff.dZ[k]);
    }
    if (nlp > 0) xz_aff += (it.x + ap * aff.dx).dot(it.z + ad * aff.dz);
    const double mu_aff = xz_aff / ntot;
    double sigma = mu > 0.0 ? std::pow(std::max(0.0, mu_aff) / mu, 3.0) : 0.0;
    sigma = std::clamp(sigma, 0.0, 1.0);

    const Direction dir = solve_dir(sigma * mu, &aff);
    steps(dir, &ap, &ad);
    ap = std::min(1.0, tau * ap);
    ad = std::min(1.0, tau * ad);

    for (int k = 0; k < nb; ++k) {
      it.X[k] += ap * dir.dX[k];
      it.Z[k] += ad * dir.dZ[k];
    }
    if (nlp > 0) {
      it.x += ap * dir.dx;
      it.z += ad * dir.dz;
    }
    it.y += ad * dir.dy;
    tau = 0.9 + 0.09 * std::min(ap, ad);

    if (std::max(ap, ad) < 1e-8) {
      if (++small_steps >= 5) {
        res.status = IpmStatus::kStalled;
        return res;
      }
    } else {
      small_steps = 0;
    }
  }
}

}  // namespace sensact::sdp::internal
