#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "ipm.hpp"
#include "sensact/error.hpp"

namespace sensact::sdp::internal {

namespace {

using Row = std::map<int, double>;

struct RowWithRhs {
  Row a;
  double h = 0.0;
};

// Affine image of one original scalar: x_i = c + sum_w coef * w.
struct VarExpr {
  double c = 0.0;
  std::vector<std::pair<int, double>> terms;
};

struct Elimination {
  bool infeasible = false;
  std::string note;
  std::vector<VarExpr> expr;  // per original scalar
  int num_free = 0;
};

Row merge_terms(const LinearExpr& e) {
  Row r;
  for (const Term& t : e.terms) r[t.var] += t.coef;
  for (auto it = r.begin(); it != r.end();) {
    it = it->second == 0.0 ? r.erase(it) : std::next(it);
  }
  return r;
}

double max_abs(const Row& r) {
  double m = 0.0;
  for (const auto& [k, v] : r) m = std::max(m, std::abs(v));
  return m;
}

// Sparse sequential Gaussian elimination with threshold pivoting. Among the
// entries within a factor of ten of the row maximum the pivot is the
// variable with the fewest occurrences elsewhere, which keeps the
// substitution from spreading into the matrix inequalities.
Elimination eliminate(std::vector<RowWithRhs> rows, int nx,
                      const std::vector<int>& score) {
  Elimination out;
  const size_t nr = rows.size();
  for (auto& r : rows) {
    const double s = max_abs(r.a);
    if (s > 0.0) {
      for (auto& [k, v] : r.a) v /= s;
      r.h /= s;
    }
  }
  std::vector<std::set<size_t>> var_rows(nx);
  for (size_t k = 0; k < nr; ++k) {
    for (const auto& [v, c] : rows[k].a) var_rows[v].insert(k);
  }
  std::vector<int> pivot_of_row(nr, -1);
  std::vector<char> eliminated(nx, 0);

  for (size_t k = 0; k < nr; ++k) {
    Row& row = rows[k].a;
    for (const auto& [v, c] : row) var_rows[v].erase(k);
    const double mx = max_abs(row);
    if (mx <= 1e-11) {
      if (std::abs(rows[k].h) > 1e-9) {
        out.infeasible = true;
        out.note = fmt::format(
            "equality constraints are inconsistent (residual {:.3g})",
            rows[k].h);
        return out;
      }
      continue;
    }
    int piv = -1;
    for (const auto& [v, c] : row) {
      if (std::abs(c) < 0.1 * mx) continue;
      if (piv < 0 || score[v] < score[piv] ||
          (score[v] == score[piv] && std::abs(c) > std::abs(row.at(piv)))) {
        piv = v;
      }
    }
    pivot_of_row[k] = piv;
    eliminated[piv] = 1;
    const double ap = row.at(piv);
    const std::vector<size_t> targets(var_rows[piv].begin(),
                                      var_rows[piv].end());
    for (size_t r : targets) {
      Row& tr = rows[r].a;
      const double f = tr.at(piv) / ap;
      for (const auto& [v, c] : row) {
        double& slot = tr[v];
        const double before = std::abs(slot);
        slot -= f * c;
        if (v == piv || std::abs(slot) <= 1e-13 * std::max(1.0, before)) {
          tr.erase(v);
          var_rows[v].erase(r);
        } else {
          var_rows[v].insert(r);
        }
      }
      rows[r].h -= f * rows[k].h;
    }
  }

  // Free variables become the reduced coordinates.
  std::vector<int> w_of(nx, -1);
  for (int i = 0; i < nx; ++i) {
    if (!eliminated[i]) w_of[i] = out.num_free++;
  }
  out.expr.assign(nx, VarExpr{});
  for (int i = 0; i < nx; ++i) {
    if (w_of[i] >= 0) out.expr[i].terms.push_back({w_of[i], 1.0});
  }
  for (size_t kk = nr; kk-- > 0;) {
    const int p = pivot_of_row[kk];
    if (p < 0) continue;
    const Row& row = rows[kk].a;
    const double ap = row.at(p);
    std::map<int, double> acc;
    double c = rows[kk].h;
    for (const auto& [v, coef] : row) {
      if (v == p) continue;
      const VarExpr& e = out.expr[v];
      c -= coef * e.c;
      for (const auto& [w, z] : e.terms) acc[w] -= coef * z;
    }
    VarExpr& ep = out.expr[p];
    ep.c = c / ap;
    for (const auto& [w, z] : acc) {
      const double val = z / ap;
      if (std::abs(val) > 1e-14) ep.terms.push_back({w, val});
    }
  }
  return out;
}

// Row over the reduced coordinates: a'x <= h becomes a_w' w <= h - a'x0.
RowWithRhs substitute(const Row& a, double h, const Elimination& el) {
  RowWithRhs out;
  out.h = h;
  double scale = 0.0;
  for (const auto& [v, coef] : a) {
    const VarExpr& e = el.expr[v];
    out.h -= coef * e.c;
    for (const auto& [w, z] : e.terms) out.a[w] += coef * z;
    scale = std::max(scale, std::abs(coef));
  }
  for (auto it = out.a.begin(); it != out.a.end();) {
    it = std::abs(it->second) <= 1e-12 * scale ? out.a.erase(it) : std::next(it);
  }
  return out;
}

using RowKey = std::vector<std::pair<int, long long>>;

// Direction of a row up to positive scaling and sign, plus the scale and
// sign needed to recover it.
RowKey row_key(const Row& a, double* scale, int* sign) {
  *scale = max_abs(a);
  *sign = a.begin()->second > 0 ? 1 : -1;
  RowKey key;
  key.reserve(a.size());
  for (const auto& [k, v] : a) {
    key.push_back({k, std::llround(*sign * v / *scale * 1e10)});
  }
  return key;
}

}  // namespace

Compiled compile(const ConicProblem& problem, bool feasibility_mode,
                 double t_cap) {
  problem.validate();
  Compiled out;
  const int n = problem.num_vars();
  const int nx = n + (feasibility_mode ? 1 : 0);
  const int tvar = feasibility_mode ? n : -1;

  // Matrix inequalities as F0 + sum_i x_i F_i <= 0.
  struct Lmi {
    int dim;
    Eigen::MatrixXd F0;
    std::map<std::tuple<int, int, int>, double> entries;  // (var, row, col)
  };
  std::vector<Lmi> lmis;
  std::vector<int> score(nx, 0);
  for (const auto& l : problem.lmis()) {
    Lmi L{l.expr.dim(), l.expr.constant(), {}};
    L.F0.diagonal().array() += l.margin;
    for (const auto& e : l.expr.entries()) {
      L.entries[{e.var, e.row, e.col}] += e.coef;
    }
    if (feasibility_mode && l.strict) {
      for (int r = 0; r < L.dim; ++r) {
        L.entries[{tvar, r, r}] += 1.0;
      }
    }
    for (const auto& [key, v] : L.entries) score[std::get<0>(key)] += 1;
    lmis.push_back(std::move(L));
  }

  std::vector<RowWithRhs> ineqs;
  for (const auto& c : problem.inequalities()) {
    ineqs.push_back({merge_terms(c.expr), c.rhs - c.expr.constant});
  }
  if (feasibility_mode) ineqs.push_back({Row{{tvar, 1.0}}, t_cap});
  for (const auto& r : ineqs) {
    for (const auto& [v, c] : r.a) score[v] += 1;
  }

  std::vector<RowWithRhs> eqs;
  for (const auto& c : problem.equalities()) {
    eqs.push_back({merge_terms(c.expr), c.rhs - c.expr.constant});
  }

  Eigen::VectorXd cobj = Eigen::VectorXd::Zero(nx);
  if (feasibility_mode) {
    cobj(tvar) = -1.0;
  } else if (problem.objective()) {
    for (const Term& t : problem.objective()->terms) cobj(t.var) += t.coef;
    out.objective_constant = problem.objective()->constant;
  }

  // Elimination and pair presolve: two opposing inequalities with no gap
  // between them pin an affine function, which then becomes an equality.
  Elimination el;
  std::vector<RowWithRhs> lp;
  for (int round = 0;; ++round) {
    out.presolve_rounds = round + 1;
    el = eliminate(eqs, nx, score);
    if (el.infeasible) {
      out.infeasible = true;
      out.note = el.note;
      return out;
    }
    lp.clear();
    struct Bound {
      double value;
      size_t row;
    };
    std::map<RowKey, std::pair<std::optional<Bound>, std::optional<Bound>>> dirs;
    std::vector<RowKey> keys;
    std::vector<RowWithRhs> reduced;
    for (size_t k = 0; k < ineqs.size(); ++k) {
      RowWithRhs r = substitute(ineqs[k].a, ineqs[k].h, el);
      if (r.a.empty()) {
        if (r.h < -1e-9 * std::max(1.0, std::abs(ineqs[k].h))) {
          out.infeasible = true;
          out.note = fmt::format("inequality {} is violated by the equalities "
                                 "(excess {:.3g})", k, -r.h);
          return out;
        }
        keys.emplace_back();
        reduced.push_back(std::move(r));
        continue;
      }
      double s;
      int sg;
      RowKey key = row_key(r.a, &s, &sg);
      auto& slot = dirs[key];
      if (sg > 0) {
        const double u = r.h / s;
        if (!slot.first || u < slot.first->value) slot.first = Bound{u, k};
      } else {
        const double lo = -r.h / s;
        if (!slot.second || lo > slot.second->value) slot.second = Bound{lo, k};
      }
      keys.push_back(std::move(key));
      reduced.push_back(std::move(r));
    }
    bool added = false;
    for (const auto& [key, ul] : dirs) {
      if (!ul.first || !ul.second) continue;
      const double u = ul.first->value, lo = ul.second->value;
      const double tol = 1e-9 * std::max(1.0, std::abs(u));
      if (u - lo < -tol) {
        out.infeasible = true;
        out.note = fmt::format(
            "inequalities {} and {} are contradictory (gap {:.3g})",
            ul.first->row, ul.second->row, u - lo);
        return out;
      }
      if (u - lo <= tol) {
        const auto& src = ineqs[ul.first->row];
        eqs.push_back({src.a, src.h});
        added = true;
      }
    }
    if (added && round < 50) continue;

    // Keep one tightest row per direction and sign.
    for (size_t k = 0; k < reduced.size(); ++k) {
      if (reduced[k].a.empty()) continue;
      const auto& ul = dirs.at(keys[k]);
      const bool keep = (ul.first && ul.first->row == k) ||
                        (ul.second && ul.second->row == k);
      if (keep) lp.push_back(std::move(reduced[k]));
    }
    break;
  }

  const int nw = el.num_free;

  // Blocks over w.
  struct BlockW {
    int dim;
    Eigen::MatrixXd C;
    std::vector<Eigen::Triplet<double>> trip;  // (packed pos, w, value)
  };
  std::vector<BlockW> bw;
  for (size_t li = 0; li < lmis.size(); ++li) {
    const Lmi& L = lmis[li];
    BlockW b{L.dim, -L.F0, {}};
    for (const auto& [key, coef] : L.entries) {
      const auto [var, r, c] = key;
      const int pos = packed_index(L.dim, r, c);
      const VarExpr& e = el.expr[var];
      if (e.c != 0.0) {
        b.C(r, c) -= coef * e.c;
        if (r != c) b.C(c, r) -= coef * e.c;
      }
      for (const auto& [w, z] : e.terms) b.trip.emplace_back(pos, w, coef * z);
    }
    bw.push_back(std::move(b));
  }

  // Objective over w.
  Eigen::VectorXd bvec = Eigen::VectorXd::Zero(nw);
  for (int i = 0; i < nx; ++i) {
    if (cobj(i) == 0.0) continue;
    out.objective_constant += cobj(i) * el.expr[i].c;
    for (const auto& [w, z] : el.expr[i].terms) bvec(w) -= cobj(i) * z;
  }

  // Assemble sparse blocks and drop constant ones after checking them.
  std::vector<Eigen::SparseMatrix<double>> Aw;
  std::vector<BlockW*> live;
  for (auto& b : bw) {
    Eigen::SparseMatrix<double> S(packed_size(b.dim), nw);
    S.setFromTriplets(b.trip.begin(), b.trip.end());
    S.prune(1e-14, 1.0);
    if (S.nonZeros() == 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.C, Eigen::EigenvaluesOnly);
      if (es.eigenvalues()(0) < -1e-9) {
        out.infeasible = true;
        out.note = fmt::format(
            "a matrix inequality is fixed by the equalities and violated "
            "(min eigenvalue {:.3g})", es.eigenvalues()(0));
        return out;
      }
      continue;
    }
    Aw.push_back(std::move(S));
    live.push_back(&b);
  }

  // LP rows over w, normalized by their largest coefficient.
  std::vector<Eigen::Triplet<double>> gtrip;
  std::vector<double> lp_c;
  for (const auto& r : lp) {
    const double s = max_abs(r.a);
    const int row = static_cast<int>(lp_c.size());
    for (const auto& [w, v] : r.a) gtrip.emplace_back(row, w, v / s);
    lp_c.push_back(r.h / s);
  }
  Eigen::SparseMatrix<double> Gw(static_cast<int>(lp_c.size()), nw);
  Gw.setFromTriplets(gtrip.begin(), gtrip.end());

  // Column scales; unused coordinates are dropped (value 0).
  const int tw = feasibility_mode && el.expr[tvar].terms.size() == 1
                     ? el.expr[tvar].terms[0].first
                     : -1;
  Eigen::VectorXd colmax = Eigen::VectorXd::Zero(nw);
  for (const auto& S : Aw) {
    for (int k = 0; k < S.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(S, k); it; ++it) {
        colmax(it.col()) = std::max(colmax(it.col()), std::abs(it.value()));
      }
    }
  }
  for (int k = 0; k < Gw.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(Gw, k); it; ++it) {
      colmax(it.col()) = std::max(colmax(it.col()), std::abs(it.value()));
    }
  }
  std::vector<int> y_of(nw, -1);
  std::vector<double> scale;
  int m = 0;
  for (int w = 0; w < nw; ++w) {
    if (colmax(w) == 0.0 && bvec(w) == 0.0) continue;
    y_of[w] = m++;
    double s = colmax(w) > 0.0 ? colmax(w) : 1.0;
    if (w == tw) s = 1.0;
    scale.push_back(s);
  }
  out.margin_index = tw >= 0 ? y_of[tw] : -1;

  // Reindex w -> y with y_j = s_j w.
  auto remap = [&](const Eigen::SparseMatrix<double>& S) {
    std::vector<Eigen::Triplet<double>> t;
    for (int k = 0; k < S.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(S, k); it; ++it) {
        const int j = y_of[it.col()];
        t.emplace_back(it.row(), j, it.value() / scale[j]);
      }
    }
    return t;
  };

  DualForm& f = out.form;
  f.m = m;
  f.b.resize(m);
  for (int w = 0; w < nw; ++w) {
    if (y_of[w] >= 0) f.b(y_of[w]) = bvec(w) / scale[y_of[w]];
  }
  for (size_t k = 0; k < Aw.size(); ++k) {
    auto t = remap(Aw[k]);
    std::vector<int> local(m, -1);
    PsdBlock blk;
    blk.dim = live[k]->dim;
    blk.C = live[k]->C;
    for (auto& tr : t) {
      if (local[tr.col()] < 0) {
        local[tr.col()] = static_cast<int>(blk.vars.size());
        blk.vars.push_back(tr.col());
      }
    }
    // Keep columns in increasing global order.
    std::vector<int> order = blk.vars;
    std::sort(order.begin(), order.end());
    for (size_t q = 0; q < order.size(); ++q) local[order[q]] = static_cast<int>(q);
    blk.vars = order;
    std::vector<Eigen::Triplet<double>> lt;
    lt.reserve(t.size());
    for (auto& tr : t) lt.emplace_back(tr.row(), local[tr.col()], tr.value());
    blk.A.resize(packed_size(blk.dim), static_cast<int>(blk.vars.size()));
    blk.A.setFromTriplets(lt.begin(), lt.end());
    f.blocks.push_back(std::move(blk));
  }
  {
    auto t = remap(Gw);
    f.lp_G.resize(Gw.rows(), m);
    f.lp_G.setFromTriplets(t.begin(), t.end());
    f.lp_c = Eigen::Map<Eigen::VectorXd>(lp_c.data(), static_cast<int>(lp_c.size()));
  }

  // x = x0 + Zmap y.
  out.x0.resize(nx);
  std::vector<Eigen::Triplet<double>> zt;
  for (int i = 0; i < nx; ++i) {
    out.x0(i) = el.expr[i].c;
    for (const auto& [w, z] : el.expr[i].terms) {
      const int j = y_of[w];
      if (j >= 0) zt.emplace_back(i, j, z / scale[j]);
    }
  }
  out.Zmap.resize(nx, m);
  out.Zmap.setFromTriplets(zt.begin(), zt.end());
  return out;
}

}  // namespace sensact::sdp::internal
