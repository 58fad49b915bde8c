#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <string>
#include <vector>

#include "cocycles.hpp"
#include "core.hpp"
#include "inducing.hpp"
#include "operators.hpp"
#include "renewal.hpp"

namespace toralmix {

// A tower state is (cell j, return time n, level l).  Level 0 is not split by
// n: states 0..m-1 are the base cells.
struct TowerState {
  std::uint32_t cell = 0;
  int piece = 0;  // return time n, 0 for base states
  int level = 0;
};

struct TowerPiece {
  std::uint32_t cell = 0;
  int n = 0;
  double frac = 0.0;                   // fraction of the cell with phi = n
  std::size_t first = 0;               // index of level 1 (when n >= 2)
  std::vector<std::vector<double>> hhat;  // h at f^l z*, l = 0..n-2
};

struct Tower {
  UlamGrid grid;
  int phi_max = 0;
  int d = 1;
  std::vector<double> mu_Z;
  std::vector<TowerState> states;
  std::vector<double> mass;  // mu_Delta per state
  std::vector<TowerPiece> pieces;
  std::vector<std::vector<std::size_t>> piece_index;  // [n] -> pieces with that n
  std::vector<char> yhat;   // pi^{-1}(Y)

  std::size_t size() const { return states.size(); }
  std::size_t m() const { return grid.m; }
  int max_level() const { return phi_max; }

  std::vector<std::size_t> level(int n) const {
    std::vector<std::size_t> r;
    for (std::size_t s = 0; s < states.size(); ++s)
      if (states[s].level == n) r.push_back(s);
    return r;
  }
  // D_n = {(z, phi(z) - n) : phi(z) > n}, n >= 1
  std::vector<std::size_t> diagonal(int n) const {
    std::vector<std::size_t> r;
    for (std::size_t s = 0; s < states.size(); ++s)
      if (states[s].piece > n && states[s].piece - states[s].level == n) r.push_back(s);
    return r;
  }
  double measure(const std::vector<std::size_t>& idx) const {
    CompensatedSum<double> s;
    for (auto i : idx) s.add(mass[i]);
    return s.value();
  }
};

namespace detail {

// representative point of cell j with phi = n, mid of the largest overlap
inline double tower_representative(const InducingScheme& s, const UlamGrid& grid, std::size_t j, int n) {
  const Interval cell = grid.cell(j);
  const std::vector<Cylinder>* src = &s.cylinders();
  std::size_t lo = 0, hi = 0;
  if (n <= s.phi_max()) {
    lo = s.level_begin(n);
    hi = s.level_end(n);
  } else {
    src = &s.frontier();
    hi = src->size();
  }
  double best = 0.0, rep = cell.mid();
  for (std::size_t c = lo; c < hi; ++c) {
    const Cylinder& cy = (*src)[c];
    if (cy.phi != n) continue;
    const double a = std::max(cy.a, cell.lo), b = std::min(cy.b, cell.hi);
    if (b - a > best) best = b - a, rep = 0.5 * (a + b);
  }
  return rep;
}

}  // namespace detail

inline Tower build_tower(const TwistedFamily& fam, const InducingScheme& s, const ToralCocycle& h) {
  const auto& q = fam.quadrature();
  Tower t;
  t.grid = q.grid;
  t.phi_max = q.phi_max;
  t.d = q.d;
  t.mu_Z = fam.stationary();
  const std::size_t m = q.grid.m;
  const auto P0 = fam.lebesgue_pieces(std::vector<int>(q.d, 0));
  for (std::size_t j = 0; j < m; ++j) {
    t.states.push_back({static_cast<std::uint32_t>(j), 0, 0});
    t.mass.push_back(t.mu_Z[j]);
  }
  t.piece_index.resize(q.phi_max + 2);
  for (int n = 1; n <= q.phi_max + 1; ++n) {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(m);
    for (Eigen::Index j = 0; j < P0[n].outerSize(); ++j)
      for (SpMat::InnerIterator it(P0[n], j); it; ++it) col(j) += it.value().real();
    for (std::size_t j = 0; j < m; ++j) {
      if (!(col(j) > 0)) continue;
      TowerPiece p;
      p.cell = static_cast<std::uint32_t>(j);
      p.n = n;
      p.frac = col(j);
      p.first = t.states.size();
      double x = detail::tower_representative(s, q.grid, j, n);
      for (int l = 0; l + 1 < n; ++l) {
        p.hhat.push_back(h.lifted(x));
        x = s.map().evaluate(x);
      }
      for (int l = 1; l < n; ++l) {
        t.states.push_back({static_cast<std::uint32_t>(j), n, l});
        t.mass.push_back(t.mu_Z[j] * p.frac);
      }
      t.piece_index[n].push_back(t.pieces.size());
      t.pieces.push_back(std::move(p));
    }
  }
  t.yhat.assign(t.states.size(), 0);
  // first-return scheme: f^l z lies outside Y for 0 < l < phi
  for (std::size_t j = 0; j < m; ++j) t.yhat[j] = 1;
  return t;
}

struct TowerOperators {
  std::vector<int> k;
  int N = 0;
  std::vector<Eigen::SparseMatrix<cplx>> A;  // tower x m
  std::vector<Eigen::SparseMatrix<cplx>> B;  // m x tower
  std::vector<Eigen::SparseMatrix<cplx>> E;  // tower x tower
  Eigen::SparseMatrix<cplx> L;               // one step of the twisted tower operator
  std::vector<std::string> warnings;
};

namespace detail {

inline cplx twist(const std::vector<int>& k, const std::vector<double>& hv) {
  double a = 0.0;
  for (std::size_t c = 0; c < k.size(); ++c) a += k[c] * hv[c];
  return std::polar(1.0, a);
}

// prefix[l] = prod_{l' < l} e^{i k.hhat_{l'}}
inline std::vector<cplx> phase_prefix(const std::vector<int>& k, const TowerPiece& p) {
  std::vector<cplx> pre(p.n, cplx(1.0));
  for (int l = 1; l < p.n; ++l) pre[l] = pre[l - 1] * twist(k, p.hhat[l - 1]);
  return pre;
}

}  // namespace detail

inline TowerOperators build_tower_operators(const TwistedOperatorSet& S, const Tower& t, int N) {
  if (S.m() != t.m() || S.phi_max != t.phi_max) throw domain_error("tower and operator set disagree on grid");
  using Trip = Eigen::Triplet<cplx>;
  const Eigen::Index D = static_cast<Eigen::Index>(t.size()), m = static_cast<Eigen::Index>(t.m());
  TowerOperators ops;
  ops.k = S.k;
  ops.N = N;
  if (N > t.max_level()) ops.warnings.push_back("horizon beyond phi_max: E mass truncated at the top level");
  std::vector<std::vector<Trip>> a(N + 1), b(N + 1), e(N + 1);
  std::vector<Trip> l;
  for (Eigen::Index j = 0; j < m; ++j) {
    a[0].emplace_back(j, j, 1.0);
    b[0].emplace_back(j, j, 1.0);
  }
  for (Eigen::Index s = m; s < D; ++s) e[0].emplace_back(s, s, 1.0);
  // n = 1 pieces go base to base
  for (Eigen::Index j = 0; j < S.pieces[1].outerSize(); ++j)
    for (SpMat::InnerIterator it(S.pieces[1], j); it; ++it) l.emplace_back(it.row(), j, it.value());
  for (const auto& p : t.pieces) {
    const auto pre = detail::phase_prefix(S.k, p);
    const int n = p.n;
    if (n == 1) continue;
    const auto st = [&](int lev) { return static_cast<Eigen::Index>(p.first + lev - 1); };
    const Eigen::Index j = p.cell;
    // up moves and the entry from the base
    l.emplace_back(st(1), j, pre[1]);
    for (int lev = 1; lev + 1 < n; ++lev) l.emplace_back(st(lev + 1), st(lev), pre[lev + 1] / pre[lev]);
    // return to the base from level n-1
    for (SpMat::InnerIterator it(S.pieces[n], j); it; ++it) l.emplace_back(it.row(), st(n - 1), it.value() / pre[n - 1]);
    for (int lev = 1; lev < n; ++lev) {
      if (lev <= N) a[lev].emplace_back(st(lev), j, pre[lev]);
      const int rem = n - lev;
      if (rem <= N)
        for (SpMat::InnerIterator it(S.pieces[n], j); it; ++it) b[rem].emplace_back(it.row(), st(lev), it.value() / pre[lev]);
      for (int step = 1; lev + step < n && step <= N; ++step)
        e[step].emplace_back(st(lev + step), st(lev), pre[lev + step] / pre[lev]);
    }
  }
  auto make = [](Eigen::Index r, Eigen::Index c, std::vector<Trip>& tr) {
    Eigen::SparseMatrix<cplx> M(r, c);
    M.setFromTriplets(tr.begin(), tr.end());
    return M;
  };
  for (int n = 0; n <= N; ++n) {
    ops.A.push_back(make(D, m, a[n]));
    ops.B.push_back(make(m, D, b[n]));
    ops.E.push_back(make(D, D, e[n]));
  }
  ops.L = make(D, D, l);
  return ops;
}

struct TowerIdentity {
  std::vector<double> max_abs_error;  // per n, assembled vs direct power
  double max_error = 0.0;
  double restriction_error = 0.0;     // level-0 block vs T_n
  std::size_t columns = 0;
};

// Compares sum A T B + E against L^n on the chosen tower columns (all when
// empty), for n = 0..N.  ren must be in matrix mode.
inline TowerIdentity tower_identity(const TowerOperators& ops, const Tower& t, const RenewalSequence& ren,
                                    std::vector<std::size_t> columns = {}) {
  if (ren.mode != RenewalMode::matrix) throw domain_error("tower_identity needs T_n matrices");
  const int N = std::min(ops.N, ren.N);
  const Eigen::Index D = static_cast<Eigen::Index>(t.size()), m = static_cast<Eigen::Index>(t.m());
  if (columns.empty())
    for (Eigen::Index s = 0; s < D; ++s) columns.push_back(s);
  TowerIdentity out;
  out.columns = columns.size();
  out.max_abs_error.assign(N + 1, 0.0);
  constexpr std::size_t block = 256;
  for (std::size_t c0 = 0; c0 < columns.size(); c0 += block) {
    const std::vector<std::size_t> cols(columns.begin() + c0,
                                        columns.begin() + std::min(columns.size(), c0 + block));
    const Eigen::Index C = static_cast<Eigen::Index>(cols.size());
    MatC X = MatC::Zero(D, C);
    for (Eigen::Index c = 0; c < C; ++c) X(static_cast<Eigen::Index>(cols[c]), c) = 1.0;
    // B_{n3} e_c is nonzero for a single n3 per tower column, so keep only the
    // live columns of each B_{n3} X
    std::vector<std::vector<Eigen::Index>> live(N + 1);
    std::vector<MatC> BX(N + 1);
    for (int n = 0; n <= N; ++n) {
      const MatC full = ops.B[n] * X;
      for (Eigen::Index c = 0; c < C; ++c)
        if (full.col(c).cwiseAbs().maxCoeff() > 0) live[n].push_back(c);
      BX[n].resize(m, static_cast<Eigen::Index>(live[n].size()));
      for (std::size_t i = 0; i < live[n].size(); ++i) BX[n].col(static_cast<Eigen::Index>(i)) = full.col(live[n][i]);
    }
    // G_p = sum_{n2+n3=p} T_{n2} B_{n3} e_C
    std::vector<MatC> G(N + 1, MatC::Zero(m, C));
#pragma omp parallel for schedule(dynamic)
    for (int p = 0; p <= N; ++p)
      for (int n3 = 0; n3 <= p; ++n3) {
        if (live[n3].empty()) continue;
        const MatC TB = ren.matrices[p - n3] * BX[n3];
        for (std::size_t i = 0; i < live[n3].size(); ++i) G[p].col(live[n3][i]) += TB.col(static_cast<Eigen::Index>(i));
      }
    MatC direct = X;
    for (int n = 0; n <= N; ++n) {
      if (n > 0) direct = (ops.L * direct).eval();
      MatC assembled = ops.E[n] * X;
      for (int n1 = 0; n1 <= n; ++n1)
        if (ops.A[n1].nonZeros()) assembled.noalias() += ops.A[n1] * G[n - n1];
      const double err = (assembled - direct).cwiseAbs().maxCoeff();
      out.max_abs_error[n] = std::max(out.max_abs_error[n], err);
      out.max_error = std::max(out.max_error, err);
      // level-0 block of L^n against T_n on the probed base columns
      for (Eigen::Index c = 0; c < C; ++c) {
        const auto col = static_cast<Eigen::Index>(cols[c]);
        if (col >= m) continue;
        out.restriction_error =
            std::max(out.restriction_error, (direct.col(c).head(m) - ren.matrices[n].col(col)).cwiseAbs().maxCoeff());
      }
    }
  }
  return out;
}

// Dense X_n = sum_{n1+n2+n3=n} A T B + E_n (small towers only).
inline MatC assemble_L_k_n(const TowerOperators& ops, const RenewalSequence& ren, int n) {
  if (ren.mode != RenewalMode::matrix) throw domain_error("assemble_L_k_n needs T_n matrices");
  if (n > ops.N || n > ren.N) throw domain_error("assemble_L_k_n: horizon exceeded");
  MatC X = MatC(ops.E[n]);
  for (int n1 = 0; n1 <= n; ++n1)
    for (int n3 = 0; n1 + n3 <= n; ++n3) {
      if (ops.A[n1].nonZeros() == 0 || ops.B[n3].nonZeros() == 0) continue;
      const MatC TB = ren.matrices[n - n1 - n3] * MatC(ops.B[n3]);
      X += ops.A[n1] * TB;
    }
  return X;
}

inline MatC direct_tower_power(const TowerOperators& ops, int n) {
  const Eigen::Index D = ops.L.rows();
  MatC X = MatC::Identity(D, D);
  for (int i = 0; i < n; ++i) X = (ops.L * X).eval();
  return X;
}

// Operator norm L^inf(Z) -> L^1(Yhat) of 1_Yhat A_n, and L^1(Yhat) ->
// L^inf(Z) of B_n 1_Yhat, for every n; with Z = Y both vanish for n >= 1.
struct YhatNorms {
  std::vector<double> A, B, A_tail, B_tail, bound;  // bound[n] = mu_Delta(Yhat cap Delta_n)
};

inline YhatNorms yhat_norms(const TowerOperators& ops, const Tower& t) {
  YhatNorms r;
  const int N = ops.N;
  for (int n = 0; n <= N; ++n) {
    double a = 0.0;
    for (Eigen::Index c = 0; c < ops.A[n].outerSize(); ++c)
      for (Eigen::SparseMatrix<cplx>::InnerIterator it(ops.A[n], c); it; ++it)
        if (t.yhat[it.row()]) a += t.mass[it.row()] * std::abs(it.value());
    double b = 0.0;
    for (Eigen::Index c = 0; c < ops.B[n].outerSize(); ++c) {
      if (!t.yhat[c]) continue;
      for (Eigen::SparseMatrix<cplx>::InnerIterator it(ops.B[n], c); it; ++it)
        b = std::max(b, std::abs(it.value()) / t.mass[c]);
    }
    r.A.push_back(a);
    r.B.push_back(b);
    double bound = 0.0;
    for (auto s : t.level(n))
      if (t.yhat[s]) bound += t.mass[s];
    r.bound.push_back(bound);
  }
  r.A_tail.assign(N + 2, 0.0);
  r.B_tail.assign(N + 2, 0.0);
  for (int n = N; n >= 0; --n) r.A_tail[n] = r.A_tail[n + 1] + r.A[n], r.B_tail[n] = r.B_tail[n + 1] + r.B[n];
  r.A_tail.pop_back();
  r.B_tail.pop_back();
  return r;
}

}  // namespace toralmix
