#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cocycles.hpp"
#include "core.hpp"
#include "inducing.hpp"

namespace toralmix {

using SpMat = Eigen::SparseMatrix<cplx, Eigen::ColMajor>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;

struct UlamGrid {
  Interval Y{0.5, 1.0};
  std::size_t m = 128;
  int quad_order = 8;

  double h() const { return Y.length() / static_cast<double>(m); }
  double edge(std::size_t j) const { return j == m ? Y.hi : Y.lo + h() * static_cast<double>(j); }
  Interval cell(std::size_t j) const { return {edge(j), edge(j + 1)}; }
  std::size_t cell_of(double z) const {
    const double t = (z - Y.lo) / h();
    if (!(t >= 0)) return 0;
    return std::min<std::size_t>(m - 1, static_cast<std::size_t>(t));
  }
};

// Quadrature nodes of the induced transfer operator, grouped by
// (return time n, source cell j, target cell i).  Nodes carry the Lebesgue
// weight of the source set and the lifted induced cocycle H at the source.
struct UlamQuadrature {
  struct Block {
    int n = 1;
    std::uint32_t source = 0, target = 0;
    std::size_t begin = 0, count = 0;
  };
  UlamGrid grid;
  int phi_max = 0;
  int d = 1;
  std::vector<Block> blocks;
  std::vector<double> weight;
  std::vector<double> H;                     // d per node
  std::vector<std::vector<double>> col_mass;  // [n][j] Lebesgue fraction of cell j with phi = n
  std::vector<double> missing;               // [j] fraction of cell j with phi > phi_max
  std::vector<std::string> warnings;
};

namespace detail {

struct ChainPoint {
  double u = 0.0;
  double J = 0.0;  // sum of log f' along the u-chain (excluding the Y branch)
  std::vector<double> S;
};

inline ChainPoint pull_chain(const InducingScheme& s, const ToralCocycle& h, const Cylinder& c, double y) {
  ChainPoint p;
  p.S.assign(h.d(), 0.0);
  p.u = y;
  for (int r = c.phi - 1; r >= 1; --r) {
    const int b = c.itinerary[r];
    p.u = s.map().branch_inverse(b, p.u);
    p.J += std::log(s.map().derivative_on(b, p.u));
    for (int i = 0; i < h.d(); ++i) p.S[i] += h.component(i, p.u);
  }
  return p;
}

}  // namespace detail

inline UlamQuadrature build_quadrature(const InducingScheme& s, const ToralCocycle& h, const UlamGrid& grid, int phi_max = -1) {
  if (phi_max < 0) phi_max = s.phi_max();
  if (phi_max > s.phi_max()) throw domain_error("quadrature depth exceeds the partition depth");
  if (grid.m < 2) throw domain_error("Ulam grid needs at least two cells");
  if (std::abs(grid.Y.lo - s.Y().lo) > 1e-15 || std::abs(grid.Y.hi - s.Y().hi) > 1e-15)
    throw domain_error("Ulam grid must partition the inducing set");
  const auto& gl = gauss_legendre(grid.quad_order);
  const std::size_t m = grid.m, Q = gl.first.size(), MQ = m * Q;
  const int d = h.d();
  const auto& f = s.map();
  const int yb = s.y_branch();

  UlamQuadrature out;
  out.grid = grid;
  out.phi_max = phi_max;
  out.d = d;
  out.col_mass.assign(phi_max + 1, std::vector<double>(m, 0.0));
  if (grid.m < 32) out.warnings.push_back("Ulam grid below 32 cells; test-scale resolution");

  // cell edges in the u coordinate
  std::vector<double> uedge(m + 1);
  for (std::size_t j = 0; j <= m; ++j) uedge[j] = j == m ? 1.0 : s.u_of_z(grid.edge(j));

  std::vector<double> ynode(MQ), ywt(MQ);
  for (std::size_t i = 0; i < m; ++i) {
    const Interval c = grid.cell(i);
    for (std::size_t q = 0; q < Q; ++q) {
      ynode[i * Q + q] = c.mid() + 0.5 * c.length() * gl.first[q];
      ywt[i * Q + q] = 0.5 * c.length() * gl.second[q];
    }
  }

  auto source_of_u = [&](double u) {
    auto it = std::upper_bound(uedge.begin(), uedge.end(), u);
    std::size_t j = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - uedge.begin()) - 1));
    return std::min(j, m - 1);
  };

  auto emit = [&](int n, std::size_t j, std::size_t i, const double* u, const double* S, const double* J,
                  const double* wy, std::size_t cnt) {
    UlamQuadrature::Block b;
    b.n = n;
    b.source = static_cast<std::uint32_t>(j);
    b.target = static_cast<std::uint32_t>(i);
    b.begin = out.weight.size();
    b.count = cnt;
    double mass = 0.0;
    for (std::size_t q = 0; q < cnt; ++q) {
      const double z = s.z_of_u(u[q]);
      const double w = wy[q] * std::exp(-J[q]) / f.derivative_on(yb, z);
      out.weight.push_back(w);
      mass += w;
      for (int k = 0; k < d; ++k) out.H.push_back(S[q * d + k] + h.component(k, z));
    }
    out.col_mass[n][j] += mass / grid.h();
    out.blocks.push_back(b);
  };

  struct LevelData {
    std::size_t cyl;
    std::vector<double> U, S, J;
  };
  std::vector<LevelData> level;
  {
    LevelData root{s.level_begin(1), ynode, std::vector<double>(MQ * d, 0.0), std::vector<double>(MQ, 0.0)};
    level.push_back(std::move(root));
  }
  const auto& cyls = s.cylinders();
  std::vector<double> su, sS, sJ, sw;
  for (int n = 1; n <= phi_max; ++n) {
    if (n > 1) {
      std::vector<LevelData> next;
      for (std::size_t ci = s.level_begin(n); ci < s.level_end(n); ++ci) {
        const Cylinder& c = cyls[ci];
        const std::size_t slot = static_cast<std::size_t>(c.parent) - s.level_begin(n - 1);
        if (slot >= level.size() || static_cast<std::ptrdiff_t>(level[slot].cyl) != c.parent)
          throw domain_error("cylinder tree inconsistent");
        const LevelData* parent = &level[slot];
        const int b = c.itinerary[1];
        LevelData L{ci, std::vector<double>(MQ), std::vector<double>(MQ * d), std::vector<double>(MQ)};
        for (std::size_t q = 0; q < MQ; ++q) {
          const double u = f.branch_inverse(b, parent->U[q]);
          L.U[q] = u;
          L.J[q] = parent->J[q] + std::log(f.derivative_on(b, u));
          for (int k = 0; k < d; ++k) L.S[q * d + k] = parent->S[q * d + k] + h.component(k, u);
        }
        next.push_back(std::move(L));
      }
      level.swap(next);
    }
    for (const auto& L : level) {
      const Cylinder& c = cyls[L.cyl];
      // interior source-cell edges inside the cylinder, pushed forward to Y
      std::vector<double> ybreak;
      auto lo_it = std::upper_bound(uedge.begin(), uedge.end(), c.ua);
      for (auto it = lo_it; it != uedge.end() && *it < c.ub; ++it) {
        double x = *it;
        for (int r = 1; r < c.phi; ++r) x = f.evaluate_on(c.itinerary[r], x);
        ybreak.push_back(x);
      }
      const std::size_t j0 = source_of_u(0.5 * (c.ua + c.ub));
      std::size_t bk = 0;
      for (std::size_t i = 0; i < m; ++i) {
        const Interval tc = grid.cell(i);
        std::vector<double> cuts;
        while (bk < ybreak.size() && ybreak[bk] < tc.hi) {
          if (ybreak[bk] > tc.lo) cuts.push_back(ybreak[bk]);
          ++bk;
        }
        if (ybreak.empty()) {
          emit(n, j0, i, &L.U[i * Q], &L.S[i * Q * d], &L.J[i * Q], &ywt[i * Q], Q);
          continue;
        }
        std::vector<double> edges{tc.lo};
        edges.insert(edges.end(), cuts.begin(), cuts.end());
        edges.push_back(tc.hi);
        for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
          const double a = edges[e], bnd = edges[e + 1];
          if (!(bnd > a)) continue;
          su.clear(), sS.clear(), sJ.clear(), sw.clear();
          for (std::size_t q = 0; q < Q; ++q) {
            const double y = 0.5 * (a + bnd) + 0.5 * (bnd - a) * gl.first[q];
            const auto p = detail::pull_chain(s, h, c, y);
            su.push_back(p.u);
            sJ.push_back(p.J);
            sS.insert(sS.end(), p.S.begin(), p.S.end());
            sw.push_back(0.5 * (bnd - a) * gl.second[q]);
          }
          const auto mid = detail::pull_chain(s, h, c, 0.5 * (a + bnd));
          emit(n, source_of_u(mid.u), i, su.data(), sS.data(), sJ.data(), sw.data(), Q);
        }
      }
    }
  }
  out.missing.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    CompensatedSum<double> acc;
    for (int n = 1; n <= phi_max; ++n) acc.add(out.col_mass[n][j]);
    double miss = 1.0 - acc.value();
    if (miss < -1e-10) out.warnings.push_back("negative missing mass in cell " + std::to_string(j));
    out.missing[j] = miss < 1e-13 ? 0.0 : miss;
  }
  return out;
}

struct TwistedOperatorSet {
  std::vector<int> k;
  UlamGrid grid;
  int phi_max = 0;
  std::vector<SpMat> pieces;        // pieces[n], n = 1..phi_max+1; the last is the lumped tail
  std::vector<double> stationary;   // mu_Z per cell (probability)
  std::vector<double> piece_mass;   // mu_Z(phi = n), same indexing
  double truncation_mass = 0.0;     // mu_Z(phi > phi_max)
  std::vector<std::string> warnings;

  int tail_index() const { return phi_max + 1; }
  std::size_t m() const { return grid.m; }
  bool is_untwisted() const {
    return std::all_of(k.begin(), k.end(), [](int c) { return c == 0; });
  }
};

// Builds the stationary density once from the untwisted quadrature and then
// produces twisted sets for any k on demand.
class TwistedFamily {
 public:
  TwistedFamily(std::shared_ptr<const UlamQuadrature> quad, int max_iter = 100000) : quad_(std::move(quad)) {
    compute_stationary(max_iter);
  }
  TwistedFamily(const InducingScheme& s, const ToralCocycle& h, const UlamGrid& grid, int phi_max = -1)
      : TwistedFamily(std::make_shared<const UlamQuadrature>(build_quadrature(s, h, grid, phi_max))) {}

  const UlamQuadrature& quadrature() const { return *quad_; }
  const std::vector<double>& stationary() const { return mu_; }
  // Lebesgue density per cell, integrates to one over Y
  std::vector<double> density() const {
    std::vector<double> r(mu_.size());
    for (std::size_t i = 0; i < mu_.size(); ++i) r[i] = mu_[i] / quad_->grid.h();
    return r;
  }
  int power_iterations() const { return iterations_; }

  ReturnTimeLaw law() const {
    const auto& q = *quad_;
    ReturnTimeLaw law;
    law.weighting = "mu_Z";
    law.mass.assign(q.phi_max + 1, 0.0);
    for (int n = 1; n <= q.phi_max; ++n) {
      CompensatedSum<double> s;
      for (std::size_t j = 0; j < q.grid.m; ++j) s.add(mu_[j] * q.col_mass[n][j]);
      law.mass[n] = s.value();
    }
    CompensatedSum<double> b;
    for (std::size_t j = 0; j < q.grid.m; ++j) b.add(mu_[j] * q.missing[j]);
    law.beyond = b.value();
    return law;
  }

  // Lebesgue-Ulam pieces P_{k,n}(i,j) for n = 1..phi_max, plus tail shape.
  std::vector<SpMat> lebesgue_pieces(const std::vector<int>& k) const {
    const auto& q = *quad_;
    if (static_cast<int>(k.size()) != q.d) throw domain_error("mode k has wrong dimension");
    const std::size_t m = q.grid.m;
    std::vector<std::vector<Eigen::Triplet<cplx>>> trip(q.phi_max + 2);
    const double inv_h = 1.0 / q.grid.h();
    for (const auto& b : q.blocks) {
      cplx acc{};
      for (std::size_t t = 0; t < b.count; ++t) {
        const std::size_t node = b.begin + t;
        double phase = 0.0;
        for (int c = 0; c < q.d; ++c) phase += k[c] * q.H[node * q.d + c];
        acc += q.weight[node] * std::polar(1.0, phase);
      }
      trip[b.n].emplace_back(b.target, b.source, acc * inv_h);
    }
    std::vector<SpMat> P(q.phi_max + 2, SpMat(m, m));
    for (int n = 1; n <= q.phi_max; ++n) P[n].setFromTriplets(trip[n].begin(), trip[n].end());
    // tail: lump phi > phi_max at n = phi_max+1 with the column shape of the deepest piece
    std::vector<Eigen::Triplet<cplx>> tt;
    for (std::size_t j = 0; j < m; ++j) {
      if (q.missing[j] <= 0) continue;
      int deep = q.phi_max;
      while (deep >= 1 && q.col_mass[deep][j] <= 0) --deep;
      if (deep < 1) continue;
      const double norm = q.col_mass[deep][j];
      for (SpMat::InnerIterator it(P[deep], static_cast<Eigen::Index>(j)); it; ++it)
        tt.emplace_back(it.row(), j, it.value() * (q.missing[j] / norm));
    }
    P[q.phi_max + 1].setFromTriplets(tt.begin(), tt.end());
    return P;
  }

  TwistedOperatorSet set(const std::vector<int>& k) const {
    const auto& q = *quad_;
    TwistedOperatorSet S;
    S.k = k;
    S.grid = q.grid;
    S.phi_max = q.phi_max;
    S.stationary = mu_;
    S.warnings = q.warnings;
    auto P = lebesgue_pieces(k);
    const std::size_t m = q.grid.m;
    // R = D^{-1} P D with D = diag(mu)
    S.pieces.resize(q.phi_max + 2);
    for (int n = 1; n <= q.phi_max + 1; ++n) {
      SpMat R = P[n];
      for (Eigen::Index j = 0; j < R.outerSize(); ++j)
        for (SpMat::InnerIterator it(R, j); it; ++it) it.valueRef() *= mu_[j] / mu_[it.row()];
      S.pieces[n] = std::move(R);
    }
    const ReturnTimeLaw L = law();
    S.piece_mass.assign(q.phi_max + 2, 0.0);
    for (int n = 1; n <= q.phi_max; ++n) S.piece_mass[n] = L.mass[n];
    S.piece_mass[q.phi_max + 1] = L.beyond;
    S.truncation_mass = L.beyond;
    (void)m;
    if (L.beyond > 1e-3) S.warnings.push_back("truncated mu_Z mass " + std::to_string(L.beyond) + " beyond phi_max");
    return S;
  }

 private:
  void compute_stationary(int max_iter) {
    const auto& q = *quad_;
    const std::size_t m = q.grid.m;
    // untwisted Lebesgue operator, column-stochastic after the tail lump
    auto P = lebesgue_pieces(std::vector<int>(q.d, 0));
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
    for (int n = 1; n <= q.phi_max + 1; ++n)
      for (Eigen::Index j = 0; j < P[n].outerSize(); ++j)
        for (SpMat::InnerIterator it(P[n], j); it; ++it) A(it.row(), j) += it.value().real();
    Eigen::VectorXd p = Eigen::VectorXd::Constant(m, 1.0 / m);
    iterations_ = 0;
    bool ok = false;
    for (int it = 0; it < max_iter; ++it) {
      Eigen::VectorXd np = A * p;
      np /= np.sum();
      const double diff = (np - p).lpNorm<Eigen::Infinity>();
      p = np;
      iterations_ = it + 1;
      if (diff < 1e-15) {
        ok = true;
        break;
      }
    }
    if (!ok) throw convergence_error("stationary density: power iteration did not converge");
    mu_.assign(p.data(), p.data() + m);
    for (double v : mu_)
      if (!(v > 0)) throw convergence_error("stationary density has a nonpositive entry");
  }

  std::shared_ptr<const UlamQuadrature> quad_;
  std::vector<double> mu_;
  int iterations_ = 0;
};

inline TwistedOperatorSet build_twisted_set(const InducingScheme& s, const ToralCocycle& h, const std::vector<int>& k,
                                            const UlamGrid& grid, int phi_max = -1) {
  return TwistedFamily(s, h, grid, phi_max).set(k);
}

inline MatC assemble_R_omega(const TwistedOperatorSet& S, double omega, bool include_tail = true) {
  const Eigen::Index m = static_cast<Eigen::Index>(S.m());
  MatC R = MatC::Zero(m, m);
  const int last = include_tail ? S.tail_index() : S.phi_max;
  for (int n = 1; n <= last; ++n) {
    const cplx ph = std::polar(1.0, n * omega);
    for (Eigen::Index j = 0; j < S.pieces[n].outerSize(); ++j)
      for (SpMat::InnerIterator it(S.pieces[n], j); it; ++it) R(it.row(), j) += it.value() * ph;
  }
  return R;
}

inline double sup_norm(const MatC& A) { return A.cwiseAbs().rowwise().sum().maxCoeff(); }

struct StationaryCheck {
  std::vector<double> mu;
  double eigenvalue = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

// Left Perron vector of R_0(0): mu R = mu.
inline StationaryCheck stationary_density(const TwistedOperatorSet& S, int max_iter = 100000) {
  if (!S.is_untwisted()) throw domain_error("stationary_density needs the untwisted set");
  const MatC R = assemble_R_omega(S, 0.0);
  const Eigen::MatrixXd Rr = R.real();
  const Eigen::Index m = Rr.rows();
  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Constant(m, 1.0 / m);
  StationaryCheck out;
  bool ok = false;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::RowVectorXd nm = mu * Rr;
    const double lam = nm.sum() / mu.sum();
    nm /= nm.sum();
    const double diff = (nm - mu).lpNorm<Eigen::Infinity>();
    mu = nm;
    out.iterations = it + 1;
    out.eigenvalue = lam;
    if (diff < 1e-15) {
      ok = true;
      break;
    }
  }
  if (!ok) throw convergence_error("stationary_density: power iteration did not converge");
  out.mu.assign(mu.data(), mu.data() + m);
  out.residual = (mu * Rr - mu).lpNorm<Eigen::Infinity>();
  return out;
}

struct SpectralGap {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

inline SpectralGap spectral_gap(const TwistedOperatorSet& S) {
  if (!S.is_untwisted()) throw domain_error("spectral_gap needs the untwisted set");
  const Eigen::MatrixXd R = assemble_R_omega(S, 0.0).real();
  Eigen::EigenSolver<Eigen::MatrixXd> es(R, false);
  if (es.info() != Eigen::Success) throw convergence_error("spectral_gap: eigensolver failed");
  std::vector<double> mods;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) mods.push_back(std::abs(es.eigenvalues()[i]));
  std::sort(mods.begin(), mods.end(), std::greater<>());
  return {mods[0], mods.size() > 1 ? mods[1] : 0.0};
}

enum class NormKind { sup, spectral };

struct ResolventPoint {
  double omega = 0.0;
  double norm = 0.0;
  double condition = 0.0;
  bool singular = false;
};

struct ResolventReport {
  std::vector<int> k;
  double sup_norm = 0.0;
  double argmax_omega = 0.0;
  bool singular = false;
  bool rejected = false;  // k = 0
  std::string message;
  std::vector<ResolventPoint> points;
};

inline constexpr double singular_condition = 1e12;

inline ResolventPoint resolvent_at(const TwistedOperatorSet& S, double omega, NormKind norm, MatC* inverse_out = nullptr) {
  const Eigen::Index m = static_cast<Eigen::Index>(S.m());
  const MatC A = MatC::Identity(m, m) - assemble_R_omega(S, omega);
  Eigen::PartialPivLU<MatC> lu(A);
  MatC inv = lu.inverse();
  ResolventPoint p;
  p.omega = omega;
  const double an = sup_norm(A), in = sup_norm(inv);
  p.condition = an * in;
  p.singular = !std::isfinite(p.condition) || p.condition > singular_condition;
  if (norm == NormKind::sup) {
    p.norm = in;
  } else {
    Eigen::JacobiSVD<MatC> svd(inv);
    p.norm = svd.singularValues()(0);
  }
  if (inverse_out) *inverse_out = std::move(inv);
  return p;
}

inline ResolventReport resolvent_diagnostic(const TwistedOperatorSet& S, int omega_grid, NormKind norm = NormKind::sup) {
  ResolventReport rep;
  rep.k = S.k;
  if (S.is_untwisted()) {
    rep.rejected = true;
    rep.singular = true;
    rep.message = "k = 0: I - R_0(0) fixes constants; resolvent undefined at omega = 0";
    return rep;
  }
  rep.points.resize(omega_grid);
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < omega_grid; ++j) rep.points[j] = resolvent_at(S, two_pi * j / omega_grid, norm);
  for (const auto& p : rep.points) {
    if (p.singular) {
      rep.singular = true;
      if (rep.message.empty())
        rep.message = "numerically singular at omega=" + std::to_string(p.omega) +
                      " (possible eigenfunction, mixing obstruction)";
      continue;
    }
    if (p.norm > rep.sup_norm) rep.sup_norm = p.norm, rep.argmax_omega = p.omega;
  }
  return rep;
}

// max_n |R_{k,n}|_inf / mu_Z(phi=n): compared against C3_hat.
inline double piece_norm_ratio(const TwistedOperatorSet& S, int n_max = -1) {
  if (n_max < 0) n_max = S.phi_max;
  double worst = 0.0;
  for (int n = 1; n <= n_max; ++n) {
    if (S.piece_mass[n] <= 0) continue;
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(S.m());
    for (Eigen::Index j = 0; j < S.pieces[n].outerSize(); ++j)
      for (SpMat::InnerIterator it(S.pieces[n], j); it; ++it) rows(it.row()) += std::abs(it.value());
    worst = std::max(worst, rows.maxCoeff() / S.piece_mass[n]);
  }
  return worst;
}

}  // namespace toralmix
