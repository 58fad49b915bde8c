#pragma once

#include <fftw3.h>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "core.hpp"
#include "operators.hpp"

namespace toralmix {

enum class RenewalMode { matrix, vector };

struct RenewalSequence {
  std::vector<int> k;
  int N = 0;
  RenewalMode mode = RenewalMode::vector;
  std::vector<MatC> matrices;  // matrix mode
  std::vector<VecC> vectors;   // vector mode: t_n = T_n v
  std::vector<double> norms;   // sup (row-sum) norm of T_n, or max |t_n|
  bool band_limited = false;   // Fourier reconstruction with omega = 0 removed
  std::vector<std::string> warnings;
};

namespace detail {

inline double vec_sup(const VecC& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace detail

// T_n = sum_{j=1}^{n} R_j T_{n-j}, T_0 = I.  The lumped tail piece sits at
// n = phi_max+1 like any other piece.
inline RenewalSequence renewal_recursion(const TwistedOperatorSet& S, int N, RenewalMode mode, const VecC& v = {}) {
  if (N < 0) throw domain_error("renewal_recursion: negative horizon");
  const Eigen::Index m = static_cast<Eigen::Index>(S.m());
  RenewalSequence out;
  out.k = S.k;
  out.N = N;
  out.mode = mode;
  const int last = S.tail_index();
  if (N > last) out.warnings.push_back("horizon beyond phi_max+1: pieces past the tail lump are zero");
  if (mode == RenewalMode::vector) {
    if (v.size() != m) throw domain_error("renewal_recursion: probe vector has wrong length");
    out.vectors.reserve(N + 1);
    out.vectors.push_back(v);
    for (int n = 1; n <= N; ++n) {
      VecC t = VecC::Zero(m);
      const int top = std::min(n, last);
      for (int j = 1; j <= top; ++j)
        if (S.pieces[j].nonZeros()) t.noalias() += S.pieces[j] * out.vectors[n - j];
      out.vectors.push_back(std::move(t));
    }
    for (const auto& t : out.vectors) out.norms.push_back(detail::vec_sup(t));
    return out;
  }
  out.matrices.reserve(N + 1);
  out.matrices.push_back(MatC::Identity(m, m));
  for (int n = 1; n <= N; ++n) {
    MatC t = MatC::Zero(m, m);
    const int top = std::min(n, last);
    for (int j = 1; j <= top; ++j)
      if (S.pieces[j].nonZeros()) t.noalias() += S.pieces[j] * out.matrices[n - j];
    out.matrices.push_back(std::move(t));
  }
  for (const auto& t : out.matrices) out.norms.push_back(sup_norm(t));
  return out;
}

struct FourierRenewal {
  RenewalSequence sequence;
  int omega_count = 0;
  std::vector<double> singular_omegas;
  std::vector<int> excluded;  // grid indices zeroed (k = 0)
};

// Coefficients of (I - R(omega))^{-1} by a length-M DFT.  Grid points are
// processed in P residue classes so only M/P >= N+1 samples per entry are
// held at once; each class is one batched FFT plus a twiddle.
inline FourierRenewal renewal_via_fourier(const TwistedOperatorSet& S, int N, int omega_count,
                                          RenewalMode mode = RenewalMode::matrix, const VecC& v = {}) {
  const int M = omega_count;
  if (N < 1) throw domain_error("renewal_via_fourier: horizon must be >= 1");
  if (M < 4 * N || (M & (M - 1)) != 0)
    throw domain_error("renewal_via_fourier: omega_count must be a power of two >= 4N");
  const Eigen::Index m = static_cast<Eigen::Index>(S.m());
  if (mode == RenewalMode::vector && v.size() != m) throw domain_error("renewal_via_fourier: probe has wrong length");
  int L = 1;
  while (L < N + 1) L *= 2;
  const int P = M / L;
  const Eigen::Index width = mode == RenewalMode::matrix ? m : 1;
  const std::size_t entries = static_cast<std::size_t>(m * width);

  FourierRenewal out;
  out.omega_count = M;
  out.sequence.k = S.k;
  out.sequence.N = N;
  out.sequence.mode = mode;
  const bool zero_mode = S.is_untwisted();
  out.sequence.band_limited = zero_mode;
  auto skip = [&](int j) {
    if (!zero_mode) return false;
    const int d = std::min(j, M - j);
    return d <= 2;
  };
  for (int j = 0; j < M; ++j)
    if (skip(j)) out.excluded.push_back(j);

  std::vector<MatC> acc(N + 1, MatC::Zero(m, width));
  fftw_complex* buf = fftw_alloc_complex(entries * L);
  int n_arr[1] = {L};
  fftw_plan plan;
#pragma omp critical(toralmix_fftw_plan)
  plan = fftw_plan_many_dft(1, n_arr, static_cast<int>(entries), buf, nullptr, 1, L, buf, nullptr, 1, L,
                            FFTW_FORWARD, FFTW_ESTIMATE);
  auto* data = reinterpret_cast<cplx*>(buf);
  std::vector<char> sing(M, 0);

  for (int s = 0; s < P; ++s) {
#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < L; ++r) {
      const int j = s + P * r;
      MatC X;
      bool singular = false;
      if (skip(j)) {
        X = MatC::Zero(m, width);
      } else {
        const double omega = two_pi * j / M;
        const MatC A = MatC::Identity(m, m) - assemble_R_omega(S, omega);
        Eigen::PartialPivLU<MatC> lu(A);
        if (mode == RenewalMode::matrix) {
          X = lu.inverse();
          const double cond = sup_norm(A) * sup_norm(X);
          singular = !std::isfinite(cond) || cond > singular_condition;
        } else {
          X = lu.solve(v);
          const double rc = lu.rcond();
          singular = !(rc > 1.0 / singular_condition);
        }
      }
      sing[j] = singular;
      for (Eigen::Index c = 0; c < width; ++c)
        for (Eigen::Index i = 0; i < m; ++i) data[static_cast<std::size_t>(c * m + i) * L + r] = X(i, c);
    }
    fftw_execute(plan);
    for (int n = 0; n <= N; ++n) {
      const cplx tw = std::polar(1.0 / M, -two_pi * double(n) * s / M);
      for (Eigen::Index c = 0; c < width; ++c)
        for (Eigen::Index i = 0; i < m; ++i) acc[n](i, c) += tw * data[static_cast<std::size_t>(c * m + i) * L + n];
    }
  }
#pragma omp critical(toralmix_fftw_plan)
  fftw_destroy_plan(plan);
  fftw_free(buf);

  for (int j = 0; j < M; ++j)
    if (sing[j]) out.singular_omegas.push_back(two_pi * j / M);
  if (!out.singular_omegas.empty())
    out.sequence.warnings.push_back(std::to_string(out.singular_omegas.size()) +
                                    " numerically singular grid points (possible eigenfunction)");
  if (zero_mode) out.sequence.warnings.push_back("k = 0: samples with |j| <= 2 removed; band-limited reconstruction");
  auto& seq = out.sequence;
  if (mode == RenewalMode::matrix) {
    seq.matrices = std::move(acc);
    for (const auto& t : seq.matrices) seq.norms.push_back(sup_norm(t));
  } else {
    for (auto& a : acc) seq.vectors.push_back(a.col(0));
    for (const auto& t : seq.vectors) seq.norms.push_back(detail::vec_sup(t));
  }
  return out;
}

// max_{n<=n_max} |A_n - B_n| / max(1, |B_n|), sup norms
inline double renewal_discrepancy(const RenewalSequence& a, const RenewalSequence& b, int n_max) {
  if (a.mode != b.mode) throw domain_error("renewal_discrepancy: mode mismatch");
  n_max = std::min({n_max, a.N, b.N});
  double worst = 0.0;
  for (int n = 0; n <= n_max; ++n) {
    double diff, ref;
    if (a.mode == RenewalMode::matrix) {
      diff = sup_norm(a.matrices[n] - b.matrices[n]);
      ref = sup_norm(b.matrices[n]);
    } else {
      diff = detail::vec_sup(a.vectors[n] - b.vectors[n]);
      ref = detail::vec_sup(b.vectors[n]);
    }
    worst = std::max(worst, diff / std::max(1.0, ref));
  }
  return worst;
}

struct FourierAgreement {
  int omega_count = 0;
  double discrepancy = 0.0;       // at omega_count
  double discrepancy_half = 0.0;  // at omega_count/2 (aliasing probe), NaN when not admissible
  bool singular = false;
  bool band_limited = false;
  int compared_to = 0;
};

// Inverts on the full grid (horizon omega_count/4) and compares with the
// recursion for n <= min(rec.N, omega_count/16).  The half grid is the
// aliasing probe.
inline FourierAgreement fourier_agreement(const TwistedOperatorSet& S, const RenewalSequence& rec, int omega_count) {
  FourierAgreement a;
  a.omega_count = omega_count;
  a.compared_to = std::min(rec.N, omega_count / 16);
  const VecC v = rec.mode == RenewalMode::vector ? rec.vectors.front() : VecC{};
  const auto f = renewal_via_fourier(S, omega_count / 4, omega_count, rec.mode, v);
  a.singular = !f.singular_omegas.empty();
  a.band_limited = f.sequence.band_limited;
  a.discrepancy = renewal_discrepancy(f.sequence, rec, a.compared_to);
  const int half = omega_count / 2;
  if (half >= 8) {
    const auto g = renewal_via_fourier(S, half / 4, half, rec.mode, v);
    a.discrepancy_half = renewal_discrepancy(g.sequence, rec, a.compared_to);
  } else {
    a.discrepancy_half = std::numeric_limits<double>::quiet_NaN();
  }
  return a;
}

// log-log least squares of norms[n] against n over the window
inline LinearFit decay_fit(const std::vector<double>& norms, Window window) {
  std::vector<double> xs, ys;
  for (std::size_t n = 1; n < norms.size(); ++n) xs.push_back(double(n)), ys.push_back(norms[n]);
  return loglog_slope(xs, ys, window);
}

// e^{2 pi i z} at cell centres; sup norm one
inline VecC fourier_probe(const UlamGrid& grid, int frequency = 1) {
  VecC v(static_cast<Eigen::Index>(grid.m));
  for (std::size_t i = 0; i < grid.m; ++i) v(i) = std::polar(1.0, two_pi * frequency * grid.cell(i).mid());
  return v;
}

}  // namespace toralmix
