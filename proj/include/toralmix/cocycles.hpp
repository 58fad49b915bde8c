#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "core.hpp"
#include "inducing.hpp"
#include "interval_maps.hpp"

namespace toralmix {

// amplitude * cos(2 pi frequency x + phase)
struct TrigTerm {
  int frequency = 1;
  double amplitude = 0.0;
  double phase = 0.0;
};

struct CocycleComponent {
  int winding = 0;  // adds 2 pi winding x
  std::vector<TrigTerm> terms;
};

class ToralCocycle {
 public:
  ToralCocycle() = default;
  explicit ToralCocycle(std::vector<CocycleComponent> comps, double eta = 1.0) : comps_(std::move(comps)), eta_(eta) {
    if (comps_.empty()) throw domain_error("cocycle dimension must be >= 1");
    if (!(eta_ > 0 && eta_ <= 1)) throw domain_error("Holder exponent must lie in (0,1]");
  }

  static ToralCocycle zero(int d = 1) { return ToralCocycle(std::vector<CocycleComponent>(d)); }
  static ToralCocycle constant(double c) { return ToralCocycle({CocycleComponent{0, {{0, c, 0.0}}}}); }
  static ToralCocycle scalar(double eps) { return ToralCocycle({CocycleComponent{0, {{1, eps, 0.0}}}}); }
  static ToralCocycle planar(double e1, double e2) {
    return ToralCocycle({CocycleComponent{0, {{1, e1, 0.0}}},
                         CocycleComponent{0, {{2, e2, -0.5 * std::numbers::pi}}}});
  }
  static ToralCocycle winding(int w) { return ToralCocycle({CocycleComponent{w, {}}}); }

  int d() const { return static_cast<int>(comps_.size()); }
  double eta() const { return eta_; }
  const std::vector<CocycleComponent>& components() const { return comps_; }

  bool is_zero() const {
    for (const auto& c : comps_) {
      if (c.winding != 0) return false;
      for (const auto& t : c.terms)
        if (t.amplitude != 0.0) return false;
    }
    return true;
  }

  // Lifted (real-valued) component.
  template <class T>
  T component(int i, T x) const {
    const auto& c = comps_[i];
    const T tp = T(2) * std::numbers::pi_v<T>;
    T v = tp * T(c.winding) * x;
    for (const auto& t : c.terms) v += T(t.amplitude) * std::cos(tp * T(t.frequency) * x + T(t.phase));
    return v;
  }

  template <class T>
  T component_derivative(int i, T x) const {
    const auto& c = comps_[i];
    const T tp = T(2) * std::numbers::pi_v<T>;
    T v = tp * T(c.winding);
    for (const auto& t : c.terms)
      v -= T(t.amplitude) * tp * T(t.frequency) * std::sin(tp * T(t.frequency) * x + T(t.phase));
    return v;
  }

  std::vector<double> lifted(double x) const {
    std::vector<double> v(d());
    for (int i = 0; i < d(); ++i) v[i] = component(i, x);
    return v;
  }

  std::vector<double> value(double x) const {
    auto v = lifted(x);
    for (auto& a : v) a = wrap_angle(a);
    return v;
  }

  // |h|_{C^eta}: sup over coordinates and sampled pairs; for eta = 1 the sup of |h'|.
  double holder_seminorm(int grid = 4096) const {
    double s = 0.0;
    for (int i = 0; i < d(); ++i) {
      if (eta_ == 1.0) {
        for (int j = 0; j <= grid; ++j) s = std::max(s, std::abs(component_derivative(i, double(j) / grid)));
        continue;
      }
      for (int j = 0; j < grid; ++j)
        for (int step = 1; step <= grid / 2; step *= 2) {
          const double x = double(j) / grid, y = double((j + step) % grid) / grid;
          const double dist = std::min(std::abs(x - y), 1 - std::abs(x - y));
          s = std::max(s, circular_distance(component(i, x), component(i, y)) / std::pow(dist, eta_));
        }
    }
    return s;
  }

 private:
  std::vector<CocycleComponent> comps_;
  double eta_ = 1.0;
};

inline std::vector<double> birkhoff_sum_lifted(const ToralCocycle& h, const IntermittentMap& f, double x, std::size_t n) {
  if (!(x >= 0.0 && x < 1.0)) throw domain_error("birkhoff_sum: x outside [0,1)");
  std::vector<CompensatedSum<double>> acc(h.d());
  for (std::size_t j = 0; j < n; ++j) {
    for (int i = 0; i < h.d(); ++i) acc[i].add(h.component(i, x));
    x = f.evaluate(x);
  }
  std::vector<double> out(h.d());
  for (int i = 0; i < h.d(); ++i) out[i] = acc[i].value();
  return out;
}

inline std::vector<double> birkhoff_sum(const ToralCocycle& h, const IntermittentMap& f, double x, std::size_t n) {
  auto v = birkhoff_sum_lifted(h, f, x, n);
  for (auto& a : v) a = wrap_angle(a);
  return v;
}

struct InducedCocycleValue {
  std::vector<double> H;  // reduced mod 2 pi
  int phi = 0;
};

inline std::vector<double> induced_cocycle_lifted(const ToralCocycle& h, const InducingScheme& s, double z, int* phi_out = nullptr) {
  const FirstReturn fr = s.first_return(z, s.phi_max() * 64 + 1024);
  if (phi_out) *phi_out = fr.tau;
  return birkhoff_sum_lifted(h, s.map(), z, fr.tau);
}

inline InducedCocycleValue induced_cocycle(const ToralCocycle& h, const InducingScheme& s, double z) {
  InducedCocycleValue v;
  v.H = induced_cocycle_lifted(h, s, z, &v.phi);
  for (auto& a : v.H) a = wrap_angle(a);
  return v;
}

struct ExtensionPoint {
  double x = 0.0;
  std::vector<double> psi;
};

inline std::vector<ExtensionPoint> extension_orbit(const ToralCocycle& h, const IntermittentMap& f, double x0,
                                                   std::vector<double> psi0, std::size_t n) {
  if (static_cast<int>(psi0.size()) != h.d()) throw domain_error("extension_orbit: psi0 has wrong dimension");
  if (!(x0 >= 0.0 && x0 < 1.0)) throw domain_error("extension_orbit: x0 outside [0,1)");
  std::vector<ExtensionPoint> out;
  out.reserve(n + 1);
  std::vector<double> lifted = psi0;
  double x = x0;
  for (std::size_t j = 0; j <= n; ++j) {
    ExtensionPoint p{x, lifted};
    for (auto& a : p.psi) a = wrap_angle(a);
    out.push_back(std::move(p));
    if (j == n) break;
    for (int i = 0; i < h.d(); ++i) lifted[i] += h.component(i, x);
    x = f.evaluate(x);
  }
  return out;
}

// Sup over same-cylinder pairs of |H(z)-H(z')| / (phi(a) |Gz-Gz'|^eta), the
// measurable form of the induced-cocycle Lipschitz bound.
inline double induced_cocycle_regularity(const ToralCocycle& h, const InducingScheme& s, std::size_t pairs,
                                         std::uint64_t seed, int phi_cap = 64) {
  std::seed_seq seq{seed, std::uint64_t{77}};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto& cyls = s.cylinders();
  std::size_t pool = 0;
  while (pool < cyls.size() && cyls[pool].phi <= phi_cap) ++pool;
  std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
  const Interval Y = s.Y();
  double worst = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const Cylinder& c = cyls[pick(rng)];
    const double y1 = Y.lo + Y.length() * unif(rng), y2 = Y.lo + Y.length() * unif(rng);
    if (y1 == y2) continue;
    // H along the pulled-back chains
    auto chain_H = [&](double y) {
      std::vector<double> H(h.d(), 0.0);
      double u = y;
      for (int r = c.phi - 1; r >= 1; --r) {
        u = s.map().branch_inverse(c.itinerary[r], u);
        for (int k = 0; k < h.d(); ++k) H[k] += h.component(k, u);
      }
      const double z = s.z_of_u(u);
      for (int k = 0; k < h.d(); ++k) H[k] += h.component(k, z);
      return H;
    };
    const auto H1 = chain_H(y1), H2 = chain_H(y2);
    double dH = 0.0;
    for (int k = 0; k < h.d(); ++k) dH = std::max(dH, std::abs(H1[k] - H2[k]));
    worst = std::max(worst, dH / (c.phi * std::pow(std::abs(y1 - y2), h.eta())));
  }
  return worst;
}

// v_k(x) = sum_j poly[j] x^j + sum_t coeff_t e^{2 pi i f_t x}
struct ModeTerm {
  int frequency = 0;
  cplx coeff{};
};

struct Mode {
  std::vector<int> k;
  std::vector<cplx> poly;
  std::vector<ModeTerm> terms;

  cplx operator()(double x) const {
    cplx v{};
    double xp = 1.0;
    for (const auto& c : poly) v += c * xp, xp *= x;
    for (const auto& t : terms) v += t.coeff * std::polar(1.0, two_pi * t.frequency * x);
    return v;
  }

  // average over [a,b], exact
  cplx average(double a, double b) const {
    cplx v{};
    for (std::size_t j = 0; j < poly.size(); ++j)
      v += poly[j] * (std::pow(b, j + 1.0) - std::pow(a, j + 1.0)) / ((j + 1.0) * (b - a));
    for (const auto& t : terms) {
      if (t.frequency == 0) {
        v += t.coeff;
        continue;
      }
      const double w = two_pi * t.frequency;
      v += t.coeff * (std::polar(1.0, w * b) - std::polar(1.0, w * a)) / (cplx(0, w) * (b - a));
    }
    return v;
  }

  double sup_bound() const {
    double s = 0.0;
    for (const auto& c : poly) s += std::abs(c);
    for (const auto& t : terms) s += std::abs(t.coeff);
    return s;
  }

  double lipschitz_bound() const {
    double s = 0.0;
    for (std::size_t j = 1; j < poly.size(); ++j) s += j * std::abs(poly[j]);
    for (const auto& t : terms) s += two_pi * std::abs(t.frequency) * std::abs(t.coeff);
    return s;
  }
};

enum class Support { X, Y };

class ToralObservable {
 public:
  ToralObservable() = default;
  ToralObservable(int d, std::vector<Mode> modes, Support support = Support::X, Interval Y = {0.0, 1.0}, int p = 0)
      : d_(d), modes_(std::move(modes)), support_(support), Y_(Y), p_(p) {
    for (const auto& m : modes_)
      if (static_cast<int>(m.k.size()) != d_) throw domain_error("observable mode has wrong dimension");
  }

  // amplitude * cos(k . psi), optionally restricted to Y
  static ToralObservable cos_mode(std::vector<int> k, double amplitude = 1.0, Support support = Support::X,
                                  Interval Y = {0.0, 1.0}) {
    std::vector<int> mk = k;
    for (auto& c : mk) c = -c;
    const int d = static_cast<int>(k.size());
    return ToralObservable(d, {Mode{k, {cplx(amplitude / 2)}, {}}, Mode{mk, {cplx(amplitude / 2)}, {}}}, support, Y);
  }

  int d() const { return d_; }
  Support support() const { return support_; }
  Interval Y() const { return Y_; }
  int p() const { return p_; }
  const std::vector<Mode>& modes() const { return modes_; }

  const Mode* find(const std::vector<int>& k) const {
    for (const auto& m : modes_)
      if (m.k == k) return &m;
    return nullptr;
  }

  bool in_support(double x) const { return support_ == Support::X || Y_.contains(x); }

  void check_symmetry(double tol = 1e-12) const {
    for (const auto& m : modes_) {
      std::vector<int> mk = m.k;
      for (auto& c : mk) c = -c;
      const Mode* partner = find(mk);
      if (!partner) throw symmetry_error("mode without conjugate partner");
      // compare v_{-k} and conj(v_k) on a probe grid
      for (int j = 0; j <= 16; ++j) {
        const double x = j / 16.0;
        const cplx a = (*partner)(x), b = std::conj(m(x));
        if (std::abs(a - b) > tol * (1.0 + std::abs(a) + std::abs(b)))
          throw symmetry_error("conjugate symmetry v_{-k} = conj(v_k) violated");
      }
    }
  }

  double evaluate(double x, const std::vector<double>& psi) const {
    if (static_cast<int>(psi.size()) != d_) throw domain_error("evaluate_observable: psi has wrong dimension");
    if (!in_support(x)) return 0.0;
    cplx v{};
    double scale = 0.0;
    for (const auto& m : modes_) {
      double phase = 0.0;
      for (int i = 0; i < d_; ++i) phase += m.k[i] * psi[i];
      const cplx t = m(x) * std::polar(1.0, phase);
      v += t;
      scale += std::abs(t);
    }
    if (std::abs(v.imag()) > 1e-12 * (1.0 + scale)) {
      check_symmetry();
      throw symmetry_error("observable value not real");
    }
    return v.real();
  }

  // mode 0 average over the support against a probability density on [0,1)
  // supplied as cell averages; used for vbar.
  cplx mode_zero(double x) const {
    const Mode* m0 = find(std::vector<int>(d_, 0));
    return m0 && in_support(x) ? (*m0)(x) : cplx{};
  }

  // sum_{|j|<=p} || d_psi^j v ||_{C^eta}, bounded termwise over the finite mode set
  double ceta_p_norm(int p) const {
    double total = 0.0;
    std::vector<int> j(d_, 0);
    std::function<void(int, int)> rec = [&](int pos, int left) {
      if (pos == d_) {
        for (const auto& m : modes_) {
          double f = 1.0;
          for (int i = 0; i < d_; ++i) f *= std::pow(std::abs(double(m.k[i])), j[i]);
          total += f * (m.sup_bound() + m.lipschitz_bound());
        }
        return;
      }
      for (int a = 0; a <= left; ++a) {
        j[pos] = a;
        rec(pos + 1, left - a);
      }
    };
    rec(0, p);
    return total;
  }

 private:
  int d_ = 1;
  std::vector<Mode> modes_;
  Support support_ = Support::X;
  Interval Y_{0.0, 1.0};
  int p_ = 0;
};

inline double evaluate_observable(const ToralObservable& v, double x, const std::vector<double>& psi) {
  return v.evaluate(x, psi);
}

}  // namespace toralmix
