#pragma once

#include <toml.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cocycles.hpp"
#include "core.hpp"
#include "interval_maps.hpp"

namespace toralmix {

struct ModeSpec {
  std::vector<int> k;
  std::vector<double> poly;                 // real polynomial coefficients
  std::vector<std::array<double, 3>> trig;  // (frequency, re, im)
};

struct ObservableSpec {
  std::string name = "cos";  // cos | generic_v | generic_w | custom
  std::string support = "Y";
  bool centered = false;
  std::vector<ModeSpec> modes;  // custom only
};

struct ExperimentConfig {
  std::string preset = "lsv-0.5";

  std::string family = "lsv";
  double gamma = 0.5;
  double c1 = 2.0;
  double c2 = 1.0;

  int phi_max = 1024;
  double theta = 0.75;
  double epsilon = 0.5;
  int m = 128;

  int N = 1024;
  int omega_count = 4096;
  std::uint64_t seed = 20240601;
  int threads = 0;
  std::string estimator = "operator";
  std::string renewal_mode = "vector";
  std::vector<int> k{1};
  int k_min = 1;
  int k_max = 8;
  double fit_lo = 16;
  double fit_hi = 512;
  int resolvent_grid = 256;

  std::string cocycle = "scalar";
  std::vector<double> amplitudes{0.3};
  int winding = 0;

  ObservableSpec v{"cos", "Y", false, {}};
  ObservableSpec w{"cos", "Y", false, {}};

  std::size_t walkers = 1000;
  std::size_t per_walker = 1000;
  std::size_t burn_in = 10000;

  int base_phi = 2;
  int excursion_phi = 3;
  int N_max = 25;
  int K = 5;
  double zeta = 3.0;
  int eigen_omega_grid = 64;
  int phi_cap = 64;

  std::optional<bool> finite_checks;
  std::optional<bool> infinite_checks;

  double tol_tail_beta = 0.15;
  double tol_fourier = 1e-6;
  double tol_tower = 1e-10;
  double tol_mc_se = 3.0;
  double tol_finite_ratio = 0.2;
  double tol_infinite_gap = 0.15;
  double tol_gap = 0.99;
  double tol_r2 = 0.9;

  std::string out_dir = "out";
  bool dat = false;

  bool finite_measure() const { return family == "doubling" || gamma < 1.0; }
  double beta() const { return family == "doubling" ? std::numeric_limits<double>::infinity() : 1.0 / gamma; }
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"lsv-0.3", "lsv-0.5", "lsv-1.5", "lsv-1.0", "thaler-0.5", "doubling", "control-zero"};
  return names;
}

inline void apply_preset(ExperimentConfig& c, const std::string& name) {
  c.preset = name;
  if (name == "lsv-0.3") {
    c.gamma = 0.3;
    c.v.name = "generic_v";
    c.w.name = "generic_w";
  } else if (name == "lsv-0.5") {
    c.gamma = 0.5;
  } else if (name == "lsv-1.5") {
    c.gamma = 1.5;
    c.v.name = "generic_v";
    c.w.name = "generic_w";
    c.N = 4096;
    c.phi_max = 4096;
  } else if (name == "lsv-1.0") {
    c.gamma = 1.0;
    c.v.name = "generic_v";
    c.w.name = "generic_w";
  } else if (name == "thaler-0.5") {
    c.family = "thaler";
    c.gamma = 0.5;
    c.c2 = 1.0;
  } else if (name == "doubling") {
    c.family = "doubling";
    c.gamma = 0.0;
    c.phi_max = 48;
  } else if (name == "control-zero") {
    c.gamma = 0.5;
    c.cocycle = "zero";
    c.amplitudes.clear();
  } else {
    throw config_error("preset: unknown name '" + name + "'");
  }
}

namespace detail {

inline void reject_unknown(const toml::table& t, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, node] : t)
    if (!allowed.count(std::string(key.str())))
      throw config_error(where + "." + std::string(key.str()) + ": unknown key");
}

template <class T>
void read(const toml::table& t, const char* key, T& out, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return;
  if constexpr (std::is_same_v<T, bool>) {
    if (!n->is_boolean()) throw config_error(where + "." + key + ": expected a boolean");
    out = n->as_boolean()->get();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!n->is_string()) throw config_error(where + "." + key + ": expected a string");
    out = n->as_string()->get();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (n->is_integer())
      out = static_cast<T>(n->as_integer()->get());
    else if (n->is_floating_point())
      out = static_cast<T>(n->as_floating_point()->get());
    else
      throw config_error(where + "." + key + ": expected a number");
  } else {
    if (!n->is_integer()) throw config_error(where + "." + key + ": expected an integer");
    const auto v = n->as_integer()->get();
    if constexpr (std::is_unsigned_v<T>)
      if (v < 0) throw config_error(where + "." + key + ": must be nonnegative");
    out = static_cast<T>(v);
  }
}

template <class T>
void read_array(const toml::table& t, const char* key, std::vector<T>& out, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return;
  const toml::array* a = n->as_array();
  if (!a) throw config_error(where + "." + key + ": expected an array");
  out.clear();
  for (const auto& e : *a) {
    if constexpr (std::is_floating_point_v<T>) {
      if (e.is_integer())
        out.push_back(static_cast<T>(e.as_integer()->get()));
      else if (e.is_floating_point())
        out.push_back(static_cast<T>(e.as_floating_point()->get()));
      else
        throw config_error(where + "." + key + ": expected numbers");
    } else {
      if (!e.is_integer()) throw config_error(where + "." + key + ": expected integers");
      out.push_back(static_cast<T>(e.as_integer()->get()));
    }
  }
}

inline const toml::table* section(const toml::table& root, const char* name) {
  const toml::node* n = root.get(name);
  if (!n) return nullptr;
  if (!n->is_table()) throw config_error(std::string(name) + ": expected a table");
  return n->as_table();
}

inline void read_observable(const toml::table& t, ObservableSpec& o, const std::string& where) {
  reject_unknown(t, {"name", "support", "centered", "modes"}, where);
  read(t, "name", o.name, where);
  read(t, "support", o.support, where);
  read(t, "centered", o.centered, where);
  if (const toml::node* n = t.get("modes")) {
    const toml::array* a = n->as_array();
    if (!a) throw config_error(where + ".modes: expected an array of tables");
    o.modes.clear();
    std::size_t i = 0;
    for (const auto& e : *a) {
      const std::string w = where + ".modes[" + std::to_string(i++) + "]";
      const toml::table* mt = e.as_table();
      if (!mt) throw config_error(w + ": expected a table");
      reject_unknown(*mt, {"k", "poly", "trig"}, w);
      ModeSpec ms;
      read_array(*mt, "k", ms.k, w);
      read_array(*mt, "poly", ms.poly, w);
      if (const toml::node* tn = mt->get("trig")) {
        const toml::array* ta = tn->as_array();
        if (!ta) throw config_error(w + ".trig: expected an array of [frequency, re, im]");
        for (const auto& row : *ta) {
          const toml::array* r = row.as_array();
          if (!r || r->size() != 3) throw config_error(w + ".trig: each entry needs [frequency, re, im]");
          std::array<double, 3> v{};
          for (std::size_t j = 0; j < 3; ++j) {
            const auto& x = (*r)[j];
            if (x.is_integer())
              v[j] = double(x.as_integer()->get());
            else if (x.is_floating_point())
              v[j] = x.as_floating_point()->get();
            else
              throw config_error(w + ".trig: expected numbers");
          }
          ms.trig.push_back(v);
        }
      }
      if (ms.k.empty()) throw config_error(w + ".k: required");
      o.modes.push_back(std::move(ms));
    }
  }
}

}  // namespace detail

// Layers: defaults, then the preset (CLI choice first, else the file's), then
// the file's own values.
inline ExperimentConfig parse_config(const toml::table& root, const std::string& cli_preset = "") {
  using namespace detail;
  ExperimentConfig c;
  reject_unknown(root, {"preset", "map", "scheme", "grid", "run", "cocycle", "observables", "monte_carlo", "eigen", "checks",
                        "tolerances", "output"},
                 "config");
  std::string preset = c.preset;
  read(root, "preset", preset, "config");
  if (!cli_preset.empty()) preset = cli_preset;
  apply_preset(c, preset);
  if (auto* t = section(root, "map")) {
    reject_unknown(*t, {"family", "gamma", "c1", "c2"}, "map");
    read(*t, "family", c.family, "map");
    read(*t, "gamma", c.gamma, "map");
    read(*t, "c1", c.c1, "map");
    read(*t, "c2", c.c2, "map");
  }
  if (auto* t = section(root, "scheme")) {
    reject_unknown(*t, {"phi_max", "theta", "epsilon"}, "scheme");
    read(*t, "phi_max", c.phi_max, "scheme");
    read(*t, "theta", c.theta, "scheme");
    read(*t, "epsilon", c.epsilon, "scheme");
  }
  if (auto* t = section(root, "grid")) {
    reject_unknown(*t, {"m"}, "grid");
    read(*t, "m", c.m, "grid");
  }
  if (auto* t = section(root, "run")) {
    reject_unknown(*t, {"N", "omega_count", "seed", "threads", "estimator", "renewal_mode", "k", "k_min", "k_max", "fit_lo",
                        "fit_hi", "resolvent_grid"},
                   "run");
    read(*t, "N", c.N, "run");
    read(*t, "omega_count", c.omega_count, "run");
    read(*t, "seed", c.seed, "run");
    read(*t, "threads", c.threads, "run");
    read(*t, "estimator", c.estimator, "run");
    read(*t, "renewal_mode", c.renewal_mode, "run");
    read_array(*t, "k", c.k, "run");
    read(*t, "k_min", c.k_min, "run");
    read(*t, "k_max", c.k_max, "run");
    read(*t, "fit_lo", c.fit_lo, "run");
    read(*t, "fit_hi", c.fit_hi, "run");
    read(*t, "resolvent_grid", c.resolvent_grid, "run");
  }
  if (auto* t = section(root, "cocycle")) {
    reject_unknown(*t, {"kind", "amplitudes", "winding"}, "cocycle");
    read(*t, "kind", c.cocycle, "cocycle");
    read_array(*t, "amplitudes", c.amplitudes, "cocycle");
    read(*t, "winding", c.winding, "cocycle");
  }
  if (auto* t = section(root, "observables")) {
    reject_unknown(*t, {"v", "w"}, "observables");
    if (auto* o = section(*t, "v")) read_observable(*o, c.v, "observables.v");
    if (auto* o = section(*t, "w")) read_observable(*o, c.w, "observables.w");
  }
  if (auto* t = section(root, "monte_carlo")) {
    reject_unknown(*t, {"walkers", "per_walker", "burn_in"}, "monte_carlo");
    read(*t, "walkers", c.walkers, "monte_carlo");
    read(*t, "per_walker", c.per_walker, "monte_carlo");
    read(*t, "burn_in", c.burn_in, "monte_carlo");
  }
  if (auto* t = section(root, "eigen")) {
    reject_unknown(*t, {"base_phi", "excursion_phi", "N_max", "K", "zeta", "omega_grid", "phi_cap"}, "eigen");
    read(*t, "base_phi", c.base_phi, "eigen");
    read(*t, "excursion_phi", c.excursion_phi, "eigen");
    read(*t, "N_max", c.N_max, "eigen");
    read(*t, "K", c.K, "eigen");
    read(*t, "zeta", c.zeta, "eigen");
    read(*t, "omega_grid", c.eigen_omega_grid, "eigen");
    read(*t, "phi_cap", c.phi_cap, "eigen");
  }
  if (auto* t = section(root, "checks")) {
    reject_unknown(*t, {"finite", "infinite"}, "checks");
    bool b = false;
    if (t->get("finite")) read(*t, "finite", b, "checks"), c.finite_checks = b;
    if (t->get("infinite")) read(*t, "infinite", b, "checks"), c.infinite_checks = b;
  }
  if (auto* t = section(root, "tolerances")) {
    reject_unknown(*t, {"tail_beta", "fourier", "tower", "mc_se", "finite_ratio", "infinite_gap", "gap", "r2"}, "tolerances");
    read(*t, "tail_beta", c.tol_tail_beta, "tolerances");
    read(*t, "fourier", c.tol_fourier, "tolerances");
    read(*t, "tower", c.tol_tower, "tolerances");
    read(*t, "mc_se", c.tol_mc_se, "tolerances");
    read(*t, "finite_ratio", c.tol_finite_ratio, "tolerances");
    read(*t, "infinite_gap", c.tol_infinite_gap, "tolerances");
    read(*t, "gap", c.tol_gap, "tolerances");
    read(*t, "r2", c.tol_r2, "tolerances");
  }
  if (auto* t = section(root, "output")) {
    reject_unknown(*t, {"dir", "dat"}, "output");
    read(*t, "dir", c.out_dir, "output");
    read(*t, "dat", c.dat, "output");
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path, const std::string& cli_preset = "") {
  try {
    return parse_config(toml::parse_file(path), cli_preset);
  } catch (const toml::parse_error& e) {
    throw config_error(path + ": " + std::string(e.description()));
  }
}

inline ExperimentConfig parse_config_string(std::string_view text, const std::string& cli_preset = "") {
  try {
    return parse_config(toml::parse(text), cli_preset);
  } catch (const toml::parse_error& e) {
    throw config_error("config: " + std::string(e.description()));
  }
}

// Field-level validation; returns warnings for admissible but unusual values.
inline std::vector<std::string> validate(ExperimentConfig& c) {
  std::vector<std::string> warn;
  auto positive = [](bool ok, const std::string& field) {
    if (!ok) throw config_error(field + ": must be positive");
  };
  if (c.family != "lsv" && c.family != "thaler" && c.family != "doubling")
    throw config_error("map.family: expected lsv, thaler or doubling");
  if (c.family != "doubling") positive(c.gamma > 0, "map.gamma");
  positive(c.c1 > 0, "map.c1");
  positive(c.c2 > 0, "map.c2");
  positive(c.phi_max > 0, "scheme.phi_max");
  if (!(c.theta > 0 && c.theta < 1)) throw config_error("scheme.theta: must lie in (0,1)");
  positive(c.epsilon > 0, "scheme.epsilon");
  if (c.m < 2) throw config_error("grid.m: must be at least 2");
  if (c.m < 16) warn.push_back("grid.m = " + std::to_string(c.m) + " is very coarse");
  positive(c.N > 0, "run.N");
  if (c.omega_count < 8 || (c.omega_count & (c.omega_count - 1)) != 0)
    throw config_error("run.omega_count: must be a power of two >= 8");
  if (c.threads < 0) throw config_error("run.threads: must be nonnegative");
  if (c.estimator != "operator" && c.estimator != "monte_carlo" && c.estimator != "tower")
    throw config_error("run.estimator: expected operator, monte_carlo or tower");
  if (c.renewal_mode != "vector" && c.renewal_mode != "matrix")
    throw config_error("run.renewal_mode: expected vector or matrix");
  if (c.k.empty()) throw config_error("run.k: must not be empty");
  if (c.k_min > c.k_max) throw config_error("run.k_min: exceeds k_max");
  positive(c.fit_lo > 0, "run.fit_lo");
  if (!(c.fit_hi > c.fit_lo)) throw config_error("run.fit_hi: must exceed fit_lo");
  positive(c.resolvent_grid > 0, "run.resolvent_grid");
  positive(c.walkers > 1, "monte_carlo.walkers (> 1)");
  positive(c.per_walker > 0, "monte_carlo.per_walker");
  positive(c.base_phi > 0, "eigen.base_phi");
  positive(c.excursion_phi > 0, "eigen.excursion_phi");
  if (c.base_phi == c.excursion_phi) throw config_error("eigen.excursion_phi: must differ from base_phi");
  positive(c.N_max > 0, "eigen.N_max");
  positive(c.K > 0, "eigen.K");
  positive(c.zeta > 0, "eigen.zeta");
  positive(c.eigen_omega_grid > 0, "eigen.omega_grid");
  positive(c.phi_cap > 0, "eigen.phi_cap");
  for (double t : {c.tol_tail_beta, c.tol_fourier, c.tol_tower, c.tol_mc_se, c.tol_finite_ratio, c.tol_infinite_gap,
                   c.tol_gap, c.tol_r2})
    positive(t > 0, "tolerances");
  const bool fin = c.finite_measure();
  const bool inf = !fin && c.gamma < 2.0;
  if (c.finite_checks && *c.finite_checks && !fin)
    throw config_error("checks.finite: finite-measure checks need gamma < 1 (got " + std::to_string(c.gamma) + ")");
  if (c.infinite_checks && *c.infinite_checks && !inf)
    throw config_error("checks.infinite: infinite-measure checks need gamma in [1,2) (got " + std::to_string(c.gamma) + ")");
  if (!c.finite_checks) c.finite_checks = fin;
  if (!c.infinite_checks) c.infinite_checks = inf;
  if (c.cocycle == "zero") {
  } else if (c.cocycle == "constant" || c.cocycle == "scalar") {
    if (c.amplitudes.size() != 1) throw config_error("cocycle.amplitudes: " + c.cocycle + " takes one amplitude");
  } else if (c.cocycle == "planar") {
    if (c.amplitudes.size() != 2) throw config_error("cocycle.amplitudes: planar takes two amplitudes");
  } else if (c.cocycle == "winding") {
    if (c.winding == 0) throw config_error("cocycle.winding: must be nonzero for kind = winding");
  } else {
    throw config_error("cocycle.kind: expected zero, constant, scalar, planar or winding");
  }
  for (const auto* o : {&c.v, &c.w}) {
    const std::string where = o == &c.v ? "observables.v" : "observables.w";
    if (o->support != "X" && o->support != "Y") throw config_error(where + ".support: expected X or Y");
    if (o->name != "cos" && o->name != "generic_v" && o->name != "generic_w" && o->name != "custom")
      throw config_error(where + ".name: expected cos, generic_v, generic_w or custom");
    if (o->name == "custom" && o->modes.empty()) throw config_error(where + ".modes: custom observable needs modes");
  }
  return warn;
}

// ---- builders -------------------------------------------------------------

inline IntermittentMap make_map(const ExperimentConfig& c) {
  if (c.family == "lsv") return IntermittentMap::lsv(c.gamma, c.c1);
  if (c.family == "thaler") return IntermittentMap::thaler(c.gamma, c.c2);
  return IntermittentMap::doubling();
}

inline ToralCocycle make_cocycle(const ExperimentConfig& c) {
  if (c.cocycle == "zero") return ToralCocycle::zero();
  if (c.cocycle == "constant") return ToralCocycle::constant(c.amplitudes.at(0));
  if (c.cocycle == "scalar") return ToralCocycle::scalar(c.amplitudes.at(0));
  if (c.cocycle == "planar") return ToralCocycle::planar(c.amplitudes.at(0), c.amplitudes.at(1));
  return ToralCocycle::winding(c.winding);
}

// cos(psi_1); 1 + x + cos psi_1; 2 - x + cos(psi_1)/2, zero in the other coordinates
inline ToralObservable make_observable(const ObservableSpec& o, int d, Interval Y) {
  const Support sup = o.support == "Y" ? Support::Y : Support::X;
  auto kvec = [d](int k1) {
    std::vector<int> k(d, 0);
    k[0] = k1;
    return k;
  };
  if (o.name == "cos") return ToralObservable::cos_mode(kvec(1), 1.0, sup, Y);
  if (o.name == "generic_v")
    return ToralObservable(d, {Mode{kvec(0), {cplx(1.0), cplx(1.0)}, {}}, Mode{kvec(1), {cplx(0.5)}, {}}, Mode{kvec(-1), {cplx(0.5)}, {}}},
                           sup, Y);
  if (o.name == "generic_w")
    return ToralObservable(
        d, {Mode{kvec(0), {cplx(2.0), cplx(-1.0)}, {}}, Mode{kvec(1), {cplx(0.25)}, {}}, Mode{kvec(-1), {cplx(0.25)}, {}}}, sup, Y);
  std::vector<Mode> modes;
  for (const auto& ms : o.modes) {
    if (static_cast<int>(ms.k.size()) != d) throw config_error("observable mode k has dimension != cocycle dimension");
    Mode m{ms.k, {}, {}};
    for (double p : ms.poly) m.poly.push_back(p);
    for (const auto& t : ms.trig) m.terms.push_back({static_cast<int>(t[0]), cplx(t[1], t[2])});
    modes.push_back(std::move(m));
  }
  ToralObservable v(d, std::move(modes), sup, Y);
  v.check_symmetry();
  return v;
}

inline nlohmann::json to_json(const ObservableSpec& o) {
  nlohmann::json j{{"name", o.name}, {"support", o.support}, {"centered", o.centered}};
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& m : o.modes) modes.push_back({{"k", m.k}, {"poly", m.poly}, {"trig", m.trig}});
  j["modes"] = modes;
  return j;
}

// Every effective value; the manifest hashes this dump.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["preset"] = c.preset;
  j["map"] = {{"family", c.family}, {"gamma", c.gamma}, {"c1", c.c1}, {"c2", c.c2}};
  j["scheme"] = {{"phi_max", c.phi_max}, {"theta", c.theta}, {"epsilon", c.epsilon}};
  j["grid"] = {{"m", c.m}};
  j["run"] = {{"N", c.N},
              {"omega_count", c.omega_count},
              {"seed", c.seed},
              {"threads", c.threads},
              {"estimator", c.estimator},
              {"renewal_mode", c.renewal_mode},
              {"k", c.k},
              {"k_min", c.k_min},
              {"k_max", c.k_max},
              {"fit_lo", c.fit_lo},
              {"fit_hi", c.fit_hi},
              {"resolvent_grid", c.resolvent_grid}};
  j["cocycle"] = {{"kind", c.cocycle}, {"amplitudes", c.amplitudes}, {"winding", c.winding}};
  j["observables"] = {{"v", to_json(c.v)}, {"w", to_json(c.w)}};
  j["monte_carlo"] = {{"walkers", c.walkers}, {"per_walker", c.per_walker}, {"burn_in", c.burn_in}};
  j["eigen"] = {{"base_phi", c.base_phi}, {"excursion_phi", c.excursion_phi}, {"N_max", c.N_max}, {"K", c.K},
                {"zeta", c.zeta},         {"omega_grid", c.eigen_omega_grid},   {"phi_cap", c.phi_cap}};
  j["checks"] = {{"finite", c.finite_checks.value_or(c.finite_measure())},
                 {"infinite", c.infinite_checks.value_or(!c.finite_measure() && c.gamma < 2.0)}};
  j["tolerances"] = {{"tail_beta", c.tol_tail_beta},       {"fourier", c.tol_fourier}, {"tower", c.tol_tower},
                     {"mc_se", c.tol_mc_se},               {"finite_ratio", c.tol_finite_ratio},
                     {"infinite_gap", c.tol_infinite_gap}, {"gap", c.tol_gap},         {"r2", c.tol_r2}};
  j["output"] = {{"dir", c.out_dir}, {"dat", c.dat}};
  return j;
}

}  // namespace toralmix
