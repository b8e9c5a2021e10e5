// Copyright 2026 The xeblab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "xeblab/drmodel.hpp"
#include "xeblab/ensemble.hpp"
#include "xeblab/ising1d.hpp"
#include "xeblab/spoofer.hpp"

#ifndef XEBLAB_VERSION
#define XEBLAB_VERSION "0.0.0"
#endif

// Named experiments driven by JSON configs. Each run writes one CSV and one
// JSON sidecar; every column except runtime_s is a pure function of the
// config.
namespace xeblab::exp {

using nlohmann::json;

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kMaxDenseQubits = 26;
inline constexpr int kMaxCircuits = 5000;

// ---------------------------------------------------------------------------
// Parsing helpers

// "haar", "cz", "fsim(90,60)", "discrete-fsim(90,60,binary)".
inline GateEnsemble parse_ensemble(const std::string& s) {
  static const std::regex fsim(R"(fsim\(\s*([-0-9.eE+]+)\s*,\s*([-0-9.eE+]+)\s*\))");
  static const std::regex disc(
      R"(discrete-fsim\(\s*([-0-9.eE+]+)\s*,\s*([-0-9.eE+]+)\s*,\s*(binary|continuous)\s*\))");
  std::smatch m;
  GateEnsemble e;
  if (s == "haar") e = GateEnsemble::haar2();
  else if (s == "cz") e = GateEnsemble::cz();
  else if (std::regex_match(s, m, fsim)) e = GateEnsemble::fsim(std::stod(m[1]), std::stod(m[2]));
  else if (std::regex_match(s, m, disc))
    e = GateEnsemble::discrete_fsim(std::stod(m[1]), std::stod(m[2]),
                                    m[3] == "binary" ? ZMode::Binary : ZMode::Continuous);
  else throw ConfigError("unknown ensemble '" + s + "'");
  try {
    e.validate();
  } catch (const std::invalid_argument& x) {
    throw ConfigError(std::string(x.what()) + " in '" + s + "'");
  }
  return e;
}

inline std::string ensemble_label(const GateEnsemble& e) {
  std::ostringstream o;
  switch (e.kind) {
    case EnsembleKind::CZ: return "cz";
    case EnsembleKind::Haar2: return "haar";
    case EnsembleKind::FSim: o << "fsim(" << e.theta << "," << e.phi << ")"; break;
    case EnsembleKind::DiscreteFSim:
      o << "discrete-fsim(" << e.theta << "," << e.phi << ","
        << (e.z_mode == ZMode::Binary ? "binary" : "continuous") << ")";
      break;
  }
  return o.str();
}

inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

// FNV-1a over the canonical dump, for the sidecar.
inline std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Config

// Parameters merged over the experiment's defaults.
struct Config {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string output_dir = "results";
  bool allow_large = false;
  json params;  // defaults overlaid with the file's values
  json raw;     // the file as read

  int integer(const std::string& k) const { return params.at(k).get<int>(); }
  double real(const std::string& k) const { return params.at(k).get<double>(); }
  std::string text(const std::string& k) const { return params.at(k).get<std::string>(); }
  std::vector<int> ints(const std::string& k) const { return params.at(k).get<std::vector<int>>(); }
  std::vector<double> reals(const std::string& k) const {
    return params.at(k).get<std::vector<double>>();
  }
  std::vector<std::string> texts(const std::string& k) const {
    return params.at(k).get<std::vector<std::string>>();
  }
  GateEnsemble ensemble(const std::string& k = "ensemble") const {
    return parse_ensemble(text(k));
  }
  NoiseKind noise_kind() const {
    const std::string s = text("noise");
    if (s == "depolarizing") return NoiseKind::Depolarizing;
    if (s == "amplitude-damping") return NoiseKind::AmplitudeDamping;
    throw ConfigError("unknown noise kind '" + s + "'");
  }
  ArchKind arch_kind() const {
    const std::string s = text("architecture");
    if (s == "1d") return ArchKind::Brickwork1D;
    if (s == "2d") return ArchKind::Grid2D;
    throw ConfigError("architecture must be '1d' or '2d', got '" + s + "'");
  }
  Boundary boundary() const {
    const std::string s = text("boundary");
    if (s == "open") return Boundary::Open;
    if (s == "periodic") return Boundary::Periodic;
    throw ConfigError("boundary must be 'open' or 'periodic'");
  }
};

// ---------------------------------------------------------------------------
// Result table

struct Table {
  std::vector<std::string> columns;  // runtime_s is appended on output
  std::vector<std::vector<std::string>> rows;
  std::vector<double> runtime;
  json summary = json::object();

  void add(std::vector<std::string> cells, double seconds) {
    if (cells.size() != columns.size())
      throw std::logic_error("row width does not match the column list");
    rows.push_back(std::move(cells));
    runtime.push_back(seconds);
  }

  static std::string quote(const std::string& c) {
    if (c.find_first_of(",\"\n") == std::string::npos) return c;
    std::string q = "\"";
    for (char ch : c) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }

  std::string csv() const {
    std::ostringstream o;
    for (const auto& c : columns) o << quote(c) << ',';
    o << "runtime_s\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (const auto& c : rows[i]) o << quote(c) << ',';
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", runtime[i]);
      o << buf << '\n';
    }
    return o.str();
  }
};

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------------------
// Shared pieces

inline Architecture make_arch(ArchKind kind, int n, int d, Boundary b) {
  return build_architecture(kind, n, d, b);
}

// Contiguous blocks of l qubits in 1D, strips of l columns on the grid, or
// two halves when l is 0.
inline Partition block_partition(const Architecture& a, int l) {
  if (l <= 0) return make_cut(a, halves(a.n_qubits));
  std::vector<std::vector<int>> subs;
  if (a.kind == ArchKind::Grid2D) {
    const int L = grid_side_for(a.n_qubits), cols = L + 1;
    for (int c0 = 0; c0 < cols; c0 += l) {
      std::vector<int> s;
      for (int r = 0; r < L; ++r)
        for (int c = c0; c < std::min(cols, c0 + l); ++c) s.push_back(r * cols + c);
      subs.push_back(std::move(s));
    }
  } else {
    std::vector<int> sizes;
    for (int q = 0; q < a.n_qubits; q += l) sizes.push_back(std::min(l, a.n_qubits - q));
    subs = contiguous_blocks(sizes);
  }
  return make_cut(a, std::move(subs));
}

struct DRPoint {
  double xeb = 0, xeb_se = 0, fidelity = 0, fidelity_se = 0;
  std::string method;
};

inline DRPoint dr_noisy(const Architecture& a, const dr::DRParams& params,
                        const NoiseModel& noise, int dense_cap,
                        std::size_t mc_samples, std::uint64_t seed) {
  const dr::DefectMap defects = dr::attach_defects(a, noise, nullptr);
  if (a.n_qubits <= dense_cap) {
    const auto p = dr::propagate_exact(a, params, defects);
    return {dr::evaluate_xeb(p), 0, dr::evaluate_fidelity(p), 0, "exact"};
  }
  if (a.kind == ArchKind::Brickwork1D && a.boundary == Boundary::Open &&
      a.depth() <= dr::kChainDepthCap) {
    const auto c = dr::contract_chain(a, dr::build_T(params), defects);
    return {c.xeb, 0, c.fidelity, 0, "chain"};
  }
  // Forward sampling underestimates chi when few-particle histories dominate;
  // the standard error does not show it.
  const auto r = dr::propagate_mc(a, dr::build_T(params), defects, mc_samples, seed);
  return {r.xeb, r.xeb_se, r.fidelity, r.fidelity_se, "monte-carlo"};
}

inline DRPoint dr_spoof(const Architecture& a, const dr::DRParams& params,
                        const Partition& part) {
  const dr::DefectMap defects = dr::attach_defects(a, std::nullopt, &part);
  const auto f = dr::propagate_factorized(a, dr::build_T(params), defects, part.subsystems);
  return {dr::evaluate(f, dr::Observable::XEB), 0,
          dr::evaluate(f, dr::Observable::Fidelity), 0, "factorized"};
}

inline std::uint64_t row_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(master ^ splitmix64(a * 0x9e37 + b));
}

// ---------------------------------------------------------------------------
// Experiments

inline Table run_table2(const Config& cfg) {
  Table t;
  t.columns = {"gate", "D", "R", "D_mc", "R_mc", "D_mc_se", "R_mc_se"};
  Stopwatch sw;
  const std::vector<std::string> gates = {"cz", "haar", "fsim(90,60)", "fsim(90,30)",
                                          "fsim(90,0)", "fsim(90,180)"};
  std::vector<std::string> star;
  for (const auto& g : gates) {
    const GateEnsemble e = parse_ensemble(g);
    const dr::EnsembleDR r = dr::dr_for_ensemble(
        e, e.kind == EnsembleKind::Haar2 ? cfg.integer("mc_samples") : 0, cfg.seed);
    std::vector<std::string> row{g, num(r.params.D), num(r.params.R), "", "", "", ""};
    if (r.mc) {
      row[3] = num(r.mc->D);
      row[4] = num(r.mc->R);
      row[5] = num(r.mc_D_se);
      row[6] = num(r.mc_R_se);
    }
    if ((g == "fsim(90,0)" || g == "fsim(90,180)") && std::abs(r.params.D - 1) < 1e-12 &&
        std::abs(r.params.R - 2.0 / 3) < 1e-12)
      star.push_back(g);
    t.add(row, sw.lap());
  }
  t.summary["fsim_star_candidates_at_1_2/3"] = star;
  return t;
}

inline Table run_scaling(const Config& cfg) {
  Table t;
  t.columns = {"arch", "N", "d", "ensemble", "kind", "eps", "l",
               "xeb", "xeb_se", "fidelity", "fidelity_se", "method"};
  const ArchKind kind = cfg.arch_kind();
  const int d = cfg.integer("d"), l = cfg.integer("l");
  const GateEnsemble ens = cfg.ensemble();
  const dr::DRParams params = dr::dr_for_ensemble(ens).params;
  const auto eps = cfg.reals("eps");
  const std::string arch_name = cfg.text("architecture");
  Stopwatch sw;
  std::map<double, std::vector<std::pair<int, double>>> noisy;
  std::vector<std::pair<int, double>> spoof;
  for (int n : cfg.ints("n")) {
    const Architecture a = make_arch(kind, n, d, cfg.boundary());
    const DRPoint s = dr_spoof(a, params, block_partition(a, l));
    spoof.emplace_back(n, s.xeb);
    t.add({arch_name, std::to_string(n), std::to_string(d), ensemble_label(ens), "spoof", "",
           std::to_string(l), num(s.xeb), num(s.xeb_se), num(s.fidelity), num(s.fidelity_se),
           s.method},
          sw.lap());
    for (std::size_t e = 0; e < eps.size(); ++e) {
      const DRPoint p = dr_noisy(a, params, {cfg.noise_kind(), eps[e]}, cfg.integer("dense_cap"),
                                 cfg.integer("mc_samples"), row_seed(cfg.seed, n, e));
      noisy[eps[e]].emplace_back(n, p.xeb);
      t.add({arch_name, std::to_string(n), std::to_string(d), ensemble_label(ens), "noisy",
             num(eps[e]), "", num(p.xeb), num(p.xeb_se), num(p.fidelity), num(p.fidelity_se),
             p.method},
            sw.lap());
    }
  }
  json cross = json::object();
  for (const auto& [e, pts] : noisy) {
    // Smallest N from which the spoofer stays ahead for the rest of the sweep.
    json v = nullptr;
    for (std::size_t i = pts.size(); i-- > 0;) {
      if (spoof[i].second <= pts[i].second) break;
      v = pts[i].first;
    }
    cross[num(e)] = v;
  }
  t.summary["crossover_n"] = cross;
  return t;
}

inline Table run_xeb_vs_fidelity(const Config& cfg) {
  Table t;
  t.columns = {"N", "d", "ensemble", "D", "R", "kind", "eps", "xeb", "fidelity",
               "ratio", "xeb_ideal", "ratio_normalized"};
  const int d = cfg.integer("d");
  Stopwatch sw;
  for (const auto& name : cfg.texts("ensembles")) {
    const GateEnsemble ens = parse_ensemble(name);
    const dr::DRParams params = dr::dr_for_ensemble(ens).params;
    for (int n : cfg.ints("n")) {
      const Architecture a = make_arch(ArchKind::Brickwork1D, n, d, cfg.boundary());
      const double ideal = dr_noisy(a, params, {cfg.noise_kind(), 0.0}, kMaxDenseQubits, 0, 0).xeb;
      auto row = [&](const std::string& kind, const std::string& eps, const DRPoint& p) {
        t.add({std::to_string(n), std::to_string(d), name, num(params.D), num(params.R), kind, eps,
               num(p.xeb), num(p.fidelity), num(p.xeb / p.fidelity), num(ideal),
               num(p.xeb / (ideal * p.fidelity))},
              sw.lap());
      };
      for (double e : cfg.reals("eps"))
        row("noisy", num(e), dr_noisy(a, params, {cfg.noise_kind(), e}, kMaxDenseQubits, 0, 0));
      if (cfg.params.at("spoof").get<bool>())
        row("spoof", "", dr_spoof(a, params, block_partition(a, cfg.integer("l"))));
    }
  }
  return t;
}

// Qubits whose state at layer `layer` feeds qubit `qubit` at that layer.
inline int backward_lightcone(const Architecture& arch, int layer, int qubit, bool before) {
  std::vector<char> in(arch.n_qubits, 0);
  in[qubit] = 1;
  for (int t = before ? layer - 1 : layer; t >= 0; --t)
    for (auto [a, b] : arch.layers[t])
      if (in[a] || in[b]) in[a] = in[b] = 1;
  int s = 0;
  for (char x : in) s += x;
  return s;
}

inline Table run_single_error_scan(const Config& cfg) {
  Table t;
  t.columns = {"variant", "N", "d", "layer", "layer2", "qubit", "forward_lightcone",
               "backward_lightcone", "xeb_mean", "xeb_se", "fidelity_mean", "fidelity_se"};
  const int n = cfg.integer("n"), d = cfg.integer("d"), pauli_idx = cfg.integer("pauli");
  const Architecture a = make_arch(ArchKind::Brickwork1D, n, d, cfg.boundary());
  const GateEnsemble ens = cfg.ensemble();
  const std::size_t nc = cfg.integer("n_circuits");
  const int q = n / 2;
  Stopwatch sw;
  auto measure = [&](const std::vector<ErrorSite>& errs, std::uint64_t salt) {
    return summarize(map_circuits<CircuitMetrics>(
        a, ens, nc, row_seed(cfg.seed, salt),
        [&](const CircuitInstance& c) { return error_metrics(c, errs); }));
  };
  auto emit = [&](const std::string& v, int l1, int l2, const std::vector<ErrorSite>& errs,
                  std::uint64_t salt) {
    const MetricsStat s = measure(errs, salt);
    t.add({v, std::to_string(n), std::to_string(d), std::to_string(l1),
           l2 < 0 ? "" : std::to_string(l2), std::to_string(q),
           std::to_string(forward_lightcone(a, l1, q)),
           std::to_string(backward_lightcone(a, l1, q, false)), num(s.xeb.mean),
           num(s.xeb.standard_error), num(s.fidelity.mean), num(s.fidelity.standard_error)},
          sw.lap());
  };
  // The same circuit seeds serve every row, so rows differ only by the error.
  for (int l = 0; l < d; ++l) emit("single", l, -1, {{l, q, false, pauli_idx}}, 0);
  // Two errors on the same qubit at layers l and l + 2: nested lightcones.
  for (int l = 0; l + 2 < d; ++l)
    emit("nested", l, l + 2, {{l, q, false, pauli_idx}, {l + 2, q, false, pauli_idx}}, 0);
  // The same Pauli right before and right after one gate on q.
  for (int l = 0; l < d; ++l) {
    bool paired = false;
    for (auto [x, y] : a.layers[l]) paired = paired || x == q || y == q;
    if (!paired) continue;
    emit("adjacent", l, l, {{l, q, true, pauli_idx}, {l, q, false, pauli_idx}}, 0);
  }
  return t;
}

inline Table run_gaps(const Config& cfg) {
  Table t;
  t.columns = {"table", "l", "eps", "lambda0", "lambda1", "delta", "value"};
  const dr::DRParams params = dr::dr_for_ensemble(cfg.ensemble()).params;
  Stopwatch sw;
  std::vector<int> ls = cfg.ints("l");
  const auto bnd = ising::boundary_gap_sweep(params, ls);
  for (const auto& g : bnd)
    t.add({"boundary", std::to_string(g.width), "", num(g.lambda0), num(g.lambda1),
           num(g.delta), ""},
          sw.lap() / bnd.size());
  const auto s = ising::noise_gap_sweep(params, cfg.ints("n"), cfg.reals("eps"), cfg.real("c"),
                                        cfg.integer("degree"), cfg.real("sat_tol"));
  const double grid_time = sw.lap();
  for (std::size_t e = 0; e < s.eps.size(); ++e) {
    for (const auto& g : s.grid[e])
      t.add({"noise", std::to_string(g.width), num(s.eps[e]), num(g.lambda0), num(g.lambda1),
             num(g.delta), ""},
            grid_time / (s.eps.size() * s.widths.size()));
    t.add({"saturated", std::to_string(s.saturated_at[e]), num(s.eps[e]), "", "",
           num(s.saturated[e]), ""},
          0.0);
  }
  t.add({"extrapolated", "", "0", "", "", num(s.delta3), ""}, 0.0);
  // Exponent check against exact strip propagation.
  const int dl = cfg.integer("decay_l");
  ising::GapResult g = ising::gap(dl, params, ising::FieldConfig::boundary_omission());
  const auto dd = cfg.ints("decay_d");
  std::vector<double> x, y;
  for (int d = dd.at(0); d <= dd.at(1); ++d) {
    x.push_back(d);
    y.push_back(std::log(ising::strip_xeb(dl, params, ising::FieldConfig::boundary_omission(), d)));
  }
  const double slope = ising::linear_fit(x, y).slope;
  t.add({"decay-slope", std::to_string(dl), "", num(g.lambda0), num(g.lambda1), num(g.delta),
         num(-slope)},
        sw.lap());

  t.summary["delta1_largest_l"] = bnd.empty() ? json(nullptr) : json(bnd.back().delta);
  t.summary["delta3"] = std::isnan(s.delta3) ? json(nullptr) : json(s.delta3);
  if (!std::isnan(s.delta3)) {
    const double a = std::abs(s.delta3 - 0.3), b = std::abs(s.delta3 - 0.03);
    t.summary["delta3_candidates"] = {{"0.3", a}, {"0.03", b}};
    t.summary["delta3_supports"] = a < b ? "0.3" : "0.03";
  }
  return t;
}

inline Table run_topk_and_std(const Config& cfg) {
  Table t;
  t.columns = {"mode", "N", "d", "k", "xeb_mean", "xeb_std", "xeb_se", "std_sqrt_k"};
  const int n = cfg.integer("n");
  const GateEnsemble ens = cfg.ensemble();
  const std::size_t nc = cfg.integer("n_circuits");
  const auto ks = cfg.ints("k");
  Stopwatch sw;
  auto stat_row = [&](const std::string& mode, int d, int k, const std::vector<double>& v) {
    const EnsembleStat s = ensemble_average(v);
    t.add({mode, std::to_string(n), std::to_string(d), k ? std::to_string(k) : "",
           num(s.mean), num(s.std), num(s.standard_error),
           k ? num(s.std * std::sqrt(double(k))) : ""},
          sw.lap());
  };
  {
    const int d = cfg.integer("topk_depth");
    const Architecture a = make_arch(ArchKind::Brickwork1D, n, d, cfg.boundary());
    const Partition p = make_cut(a, halves(n));
    for (int k : ks)
      if (k < 1 || k > (1 << n)) throw ConfigError("k outside [1, 2^N]");
    const auto rows = map_circuits<std::vector<double>>(
        a, ens, nc, row_seed(cfg.seed, 1), [&](const CircuitInstance& c) {
          const auto ideal = BitstringDistribution::from_state(run_pure(c));
          const SpoofOutput s = run_basic(c, p);
          std::vector<double> r{xeb_exact(ideal, s.combined)};
          for (int k : ks) r.push_back(xeb_exact(ideal, top_k(s, k).combined));
          return r;
        });
    std::vector<double> col(nc);
    for (std::size_t i = 0; i < nc; ++i) col[i] = rows[i][0];
    stat_row("omit", d, 0, col);
    for (std::size_t j = 0; j < ks.size(); ++j) {
      for (std::size_t i = 0; i < nc; ++i) col[i] = rows[i][j + 1];
      stat_row("top-k", d, ks[j], col);
    }
  }
  for (int d : cfg.ints("d")) {
    const Architecture a = make_arch(ArchKind::Brickwork1D, n, d, cfg.boundary());
    const Partition p = make_cut(a, halves(n));
    struct Pair {
      double omit, avg;
    };
    const auto rows = map_circuits<Pair>(a, ens, nc, row_seed(cfg.seed, 2, d),
                                         [&](const CircuitInstance& c) {
      const auto ideal = BitstringDistribution::from_state(run_pure(c));
      return Pair{xeb_exact(ideal, run_basic(c, p).combined),
                  xeb_exact(ideal, run_self_averaging(c, p).combined)};
    });
    std::vector<double> o(nc), s(nc);
    for (std::size_t i = 0; i < nc; ++i) {
      o[i] = rows[i].omit;
      s[i] = rows[i].avg;
    }
    stat_row("omit-vs-depth", d, 0, o);
    stat_row("self-averaging-vs-depth", d, 0, s);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Registry

struct Experiment {
  std::string name;
  std::string description;
  json defaults;
  std::function<Table(const Config&)> run;
  // Keys whose value must be a non-empty array.
  std::vector<std::string> ranges;
};

inline const std::vector<Experiment>& registry() {
  static const std::vector<Experiment> r = {
      {"table2", "diffusion and reaction rates of the standard gates",
       {{"mc_samples", 10000}}, run_table2, {}},
      {"scaling", "spoofer versus noisy XEB as the system grows",
       {{"architecture", "1d"}, {"boundary", "open"}, {"ensemble", "haar"},
        {"n", {4, 6, 8, 10, 12, 14, 16, 20, 24, 28, 32, 36, 40}}, {"d", 16}, {"l", 0},
        {"eps", {0.02, 0.04}}, {"noise", "depolarizing"}, {"dense_cap", 20},
        {"mc_samples", 1000000}},
       run_scaling, {"n", "eps"}},
      {"xeb-vs-fidelity", "ratio of XEB to fidelity per gate ensemble",
       {{"boundary", "open"},
        {"ensembles", {"fsim(90,0)", "fsim(90,180)", "fsim(90,30)", "haar", "cz"}},
        {"n", {4, 6, 8, 10, 12, 14, 16, 18, 20}}, {"d", 20}, {"eps", {0.0, 0.006, 0.02}},
        {"noise", "depolarizing"}, {"spoof", true}, {"l", 0}},
       run_xeb_vs_fidelity, {"ensembles", "n", "eps"}},
      {"single-error-scan", "one or two Pauli errors inserted into ideal circuits",
       {{"boundary", "open"}, {"ensemble", "haar"}, {"n", 10}, {"d", 12}, {"n_circuits", 200},
        {"pauli", 1}},
       run_single_error_scan, {}},
      {"gaps", "spectral gaps of the 1D transfer operator",
       {{"ensemble", "haar"}, {"l", {4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14}},
        {"n", {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16}},
        {"eps", {0.05, 0.075, 0.1, 0.15, 0.2, 0.25, 0.3}}, {"c", 4.0 / 3.0}, {"degree", 3},
        {"sat_tol", 1e-4}, {"decay_l", 10}, {"decay_d", {10, 40}}},
       run_gaps, {"l", "n", "eps"}},
      {"topk-and-std", "top-k amplification and STD of the spoofed XEB",
       {{"boundary", "open"}, {"ensemble", "haar"}, {"n", 12}, {"topk_depth", 8},
        {"k", {1, 4, 16, 64, 256}}, {"d", {2, 4, 6, 8, 10, 12}}, {"n_circuits", 200}},
       run_topk_and_std, {"k", "d"}},
  };
  return r;
}

inline const Experiment& find_experiment(const std::string& name) {
  for (const auto& e : registry())
    if (e.name == name) return e;
  std::string known;
  for (const auto& e : registry()) known += (known.empty() ? "" : ", ") + e.name;
  throw ConfigError("unknown experiment '" + name + "' (known: " + known + ")");
}

inline void check_caps(const Config& c) {
  auto too_big = [&](const std::string& what) {
    throw ConfigError(what + " exceeds the desk-scale cap; set allow_large to override");
  };
  if (c.allow_large) return;
  if (c.params.contains("n_circuits") && c.integer("n_circuits") > kMaxCircuits)
    too_big("n_circuits");
  const std::string e = c.experiment;
  if (e == "single-error-scan" || e == "topk-and-std") {
    if (c.integer("n") > 14) too_big("n");
  }
  if (e == "xeb-vs-fidelity" || e == "scaling")
    for (int n : c.ints("n"))
      if (n > kMaxDenseQubits && e == "xeb-vs-fidelity") too_big("n");
}

inline Config parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (!j.contains("experiment")) throw ConfigError("config misses 'experiment'");
  if (!j.contains("seed")) throw ConfigError("config misses 'seed'");
  Config c;
  c.raw = j;
  c.experiment = j.at("experiment").get<std::string>();
  const Experiment& e = find_experiment(c.experiment);
  if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
    throw ConfigError("seed must be a non-negative integer");
  if (j.at("seed").is_number_integer() && j.at("seed").get<long long>() < 0)
    throw ConfigError("seed must be a non-negative integer");
  c.seed = j.at("seed").get<std::uint64_t>();
  c.output_dir = j.value("output_dir", std::string("results"));
  c.allow_large = j.value("allow_large", false);
  c.params = e.defaults;
  static const std::set<std::string> meta = {"experiment", "seed", "output_dir", "allow_large"};
  for (const auto& [k, v] : j.items()) {
    if (meta.count(k)) continue;
    if (!e.defaults.contains(k))
      throw ConfigError("unknown key '" + k + "' for experiment " + e.name);
    if (e.defaults.at(k).type() != v.type() &&
        !(e.defaults.at(k).is_number() && v.is_number()))
      throw ConfigError("key '" + k + "' has the wrong type");
    c.params[k] = v;
  }
  for (const auto& k : e.ranges)
    if (!c.params.at(k).is_array() || c.params.at(k).empty())
      throw ConfigError("range '" + k + "' must be a non-empty array");
  // Touch typed fields once so bad values fail at validation time.
  try {
    if (c.params.contains("ensemble")) c.ensemble();
    if (c.params.contains("ensembles"))
      for (const auto& s : c.texts("ensembles")) parse_ensemble(s);
    if (c.params.contains("noise")) c.noise_kind();
    if (c.params.contains("architecture")) c.arch_kind();
    if (c.params.contains("boundary")) c.boundary();
    if (c.params.contains("eps"))
      for (double x : c.reals("eps"))
        if (x < 0 || x > 1) throw ConfigError("eps outside [0, 1]");
    if (c.params.contains("n_circuits") && c.integer("n_circuits") < 2)
      throw ConfigError("n_circuits must be at least 2");
  } catch (const nlohmann::json::exception& x) {
    throw ConfigError(std::string("bad value: ") + x.what());
  }
  check_caps(c);
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j);
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

struct RunOutput {
  std::filesystem::path csv, sidecar;
  Table table;
};

inline RunOutput run(const Config& cfg) {
  const Experiment& e = find_experiment(cfg.experiment);
  Table t = e.run(cfg);
  const std::filesystem::path dir = cfg.output_dir;
  std::filesystem::create_directories(dir);
  RunOutput out{dir / (e.name + ".csv"), dir / (e.name + ".json"), {}};
  json side = {{"experiment", e.name},
               {"seed", cfg.seed},
               {"version", XEBLAB_VERSION},
               {"config", cfg.raw},
               {"resolved", cfg.params},
               {"config_hash", config_hash(cfg.raw)},
               {"columns", t.columns},
               {"summary", t.summary}};
  side["columns"].push_back("runtime_s");
  write_atomic(out.csv, t.csv());
  write_atomic(out.sidecar, side.dump(2) + "\n");
  out.table = std::move(t);
  return out;
}

}  // namespace xeblab::exp
