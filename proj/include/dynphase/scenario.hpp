// Copyright 2026 The dynphase Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Scenario files: flat "section.key = value" lines, '#' comments.
//
//   channel.kind      dephasing | spontaneous_emission | bit_flip
//   channel.omega     default 1
//   channel.gamma     decoherence rate
//   invariant.family  dephasing | spontaneous_emission | bit_flip | numeric
//   invariant.*       alpha1 alpha2 c1 c2 q x eps1 eps2 initial
//   time.start/end/step   numbers, "period", "pi" or "<number>*period"
//   phase.kind        cyclic | noncyclic | nonabelian
//   phase.eigenvalue  block selector (nearest eigenvalue), e.g. -0.5+0.1i
//   sweep.parameter   any numeric key, e.g. channel.gamma
//   sweep.values      list, or sweep.start/stop/step
//   sweep.times       evaluation times for each sweep point
//   sweep.report      true | false (robustness verdict)
//   sweep.on_error    fail | nan
//   output.phases/series/sweep/report   CSV paths

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dynphase/core.hpp"
#include "dynphase/invariant.hpp"
#include "dynphase/phase.hpp"
#include "dynphase/robustness.hpp"
#include "dynphase/superop.hpp"

namespace dynphase {

class ParseError : public InvalidInput {
 public:
  ParseError(int line, const std::string& key, const std::string& what)
      : InvalidInput("ParseError: line " + std::to_string(line) + (key.empty() ? "" : ", key '" + key + "'") +
                     ": " + what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class ValidationError : public InvalidInput {
 public:
  explicit ValidationError(const std::string& what) : InvalidInput("ValidationError: " + what) {}
};

enum ExitCode : int { kExitOk = 0, kExitOther = 1, kExitInvalid = 2, kExitNumerical = 3 };

// ---------------------------------------------------------------------------
// Raw key/value document

namespace scenario_detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "channel.kind",     "channel.omega",   "channel.gamma",    "invariant.family",
      "invariant.alpha1", "invariant.alpha2", "invariant.c1",    "invariant.c2",
      "invariant.q",      "invariant.x",     "invariant.eps1",   "invariant.eps2",
      "invariant.initial", "time.start",     "time.end",         "time.step",
      "phase.kind",       "phase.eigenvalue", "phase.tol_deg",   "sweep.parameter",
      "sweep.values",     "sweep.start",     "sweep.stop",       "sweep.step",
      "sweep.times",      "sweep.report",    "sweep.on_error",   "output.phases",
      "output.series",    "output.sweep",    "output.report"};
  return keys;
}

}  // namespace scenario_detail

struct ScenarioDocument {
  std::map<std::string, std::string> values;
  std::map<std::string, int> lines;

  bool has(const std::string& key) const { return values.count(key) != 0; }
  const std::string& get(const std::string& key) const { return values.at(key); }

  /// Sorted "key = value" lines; the hash input.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values) out += k + " = " + v + "\n";
    return out;
  }
};

inline ScenarioDocument parse_document(const std::string& text) {
  ScenarioDocument doc;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = scenario_detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(line, "", "expected 'key = value'");
    const std::string key = scenario_detail::trim(body.substr(0, eq));
    const std::string value = scenario_detail::trim(body.substr(eq + 1));
    if (!scenario_detail::known_keys().count(key)) throw ParseError(line, key, "unknown key");
    if (value.empty()) throw ParseError(line, key, "empty value");
    if (doc.values.count(key)) throw ParseError(line, key, "duplicate key");
    doc.values[key] = value;
    doc.lines[key] = line;
  }
  return doc;
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Typed scenario

struct Scenario {
  ScenarioDocument doc;

  ChannelKind channel = ChannelKind::dephasing;
  double omega = 1.0;
  double gamma = 0.0;

  std::string family;
  DephasingParams dephasing;
  double q = 0.0, x = 0.0;
  BitFlipParams bitflip;
  SuperOperator initial;

  double t_start = 0.0, t_end = 0.0, t_step = 1e-3;
  PhaseKind kind = PhaseKind::cyclic;
  std::optional<Complex> eigenvalue;
  double tol_deg = kDefaultDegeneracyTol;

  std::string sweep_parameter;
  std::vector<double> sweep_values;
  std::vector<double> sweep_times;
  bool sweep_report = false;
  bool sweep_nan_on_error = false;

  std::map<std::string, std::string> outputs;  // quantity -> path

  std::string hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(doc.canonical())));
    return buf;
  }

  double period() const { return kTwoPi / omega; }
};

namespace scenario_detail {

inline double parse_real(const ScenarioDocument& doc, const std::string& key, const std::string& text,
                         double period) {
  const std::string s = trim(text);
  auto fail = [&]() -> double {
    throw ParseError(doc.lines.count(key) ? doc.lines.at(key) : 0, key, "cannot read number '" + s + "'");
  };
  static const std::regex re(R"(^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*(period|pi)?$)");
  std::smatch m;
  if (!std::regex_match(s, m, re) || (!m[1].matched && !m[2].matched)) return fail();
  double v = m[1].matched ? std::stod(m[1].str()) : 1.0;
  if (m[2].matched) v *= (m[2].str() == "period" ? period : std::numbers::pi);
  if (!std::isfinite(v)) return fail();
  return v;
}

inline Complex parse_complex(const ScenarioDocument& doc, const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  static const std::regex re(
      R"(^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?(?:\s*([-+])\s*((?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*i)?$)");
  static const std::regex pure(R"(^([-+]?(?:\d+\.?\d*|\.\d+)?(?:[eE][-+]?\d+)?)\s*i$)");
  std::smatch m;
  if (std::regex_match(s, m, pure)) {
    const std::string num = m[1].str();
    double im = (num.empty() || num == "+") ? 1.0 : (num == "-" ? -1.0 : std::stod(num));
    return {0.0, im};
  }
  if (std::regex_match(s, m, re) && m[1].matched) {
    double re_part = std::stod(m[1].str());
    double im = 0.0;
    if (m[2].matched) {
      im = m[3].matched ? std::stod(m[3].str()) : 1.0;
      if (m[2].str() == "-") im = -im;
    }
    return {re_part, im};
  }
  throw ParseError(doc.lines.count(key) ? doc.lines.at(key) : 0, key, "cannot read complex number '" + s + "'");
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ';') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline bool parse_bool(const ScenarioDocument& doc, const std::string& key) {
  const std::string v = doc.get(key);
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ParseError(doc.lines.at(key), key, "expected true or false");
}

}  // namespace scenario_detail

/// Builds the typed scenario from a document, applying `overrides` (used by
/// sweeps) and checking every precondition that can be checked before a run.
inline Scenario build_scenario(const ScenarioDocument& doc,
                               const std::map<std::string, double>& overrides = {}) {
  using namespace scenario_detail;
  Scenario sc;
  sc.doc = doc;
  auto require = [&](const std::string& key) -> const std::string& {
    if (!doc.has(key)) throw ValidationError("missing required key '" + key + "'");
    return doc.get(key);
  };

  const std::string& kind = require("channel.kind");
  if (kind == "dephasing") sc.channel = ChannelKind::dephasing;
  else if (kind == "spontaneous_emission") sc.channel = ChannelKind::spontaneous_emission;
  else if (kind == "bit_flip") sc.channel = ChannelKind::bit_flip;
  else throw ParseError(doc.lines.at("channel.kind"), "channel.kind", "unknown channel '" + kind + "'");

  auto real = [&](const std::string& key, double fallback) {
    if (auto it = overrides.find(key); it != overrides.end()) return it->second;
    if (!doc.has(key)) return fallback;
    return parse_real(doc, key, doc.get(key), kTwoPi / sc.omega);
  };
  sc.omega = real("channel.omega", 1.0);
  if (!(sc.omega > 0.0)) throw ValidationError("channel.omega must be > 0");
  sc.gamma = real("channel.gamma", 0.0);
  if (!(sc.gamma >= 0.0)) throw ValidationError("channel.gamma must be >= 0");

  sc.family = require("invariant.family");
  if (sc.family == "dephasing" || sc.family == "spontaneous_emission") {
    sc.dephasing = {real("invariant.alpha1", 0.0), real("invariant.alpha2", 0.0), real("invariant.c1", 0.0),
                    real("invariant.c2", 0.0), sc.omega};
    sc.q = real("invariant.q", 0.0);
    sc.x = real("invariant.x", 0.0);
  } else if (sc.family == "bit_flip") {
    sc.bitflip.alpha1 = real("invariant.alpha1", 0.0);
    sc.bitflip.eps1 = real("invariant.eps1", -0.5);
    sc.bitflip.eps2 = real("invariant.eps2", 1.0);
    sc.bitflip.omega = sc.omega;
    sc.bitflip.gamma_b = sc.gamma;
    if (doc.has("invariant.c1") || overrides.count("invariant.c1")) sc.bitflip.c1 = real("invariant.c1", 0.0);
  } else if (sc.family == "numeric") {
    const auto items = split_list(require("invariant.initial"));
    const auto n = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(items.size()))));
    if (n * n != static_cast<Index>(items.size()) || (n != 2 && n != 4)) {
      throw ParseError(doc.lines.at("invariant.initial"), "invariant.initial",
                       "expected 4 or 16 entries (row-major), got " + std::to_string(items.size()));
    }
    sc.initial.resize(n, n);
    for (Index i = 0; i < n * n; ++i) {
      sc.initial(i / n, i % n) = parse_complex(doc, "invariant.initial", items[static_cast<std::size_t>(i)]);
    }
  } else {
    throw ParseError(doc.lines.at("invariant.family"), "invariant.family", "unknown family '" + sc.family + "'");
  }

  const double period = sc.period();
  sc.t_start = real("time.start", 0.0);
  sc.t_end = doc.has("time.end") ? real("time.end", period) : period;
  sc.t_step = doc.has("time.step") ? real("time.step", 1e-3) : 1e-3 * period;
  if (!(sc.t_end > sc.t_start)) throw ValidationError("time.end must exceed time.start");
  if (!(sc.t_step > 0.0)) throw ValidationError("time.step must be > 0");

  if (doc.has("phase.kind")) {
    const std::string& pk = doc.get("phase.kind");
    if (pk == "cyclic") sc.kind = PhaseKind::cyclic;
    else if (pk == "noncyclic") sc.kind = PhaseKind::noncyclic;
    else if (pk == "nonabelian") sc.kind = PhaseKind::nonabelian;
    else throw ParseError(doc.lines.at("phase.kind"), "phase.kind", "unknown phase kind '" + pk + "'");
  }
  if (doc.has("phase.eigenvalue")) sc.eigenvalue = parse_complex(doc, "phase.eigenvalue", doc.get("phase.eigenvalue"));
  sc.tol_deg = real("phase.tol_deg", kDefaultDegeneracyTol);

  if (doc.has("sweep.parameter")) {
    sc.sweep_parameter = doc.get("sweep.parameter");
    if (!known_keys().count(sc.sweep_parameter) || sc.sweep_parameter.rfind("sweep.", 0) == 0 ||
        sc.sweep_parameter.rfind("output.", 0) == 0 || sc.sweep_parameter == "channel.kind" ||
        sc.sweep_parameter == "invariant.family" || sc.sweep_parameter == "phase.kind") {
      throw ParseError(doc.lines.at("sweep.parameter"), "sweep.parameter", "not a numeric scenario key");
    }
    if (doc.has("sweep.values")) {
      for (const auto& v : split_list(doc.get("sweep.values"))) sc.sweep_values.push_back(parse_real(doc, "sweep.values", v, period));
    } else {
      const double a = real("sweep.start", 0.0);
      const double b = real("sweep.stop", 0.0);
      const double h = real("sweep.step", 0.0);
      if (!(h > 0.0) || !(b >= a)) throw ValidationError("sweep range needs sweep.start <= sweep.stop and sweep.step > 0");
      const auto n = static_cast<std::size_t>(std::floor((b - a) / h + 1e-9));
      for (std::size_t i = 0; i <= n; ++i) sc.sweep_values.push_back(a + h * static_cast<double>(i));
    }
    if (sc.sweep_values.empty()) throw ValidationError("sweep has no values");
    if (doc.has("sweep.times")) {
      for (const auto& v : split_list(doc.get("sweep.times"))) sc.sweep_times.push_back(parse_real(doc, "sweep.times", v, period));
      for (double t : sc.sweep_times) {
        if (!(t > sc.t_start)) throw ValidationError("sweep.times must exceed time.start");
      }
    }
    if (doc.has("sweep.report")) sc.sweep_report = parse_bool(doc, "sweep.report");
    if (doc.has("sweep.on_error")) {
      const std::string& oe = doc.get("sweep.on_error");
      if (oe == "nan") sc.sweep_nan_on_error = true;
      else if (oe != "fail") throw ParseError(doc.lines.at("sweep.on_error"), "sweep.on_error", "expected fail or nan");
    }
    if (sc.sweep_report) {
      const bool in_invariant = sc.sweep_parameter.rfind("invariant.", 0) == 0;
      const bool rate_in_family = sc.sweep_parameter == "channel.gamma" && sc.family == "bit_flip";
      if (in_invariant || rate_in_family) {
        throw ValidationError("sweep parameter '" + sc.sweep_parameter +
                              "' enters the invariant; a robustness verdict would not test the sufficient condition");
      }
    }
  } else {
    for (const char* k : {"sweep.values", "sweep.start", "sweep.stop", "sweep.step", "sweep.times", "sweep.report",
                          "sweep.on_error"}) {
      if (doc.has(k)) throw ValidationError(std::string(k) + " given without sweep.parameter");
    }
  }

  for (const char* q : {"phases", "series", "sweep", "report"}) {
    const std::string key = std::string("output.") + q;
    if (doc.has(key)) sc.outputs[q] = doc.get(key);
  }
  if (sc.outputs.empty()) throw ValidationError("no output.* file requested");
  if ((sc.outputs.count("sweep") || sc.outputs.count("report")) && sc.sweep_parameter.empty()) {
    throw ValidationError("output.sweep / output.report need sweep.parameter");
  }
  if (sc.outputs.count("report") && !sc.sweep_report) {
    throw ValidationError("output.report needs sweep.report = true");
  }
  return sc;
}

inline Scenario parse_scenario(const std::string& text) { return build_scenario(parse_document(text)); }

// ---------------------------------------------------------------------------
// Pipeline pieces

inline DecoherenceChannel scenario_channel(const Scenario& sc) {
  switch (sc.channel) {
    case ChannelKind::dephasing: return DecoherenceChannel::dephasing(sc.omega, sc.gamma);
    case ChannelKind::spontaneous_emission: return DecoherenceChannel::spontaneous_emission(sc.omega, sc.gamma);
    default: return DecoherenceChannel::bit_flip(sc.omega, sc.gamma);
  }
}

inline Index scenario_dim(const Scenario& sc) {
  if (sc.family == "dephasing") return 2;
  if (sc.family == "numeric") return sc.initial.rows();
  return 4;
}

inline Generator scenario_generator(const Scenario& sc) {
  const SuperOperator L = build_lindblad(scenario_channel(sc));
  return constant_generator(scenario_dim(sc) == 2 ? extract_internal_block(L) : L);
}

/// Invariant trajectory for the scenario; family precondition failures are
/// reported as ValidationError.
inline InvariantTrajectory scenario_invariant(const Scenario& sc, const Generator& L, const TimeGrid& grid) {
  try {
    if (sc.family == "dephasing") return dephasing_family(sc.dephasing);
    if (sc.family == "spontaneous_emission") return se_family(sc.dephasing, sc.q, sc.x);
    if (sc.family == "bit_flip") return bitflip_family(sc.bitflip);
  } catch (const DegenerateFamily& e) {
    throw ValidationError(std::string("invariant needs 4(alpha1^2 + alpha2^2) != c2^2 to have an eigenbasis (") +
                          e.what() + ")");
  } catch (const SingularXi& e) {
    throw ValidationError(std::string("bit-flip invariant needs gamma^4 != omega^2 (") + e.what() + ")");
  } catch (const ValidationError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw ValidationError(e.what());
  }
  return solve_invariant(L, sc.initial, grid);
}

/// Rejects a family that does not solve the invariant equation for the
/// scenario's channel (e.g. the dephasing family under bit-flip).
inline void check_family_matches_channel(const Scenario& sc, const InvariantTrajectory& traj, const Generator& L) {
  if (!traj.analytic) return;
  double worst = 0.0;
  for (int i = 0; i <= 8; ++i) {
    const double t = sc.t_start + (sc.t_end - sc.t_start) * i / 8.0;
    const SuperOperator I = traj.value(t);
    worst = std::max(worst, max_abs(traj.derivative(t) - invariant_rhs(L(t), I)) / std::max(1.0, max_abs(I)));
  }
  if (worst > 1e-6) {
    throw ValidationError("invariant family '" + sc.family + "' does not solve dI/dt = [L, I] for channel '" +
                          std::string(to_string(sc.channel)) + "' (residual " + std::to_string(worst) + ")");
  }
}

inline void validate_scenario(const Scenario& sc) {
  const Generator L = scenario_generator(sc);
  if (sc.family == "numeric") {
    if (sc.initial.rows() != L(0.0).rows()) {
      throw ValidationError("invariant.initial dimension does not match the generator");
    }
    return;
  }
  const auto traj = scenario_invariant(sc, L, TimeGrid::over(sc.t_start, sc.t_end, sc.t_step));
  check_family_matches_channel(sc, traj, L);
}

// ---------------------------------------------------------------------------
// CSV

struct CsvFile {
  std::string path;
  std::string quantity;
  std::string content;
};

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

inline CsvFile make_csv(const Scenario& sc, const std::string& quantity, const std::vector<std::string>& columns) {
  CsvFile f;
  f.path = sc.outputs.at(quantity);
  f.quantity = quantity;
  f.content = "# quantity=" + quantity + "; units=omega=1 (omega=" + format_number(sc.omega) +
              "); scenario_hash=fnv1a64:" + sc.hash_hex() + "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) f.content += (i ? "," : "") + columns[i];
  f.content += "\n";
  return f;
}

inline void csv_row(CsvFile& f, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) f.content += (i ? "," : "") + cells[i];
  f.content += "\n";
}

// ---------------------------------------------------------------------------
// Execution

namespace scenario_detail {

struct PathRun {
  BasisPath path;
  Generator L;
};

inline PathRun make_path(const Scenario& sc, const TimeGrid& grid) {
  const Generator L = scenario_generator(sc);
  const InvariantTrajectory traj = scenario_invariant(sc, L, grid);
  check_family_matches_channel(sc, traj, L);
  return {invariant_path(traj, grid, sc.tol_deg), L};
}

inline std::size_t selected_block(const Scenario& sc, const std::vector<Complex>& eigenvalues) {
  return sc.eigenvalue ? nearest_block(eigenvalues, *sc.eigenvalue) : 0;
}

// Phase of the selected kind for block b at index k of a series.
inline Complex series_phase(const Scenario& sc, const PhaseSeries& s, std::size_t b, std::size_t k) {
  if (s.degeneracy[b] != 1) throw DegenerateBlock("selected block is degenerate; use phase.kind = nonabelian");
  if (sc.kind == PhaseKind::cyclic) return s.geometric_integral[b][k];
  if (std::abs(s.overlap[b][k]) < kOverlapFloor) {
    throw VanishingOverlap("overlap vanishes at t = " + format_number(s.grid.time(static_cast<std::ptrdiff_t>(k))));
  }
  return s.total_geometric(b, k);
}

inline std::string sweep_column(const Scenario& sc) {
  if (sc.sweep_parameter == "channel.gamma") {
    switch (sc.channel) {
      case ChannelKind::dephasing: return "gamma_d";
      case ChannelKind::spontaneous_emission: return "gamma_se";
      default: return "gamma_b";
    }
  }
  return sc.sweep_parameter.substr(sc.sweep_parameter.find('.') + 1);
}

inline bool recoverable(const std::exception& e) {
  return dynamic_cast<const NumericalFailure*>(&e) != nullptr || dynamic_cast<const SingularXi*>(&e) != nullptr ||
         dynamic_cast<const ValidationError*>(&e) != nullptr;
}

}  // namespace scenario_detail

inline TimeGrid scenario_grid(const Scenario& sc) { return TimeGrid::over(sc.t_start, sc.t_end, sc.t_step); }

inline void emit_phases(const Scenario& sc, std::vector<CsvFile>& out) {
  using namespace scenario_detail;
  const TimeGrid grid = scenario_grid(sc);
  const PathRun run = make_path(sc, grid);
  if (sc.kind == PhaseKind::nonabelian) {
    CsvFile f = make_csv(sc, "phases", {"block", "re_lambda", "im_lambda", "i", "j", "re_exp_phi", "im_exp_phi",
                                        "re_overlap", "im_overlap", "commutator_norm", "advisory"});
    std::vector<Complex> ev;
    for (const auto& bl : run.path.at(0).blocks) ev.push_back(bl.eigenvalue);
    for (std::size_t b = 0; b < run.path.block_count(); ++b) {
      if (sc.eigenvalue && b != selected_block(sc, ev)) continue;
      const NonAbelianPhase na = nonabelian_gp(run.path, run.L, b);
      const Complex lam = run.path.at(0).blocks[b].eigenvalue;
      for (Index i = 0; i < na.exp_phi.rows(); ++i) {
        for (Index j = 0; j < na.exp_phi.cols(); ++j) {
          csv_row(f, {std::to_string(b), format_number(lam.real()), format_number(lam.imag()), std::to_string(i),
                      std::to_string(j), format_number(na.exp_phi(i, j).real()), format_number(na.exp_phi(i, j).imag()),
                      format_number(na.overlap(i, j).real()), format_number(na.overlap(i, j).imag()),
                      format_number(na.commutator_norm), na.advisory ? "1" : "0"});
        }
      }
    }
    out.push_back(std::move(f));
    return;
  }
  std::vector<BlockPhase> phases;
  if (sc.kind == PhaseKind::cyclic) {
    const auto cyc = abelian_cyclic_gp(run.path);
    const auto dyn = dynamical_phase(run.path, run.L);
    for (std::size_t b = 0; b < cyc.size(); ++b) {
      BlockPhase p;
      p.eigenvalue = run.path.at(0).blocks[b].eigenvalue;
      p.degeneracy = run.path.at(0).blocks[b].degeneracy();
      p.geometric_integral = cyc[b];
      p.ln_correction = p.degeneracy == 1 ? Complex{} : kNaN;
      p.total_geometric = cyc[b];
      p.dynamical = dyn[b];
      phases.push_back(p);
    }
  } else {
    phases = abelian_noncyclic_gp(run.path, run.L);
  }
  std::vector<Complex> ev;
  for (const auto& p : phases) ev.push_back(p.eigenvalue);
  CsvFile f = make_csv(sc, "phases", {"block", "re_lambda", "im_lambda", "re_geometric_integral",
                                      "im_geometric_integral", "re_ln_correction", "im_ln_correction", "re_phi",
                                      "im_phi", "re_dynamical", "im_dynamical"});
  for (std::size_t b = 0; b < phases.size(); ++b) {
    if (sc.eigenvalue && b != scenario_detail::selected_block(sc, ev)) continue;
    const auto& p = phases[b];
    csv_row(f, {std::to_string(b), format_number(p.eigenvalue.real()), format_number(p.eigenvalue.imag()),
                format_number(p.geometric_integral.real()), format_number(p.geometric_integral.imag()),
                format_number(p.ln_correction.real()), format_number(p.ln_correction.imag()),
                format_number(p.total_geometric.real()), format_number(p.total_geometric.imag()),
                format_number(p.dynamical.real()), format_number(p.dynamical.imag())});
  }
  out.push_back(std::move(f));
}

inline void emit_series(const Scenario& sc, std::vector<CsvFile>& out) {
  using namespace scenario_detail;
  const TimeGrid grid = scenario_grid(sc);
  const PathRun run = make_path(sc, grid);
  const PhaseSeries s = phase_series(run.path, run.L);
  const std::size_t b = selected_block(sc, s.eigenvalues);
  CsvFile f = make_csv(sc, "series", {"t", "re_phi", "im_phi"});
  for (std::size_t k = 0; k < grid.size(); ++k) {
    Complex phi = kNaN;
    if (sc.kind == PhaseKind::cyclic) {
      phi = s.geometric_integral[b][k];
    } else if (std::abs(s.overlap[b][k]) >= kOverlapFloor) {
      phi = s.total_geometric(b, k);
    }
    csv_row(f, {format_number(grid.time(static_cast<std::ptrdiff_t>(k))), format_number(phi.real()),
                format_number(phi.imag())});
  }
  out.push_back(std::move(f));
}

inline void emit_sweep(const Scenario& sc, std::vector<CsvFile>& out) {
  using namespace scenario_detail;
  CsvFile f = make_csv(sc, "sweep", {sweep_column(sc), "t", "re_phi", "im_phi"});
  std::vector<double> times = sc.sweep_times;
  if (times.empty()) times.push_back(sc.t_end);
  // Step chosen so that every requested time is a grid point.
  const double first_span = times.front() - sc.t_start;
  const double h = first_span / std::ceil(first_span / sc.t_step - 1e-9);
  std::vector<std::size_t> index;
  for (double t : times) {
    const double u = (t - sc.t_start) / h;
    if (std::abs(u - std::round(u)) > 1e-6) {
      throw ValidationError("sweep.times must be integer multiples of the first sweep time's grid step");
    }
    index.push_back(static_cast<std::size_t>(std::llround(u)));
  }
  const auto n_max = *std::max_element(index.begin(), index.end());
  const TimeGrid grid = TimeGrid::with_steps(sc.t_start, sc.t_start + h * static_cast<double>(n_max), n_max);

  for (double v : sc.sweep_values) {
    std::vector<Complex> phi(times.size(), kNaN);
    try {
      const Scenario point = build_scenario(sc.doc, {{sc.sweep_parameter, v}});
      try {
        const PathRun run = make_path(point, grid);
        const PhaseSeries s = phase_series(run.path, run.L);
        const std::size_t b = selected_block(point, s.eigenvalues);
        for (std::size_t i = 0; i < times.size(); ++i) phi[i] = series_phase(point, s, b, index[i]);
      } catch (const NumericalFailure&) {
        if (!sc.sweep_nan_on_error) throw;
        // Retry each time on its own shorter grid; late failures keep early values.
        for (std::size_t i = 0; i < times.size(); ++i) {
          try {
            const TimeGrid gi = TimeGrid::with_steps(sc.t_start, sc.t_start + h * static_cast<double>(index[i]), index[i]);
            const PathRun run = make_path(point, gi);
            const PhaseSeries s = phase_series(run.path, run.L);
            phi[i] = series_phase(point, s, selected_block(point, s.eigenvalues), index[i]);
          } catch (const std::exception& e) {
            if (!recoverable(e)) throw;
          }
        }
      }
    } catch (const std::exception& e) {
      if (!sc.sweep_nan_on_error || !recoverable(e)) throw;
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
      csv_row(f, {format_number(v), format_number(times[i]), format_number(phi[i].real()), format_number(phi[i].imag())});
    }
  }
  out.push_back(std::move(f));
}

inline RobustnessReport scenario_report(const Scenario& sc) {
  const TimeGrid grid = scenario_grid(sc);
  SweepScenario sw;
  sw.label = std::string(to_string(sc.channel)) + " / " + sc.family;
  sw.grid = grid;
  sw.kind = sc.kind;
  sw.tol_deg = sc.tol_deg;
  const ScenarioDocument doc = sc.doc;
  const std::string param = sc.sweep_parameter;
  sw.generator = [doc, param](double v) { return scenario_generator(build_scenario(doc, {{param, v}})); };
  sw.invariant = [doc, param, grid](double v) {
    const Scenario point = build_scenario(doc, {{param, v}});
    const Generator L = scenario_generator(point);
    return scenario_invariant(point, L, grid);
  };
  return phase_sweep(sw, sc.sweep_values);
}

inline void emit_report(const Scenario& sc, std::vector<CsvFile>& out) {
  const RobustnessReport r = scenario_report(sc);
  CsvFile f = make_csv(sc, "report", {"block", "re_lambda", "im_lambda", "commutator_independent", "commutator_spread",
                                      "phase_spread", "phase_verdict", "dynamical_spread", "dynamical_verdict"});
  for (std::size_t b = 0; b < r.eigenvalues.size(); ++b) {
    csv_row(f, {std::to_string(b), format_number(r.eigenvalues[b].real()), format_number(r.eigenvalues[b].imag()),
                r.commutator_independent ? "true" : "false", format_number(r.commutator_spread),
                format_number(r.phase_spread[b]), r.phase_robust[b] ? "robust" : "non-robust",
                format_number(r.dynamical_spread[b]), r.dynamical_robust[b] ? "robust" : "non-robust"});
  }
  out.push_back(std::move(f));
}

/// Runs every requested output; files are returned in a fixed order
/// (phases, series, sweep, report) and not written.
inline std::vector<CsvFile> execute(const Scenario& sc) {
  std::vector<CsvFile> out;
  if (sc.outputs.count("phases")) emit_phases(sc, out);
  if (sc.outputs.count("series")) emit_series(sc, out);
  if (sc.outputs.count("sweep")) emit_sweep(sc, out);
  if (sc.outputs.count("report")) emit_report(sc, out);
  return out;
}

/// Exit code for an exception escaping parse/validate/execute.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericalFailure*>(&e)) return kExitNumerical;
  if (dynamic_cast<const InvalidInput*>(&e)) return kExitInvalid;
  return kExitOther;
}

// ---------------------------------------------------------------------------
// Built-in scenarios

struct BuiltinScenario {
  const char* name;
  const char* description;
  const char* text;
};

inline const std::vector<BuiltinScenario>& builtin_scenarios() {
  static const std::vector<BuiltinScenario> all = {
      {"dephasing_cyclic", "dephasing channel, rotating 2x2 invariant, cyclic phases over one period",
       R"(# Dephasing: cyclic phases of the rotating 2x2 invariant over one period.
channel.kind = dephasing
channel.omega = 1
channel.gamma = 0.5
invariant.family = dephasing
invariant.alpha1 = 1
invariant.alpha2 = 0.5
invariant.c1 = 0
invariant.c2 = 0
time.start = 0
time.end = period
time.step = 0.001*period
phase.kind = cyclic
sweep.parameter = channel.gamma
sweep.values = 0, 0.1, 0.5, 1
sweep.report = true
output.phases = dephasing_cyclic_phases.csv
output.report = dephasing_cyclic_report.csv
)"},
      {"spontaneous_emission", "spontaneous emission, 4x4 invariant with constant outer block",
       R"(# Spontaneous emission: same inner family, constant outer block q, x.
channel.kind = spontaneous_emission
channel.omega = 1
channel.gamma = 0.3
invariant.family = spontaneous_emission
invariant.alpha1 = 1
invariant.alpha2 = 0.5
invariant.c1 = 0
invariant.c2 = 0
invariant.q = 1
invariant.x = 0.25
time.start = 0
time.end = period
time.step = 0.001*period
phase.kind = cyclic
sweep.parameter = channel.gamma
sweep.values = 0, 0.3, 1
sweep.report = true
output.phases = spontaneous_emission_phases.csv
output.report = spontaneous_emission_report.csv
)"},
      {"bitflip", "bit-flip, non-cyclic phase of the alpha1 - sqrt(eps1 eps2) block over one period",
       R"(# Bit-flip: open-path phase over one period.
channel.kind = bit_flip
channel.omega = 1
channel.gamma = 0.1
invariant.family = bit_flip
invariant.alpha1 = 0
invariant.eps1 = -0.5
invariant.eps2 = 1
time.start = 0
time.end = period
time.step = 0.001
phase.kind = noncyclic
phase.eigenvalue = -0.70710678118654752i
output.phases = bitflip_phases.csv
)"},
      {"fig1", "bit-flip, Re/Im phi against gamma_b at t = 2pi, 4pi, 6pi",
       R"(# Bit-flip phase against the rate at three fixed times.
# Rate grid 0 to 1.5 in steps of 0.05.
channel.kind = bit_flip
channel.omega = 1
channel.gamma = 0
invariant.family = bit_flip
invariant.alpha1 = 0
invariant.eps1 = -0.5
invariant.eps2 = 1
time.start = 0
time.end = 3*period
time.step = 0.001
phase.kind = noncyclic
phase.eigenvalue = -0.70710678118654752i
sweep.parameter = channel.gamma
sweep.start = 0
sweep.stop = 1.5
sweep.step = 0.05
sweep.times = period, 2*period, 3*period
sweep.on_error = nan
output.sweep = fig1_phase_vs_gamma.csv
)"},
      {"fig2", "bit-flip at gamma_b = 0.1, phi against t (imaginary part steps)",
       R"(# Bit-flip phase against time, gamma_b = 0.1.
channel.kind = bit_flip
channel.omega = 1
channel.gamma = 0.1
invariant.family = bit_flip
invariant.alpha1 = 0
invariant.eps1 = -0.5
invariant.eps2 = 1
time.start = 0
time.end = 3*period
time.step = 0.001
phase.kind = noncyclic
phase.eigenvalue = -0.70710678118654752i
output.series = fig2_phase_vs_time.csv
)"},
      {"fig3", "bit-flip at gamma_b = 0.1, phi against t (real part)",
       R"(# Bit-flip phase against time, gamma_b = 0.1; plot the real part.
channel.kind = bit_flip
channel.omega = 1
channel.gamma = 0.1
invariant.family = bit_flip
invariant.alpha1 = 0
invariant.eps1 = -0.5
invariant.eps2 = 1
time.start = 0
time.end = 3*period
time.step = 0.001
phase.kind = noncyclic
phase.eigenvalue = -0.70710678118654752i
output.series = fig3_phase_vs_time.csv
)"},
  };
  return all;
}

}  // namespace dynphase
