#pragma once

// Command dispatch for the fellgeom tool. Kept in a header so the test suite
// can drive commands in-process; tools/fellgeom.cpp only forwards argv.
//
// Exit codes: 0 all checks pass, 1 a check failed, 2 input error.

#include "fellgeom/dirac.hpp"
#include "fellgeom/fell_bundle.hpp"
#include "fellgeom/io.hpp"
#include "fellgeom/representation.hpp"
#include "fellgeom/sheaf.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fellgeom::cli {

inline constexpr const char* kToolName = "fellgeom";
inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kToleranceEnv = "FELLGEOM_TOLERANCE";

enum ExitCode : int { kPass = 0, kCheckFailure = 1, kInputError = 2 };

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[k]);
  return os.str();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Tolerance from FELLGEOM_TOLERANCE, else the library default.
inline double tolerance_from_env() {
  const char* v = std::getenv(kToleranceEnv);
  if (!v || !*v) return kDefaultTolerance;
  char* end = nullptr;
  const double t = std::strtod(v, &end);
  if (end == v || *end != '\0' || !(t > 0.0)) throw InputError(std::string(kToleranceEnv) + ": expected a positive number");
  return t;
}

struct LoadedSpec {
  std::string text;
  GeometrySpec spec;
};

inline LoadedSpec load_spec(const std::string& path) {
  std::string text = read_file(path);
  try {
    GeometrySpec spec = parse_spec(text);
    return LoadedSpec{std::move(text), std::move(spec)};
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

struct CheckLine {
  std::string name;
  bool pass;
  double residual;
};

inline Json checks_to_json(const std::vector<CheckLine>& checks) {
  Json arr = Json::array();
  for (const auto& c : checks) arr.push_back(Json{{"name", c.name}, {"pass", c.pass}, {"residual", c.residual}});
  return arr;
}

inline bool all_pass(const std::vector<CheckLine>& checks) {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

inline Json envelope(const std::string& command, const LoadedSpec& ls, double tol) {
  return Json{{"tool", kToolName},
              {"version", kToolVersion},
              {"command", command},
              {"input_digest", "sha256:" + sha256_hex(ls.text)},
              {"geometry", ls.spec.config.name},
              {"tolerance", tol}};
}

inline std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return Json(v).dump();
}

// ---------------------------------------------------------------------------
// Structural checks shared by validate and report
// ---------------------------------------------------------------------------

/// Sheaf axioms on a 2-letter toy alphabet per object; exhaustive, so capped at 5 units.
inline std::optional<SheafReport> toy_sheaf_check(std::size_t units) {
  if (units > 5) return std::nullopt;
  std::vector<std::vector<int>> stalks(units, std::vector<int>{0, 1});
  return FiniteSheaf<int>(stalks).check_axioms();
}

inline std::vector<CheckLine> structural_checks(const Representation& rep, double tol) {
  std::vector<CheckLine> out;
  const auto grading = check_grading(rep, tol);
  out.push_back({grading.name, grading.pass, grading.residual});
  const auto oz = check_order_zero(rep, tol);
  out.push_back({oz.name, oz.pass, oz.residual});
  const auto jsq = check_j_squared(rep, tol);
  out.push_back({jsq.name, jsq.pass, jsq.residual});
  out.push_back({"saturated", check_saturated(rep.bundle(), tol), 0.0});
  if (const auto sheaf = toy_sheaf_check(rep.unit_count())) out.push_back({"sheaf_axioms", sheaf->pass(), 0.0});
  return out;
}

inline std::vector<CheckLine> residual_checks(const std::vector<ConstraintResidual>& rs, bool imposed_only) {
  std::vector<CheckLine> out;
  for (const auto& r : rs)
    if (!imposed_only || r.imposed) out.push_back({r.name, r.pass, r.residual});
  return out;
}

inline void print_checks(std::ostream& os, const std::vector<CheckLine>& checks) {
  for (const auto& c : checks) os << "  " << c.name << ": " << (c.pass ? "PASS" : "FAIL") << " (residual " << fmt(c.residual) << ")\n";
}

inline ConstraintSet resolve_constraints(const GeometrySpec& spec, const std::string& flag) {
  if (!flag.empty()) {
    std::vector<std::string> names;
    std::stringstream ss(flag);
    for (std::string item; std::getline(ss, item, ',');)
      if (!item.empty()) names.push_back(item);
    try {
      return ConstraintSet::from_names(names);
    } catch (const SolverError& e) {
      throw InputError(e.what());
    }
  }
  if (!spec.constraints.empty()) return ConstraintSet::from_names(spec.constraints);
  return ConstraintSet::standard();
}

/// D from the file, or the first basis element of solver solution `index`.
inline ComplexMatrix resolve_dirac(const Representation& rep, const GeometrySpec& spec, std::optional<std::size_t> from_solver,
                                   double tol) {
  if (from_solver) {
    const ConstraintSet cs = resolve_constraints(spec, "");
    SolveOptions opts;
    opts.tol = tol;
    const DiracSpace space = dirac_space(rep, cs, opts);
    if (*from_solver >= space.solutions.size()) {
      throw InputError("--from-solver " + std::to_string(*from_solver) + ": solver returned " +
                       std::to_string(space.solutions.size()) + " solution(s)");
    }
    return space.solutions[*from_solver].basis_matrices.front();
  }
  if (!spec.dirac) throw InputError("no \"dirac\" operator in the spec file (use --from-solver)");
  return spec.dirac->matrix;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct Options {
  std::string file;
  bool json = false;
  std::string constraints;
  std::size_t max_units = 8;
  bool override_cap = false;
  bool slow = false;
  bool expect_nonempty = false;
  std::optional<std::size_t> from_solver;
  std::string terms;
  std::string from;
  std::string to;
  double resolution = 1e-10;
  std::string out;
};

inline int cmd_validate(const Options& o, std::ostream& out, double tol) {
  const LoadedSpec ls = load_spec(o.file);
  const Representation rep(ls.spec.config);
  const auto checks = structural_checks(rep, tol);
  const bool ok = all_pass(checks);
  if (o.json) {
    Json j = envelope("validate", ls, tol);
    j["checks"] = checks_to_json(checks);
    j["pass"] = ok;
    out << j.dump(2) << "\n";
  } else {
    out << "validate " << ls.spec.config.name << "\n";
    print_checks(out, checks);
    out << (ok ? "all checks pass" : "some checks FAILED") << "\n";
  }
  return ok ? kPass : kCheckFailure;
}

inline int cmd_dirac_space(const Options& o, std::ostream& out, double tol) {
  const LoadedSpec ls = load_spec(o.file);
  const Representation rep(ls.spec.config);
  const ConstraintSet cs = resolve_constraints(ls.spec, o.constraints);
  SolveOptions opts{o.max_units, o.override_cap, o.slow, tol};
  DiracSpace space;
  try {
    space = dirac_space(rep, cs, opts);
  } catch (const EnumerationCapError& e) {
    throw InputError(e.what());
  }
  const double verified = verify_solutions(rep, space, cs);
  std::vector<CheckLine> checks{{"solutions_verified", verified <= tol, verified}};
  if (o.expect_nonempty) checks.push_back({"nonempty", !space.solutions.empty(), 0.0});
  const bool ok = all_pass(checks);
  const FiniteGroupoid& g = rep.bundle().groupoid();
  if (o.json) {
    Json j = envelope("dirac-space", ls, tol);
    j["checks"] = checks_to_json(checks);
    j["dirac_space"] = dirac_space_to_json(space, rep, cs);
    j["pass"] = ok;
    out << j.dump(2) << "\n";
  } else {
    out << "dirac-space " << ls.spec.config.name << " constraints {";
    const auto names = cs.names();
    for (std::size_t k = 0; k < names.size(); ++k) out << (k ? ", " : "") << names[k];
    out << "}\n  patterns examined: " << space.patterns_examined << "\n  solutions: " << space.solutions.size()
        << "\n  total real dimension: " << space.total_real_dimension << "\n";
    for (std::size_t s = 0; s < space.solutions.size(); ++s) {
      const auto& sol = space.solutions[s];
      out << "  [" << s << "] pattern {";
      for (std::size_t i = 0; i < sol.pattern.size(); ++i) out << (i ? ", " : "") << g.unit_id(i) << "->" << g.unit_id(sol.pattern.target[i]);
      out << "} real dimension " << sol.real_dimension << "\n";
      for (const auto& r : sol.residuals)
        out << "      " << r.name << (r.imposed ? " (imposed)" : "") << ": " << (r.pass ? "pass" : "fail") << " residual " << fmt(r.residual) << "\n";
    }
    print_checks(out, checks);
  }
  return ok ? kPass : kCheckFailure;
}

inline int cmd_spectrum(const Options& o, std::ostream& out, double tol) {
  const LoadedSpec ls = load_spec(o.file);
  const Representation rep(ls.spec.config);
  const ComplexMatrix d = resolve_dirac(rep, ls.spec, o.from_solver, tol);
  const double sa = self_adjoint_residual(d);
  std::vector<CheckLine> checks{{"self_adjoint", sa <= tol, sa}};
  std::optional<SpectrumReport> spec;
  if (sa <= tol) spec = spectrum_report(rep, d, tol);
  const bool ok = all_pass(checks);
  if (o.json) {
    Json j = envelope("spectrum", ls, tol);
    j["checks"] = checks_to_json(checks);
    if (spec) j["spectrum"] = Json{{"eigenvalues", spec->eigenvalues}, {"masses", spec->masses}};
    j["pass"] = ok;
    out << j.dump(2) << "\n";
  } else {
    out << "spectrum " << ls.spec.config.name << "\n";
    print_checks(out, checks);
    if (spec) {
      out << "  eigenvalues:";
      for (double e : spec->eigenvalues) out << " " << fmt(e);
      out << "\n  masses:";
      for (double m : spec->masses) out << " " << fmt(m);
      out << "\n";
    }
  }
  return ok ? kPass : kCheckFailure;
}

inline int cmd_fluctuate(const Options& o, std::ostream& out, double tol) {
  const LoadedSpec ls = load_spec(o.file);
  const Representation rep(ls.spec.config);
  const ComplexMatrix d = resolve_dirac(rep, ls.spec, o.from_solver, tol);
  std::vector<FluctuationTerm> terms;
  try {
    terms = parse_terms(read_file(o.terms), ls.spec.config);
  } catch (const InputError& e) {
    throw InputError(o.terms + ": " + e.what());
  }
  const ConstraintSet cs = resolve_constraints(ls.spec, o.constraints);
  FluctuationResult res;
  try {
    res = fluctuate(rep, d, terms, cs, tol);
  } catch (const NonUnitaryError& e) {
    throw InputError(e.what());
  }
  const auto before = residual_table(rep, d, cs, tol);
  const auto checks = residual_checks(res.residuals, true);
  const bool ok = all_pass(checks);
  if (o.json) {
    Json j = envelope("fluctuate", ls, tol);
    j["checks"] = checks_to_json(checks);
    j["fluctuation"] = Json{{"term_count", terms.size()},
                            {"fluctuated", matrix_to_json(res.fluctuated)},
                            {"residuals_before", residuals_to_json(before)},
                            {"residuals_after", residuals_to_json(res.residuals)}};
    j["pass"] = ok;
    out << j.dump(2) << "\n";
  } else {
    out << "fluctuate " << ls.spec.config.name << " with " << terms.size() << " term(s)\n";
    for (std::size_t k = 0; k < before.size(); ++k) {
      out << "  " << before[k].name << (before[k].imposed ? " (imposed)" : "") << ": before " << fmt(before[k].residual)
          << ", after " << fmt(res.residuals[k].residual) << (res.residuals[k].pass ? " pass" : " FAIL") << "\n";
    }
  }
  return ok ? kPass : kCheckFailure;
}

inline int cmd_distance(const Options& o, std::ostream& out, double tol) {
  const LoadedSpec ls = load_spec(o.file);
  const Representation rep(ls.spec.config);
  const ComplexMatrix d = resolve_dirac(rep, ls.spec, o.from_solver, tol);
  const FiniteGroupoid& g = rep.bundle().groupoid();
  const auto i = g.find(o.from), j = g.find(o.to);
  if (!i) throw InputError("--from: unknown unit '" + o.from + "'");
  if (!j) throw InputError("--to: unknown unit '" + o.to + "'");
  double dist = 0.0;
  try {
    dist = connes_distance(rep, d, *i, *j, o.resolution, tol);
  } catch (const NonAbelianError& e) {
    throw InputError(e.what());
  } catch (const NotHermitianError& e) {
    throw InputError(e.what());
  }
  if (o.json) {
    Json j2 = envelope("distance", ls, tol);
    j2["checks"] = Json::array();
    j2["distance"] = Json{{"from", o.from}, {"to", o.to}, {"unbounded", std::isinf(dist)}};
    j2["distance"]["value"] = std::isinf(dist) ? Json(nullptr) : Json(dist);
    j2["pass"] = true;
    out << j2.dump(2) << "\n";
  } else {
    out << "distance " << o.from << " -> " << o.to << ": " << (std::isinf(dist) ? "unbounded" : fmt(dist)) << "\n";
  }
  return kPass;
}

inline int cmd_report(const Options& o, std::ostream& out, double tol) {
  const LoadedSpec ls = load_spec(o.file);
  const Representation rep(ls.spec.config);
  const ConstraintSet cs = resolve_constraints(ls.spec, o.constraints);
  auto checks = structural_checks(rep, tol);
  Json j = envelope("report", ls, tol);
  SolveOptions opts{o.max_units, o.override_cap, false, tol};
  DiracSpace space;
  try {
    space = dirac_space(rep, cs, opts);
  } catch (const EnumerationCapError& e) {
    throw InputError(e.what());
  }
  const double verified = verify_solutions(rep, space, cs);
  checks.push_back({"solutions_verified", verified <= tol, verified});
  j["dirac_space"] = dirac_space_to_json(space, rep, cs);
  if (ls.spec.dirac) {
    const ComplexMatrix& d = ls.spec.dirac->matrix;
    const auto table = residual_table(rep, d, cs, tol);
    for (const auto& c : residual_checks(table, true)) checks.push_back({"dirac." + c.name, c.pass, c.residual});
    const FirstOrderReport fo = first_order_report(rep, d);
    Json dj{{"residuals", residuals_to_json(table)},
            {"first_order", Json{{"residual", fo.residual},
                                 {"reversed_residual", fo.reversed_residual},
                                 {"bracket_discrepancy", fo.bracket_discrepancy}}},
            {"derivation_identity_residual", derivation_identity_residual(rep, d)},
            {"zero_derivation", is_zero_derivation(rep, d, tol)}};
    if (self_adjoint_residual(d) <= tol) {
      const auto sp = spectrum_report(rep, d, tol);
      dj["spectrum"] = Json{{"eigenvalues", sp.eigenvalues}, {"masses", sp.masses}};
    }
    j["dirac"] = std::move(dj);
  }
  j["checks"] = checks_to_json(checks);
  const bool ok = all_pass(checks);
  j["pass"] = ok;
  const std::string text = j.dump(2) + "\n";
  if (o.out.empty() || o.out == "-") {
    out << text;
  } else {
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw InputError("cannot write '" + o.out + "'");
    f << text;
    out << "report written to " << o.out << " (" << (ok ? "all checks pass" : "some checks FAILED") << ")\n";
  }
  return ok ? kPass : kCheckFailure;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Finite Fell bundle geometries: validation, Dirac-operator moduli, spectra and distances", kToolName};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  Options o;

  auto* validate = app.add_subcommand("validate", "Check grading, order-zero, J^2, saturation and sheaf axioms");
  validate->add_option("FILE", o.file, "Geometry spec file")->required();
  validate->add_flag("--json", o.json, "Emit a JSON report");

  auto* ds = app.add_subcommand("dirac-space", "Solve for all admissible Dirac operators");
  ds->add_option("FILE", o.file, "Geometry spec file")->required();
  ds->add_option("--constraints", o.constraints, "Comma-separated constraint names");
  ds->add_option("--max-units", o.max_units, "Enumeration cap on the number of units");
  ds->add_flag("--override-cap", o.override_cap, "Solve even above the enumeration cap");
  ds->add_flag("--slow", o.slow, "Solve every pattern without pruning");
  ds->add_flag("--expect-nonempty", o.expect_nonempty, "Fail when no solution exists");
  ds->add_flag("--json", o.json, "Emit a JSON report");

  auto* sp = app.add_subcommand("spectrum", "Eigenvalues and masses of D");
  sp->add_option("FILE", o.file, "Geometry spec file")->required();
  sp->add_option("--from-solver", o.from_solver, "Use the first basis element of solver solution INDEX");
  sp->add_flag("--json", o.json, "Emit a JSON report");

  auto* fl = app.add_subcommand("fluctuate", "Inner fluctuation D -> sum r_j U_j D U_j*");
  fl->add_option("FILE", o.file, "Geometry spec file")->required();
  fl->add_option("--terms", o.terms, "Fluctuation terms file")->required();
  fl->add_option("--constraints", o.constraints, "Constraints to re-check (default: the geometry file's)");
  fl->add_option("--from-solver", o.from_solver, "Use the first basis element of solver solution INDEX");
  fl->add_flag("--json", o.json, "Emit a JSON report");

  auto* di = app.add_subcommand("distance", "Spectral distance between two units");
  di->add_option("FILE", o.file, "Geometry spec file")->required();
  di->add_option("--from", o.from, "Unit id")->required();
  di->add_option("--to", o.to, "Unit id")->required();
  di->add_option("--resolution", o.resolution, "Search tolerance");
  di->add_option("--from-solver", o.from_solver, "Use the first basis element of solver solution INDEX");
  di->add_flag("--json", o.json, "Emit a JSON report");

  auto* rp = app.add_subcommand("report", "Full aggregated JSON report");
  rp->add_option("FILE", o.file, "Geometry spec file")->required();
  rp->add_option("--json", o.out, "Output path ('-' for stdout)")->required();
  rp->add_option("--constraints", o.constraints, "Comma-separated constraint names");
  rp->add_option("--max-units", o.max_units, "Enumeration cap on the number of units");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o_out, o_err;
    const int code = app.exit(e, o_out, o_err);
    out << o_out.str();
    err << o_err.str();
    return code == 0 ? kPass : kInputError;
  }

  try {
    const double tol = tolerance_from_env();
    if (*validate) return cmd_validate(o, out, tol);
    if (*ds) return cmd_dirac_space(o, out, tol);
    if (*sp) return cmd_spectrum(o, out, tol);
    if (*fl) return cmd_fluctuate(o, out, tol);
    if (*di) return cmd_distance(o, out, tol);
    if (*rp) return cmd_report(o, out, tol);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace fellgeom::cli
