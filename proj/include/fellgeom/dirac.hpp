#pragma once

// Dirac-operator moduli: admissibility constraints, the per-pattern real
// linear solve, and the physics-facing evaluators (fluctuations, observable
// closure, spectrum, spectral distance).

#include "fellgeom/matrix_core.hpp"
#include "fellgeom/representation.hpp"
#include "fellgeom/sheaf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fellgeom {

class SolverError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EnumerationCapError : public std::length_error {
 public:
  using std::length_error::length_error;
};

class NonUnitaryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonAbelianError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Constraint { self_adjoint, j_real, chi_anticommute, first_order, s0_reality, tensor_factor };

inline constexpr std::array<Constraint, 6> kAllConstraints{Constraint::self_adjoint,   Constraint::j_real,
                                                           Constraint::chi_anticommute, Constraint::first_order,
                                                           Constraint::s0_reality,     Constraint::tensor_factor};

inline std::string_view constraint_name(Constraint c) {
  switch (c) {
    case Constraint::self_adjoint: return "self_adjoint";
    case Constraint::j_real: return "j_real";
    case Constraint::chi_anticommute: return "chi_anticommute";
    case Constraint::first_order: return "first_order";
    case Constraint::s0_reality: return "s0_reality";
    case Constraint::tensor_factor: return "tensor_factor";
  }
  return "unknown";
}

inline std::optional<Constraint> parse_constraint(std::string_view name) {
  for (Constraint c : kAllConstraints)
    if (constraint_name(c) == name) return c;
  return std::nullopt;
}

struct ConstraintSet {
  bool self_adjoint = false;
  bool j_real = false;
  bool chi_anticommute = false;
  bool first_order = false;
  bool s0_reality = false;
  bool tensor_factor = false;

  static ConstraintSet standard() { return {true, true, true, false, true, false}; }

  static ConstraintSet from_names(const std::vector<std::string>& names) {
    ConstraintSet cs;
    for (const auto& n : names) {
      const auto c = parse_constraint(n);
      if (!c) throw SolverError("unknown constraint '" + n + "'");
      cs.set(*c, true);
    }
    return cs;
  }

  bool has(Constraint c) const {
    switch (c) {
      case Constraint::self_adjoint: return self_adjoint;
      case Constraint::j_real: return j_real;
      case Constraint::chi_anticommute: return chi_anticommute;
      case Constraint::first_order: return first_order;
      case Constraint::s0_reality: return s0_reality;
      case Constraint::tensor_factor: return tensor_factor;
    }
    return false;
  }

  void set(Constraint c, bool on) {
    switch (c) {
      case Constraint::self_adjoint: self_adjoint = on; break;
      case Constraint::j_real: j_real = on; break;
      case Constraint::chi_anticommute: chi_anticommute = on; break;
      case Constraint::first_order: first_order = on; break;
      case Constraint::s0_reality: s0_reality = on; break;
      case Constraint::tensor_factor: tensor_factor = on; break;
    }
  }

  bool any() const { return self_adjoint || j_real || chi_anticommute || first_order || s0_reality || tensor_factor; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (Constraint c : kAllConstraints)
      if (has(c)) out.emplace_back(constraint_name(c));
    return out;
  }

  /// Pattern conditions implied by the linear constraints for a fully nonzero field.
  PatternFilter implied_filter() const {
    return {self_adjoint, chi_anticommute, j_real, s0_reality};
  }
};

// ---------------------------------------------------------------------------
// Residuals, evaluated entrywise. The solver builds its rows through a
// separate matrix-product path (see constraint_system).
// ---------------------------------------------------------------------------

namespace detail {

/// Unit index owning each row of H.
inline std::vector<std::size_t> unit_of_index(const BlockStructure& bs) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bs.block_count(); ++i) out.insert(out.end(), bs.dim(i), i);
  return out;
}

inline void require_dim(const Representation& rep, const ComplexMatrix& x, const char* what) {
  const auto m = static_cast<Eigen::Index>(rep.dim());
  if (x.rows() != m || x.cols() != m) throw DimensionError(std::string(what) + ": operator dimension mismatch");
}

}  // namespace detail

inline double self_adjoint_residual(const ComplexMatrix& x) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) worst = std::max(worst, std::abs(x(i, j) - std::conj(x(j, i))));
  return worst;
}

/// ||x J - spin_sign * J x|| as a real-linear map; with J v = P conj(v) this is ||x P - spin_sign * P conj(x)||.
inline double j_real_residual(const Representation& rep, const ComplexMatrix& x) {
  detail::require_dim(rep, x, "j_real_residual");
  const ComplexMatrix& p = rep.j_permutation();
  return operator_norm(x * p - static_cast<double>(rep.config().spin_sign) * p * x.conjugate());
}

/// The matrix form x = spin_sign * J x* J^-1 (agrees with j_real for self-adjoint x).
inline double j_real_adjoint_form_residual(const Representation& rep, const ComplexMatrix& x) {
  detail::require_dim(rep, x, "j_real_adjoint_form_residual");
  return max_abs(x - static_cast<double>(rep.config().spin_sign) * rep.conjugate_by_J(x.adjoint()));
}

/// x chi + chi x, entrywise: x_ab (chi_a + chi_b).
inline double chi_anticommute_residual(const Representation& rep, const ComplexMatrix& x) {
  detail::require_dim(rep, x, "chi_anticommute_residual");
  const auto owner = detail::unit_of_index(rep.blocks());
  const auto& chir = rep.config().chirality;
  double worst = 0.0;
  for (Eigen::Index a = 0; a < x.rows(); ++a)
    for (Eigen::Index b = 0; b < x.cols(); ++b) {
      const double s = chir[owner[static_cast<std::size_t>(a)]] + chir[owner[static_cast<std::size_t>(b)]];
      worst = std::max(worst, std::abs(x(a, b)) * std::abs(s));
    }
  return worst;
}

/// Largest entry in blocks joining different sectors.
inline double s0_residual(const Representation& rep, const ComplexMatrix& x) {
  detail::require_dim(rep, x, "s0_residual");
  const auto& sec = rep.config().sector;
  double worst = 0.0;
  for (std::size_t i = 0; i < rep.unit_count(); ++i)
    for (std::size_t j = 0; j < rep.unit_count(); ++j)
      if (sec[i] != sec[j]) worst = std::max(worst, max_abs(block_of(x, rep.blocks(), i, j)));
  return worst;
}

inline bool check_s0_reality(const Representation& rep, const ComplexMatrix& x, double tol = kDefaultTolerance) {
  return s0_residual(rep, x) <= tol;
}

/// Largest sigma_2 / sigma_1 over nonzero blocks of the rearranged E (x) E^opp factorisation; 0 without opp_dims.
inline double tensor_factor_residual(const Representation& rep, const ComplexMatrix& x, double zero_tol = kDefaultTolerance) {
  detail::require_dim(rep, x, "tensor_factor_residual");
  const auto& od = rep.config().opp_dims;
  if (!od) return 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < rep.unit_count(); ++i)
    for (std::size_t j = 0; j < rep.unit_count(); ++j) {
      const ComplexMatrix blk = block_of(x, rep.blocks(), i, j);
      if (max_abs(blk) <= zero_tol) continue;
      const TensorDims d{(*od)[i].left, (*od)[j].left, (*od)[i].right, (*od)[j].right};
      if (tensor_rank_one(blk, d, 1e-12)) continue;
      // Recover the sigma ratio for reporting.
      ComplexMatrix reshaped(static_cast<Eigen::Index>(d.left_rows * d.left_cols),
                             static_cast<Eigen::Index>(d.right_rows * d.right_cols));
      const auto lc = static_cast<Eigen::Index>(d.left_cols), rr = static_cast<Eigen::Index>(d.right_rows),
                 rc = static_cast<Eigen::Index>(d.right_cols);
      for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(d.left_rows); ++r)
        for (Eigen::Index c = 0; c < lc; ++c)
          for (Eigen::Index r2 = 0; r2 < rr; ++r2)
            for (Eigen::Index c2 = 0; c2 < rc; ++c2) reshaped(r * lc + c, r2 * rc + c2) = blk(r * rr + r2, c * rc + c2);
      Eigen::JacobiSVD<ComplexMatrix> svd(reshaped);
      const auto& s = svd.singularValues();
      if (s.size() > 1 && s(0) > 0) worst = std::max(worst, s(1) / s(0));
    }
  return worst;
}

struct FirstOrderReport {
  double residual = 0.0;           // max ||[[X, rho(a)], rho_opp(b)]||
  double reversed_residual = 0.0;  // max ||[[X, rho_opp(b)], rho(a)]||
  double bracket_discrepancy = 0.0;  // max || difference of the two brackets ||
};

inline FirstOrderReport first_order_report(const Representation& rep, const ComplexMatrix& x) {
  detail::require_dim(rep, x, "first_order_residual");
  FirstOrderReport out;
  const auto basis = rep.algebra_basis();
  std::vector<ComplexMatrix> left, right;
  for (const auto& a : basis) {
    left.push_back(rep.rho(a));
    right.push_back(rep.rho_opp(a));
  }
  for (const auto& a : left) {
    const ComplexMatrix xa = commutator(x, a);
    for (const auto& b : right) {
      const ComplexMatrix one = commutator(xa, b);
      const ComplexMatrix two = commutator(commutator(x, b), a);
      out.residual = std::max(out.residual, operator_norm(one));
      out.reversed_residual = std::max(out.reversed_residual, operator_norm(two));
      out.bracket_discrepancy = std::max(out.bracket_discrepancy, operator_norm(one - two));
    }
  }
  return out;
}

inline double first_order_residual(const Representation& rep, const ComplexMatrix& x) {
  return first_order_report(rep, x).residual;
}

/// max over basis pairs of || [X, ab] - (a [X, b] + [X, a] b) || with a = rho(.), b = rho_opp(.).
inline double derivation_identity_residual(const Representation& rep, const ComplexMatrix& x) {
  detail::require_dim(rep, x, "derivation_identity_check");
  const auto basis = rep.algebra_basis();
  double worst = 0.0;
  for (const auto& ea : basis) {
    const ComplexMatrix a = rep.rho(ea);
    for (const auto& eb : basis) {
      const ComplexMatrix b = rep.rho_opp(eb);
      const ComplexMatrix lhs = commutator(x, a * b);
      const ComplexMatrix rhs = a * commutator(x, b) + commutator(x, a) * b;
      worst = std::max(worst, operator_norm(lhs - rhs));
    }
  }
  return worst;
}

/// True when [X, rho(a)] = 0 for every basis a, i.e. X induces the zero derivation.
inline bool is_zero_derivation(const Representation& rep, const ComplexMatrix& x, double tol = kDefaultTolerance) {
  detail::require_dim(rep, x, "is_zero_derivation");
  for (const auto& a : rep.algebra_basis())
    if (max_abs(commutator(x, rep.rho(a))) > tol) return false;
  return true;
}

struct ConstraintResidual {
  std::string name;
  bool imposed = false;
  double residual = 0.0;
  bool pass = false;
};

/// Residual of every condition on X; `imposed` marks the ones in `cs`.
inline std::vector<ConstraintResidual> residual_table(const Representation& rep, const ComplexMatrix& x,
                                                      const ConstraintSet& cs, double tol = kDefaultTolerance) {
  std::vector<ConstraintResidual> out;
  auto add = [&](std::string name, bool imposed, double r) { out.push_back({std::move(name), imposed, r, r <= tol}); };
  add("self_adjoint", cs.self_adjoint, self_adjoint_residual(x));
  add("j_real", cs.j_real, j_real_residual(rep, x));
  add("j_real_adjoint_form", false, j_real_adjoint_form_residual(rep, x));
  add("chi_anticommute", cs.chi_anticommute, chi_anticommute_residual(rep, x));
  add("first_order", cs.first_order, first_order_residual(rep, x));
  add("s0_reality", cs.s0_reality, s0_residual(rep, x));
  add("tensor_factor", cs.tensor_factor, tensor_factor_residual(rep, x));
  return out;
}

// ---------------------------------------------------------------------------
// Realified constraint system
// ---------------------------------------------------------------------------

/// Unknowns: real and imaginary parts of every entry of the pattern's blocks,
/// in unit order, row-major within a block.
inline std::vector<UnknownLabel> pattern_unknowns(const Representation& rep, const Pattern& p) {
  std::vector<UnknownLabel> out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Arrow g = p.arrow_at(i);
    for (std::size_t r = 0; r < rep.blocks().dim(g.range); ++r)
      for (std::size_t c = 0; c < rep.blocks().dim(g.source); ++c) {
        out.push_back({i, r, c, Part::re});
        out.push_back({i, r, c, Part::im});
      }
  }
  return out;
}

/// Embeds a real coefficient vector over `unknowns` as an m x m operator.
inline ComplexMatrix materialize(const Representation& rep, const Pattern& p, const std::vector<UnknownLabel>& unknowns,
                                 const RealVector& v) {
  const auto m = static_cast<Eigen::Index>(rep.dim());
  ComplexMatrix x = ComplexMatrix::Zero(m, m);
  for (std::size_t k = 0; k < unknowns.size(); ++k) {
    const UnknownLabel& u = unknowns[k];
    const Arrow g = p.arrow_at(u.block);
    const auto row = static_cast<Eigen::Index>(rep.blocks().offset(g.range) + u.row);
    const auto col = static_cast<Eigen::Index>(rep.blocks().offset(g.source) + u.col);
    x(row, col) += u.part == Part::re ? Complex(v(static_cast<Eigen::Index>(k)), 0.0)
                                      : Complex(0.0, v(static_cast<Eigen::Index>(k)));
  }
  return x;
}

namespace detail {

/// Images of X under every linear constraint map; each must vanish.
struct ConstraintMaps {
  const Representation* rep;
  ConstraintSet cs;
  ComplexMatrix sector_mask;  // 1 on cross-sector entries
  std::vector<ComplexMatrix> rho_basis;
  std::vector<ComplexMatrix> rho_opp_basis;

  ConstraintMaps(const Representation& r, const ConstraintSet& c) : rep(&r), cs(c) {
    const auto m = static_cast<Eigen::Index>(r.dim());
    sector_mask = ComplexMatrix::Zero(m, m);
    const auto& sec = r.config().sector;
    for (std::size_t i = 0; i < r.unit_count(); ++i)
      for (std::size_t j = 0; j < r.unit_count(); ++j)
        if (sec[i] != sec[j]) block_of(sector_mask, r.blocks(), i, j).setOnes();
    if (cs.first_order) {
      for (const auto& a : r.algebra_basis()) {
        rho_basis.push_back(r.rho(a));
        rho_opp_basis.push_back(r.rho_opp(a));
      }
    }
  }

  void images(const ComplexMatrix& x, std::vector<ComplexMatrix>& out) const {
    out.clear();
    const double eps = static_cast<double>(rep->config().spin_sign);
    if (cs.self_adjoint) out.push_back(x - x.adjoint());
    if (cs.j_real) out.push_back(x - eps * rep->conjugate_by_J(x));
    if (cs.chi_anticommute) out.push_back(x * rep->chi() + rep->chi() * x);
    if (cs.first_order) {
      for (const auto& a : rho_basis) {
        const ComplexMatrix xa = x * a - a * x;
        for (const auto& b : rho_opp_basis) out.push_back(xa * b - b * xa);
      }
    }
    if (cs.s0_reality) out.push_back(x.cwiseProduct(sector_mask));
  }
};

}  // namespace detail

/// Realified linear constraints on the pattern's blocks. Rows are built by
/// applying each constraint map to every unknown direction; identically zero
/// rows are dropped. tensor_factor is nonlinear and handled after the solve.
inline RealLinearSystem constraint_system(const Representation& rep, const Pattern& p, const ConstraintSet& cs) {
  if (!cs.any()) throw SolverError("constraint set is empty");
  if (!pattern_respects(rep.bundle().groupoid(), p)) throw SolverError("pattern does not respect the groupoid");
  RealLinearSystem sys;
  sys.unknowns = pattern_unknowns(rep, p);
  const detail::ConstraintMaps maps(rep, cs);
  const auto n = static_cast<Eigen::Index>(sys.unknowns.size());

  std::vector<ComplexMatrix> imgs;
  RealMatrix columns;  // (all rows) x n
  for (Eigen::Index k = 0; k < n; ++k) {
    RealVector e = RealVector::Zero(n);
    e(k) = 1.0;
    maps.images(materialize(rep, p, sys.unknowns, e), imgs);
    Eigen::Index total = 0;
    for (const auto& im : imgs) total += 2 * im.size();
    if (k == 0) columns = RealMatrix::Zero(total, n);
    Eigen::Index row = 0;
    for (const auto& im : imgs)
      for (Eigen::Index q = 0; q < im.size(); ++q) {
        columns(row++, k) = im.data()[q].real();
        columns(row++, k) = im.data()[q].imag();
      }
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < columns.rows(); ++r)
    if (columns.row(r).cwiseAbs().maxCoeff() > 0.0) keep.push_back(r);
  sys.coefficients = RealMatrix(static_cast<Eigen::Index>(keep.size()), n);
  for (std::size_t r = 0; r < keep.size(); ++r) sys.coefficients.row(static_cast<Eigen::Index>(r)) = columns.row(keep[r]);
  return sys;
}

// ---------------------------------------------------------------------------
// Solution spaces
// ---------------------------------------------------------------------------

struct DiracSolution {
  Pattern pattern;
  std::vector<UnknownLabel> unknowns;
  RealMatrix basis;  // unknowns x real_dimension, orthonormal columns
  std::vector<ComplexMatrix> basis_matrices;
  std::size_t real_dimension = 0;
  std::vector<ConstraintResidual> residuals;  // max over basis elements
  bool zero_derivation = false;               // every basis element commutes with rho(A)
};

struct SolveOptions {
  std::size_t max_units = 8;
  bool override_cap = false;
  bool slow_path = false;  // solve every pattern instead of the pruned set
  double tol = kDefaultTolerance;
};

struct DiracSpace {
  std::vector<DiracSolution> solutions;
  std::size_t total_real_dimension = 0;
  std::size_t patterns_examined = 0;
  bool slow_path = false;
};

/// Solves one pattern. Returns nullopt unless the solution space is nonzero
/// on every block of the pattern (and passes tensor_factor when imposed).
inline std::optional<DiracSolution> solve_pattern(const Representation& rep, const Pattern& p, const ConstraintSet& cs,
                                                  double tol = kDefaultTolerance) {
  const RealLinearSystem sys = constraint_system(rep, p, cs);
  const RealMatrix basis = real_nullspace(sys, tol);
  if (basis.cols() == 0) return std::nullopt;

  DiracSolution sol{p, sys.unknowns, basis, {}, static_cast<std::size_t>(basis.cols()), {}, false};
  for (Eigen::Index c = 0; c < basis.cols(); ++c) sol.basis_matrices.push_back(materialize(rep, p, sys.unknowns, basis.col(c)));

  constexpr double kSupportTol = 1e-8;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Arrow g = p.arrow_at(i);
    double best = 0.0;
    for (const auto& x : sol.basis_matrices) best = std::max(best, max_abs(block_of(x, rep.blocks(), g.range, g.source)));
    if (best <= kSupportTol) return std::nullopt;
  }

  if (cs.tensor_factor) {
    // Fixed generic combination: coefficients 1, 1/2, 1/3, ...
    ComplexMatrix generic = ComplexMatrix::Zero(static_cast<Eigen::Index>(rep.dim()), static_cast<Eigen::Index>(rep.dim()));
    for (std::size_t c = 0; c < sol.basis_matrices.size(); ++c) generic += sol.basis_matrices[c] / static_cast<double>(c + 1);
    if (tensor_factor_residual(rep, generic) > tol) return std::nullopt;
    for (const auto& x : sol.basis_matrices)
      if (tensor_factor_residual(rep, x) > tol) return std::nullopt;
  }

  std::vector<ConstraintResidual> table;
  for (const auto& x : sol.basis_matrices) {
    const auto row = residual_table(rep, x, cs, tol);
    if (table.empty()) {
      table = row;
    } else {
      for (std::size_t k = 0; k < row.size(); ++k) {
        table[k].residual = std::max(table[k].residual, row[k].residual);
        table[k].pass = table[k].pass && row[k].pass;
      }
    }
  }
  sol.residuals = std::move(table);
  sol.zero_derivation = std::all_of(sol.basis_matrices.begin(), sol.basis_matrices.end(),
                                    [&](const ComplexMatrix& x) { return is_zero_derivation(rep, x, tol); });
  return sol;
}

/// Every admissible pattern with a nonzero solution space, in pattern order.
inline DiracSpace dirac_space(const Representation& rep, const ConstraintSet& cs, const SolveOptions& opts = {}) {
  if (!cs.any()) throw SolverError("constraint set is empty");
  const std::size_t k = rep.unit_count();
  if (k > opts.max_units && !opts.override_cap) {
    throw EnumerationCapError("geometry has " + std::to_string(k) + " units, above the enumeration cap of " +
                              std::to_string(opts.max_units));
  }
  DiracSpace out;
  out.slow_path = opts.slow_path;
  auto visit = [&](const Pattern& p) {
    ++out.patterns_examined;
    if (auto sol = solve_pattern(rep, p, cs, opts.tol)) {
      out.total_real_dimension += sol->real_dimension;
      out.solutions.push_back(std::move(*sol));
    }
  };
  if (opts.slow_path) {
    for_each_pattern(rep.bundle().groupoid(), Direction::cotangent, visit);
  } else {
    for_each_pattern(rep.config(), Direction::cotangent, cs.implied_filter(), visit);
  }
  return out;
}

/// Checks that every basis element of every solution satisfies the imposed
/// constraints, recomputing residuals from scratch.
inline double verify_solutions(const Representation& rep, const DiracSpace& space, const ConstraintSet& cs) {
  double worst = 0.0;
  for (const auto& sol : space.solutions)
    for (const auto& x : sol.basis_matrices)
      for (const auto& r : residual_table(rep, x, cs))
        if (r.imposed) worst = std::max(worst, r.residual);
  return worst;
}

// ---------------------------------------------------------------------------
// Fluctuations
// ---------------------------------------------------------------------------

struct FluctuationTerm {
  double r = 1.0;
  AlgebraElement u;
};

struct FluctuationResult {
  ComplexMatrix fluctuated;
  std::vector<ConstraintResidual> residuals;  // re-evaluated on D^f
};

/// D^f = sum_j r_j U_j D U_j^*, U_j = rho(u_j) unitary.
inline FluctuationResult fluctuate(const Representation& rep, const ComplexMatrix& d, const std::vector<FluctuationTerm>& terms,
                                   const ConstraintSet& report_against = ConstraintSet::standard(),
                                   double tol = kDefaultTolerance) {
  detail::require_dim(rep, d, "fluctuate");
  const auto m = static_cast<Eigen::Index>(rep.dim());
  ComplexMatrix out = ComplexMatrix::Zero(m, m);
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const ComplexMatrix u = rep.rho(terms[t].u);
    if (max_abs(u * u.adjoint() - ComplexMatrix::Identity(m, m)) > tol) {
      throw NonUnitaryError("fluctuation term " + std::to_string(t) + " is not unitary");
    }
    out += terms[t].r * (u * d * u.adjoint());
  }
  return {out, residual_table(rep, out, report_against, tol)};
}

// ---------------------------------------------------------------------------
// Observables
// ---------------------------------------------------------------------------

/// ||x J - J x|| as a real-linear map.
inline double j_commutation_residual(const Representation& rep, const ComplexMatrix& x) {
  detail::require_dim(rep, x, "j_commutation_residual");
  const ComplexMatrix& p = rep.j_permutation();
  return operator_norm(x * p - p * x.conjugate());
}

struct ClosureReport {
  std::size_t pairs_checked = 0;
  std::size_t pairs_admitted = 0;  // both factors J-commuting
  double max_factor_residual = 0.0;
  double max_product_residual = 0.0;
  bool pass = true;
};

/// For every pair (x, y) with x, y commuting with J, checks that xy commutes with J.
inline ClosureReport observable_closure_check(const Representation& rep,
                                              const std::vector<std::pair<ComplexMatrix, ComplexMatrix>>& samples,
                                              double tol = kDefaultTolerance) {
  ClosureReport rep_out;
  for (const auto& [x, y] : samples) {
    ++rep_out.pairs_checked;
    const double rx = j_commutation_residual(rep, x), ry = j_commutation_residual(rep, y);
    if (rx >= tol || ry >= tol) continue;
    ++rep_out.pairs_admitted;
    rep_out.max_factor_residual = std::max({rep_out.max_factor_residual, rx, ry});
    const double rxy = j_commutation_residual(rep, x * y);
    rep_out.max_product_residual = std::max(rep_out.max_product_residual, rxy);
    if (rxy >= tol) rep_out.pass = false;
  }
  return rep_out;
}

struct AlgebraReport {
  std::size_t dimension = 0;  // complex dimension of the generated *-algebra
  std::size_t rounds = 0;
  bool capped = false;
};

/// Closes span(generators) under products and adjoints; reports the complex dimension.
inline AlgebraReport generate_observable_algebra(const std::vector<ComplexMatrix>& generators, double tol = kDefaultTolerance) {
  AlgebraReport out;
  if (generators.empty()) return out;
  const Eigen::Index m = generators.front().rows();
  const auto cap = static_cast<std::size_t>(m * m);
  std::vector<ComplexVector> basis;  // orthonormal, vectorised
  std::vector<ComplexMatrix> mats;
  auto try_add = [&](const ComplexMatrix& x) {
    if (x.rows() != m || x.cols() != m) throw DimensionError("generate_observable_algebra: generator shape mismatch");
    ComplexVector v = x.reshaped();
    const double scale = std::max(1.0, v.norm());
    for (const auto& b : basis) v -= b.dot(v) * b;
    for (const auto& b : basis) v -= b.dot(v) * b;
    if (v.norm() <= tol * scale * 10.0) return false;
    v /= v.norm();
    basis.push_back(v);
    mats.push_back(v.reshaped(m, m));
    return true;
  };
  for (const auto& g : generators) {
    try_add(g);
    try_add(g.adjoint());
  }
  std::size_t done = 0;  // products among mats[0..done) already taken
  while (basis.size() < cap) {
    ++out.rounds;
    const std::size_t n = mats.size();
    bool grew = false;
    for (std::size_t a = 0; a < n && basis.size() < cap; ++a)
      for (std::size_t b = 0; b < n && basis.size() < cap; ++b) {
        if (a < done && b < done) continue;
        const ComplexMatrix prod = mats[a] * mats[b];
        grew = try_add(prod) || grew;
        grew = try_add(prod.adjoint()) || grew;
      }
    done = n;
    if (!grew) break;
  }
  out.dimension = basis.size();
  out.capped = basis.size() >= cap;
  return out;
}

// ---------------------------------------------------------------------------
// Spectrum and distance
// ---------------------------------------------------------------------------

struct SpectrumReport {
  std::vector<double> eigenvalues;  // ascending
  std::vector<double> masses;       // |eigenvalue|, ascending
};

namespace detail {

/// Eigenvalues of a Hermitian D, one connected component of its block graph at a time. A component
/// whose units split into two sides with D vanishing inside each side is [[0, B^*], [B, 0]] and has
/// eigenvalues +-sigma(B) (|b| for scalar B); any other component goes to the dense eigensolver.
inline std::vector<double> block_spectrum(const Representation& rep, const ComplexMatrix& d, double tol) {
  if (self_adjoint_residual(d) > tol) throw NotHermitianError("spectrum: matrix is not Hermitian within tolerance");
  const BlockStructure& bs = rep.blocks();
  const std::size_t k = rep.unit_count();
  auto linked = [&](std::size_t i, std::size_t j) { return max_abs(block_of(d, bs, i, j)) > 0.0; };
  auto indices = [&](const std::vector<std::size_t>& units) {
    std::vector<Eigen::Index> idx;
    for (std::size_t u : units)
      for (std::size_t r = 0; r < bs.dim(u); ++r) idx.push_back(static_cast<Eigen::Index>(bs.offset(u) + r));
    return idx;
  };

  std::vector<double> out;
  std::vector<int> side(k, -1);
  for (std::size_t start = 0; start < k; ++start) {
    if (side[start] != -1) continue;
    std::vector<std::size_t> comp{start};
    side[start] = 0;
    bool bipartite = !linked(start, start);
    for (std::size_t q = 0; q < comp.size(); ++q) {
      const std::size_t u = comp[q];
      for (std::size_t v = 0; v < k; ++v) {
        if (v == u || !linked(u, v)) continue;
        if (side[v] == -1) {
          side[v] = 1 - side[u];
          bipartite = bipartite && !linked(v, v);
          comp.push_back(v);
        } else if (side[v] == side[u]) {
          bipartite = false;
        }
      }
    }
    if (!bipartite) {
      const auto idx = indices(comp);
      const auto ev = hermitian_spectrum(ComplexMatrix(d(idx, idx)), tol);
      out.insert(out.end(), ev.begin(), ev.end());
      continue;
    }
    std::vector<std::size_t> a, b;
    for (std::size_t u : comp) (side[u] == 0 ? a : b).push_back(u);
    const auto ia = indices(a), ib = indices(b);
    std::vector<double> sigma;
    if (ia.size() == 1 && ib.size() == 1) {
      sigma.push_back(std::abs(d(ib[0], ia[0])));
    } else if (!ib.empty()) {
      Eigen::JacobiSVD<ComplexMatrix> svd(ComplexMatrix(d(ib, ia)));
      for (Eigen::Index t = 0; t < svd.singularValues().size(); ++t) sigma.push_back(svd.singularValues()(t));
    }
    for (double sv : sigma) {
      out.push_back(sv);
      out.push_back(-sv);
    }
    const std::size_t zeros = ia.size() + ib.size() - 2 * sigma.size();
    out.insert(out.end(), zeros, 0.0);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

inline SpectrumReport spectrum_report(const Representation& rep, const ComplexMatrix& d, double tol = kDefaultTolerance) {
  detail::require_dim(rep, d, "spectrum_report");
  SpectrumReport out;
  out.eigenvalues = detail::block_spectrum(rep, d, tol);
  for (double e : out.eigenvalues) out.masses.push_back(std::abs(e));
  std::sort(out.masses.begin(), out.masses.end());
  return out;
}

namespace detail {

/// Downhill simplex on a convex function; returns the best point found.
template <typename F>
RealVector nelder_mead(F&& f, RealVector x0, double step, double ftol, int max_iter) {
  const Eigen::Index n = x0.size();
  std::vector<RealVector> pts{x0};
  for (Eigen::Index i = 0; i < n; ++i) {
    RealVector p = x0;
    p(i) += step;
    pts.push_back(p);
  }
  std::vector<double> vals;
  for (const auto& p : pts) vals.push_back(f(p));
  for (int it = 0; it < max_iter; ++it) {
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    std::vector<RealVector> sp;
    std::vector<double> sv;
    for (auto o : order) {
      sp.push_back(pts[o]);
      sv.push_back(vals[o]);
    }
    pts = std::move(sp);
    vals = std::move(sv);
    if (vals.back() - vals.front() <= ftol) break;
    RealVector centroid = RealVector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) centroid += pts[static_cast<std::size_t>(i)];
    centroid /= static_cast<double>(n);
    const RealVector& worst = pts.back();
    const RealVector refl = centroid + (centroid - worst);
    const double fr = f(refl);
    if (fr < vals.front()) {
      const RealVector exp = centroid + 2.0 * (centroid - worst);
      const double fe = f(exp);
      if (fe < fr) {
        pts.back() = exp;
        vals.back() = fe;
      } else {
        pts.back() = refl;
        vals.back() = fr;
      }
    } else if (fr < vals[vals.size() - 2]) {
      pts.back() = refl;
      vals.back() = fr;
    } else {
      const RealVector con = centroid + 0.5 * (worst - centroid);
      const double fc = f(con);
      if (fc < vals.back()) {
        pts.back() = con;
        vals.back() = fc;
      } else {
        for (std::size_t i = 1; i < pts.size(); ++i) {
          pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
          vals[i] = f(pts[i]);
        }
      }
    }
  }
  const auto best = std::min_element(vals.begin(), vals.end()) - vals.begin();
  return pts[static_cast<std::size_t>(best)];
}

}  // namespace detail

/// sup { |a_i - a_j| : ||[D, rho(a)]|| <= 1 } over real diagonal a. Returns
/// +infinity when no chain of nonzero D blocks links i and j.
inline double connes_distance(const Representation& rep, const ComplexMatrix& d, std::size_t i, std::size_t j,
                              double resolution = 1e-10, double tol = kDefaultTolerance) {
  detail::require_dim(rep, d, "connes_distance");
  if (i >= rep.unit_count() || j >= rep.unit_count()) throw std::out_of_range("connes_distance: unit index out of range");
  if (rep.blocks().dim(i) != 1 || rep.blocks().dim(j) != 1) {
    throw NonAbelianError("connes_distance: endpoints must have one-dimensional fibers");
  }
  if (self_adjoint_residual(d) > tol) throw NotHermitianError("connes_distance: D is not self-adjoint");
  if (i == j) return 0.0;

  // Reachability through nonzero blocks.
  const std::size_t k = rep.unit_count();
  std::vector<bool> seen(k, false);
  std::vector<std::size_t> stack{i};
  seen[i] = true;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v = 0; v < k; ++v)
      if (!seen[v] && max_abs(block_of(d, rep.blocks(), u, v)) > tol) {
        seen[v] = true;
        stack.push_back(v);
      }
  }
  if (!seen[j]) return std::numeric_limits<double>::infinity();

  // distance = 1 / min { ||[D, diag(a)]|| : a_i = 1, a_j = 0 }.
  const auto m = static_cast<Eigen::Index>(rep.dim());
  const auto pi = static_cast<Eigen::Index>(rep.blocks().offset(i));
  const auto pj = static_cast<Eigen::Index>(rep.blocks().offset(j));
  std::vector<Eigen::Index> free;
  for (Eigen::Index q = 0; q < m; ++q)
    if (q != pi && q != pj) free.push_back(q);
  auto norm_at = [&](const RealVector& z) {
    ComplexMatrix c(m, m);
    RealVector a = RealVector::Zero(m);
    a(pi) = 1.0;
    for (std::size_t t = 0; t < free.size(); ++t) a(free[t]) = z(static_cast<Eigen::Index>(t));
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index s = 0; s < m; ++s) c(r, s) = d(r, s) * (a(s) - a(r));
    return operator_norm(c);
  };
  double best;
  if (free.empty()) {
    best = norm_at(RealVector(0));
  } else {
    const auto n = static_cast<Eigen::Index>(free.size());
    RealVector z = RealVector::Constant(n, 0.5);
    best = norm_at(z);
    double step = 0.5;
    for (int restart = 0; restart < 60; ++restart) {
      const RealVector next = detail::nelder_mead(norm_at, z, step, resolution * 1e-2, 4000);
      const double val = norm_at(next);
      const double gain = best - val;
      if (val < best) {
        best = val;
        z = next;
      }
      if (gain <= resolution * std::max(1.0, best) && step < 1e-3) break;
      step = gain > 0 ? std::max(step * 0.5, 1e-6) : step * 0.25;
    }
  }
  if (best <= 1e-12) return std::numeric_limits<double>::infinity();
  return 1.0 / best;
}

}  // namespace fellgeom
