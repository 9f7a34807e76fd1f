#pragma once

// Concrete data (H, rho, rho_opp, chi, J) of a finite Fell bundle geometry.
//
// H = C^m with m = sum n_i. J is a (signed) block permutation followed by
// entrywise conjugation: (J v)_i = s_i * conj(v_{c(i)}).

#include "fellgeom/fell_bundle.hpp"
#include "fellgeom/matrix_core.hpp"

#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fellgeom {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Sector { particle, antiparticle };

inline const char* to_string(Sector s) { return s == Sector::particle ? "particle" : "antiparticle"; }

/// (n_i, n_i') split of a unit's fiber dimension for the E (x) E^opp tensor check.
struct OppDims {
  std::size_t left;
  std::size_t right;
};

struct GeometryConfig {
  std::string name;
  FellBundle bundle;
  std::vector<int> chirality;        // +1 / -1 per unit
  std::vector<Sector> sector;        // per unit
  std::vector<std::size_t> conjugation;  // involution on units
  int j_squared = 1;
  int spin_sign = 1;                 // D J = spin_sign * J D
  std::optional<std::vector<OppDims>> opp_dims;

  std::size_t unit_count() const { return bundle.groupoid().unit_count(); }
  const std::string& unit_id(std::size_t i) const { return bundle.groupoid().unit_id(i); }

  /// Throws ConfigError naming the offending unit.
  void validate() const {
    const std::size_t k = unit_count();
    if (chirality.size() != k || sector.size() != k || conjugation.size() != k) {
      throw ConfigError("chirality, sector and conjugation must be defined for every unit");
    }
    if (j_squared != 1 && j_squared != -1) throw ConfigError("j_squared must be +1 or -1");
    if (spin_sign != 1 && spin_sign != -1) throw ConfigError("spin_sign must be +1 or -1");
    for (std::size_t i = 0; i < k; ++i) {
      if (chirality[i] != 1 && chirality[i] != -1) throw ConfigError("unit '" + unit_id(i) + "': chirality must be +1 or -1");
      const std::size_t c = conjugation[i];
      if (c >= k || conjugation[c] != i) throw ConfigError("unit '" + unit_id(i) + "': conjugation is not an involution");
      if (c == i) {
        if (j_squared == -1) throw ConfigError("unit '" + unit_id(i) + "': self-conjugate unit cannot carry j_squared = -1");
        continue;
      }
      if (bundle.dim(i) != bundle.dim(c)) {
        throw ConfigError("conjugate units '" + unit_id(i) + "' and '" + unit_id(c) + "' have different dims");
      }
      if (chirality[i] != chirality[c]) {
        throw ConfigError("conjugate units '" + unit_id(i) + "' and '" + unit_id(c) + "' have different chirality");
      }
      if (sector[i] == sector[c]) {
        throw ConfigError("conjugate units '" + unit_id(i) + "' and '" + unit_id(c) + "' must lie in opposite sectors");
      }
    }
    if (opp_dims) {
      if (opp_dims->size() != k) throw ConfigError("opp_dims must be given for every unit");
      for (std::size_t i = 0; i < k; ++i) {
        const auto& od = (*opp_dims)[i];
        if (od.left * od.right != bundle.dim(i)) {
          throw ConfigError("unit '" + unit_id(i) + "': opp_dims product does not equal dim");
        }
      }
    }
  }
};

/// An element of A = (+)_i M_{n_i}, one block per unit.
using AlgebraElement = std::vector<ComplexMatrix>;

struct CheckResult {
  std::string name;
  bool pass = false;
  double residual = 0.0;
};

class Representation {
 public:
  explicit Representation(GeometryConfig config) : config_(std::move(config)) {
    config_.validate();
    const BlockStructure& bs = blocks();
    const auto m = static_cast<Eigen::Index>(bs.total());
    chi_ = ComplexMatrix::Zero(m, m);
    perm_ = ComplexMatrix::Zero(m, m);
    for (std::size_t i = 0; i < unit_count(); ++i) {
      const auto n = static_cast<Eigen::Index>(bs.dim(i));
      block_of(chi_, bs, i, i) = ComplexMatrix::Identity(n, n) * static_cast<double>(config_.chirality[i]);
      const std::size_t c = config_.conjugation[i];
      const double sign = (config_.j_squared == -1 && i > c) ? -1.0 : 1.0;
      block_of(perm_, bs, i, c) = ComplexMatrix::Identity(n, n) * sign;
    }
  }

  const GeometryConfig& config() const { return config_; }
  const FellBundle& bundle() const { return config_.bundle; }
  const BlockStructure& blocks() const { return config_.bundle.blocks(); }
  std::size_t unit_count() const { return config_.unit_count(); }
  std::size_t dim() const { return blocks().total(); }
  const ComplexMatrix& chi() const { return chi_; }
  /// Real signed permutation P with J v = P conj(v).
  const ComplexMatrix& j_permutation() const { return perm_; }

  void check_element(const AlgebraElement& a) const {
    if (a.size() != unit_count()) throw DimensionError("algebra element must have one block per unit");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto n = static_cast<Eigen::Index>(blocks().dim(i));
      if (a[i].rows() != n || a[i].cols() != n) throw DimensionError("algebra element block has the wrong shape");
    }
  }

  ComplexMatrix rho(const AlgebraElement& a) const {
    check_element(a);
    const auto m = static_cast<Eigen::Index>(dim());
    ComplexMatrix out = ComplexMatrix::Zero(m, m);
    for (std::size_t i = 0; i < a.size(); ++i) block_of(out, blocks(), i, i) = a[i];
    return out;
  }

  ComplexVector apply_J(const ComplexVector& v) const {
    if (v.size() != static_cast<Eigen::Index>(dim())) throw DimensionError("apply_J: vector dimension mismatch");
    return perm_ * v.conjugate();
  }

  /// J M J^-1 = P conj(M) P^T.
  ComplexMatrix conjugate_by_J(const ComplexMatrix& m) const {
    if (m.rows() != static_cast<Eigen::Index>(dim()) || m.cols() != m.rows()) {
      throw DimensionError("conjugate_by_J: matrix dimension mismatch");
    }
    return perm_ * m.conjugate() * perm_.transpose();
  }

  /// rho(b^opp) = J rho(b)* J^-1.
  ComplexMatrix rho_opp(const AlgebraElement& b) const { return conjugate_by_J(rho(b).adjoint()); }

  AlgebraElement unit_element() const {
    AlgebraElement a;
    for (std::size_t i = 0; i < unit_count(); ++i) {
      const auto n = static_cast<Eigen::Index>(blocks().dim(i));
      a.push_back(ComplexMatrix::Identity(n, n));
    }
    return a;
  }

  AlgebraElement zero_element() const {
    AlgebraElement a;
    for (std::size_t i = 0; i < unit_count(); ++i) {
      const auto n = static_cast<Eigen::Index>(blocks().dim(i));
      a.push_back(ComplexMatrix::Zero(n, n));
    }
    return a;
  }

  /// Matrix units E^{(i)}_{pq}, ordered by block then row then column.
  std::vector<AlgebraElement> algebra_basis() const {
    std::vector<AlgebraElement> out;
    for (std::size_t i = 0; i < unit_count(); ++i) {
      const auto n = static_cast<Eigen::Index>(blocks().dim(i));
      for (Eigen::Index p = 0; p < n; ++p)
        for (Eigen::Index q = 0; q < n; ++q) {
          AlgebraElement a = zero_element();
          a[i](p, q) = 1.0;
          out.push_back(std::move(a));
        }
    }
    return out;
  }

 private:
  GeometryConfig config_;
  ComplexMatrix chi_;
  ComplexMatrix perm_;
};

/// max over basis pairs of ||[rho(a), rho_opp(b)]||.
inline CheckResult check_order_zero(const Representation& rep, double tol = kDefaultTolerance) {
  const auto basis = rep.algebra_basis();
  std::vector<ComplexMatrix> left, right;
  for (const auto& a : basis) {
    left.push_back(rep.rho(a));
    right.push_back(rep.rho_opp(a));
  }
  double worst = 0.0;
  for (const auto& l : left)
    for (const auto& r : right) worst = std::max(worst, operator_norm(commutator(l, r)));
  return {"order_zero", worst <= tol, worst};
}

/// chi^2 = I and [rho(a), chi] = 0 on the algebra basis.
inline CheckResult check_grading(const Representation& rep, double tol = kDefaultTolerance) {
  const auto m = static_cast<Eigen::Index>(rep.dim());
  double worst = max_abs(rep.chi() * rep.chi() - ComplexMatrix::Identity(m, m));
  for (const auto& a : rep.algebra_basis()) worst = std::max(worst, max_abs(commutator(rep.rho(a), rep.chi())));
  return {"grading", worst <= tol, worst};
}

/// J^2 = j_squared * I, checked on the standard basis of H.
inline CheckResult check_j_squared(const Representation& rep, double tol = kDefaultTolerance) {
  const auto m = static_cast<Eigen::Index>(rep.dim());
  double worst = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    ComplexVector e = ComplexVector::Zero(m);
    e(k) = Complex(0.6, 0.8);
    const ComplexVector jj = rep.apply_J(rep.apply_J(e));
    worst = std::max(worst, (jj - static_cast<double>(rep.config().j_squared) * e).cwiseAbs().maxCoeff());
  }
  return {"j_squared", worst <= tol, worst};
}

}  // namespace fellgeom
