#pragma once

// Finite-dimensional Fell bundles over a finite principal groupoid.
//
// The fiber over unit i is M_{n_i}; the fiber over the arrow (i, j) is the
// space of n_i x n_j complex matrices. The opposite bundle stores over g the
// elements of E_{g^-1} and multiplies in reverse order.

#include "fellgeom/groupoid.hpp"
#include "fellgeom/matrix_core.hpp"

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fellgeom {

class BundleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct FiberElement {
  Arrow arrow;
  ComplexMatrix value;
};

class FellBundle {
 public:
  FellBundle(FiniteGroupoid groupoid, std::vector<std::size_t> dims, bool opposite = false)
      : groupoid_(std::move(groupoid)), opposite_(opposite) {
    if (dims.size() != groupoid_.unit_count()) {
      throw BundleError("fiber dimensions must be given for every unit");
    }
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (dims[i] == 0) throw BundleError("unit '" + groupoid_.unit_id(i) + "' has nonpositive dimension");
    }
    blocks_ = BlockStructure(std::move(dims));
  }

  const FiniteGroupoid& groupoid() const { return groupoid_; }
  const BlockStructure& blocks() const { return blocks_; }
  std::size_t dim(std::size_t unit) const { return blocks_.dim(unit); }
  std::size_t total_dim() const { return blocks_.total(); }
  bool is_opposite() const { return opposite_; }

  /// Shape of the fiber over g: n_r x n_s, or n_s x n_r in the opposite bundle.
  std::pair<std::size_t, std::size_t> fiber_shape(const Arrow& g) const {
    if (!groupoid_.contains(g)) throw GroupoidError("arrow is not in the groupoid");
    return opposite_ ? std::pair{dim(g.source), dim(g.range)} : std::pair{dim(g.range), dim(g.source)};
  }

  /// Dimension of the section algebra: sum over arrows of n_r * n_s.
  std::size_t section_algebra_dim() const {
    std::size_t n = 0;
    for (const Arrow& g : groupoid_.arrows()) n += dim(g.range) * dim(g.source);
    return n;
  }

  void check_element(const FiberElement& e) const {
    const auto [r, c] = fiber_shape(e.arrow);
    if (static_cast<std::size_t>(e.value.rows()) != r || static_cast<std::size_t>(e.value.cols()) != c) {
      throw DimensionError("fiber element shape does not match its arrow");
    }
  }

  FiberElement zero(const Arrow& g) const {
    const auto [r, c] = fiber_shape(g);
    return {g, ComplexMatrix::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))};
  }

  FiberElement unit(std::size_t i) const {
    const auto n = static_cast<Eigen::Index>(dim(i));
    return {groupoid_.unit_arrow(i), ComplexMatrix::Identity(n, n)};
  }

  /// Matrix units spanning the fiber over g.
  std::vector<FiberElement> fiber_basis(const Arrow& g) const {
    const auto [r, c] = fiber_shape(g);
    std::vector<FiberElement> out;
    for (std::size_t p = 0; p < r; ++p)
      for (std::size_t q = 0; q < c; ++q) {
        FiberElement e = zero(g);
        e.value(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)) = 1.0;
        out.push_back(std::move(e));
      }
    return out;
  }

  FiberElement multiply(const FiberElement& e1, const FiberElement& e2) const {
    check_element(e1);
    check_element(e2);
    const Arrow g = compose(e1.arrow, e2.arrow);
    return {g, opposite_ ? ComplexMatrix(e2.value * e1.value) : ComplexMatrix(e1.value * e2.value)};
  }

  FiberElement involution(const FiberElement& e) const {
    check_element(e);
    return {inverse(e.arrow), e.value.adjoint()};
  }

  FellBundle opposite() const { return FellBundle(groupoid_, blocks_.dims(), !opposite_); }

 private:
  FiniteGroupoid groupoid_;
  BlockStructure blocks_;
  bool opposite_ = false;
};

inline FellBundle build_bundle(FiniteGroupoid groupoid, std::vector<std::size_t> dims) {
  return FellBundle(std::move(groupoid), std::move(dims));
}

inline FiberElement fiber_multiply(const FellBundle& b, const FiberElement& e1, const FiberElement& e2) {
  return b.multiply(e1, e2);
}

inline FiberElement fiber_involution(const FellBundle& b, const FiberElement& e) { return b.involution(e); }

inline FellBundle opposite_bundle(const FellBundle& b) { return b.opposite(); }

/// Products of basis elements of E_{g1} and E_{g2} span E_{g1 g2}, for all composable pairs.
inline bool check_saturated(const FellBundle& b, double tol = kDefaultTolerance) {
  const auto arrows = b.groupoid().arrows();
  for (const Arrow& g1 : arrows) {
    for (const Arrow& g2 : arrows) {
      if (g1.source != g2.range) continue;
      const Arrow g = compose(g1, g2);
      const auto [r, c] = b.fiber_shape(g);
      const auto basis1 = b.fiber_basis(g1);
      const auto basis2 = b.fiber_basis(g2);
      ComplexMatrix span(static_cast<Eigen::Index>(r * c), static_cast<Eigen::Index>(basis1.size() * basis2.size()));
      Eigen::Index col = 0;
      for (const auto& e1 : basis1)
        for (const auto& e2 : basis2) {
          const ComplexMatrix p = b.multiply(e1, e2).value;
          span.col(col++) = p.reshaped();
        }
      if (numerical_rank(span, tol) != r * c) return false;
    }
  }
  return true;
}

/// A section assigns one fiber element to every arrow; missing arrows are zero.
class Section {
 public:
  explicit Section(const FellBundle& bundle) : bundle_(&bundle) {}

  const FellBundle& bundle() const { return *bundle_; }

  void set(const FiberElement& e) {
    bundle_->check_element(e);
    values_.insert_or_assign(e.arrow, e.value);
  }

  FiberElement at(const Arrow& g) const {
    const auto it = values_.find(g);
    return it == values_.end() ? bundle_->zero(g) : FiberElement{g, it->second};
  }

  /// Convolution product: (s t)(g) = sum over g1 g2 = g of s(g1) t(g2).
  Section operator*(const Section& other) const {
    Section out(*bundle_);
    const auto arrows = bundle_->groupoid().arrows();
    for (const Arrow& g : arrows) {
      FiberElement acc = bundle_->zero(g);
      for (std::size_t mid : bundle_->groupoid().class_members(g.range)) {
        const Arrow g1{g.range, mid};
        const Arrow g2{mid, g.source};
        acc.value += bundle_->multiply(at(g1), other.at(g2)).value;
      }
      out.set(acc);
    }
    return out;
  }

  Section adjoint() const {
    Section out(*bundle_);
    for (const auto& [g, v] : values_) out.set(bundle_->involution({g, v}));
    return out;
  }

 private:
  const FellBundle* bundle_;
  std::map<Arrow, ComplexMatrix> values_;
};

/// The m x m block matrix of a section of a (non-opposite) bundle.
inline ComplexMatrix section_as_matrix(const Section& s) {
  const FellBundle& b = s.bundle();
  if (b.is_opposite()) throw BundleError("section_as_matrix: opposite bundle sections are not block matrices on H");
  const auto m = static_cast<Eigen::Index>(b.total_dim());
  ComplexMatrix out = ComplexMatrix::Zero(m, m);
  for (const Arrow& g : b.groupoid().arrows()) block_of(out, b.blocks(), g.range, g.source) = s.at(g).value;
  return out;
}

inline Section matrix_as_section(const FellBundle& b, const ComplexMatrix& m) {
  if (static_cast<std::size_t>(m.rows()) != b.total_dim() || m.rows() != m.cols()) {
    throw DimensionError("matrix_as_section: matrix does not match the bundle dimension");
  }
  for (std::size_t i = 0; i < b.groupoid().unit_count(); ++i)
    for (std::size_t j = 0; j < b.groupoid().unit_count(); ++j)
      if (!b.groupoid().contains({i, j}) && max_abs(block_of(m, b.blocks(), i, j)) > 0.0) {
        throw BundleError("matrix_as_section: nonzero block outside the groupoid's arrows");
      }
  Section s(b);
  for (const Arrow& g : b.groupoid().arrows()) s.set({g, block_of(m, b.blocks(), g.range, g.source)});
  return s;
}

}  // namespace fellgeom
