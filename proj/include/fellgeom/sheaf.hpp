#pragma once

// Tangent/cotangent fields and the sheaf of per-object choices on the
// discrete object space B.
//
// A cotangent field picks, for every unit i, one morphism ranged at i, i.e. a
// fiber element over the arrow (i, p(i)); a tangent field picks one sourced at
// i, over (p(i), i). As block matrices: one block per block-row (cotangent) or
// per block-column (tangent).

#include "fellgeom/fell_bundle.hpp"
#include "fellgeom/matrix_core.hpp"
#include "fellgeom/representation.hpp"

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fellgeom {

class FieldError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Direction { tangent, cotangent };

inline const char* to_string(Direction d) { return d == Direction::tangent ? "tangent" : "cotangent"; }

inline bool operator==(const FiberElement& a, const FiberElement& b) {
  return a.arrow == b.arrow && a.value.rows() == b.value.rows() && a.value.cols() == b.value.cols() && a.value == b.value;
}

struct Pattern {
  Direction direction = Direction::cotangent;
  std::vector<std::size_t> target;  // p(i)

  std::size_t size() const { return target.size(); }

  /// Arrow carrying the choice at unit i.
  Arrow arrow_at(std::size_t i) const {
    return direction == Direction::cotangent ? Arrow{i, target[i]} : Arrow{target[i], i};
  }

  bool operator==(const Pattern&) const = default;
  auto operator<=>(const Pattern& o) const {
    if (auto c = direction <=> o.direction; c != 0) return c;
    return target <=> o.target;
  }

  static Pattern identity(std::size_t k, Direction d = Direction::cotangent) {
    Pattern p{d, {}};
    for (std::size_t i = 0; i < k; ++i) p.target.push_back(i);
    return p;
  }
};

inline bool pattern_respects(const FiniteGroupoid& g, const Pattern& p) {
  if (p.size() != g.unit_count()) return false;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (!g.contains({i, p.target[i]})) return false;
  return true;
}

/// Necessary conditions for a pattern to carry a fully nonzero admissible field.
struct PatternFilter {
  bool involution = false;               // p(p(i)) = i
  bool chirality_flip = false;           // chirality(i) != chirality(p(i))
  bool conjugation_equivariant = false;  // p(c(i)) = c(p(i))
  bool sector_preserving = false;        // sector(i) == sector(p(i))

  bool any() const { return involution || chirality_flip || conjugation_equivariant || sector_preserving; }
};

inline bool pattern_passes(const GeometryConfig& cfg, const Pattern& p, const PatternFilter& f) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::size_t t = p.target[i];
    if (f.involution && p.target[t] != i) return false;
    if (f.chirality_flip && cfg.chirality[i] == cfg.chirality[t]) return false;
    if (f.sector_preserving && cfg.sector[i] != cfg.sector[t]) return false;
    if (f.conjugation_equivariant && p.target[cfg.conjugation[i]] != cfg.conjugation[t]) return false;
  }
  return true;
}

namespace detail {

inline void enumerate_patterns_rec(const FiniteGroupoid& g, const GeometryConfig* cfg, const PatternFilter& f,
                                   Pattern& current, std::size_t i, const std::function<void(const Pattern&)>& emit) {
  const std::size_t k = g.unit_count();
  if (i == k) {
    emit(current);
    return;
  }
  for (std::size_t t : g.class_members(i)) {
    if (cfg) {
      if (f.chirality_flip && cfg->chirality[i] == cfg->chirality[t]) continue;
      if (f.sector_preserving && cfg->sector[i] != cfg->sector[t]) continue;
      if (f.involution) {
        if (t < i && current.target[t] != i) continue;
        bool owed = false;
        for (std::size_t j = 0; j < i; ++j)
          if (current.target[j] == i && j != t) owed = true;
        if (owed) continue;
      }
      if (f.conjugation_equivariant) {
        const std::size_t c = cfg->conjugation[i];
        if (c < i && t != cfg->conjugation[current.target[c]]) continue;
        if (c == i && cfg->conjugation[t] != t) continue;
      }
    }
    current.target[i] = t;
    enumerate_patterns_rec(g, cfg, f, current, i + 1, emit);
  }
}

}  // namespace detail

/// Every pattern of the groupoid, lexicographic in (p(0), p(1), ...).
inline void for_each_pattern(const FiniteGroupoid& g, Direction d, const std::function<void(const Pattern&)>& emit) {
  Pattern current{d, std::vector<std::size_t>(g.unit_count(), 0)};
  detail::enumerate_patterns_rec(g, nullptr, PatternFilter{}, current, 0, emit);
}

inline void for_each_pattern(const GeometryConfig& cfg, Direction d, const PatternFilter& f,
                             const std::function<void(const Pattern&)>& emit) {
  const FiniteGroupoid& g = cfg.bundle.groupoid();
  Pattern current{d, std::vector<std::size_t>(g.unit_count(), 0)};
  detail::enumerate_patterns_rec(g, &cfg, f, current, 0, emit);
}

inline std::vector<Pattern> enumerate_patterns(const FiniteGroupoid& g, Direction d) {
  std::vector<Pattern> out;
  for_each_pattern(g, d, [&](const Pattern& p) { out.push_back(p); });
  return out;
}

inline std::vector<Pattern> enumerate_patterns(const GeometryConfig& cfg, Direction d, const PatternFilter& f) {
  std::vector<Pattern> out;
  for_each_pattern(cfg, d, f, [&](const Pattern& p) { out.push_back(p); });
  return out;
}

/// Number of patterns before pruning: product over units of their class size.
inline double pattern_count(const FiniteGroupoid& g) {
  double n = 1.0;
  for (std::size_t i = 0; i < g.unit_count(); ++i) n *= static_cast<double>(g.class_members(i).size());
  return n;
}

// ---------------------------------------------------------------------------
// Morphism fields
// ---------------------------------------------------------------------------

struct MorphismField {
  Pattern pattern;
  std::vector<ComplexMatrix> fibers;  // fibers[i] lives over pattern.arrow_at(i)

  FiberElement component(std::size_t i) const { return {pattern.arrow_at(i), fibers.at(i)}; }

  bool operator==(const MorphismField& o) const {
    if (pattern != o.pattern || fibers.size() != o.fibers.size()) return false;
    for (std::size_t i = 0; i < fibers.size(); ++i)
      if (!(component(i) == o.component(i))) return false;
    return true;
  }
};

inline MorphismField zero_field(const FellBundle& b, const Pattern& p) {
  if (!pattern_respects(b.groupoid(), p)) throw FieldError("pattern does not respect the groupoid");
  MorphismField f{p, {}};
  for (std::size_t i = 0; i < p.size(); ++i) f.fibers.push_back(b.zero(p.arrow_at(i)).value);
  return f;
}

inline void check_field(const FellBundle& b, const MorphismField& f) {
  if (!pattern_respects(b.groupoid(), f.pattern)) throw FieldError("pattern does not respect the groupoid");
  if (f.fibers.size() != f.pattern.size()) throw FieldError("field needs one fiber per unit");
  for (std::size_t i = 0; i < f.fibers.size(); ++i) b.check_element(f.component(i));
}

inline ComplexMatrix field_as_matrix(const FellBundle& b, const MorphismField& f) {
  check_field(b, f);
  const auto m = static_cast<Eigen::Index>(b.total_dim());
  ComplexMatrix out = ComplexMatrix::Zero(m, m);
  for (std::size_t i = 0; i < f.fibers.size(); ++i) {
    const Arrow g = f.pattern.arrow_at(i);
    block_of(out, b.blocks(), g.range, g.source) = f.fibers[i];
  }
  return out;
}

/// Reads a field off a block matrix. Rows (columns for tangent) that are
/// entirely zero take their target from `hint`, or the unit itself.
inline MorphismField matrix_as_field(const FellBundle& b, const ComplexMatrix& m, Direction d,
                                     const std::optional<Pattern>& hint = std::nullopt) {
  const std::size_t k = b.groupoid().unit_count();
  if (static_cast<std::size_t>(m.rows()) != b.total_dim() || m.rows() != m.cols()) {
    throw DimensionError("matrix_as_field: matrix does not match the bundle dimension");
  }
  Pattern p{d, std::vector<std::size_t>(k, 0)};
  for (std::size_t i = 0; i < k; ++i) {
    std::optional<std::size_t> found;
    for (std::size_t j = 0; j < k; ++j) {
      const double v = d == Direction::cotangent ? max_abs(block_of(m, b.blocks(), i, j))
                                                 : max_abs(block_of(m, b.blocks(), j, i));
      if (v == 0.0) continue;
      if (found) throw FieldError("matrix has more than one nonzero block at unit '" + b.groupoid().unit_id(i) + "'");
      found = j;
    }
    p.target[i] = found ? *found : (hint ? hint->target.at(i) : i);
  }
  if (!pattern_respects(b.groupoid(), p)) throw FieldError("matrix support leaves the groupoid's arrows");
  MorphismField f{p, {}};
  for (std::size_t i = 0; i < k; ++i) {
    const Arrow g = p.arrow_at(i);
    f.fibers.push_back(block_of(m, b.blocks(), g.range, g.source));
  }
  return f;
}

/// Structural test: at most one nonzero block per block-row (cotangent) or block-column (tangent).
inline bool is_field_matrix(const FellBundle& b, const ComplexMatrix& m, Direction d) {
  try {
    (void)matrix_as_field(b, m, d);
    return true;
  } catch (const FieldError&) {
    return false;
  }
}

/// Product of two fields of the same direction; the result is again a field.
inline MorphismField field_multiply(const FellBundle& b, const MorphismField& f, const MorphismField& g) {
  check_field(b, f);
  check_field(b, g);
  if (f.pattern.direction != g.pattern.direction) throw FieldError("field_multiply: directions differ");
  const std::size_t k = f.pattern.size();
  MorphismField out{{f.pattern.direction, std::vector<std::size_t>(k, 0)}, {}};
  out.fibers.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (f.pattern.direction == Direction::cotangent) {
      // row i of fg: f_{i,p_f(i)} g_{p_f(i), p_g(p_f(i))}
      const std::size_t mid = f.pattern.target[i];
      out.pattern.target[i] = g.pattern.target[mid];
      out.fibers[i] = f.fibers[i] * g.fibers[mid];
    } else {
      // column i of fg: f_{p_f(p_g(i)), p_g(i)} g_{p_g(i), i}
      const std::size_t mid = g.pattern.target[i];
      out.pattern.target[i] = f.pattern.target[mid];
      out.fibers[i] = f.fibers[mid] * g.fibers[i];
    }
  }
  return out;
}

/// Transpose-adjoint: a cotangent field becomes the tangent field with every arrow reversed.
inline MorphismField dual_field(const MorphismField& f) {
  MorphismField out{{f.pattern.direction == Direction::cotangent ? Direction::tangent : Direction::cotangent,
                     f.pattern.target},
                    {}};
  for (const auto& v : f.fibers) out.fibers.push_back(v.adjoint());
  return out;
}

struct StalkEntry {
  Arrow arrow;
  std::size_t rows;
  std::size_t cols;
};

/// Admissible (arrow, fiber shape) choices at unit i.
inline std::vector<StalkEntry> stalk(const FellBundle& b, std::size_t i, Direction d) {
  std::vector<StalkEntry> out;
  for (std::size_t j : b.groupoid().class_members(i)) {
    const Arrow g = d == Direction::cotangent ? Arrow{i, j} : Arrow{j, i};
    const auto [r, c] = b.fiber_shape(g);
    out.push_back({g, r, c});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Object space and sheaf sections
// ---------------------------------------------------------------------------

/// A member U = A_{i,j,...} of the discrete object space, as a set of unit indices.
class Member {
 public:
  constexpr Member() = default;
  constexpr explicit Member(std::uint64_t bits) : bits_(bits) {}

  static Member of(std::initializer_list<std::size_t> units) {
    Member m;
    for (auto u : units) m.bits_ |= std::uint64_t{1} << u;
    return m;
  }
  static Member all(std::size_t k) { return Member(k >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << k) - 1); }

  constexpr std::uint64_t bits() const { return bits_; }
  bool contains(std::size_t u) const { return (bits_ >> u) & 1U; }
  bool empty() const { return bits_ == 0; }
  std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }
  bool subset_of(Member o) const { return (bits_ & ~o.bits_) == 0; }

  Member operator|(Member o) const { return Member(bits_ | o.bits_); }
  Member operator&(Member o) const { return Member(bits_ & o.bits_); }

  std::vector<std::size_t> units() const {
    std::vector<std::size_t> out;
    for (std::size_t u = 0; u < 64; ++u)
      if (contains(u)) out.push_back(u);
    return out;
  }

  auto operator<=>(const Member&) const = default;

 private:
  std::uint64_t bits_ = 0;
};

/// All members of the object space on k units, in increasing bit order.
inline std::vector<Member> members(std::size_t k) {
  if (k > 20) throw std::length_error("members: object space too large to enumerate");
  std::vector<Member> out;
  for (std::uint64_t b = 0; b < (std::uint64_t{1} << k); ++b) out.emplace_back(b);
  return out;
}

/// Per-object choices over a member U.
template <typename Value>
struct LocalSection {
  Member domain;
  std::map<std::size_t, Value> choice;

  bool operator==(const LocalSection& o) const { return domain == o.domain && choice == o.choice; }
};

template <typename Value>
LocalSection<Value> restrict_section(const LocalSection<Value>& s, Member v) {
  if (!v.subset_of(s.domain)) throw std::invalid_argument("restrict: V is not contained in U");
  LocalSection<Value> out{v, {}};
  for (const auto& [u, val] : s.choice)
    if (v.contains(u)) out.choice.emplace(u, val);
  return out;
}

/// Glues a family of sections; nullopt when two of them disagree on an overlap.
template <typename Value>
std::optional<LocalSection<Value>> glue(const std::vector<LocalSection<Value>>& family) {
  LocalSection<Value> out{};
  for (const auto& s : family) {
    for (const auto& [u, val] : s.choice) {
      auto [it, inserted] = out.choice.emplace(u, val);
      if (!inserted && !(it->second == val)) return std::nullopt;
    }
    out.domain = out.domain | s.domain;
  }
  return out;
}

/// The sheaf component at each object of a field, over U.
inline LocalSection<FiberElement> field_section(const MorphismField& f, Member u) {
  LocalSection<FiberElement> s{u, {}};
  for (std::size_t i : u.units()) {
    if (i >= f.fibers.size()) throw std::out_of_range("field_section: member outside the field's units");
    s.choice.emplace(i, f.component(i));
  }
  return s;
}

struct SheafReport {
  bool normalization = false;
  bool functoriality = false;
  bool restriction_surjective = false;
  bool gluing = false;
  std::size_t members_checked = 0;
  std::size_t covers_checked = 0;
  std::size_t families_glued = 0;

  /// Sheaf axioms proper; surjective restriction (flasqueness) is reported but not required.
  bool pass() const { return normalization && functoriality && gluing; }
};

/// A sheaf on the discrete object space whose stalk at object i is the finite set stalks[i].
template <typename Value>
class FiniteSheaf {
 public:
  explicit FiniteSheaf(std::vector<std::vector<Value>> stalks) : stalks_(std::move(stalks)) {}

  std::size_t object_count() const { return stalks_.size(); }

  std::vector<LocalSection<Value>> sections_over(Member u) const {
    if (!u.subset_of(Member::all(object_count()))) throw std::invalid_argument("sections_over: member outside B");
    std::vector<LocalSection<Value>> out{LocalSection<Value>{u, {}}};
    for (std::size_t i : u.units()) {
      std::vector<LocalSection<Value>> next;
      for (const auto& partial : out)
        for (const auto& v : stalks_[i]) {
          auto s = partial;
          s.choice.emplace(i, v);
          next.push_back(std::move(s));
        }
      out = std::move(next);
    }
    return out;
  }

  /// Exhaustive check of normalization, presheaf functoriality, surjective
  /// restriction, and unique gluing over every two-member cover and the cover
  /// by singletons of every member.
  SheafReport check_axioms() const {
    SheafReport rep;
    const std::size_t k = object_count();
    rep.normalization = sections_over(Member{}).size() == 1;
    rep.functoriality = true;
    rep.restriction_surjective = true;
    rep.gluing = true;
    const auto all = members(k);
    for (Member u : all) {
      ++rep.members_checked;
      const auto over_u = sections_over(u);
      std::vector<Member> subs;
      for (Member v : all)
        if (v.subset_of(u)) subs.push_back(v);
      for (Member v : subs) {
        const auto over_v = sections_over(v);
        for (const auto& t : over_v) {
          bool hit = false;
          for (const auto& s : over_u) hit = hit || restrict_section(s, v) == t;
          rep.restriction_surjective = rep.restriction_surjective && hit;
        }
        for (Member w : subs) {
          if (!w.subset_of(v)) continue;
          for (const auto& s : over_u)
            if (!(restrict_section(restrict_section(s, v), w) == restrict_section(s, w))) rep.functoriality = false;
        }
      }
      for (Member v1 : subs)
        for (Member v2 : subs) {
          if ((v1 | v2) != u || v2 < v1) continue;
          ++rep.covers_checked;
          check_cover(u, over_u, {v1, v2}, rep);
        }
      std::vector<Member> singletons;
      for (std::size_t i : u.units()) singletons.push_back(Member::of({i}));
      ++rep.covers_checked;
      check_cover(u, over_u, singletons, rep);
    }
    return rep;
  }

 private:
  void check_cover(Member u, const std::vector<LocalSection<Value>>& over_u, const std::vector<Member>& cover,
                   SheafReport& rep) const {
    // Every family of local sections on the cover; compatible ones must glue uniquely.
    std::vector<std::vector<LocalSection<Value>>> choices;
    for (Member v : cover) {
      choices.push_back(sections_over(v));
      if (choices.back().empty()) return;  // no families to glue
    }
    std::vector<std::size_t> idx(cover.size(), 0);
    while (true) {
      std::vector<LocalSection<Value>> family;
      for (std::size_t c = 0; c < cover.size(); ++c) family.push_back(choices[c][idx[c]]);
      bool compatible = true;
      for (std::size_t a = 0; a < cover.size() && compatible; ++a)
        for (std::size_t b = a + 1; b < cover.size() && compatible; ++b) {
          const Member overlap = cover[a] & cover[b];
          compatible = restrict_section(family[a], overlap) == restrict_section(family[b], overlap);
        }
      const auto glued = glue(family);
      if (compatible != glued.has_value()) rep.gluing = false;
      if (compatible) {
        ++rep.families_glued;
        std::size_t matches = 0;
        for (const auto& s : over_u) {
          bool ok = true;
          for (std::size_t c = 0; c < cover.size() && ok; ++c) ok = restrict_section(s, cover[c]) == family[c];
          if (ok) ++matches;
        }
        if (matches != 1 || glued->domain != u || !(std::find(over_u.begin(), over_u.end(), *glued) != over_u.end())) {
          rep.gluing = false;
        }
      }
      std::size_t c = 0;
      while (c < idx.size() && ++idx[c] == choices[c].size()) idx[c++] = 0;
      if (c == idx.size()) break;
    }
  }

  std::vector<std::vector<Value>> stalks_;
};

}  // namespace fellgeom
