#pragma once

// Finite principal groupoids (equivalence relations on a finite unit set).
// Arrows are not stored; an arrow (r, s) exists iff r and s share a class.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace fellgeom {

class GroupoidError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An arrow of a principal groupoid is determined by its (range, source) unit indices.
struct Arrow {
  std::size_t range;
  std::size_t source;

  bool is_unit() const { return range == source; }
  auto operator<=>(const Arrow&) const = default;
};

inline Arrow inverse(const Arrow& g) { return {g.source, g.range}; }

/// g1 o g2, defined when source(g1) == range(g2).
inline Arrow compose(const Arrow& g1, const Arrow& g2) {
  if (g1.source != g2.range) throw GroupoidError("compose: arrows are not composable");
  return {g1.range, g2.source};
}

class FiniteGroupoid {
 public:
  static FiniteGroupoid pair(std::vector<std::string> units) {
    std::vector<std::vector<std::string>> one{units};
    return partition(std::move(units), std::move(one));
  }

  static FiniteGroupoid partition(std::vector<std::string> units, const std::vector<std::vector<std::string>>& classes) {
    FiniteGroupoid g;
    if (units.empty()) throw GroupoidError("groupoid needs at least one unit");
    std::unordered_set<std::string> seen;
    for (const auto& u : units) {
      if (!seen.insert(u).second) throw GroupoidError("duplicate unit id '" + u + "'");
    }
    g.units_ = std::move(units);
    g.class_of_.assign(g.units_.size(), kUnassigned);
    for (std::size_t c = 0; c < classes.size(); ++c) {
      if (classes[c].empty()) throw GroupoidError("empty equivalence class");
      std::vector<std::size_t> members;
      for (const auto& id : classes[c]) {
        const auto idx = g.find(id);
        if (!idx) throw GroupoidError("class member '" + id + "' is not a declared unit");
        if (g.class_of_[*idx] != kUnassigned) throw GroupoidError("unit '" + id + "' appears in more than one class");
        g.class_of_[*idx] = c;
        members.push_back(*idx);
      }
      std::sort(members.begin(), members.end());
      g.classes_.push_back(std::move(members));
    }
    for (std::size_t i = 0; i < g.units_.size(); ++i) {
      if (g.class_of_[i] == kUnassigned) throw GroupoidError("unit '" + g.units_[i] + "' is not covered by any class");
    }
    return g;
  }

  std::size_t unit_count() const { return units_.size(); }
  const std::vector<std::string>& units() const { return units_; }
  const std::string& unit_id(std::size_t i) const { return units_.at(i); }

  std::optional<std::size_t> find(const std::string& id) const {
    const auto it = std::find(units_.begin(), units_.end(), id);
    if (it == units_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - units_.begin());
  }

  std::size_t index_of(const std::string& id) const {
    if (auto i = find(id)) return *i;
    throw GroupoidError("unknown unit id '" + id + "'");
  }

  std::size_t class_of(std::size_t unit) const { return class_of_.at(unit); }
  const std::vector<std::vector<std::size_t>>& classes() const { return classes_; }
  const std::vector<std::size_t>& class_members(std::size_t unit) const { return classes_.at(class_of(unit)); }

  bool contains(const Arrow& g) const {
    return g.range < units_.size() && g.source < units_.size() && class_of_[g.range] == class_of_[g.source];
  }

  bool is_pair_groupoid() const { return classes_.size() == 1; }

  std::size_t arrow_count() const {
    std::size_t n = 0;
    for (const auto& c : classes_) n += c.size() * c.size();
    return n;
  }

  /// All arrows, ordered by (range, source).
  std::vector<Arrow> arrows() const {
    std::vector<Arrow> out;
    out.reserve(arrow_count());
    for (std::size_t r = 0; r < units_.size(); ++r)
      for (std::size_t s : class_members(r)) out.push_back({r, s});
    return out;
  }

  Arrow unit_arrow(std::size_t i) const { return {i, i}; }

  Arrow arrow(const std::string& range, const std::string& source) const {
    Arrow g{index_of(range), index_of(source)};
    if (!contains(g)) throw GroupoidError("no arrow (" + range + ", " + source + ")");
    return g;
  }

 private:
  static constexpr std::size_t kUnassigned = static_cast<std::size_t>(-1);

  std::vector<std::string> units_;
  std::vector<std::size_t> class_of_;
  std::vector<std::vector<std::size_t>> classes_;
};

}  // namespace fellgeom
