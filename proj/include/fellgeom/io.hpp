#pragma once

// JSON reading and writing for geometry spec files, fluctuation term files
// and solver output. Complex scalars are {"re": x, "im": y}; matrices are
// row-major arrays of arrays of complex scalars.

#include "fellgeom/dirac.hpp"
#include "fellgeom/fell_bundle.hpp"
#include "fellgeom/groupoid.hpp"
#include "fellgeom/representation.hpp"
#include "fellgeom/sheaf.hpp"

#include <json.hpp>

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fellgeom {

using Json = nlohmann::ordered_json;

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Scalars and matrices
// ---------------------------------------------------------------------------

inline Json complex_to_json(Complex z) { return Json{{"re", z.real()}, {"im", z.imag()}}; }

inline Complex complex_from_json(const Json& j, const std::string& where) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_object() || !j.contains("re") || !j.contains("im") || !j["re"].is_number() || !j["im"].is_number()) {
    throw InputError(where + ": expected a complex scalar {\"re\": number, \"im\": number}");
  }
  const Complex z{j["re"].get<double>(), j["im"].get<double>()};
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw InputError(where + ": non-finite entry");
  return z;
}

inline Json matrix_to_json(const ComplexMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ComplexMatrix matrix_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw InputError(where + ": expected a non-empty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) throw InputError(where + "[0]: expected a non-empty row");
  const std::size_t cols = j[0].size();
  ComplexMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string rw = where + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || j[r].size() != cols) throw InputError(rw + ": ragged matrix row");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          complex_from_json(j[r][c], rw + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Geometry spec file
// ---------------------------------------------------------------------------

struct ExplicitDirac {
  Pattern pattern;
  ComplexMatrix matrix;
};

struct GeometrySpec {
  GeometryConfig config;
  std::vector<std::string> constraints;
  std::optional<ExplicitDirac> dirac;
  Json groupoid_json;  // echoed on serialisation
};

namespace detail {

inline Json parse_json_text(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k < std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size()); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw InputError("syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                     e.what());
  }
}

inline const Json& require(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw InputError(where + ": missing field '" + key + "'");
  return obj[key];
}

inline int require_sign(const Json& v, const std::string& where) {
  if (!v.is_number_integer() || (v.get<int>() != 1 && v.get<int>() != -1)) throw InputError(where + ": must be +1 or -1");
  return v.get<int>();
}

inline std::size_t unit_ref(const FiniteGroupoid& g, const Json& v, const std::string& where) {
  if (!v.is_string()) throw InputError(where + ": expected a unit id string");
  const auto idx = g.find(v.get<std::string>());
  if (!idx) throw InputError(where + ": unknown unit '" + v.get<std::string>() + "'");
  return *idx;
}

}  // namespace detail

inline GeometrySpec parse_spec_json(const Json& root) {
  if (!root.is_object()) throw InputError("spec: top level must be an object");
  const std::string name = root.contains("name") && root["name"].is_string() ? root["name"].get<std::string>() : "";

  const Json& units = detail::require(root, "units", "spec");
  if (!units.is_array() || units.empty()) throw InputError("units: expected a non-empty array");
  std::vector<std::string> ids;
  std::vector<std::size_t> dims;
  std::vector<int> chir;
  std::vector<Sector> sectors;
  for (std::size_t k = 0; k < units.size(); ++k) {
    const Json& u = units[k];
    std::string where = "units[" + std::to_string(k) + "]";
    const Json& id = detail::require(u, "id", where);
    if (!id.is_string() || id.get<std::string>().empty()) throw InputError(where + ".id: expected a non-empty string");
    where += " (unit '" + id.get<std::string>() + "')";
    const Json& dim = detail::require(u, "dim", where);
    if (!dim.is_number_integer() || dim.get<long long>() <= 0) throw InputError(where + ".dim: must be a positive integer");
    const int c = detail::require_sign(detail::require(u, "chirality", where), where + ".chirality");
    const Json& s = detail::require(u, "sector", where);
    if (!s.is_string() || (s != "particle" && s != "antiparticle")) {
      throw InputError(where + ".sector: must be \"particle\" or \"antiparticle\"");
    }
    ids.push_back(id.get<std::string>());
    dims.push_back(static_cast<std::size_t>(dim.get<long long>()));
    chir.push_back(c);
    sectors.push_back(s == "particle" ? Sector::particle : Sector::antiparticle);
  }

  Json gj = root.contains("groupoid") ? root["groupoid"] : Json{{"type", "pair"}};
  std::optional<FiniteGroupoid> groupoid;
  try {
    const Json& type = detail::require(gj, "type", "groupoid");
    if (type == "pair") {
      groupoid = FiniteGroupoid::pair(ids);
    } else if (type == "partition") {
      const Json& cls = detail::require(gj, "classes", "groupoid");
      if (!cls.is_array()) throw InputError("groupoid.classes: expected an array of arrays of unit ids");
      std::vector<std::vector<std::string>> classes;
      for (std::size_t c = 0; c < cls.size(); ++c) {
        if (!cls[c].is_array()) throw InputError("groupoid.classes[" + std::to_string(c) + "]: expected an array");
        std::vector<std::string> members;
        for (const auto& v : cls[c]) {
          if (!v.is_string()) throw InputError("groupoid.classes[" + std::to_string(c) + "]: expected unit id strings");
          members.push_back(v.get<std::string>());
        }
        classes.push_back(std::move(members));
      }
      groupoid = FiniteGroupoid::partition(ids, classes);
    } else {
      throw InputError("groupoid.type: must be \"pair\" or \"partition\"");
    }
  } catch (const GroupoidError& e) {
    throw InputError(std::string("groupoid: ") + e.what());
  }

  std::vector<std::size_t> conj(ids.size());
  for (std::size_t i = 0; i < conj.size(); ++i) conj[i] = i;
  if (root.contains("conjugation")) {
    const Json& pairs = root["conjugation"];
    if (!pairs.is_array()) throw InputError("conjugation: expected an array of [id, id] pairs");
    std::vector<bool> paired(ids.size(), false);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const std::string where = "conjugation[" + std::to_string(k) + "]";
      if (!pairs[k].is_array() || pairs[k].size() != 2) throw InputError(where + ": expected a pair of unit ids");
      const std::size_t a = detail::unit_ref(*groupoid, pairs[k][0], where + "[0]");
      const std::size_t b = detail::unit_ref(*groupoid, pairs[k][1], where + "[1]");
      if (paired[a] || paired[b]) throw InputError(where + ": unit paired more than once");
      paired[a] = paired[b] = true;
      conj[a] = b;
      conj[b] = a;
    }
  }

  const int jsq = root.contains("j_squared") ? detail::require_sign(root["j_squared"], "j_squared") : 1;
  const int spin = root.contains("spin_sign") ? detail::require_sign(root["spin_sign"], "spin_sign") : 1;

  std::optional<std::vector<OppDims>> opp;
  if (root.contains("opp_dims")) {
    const Json& od = root["opp_dims"];
    if (!od.is_object()) throw InputError("opp_dims: expected an object mapping unit id to [n, n']");
    std::vector<OppDims> v(ids.size(), OppDims{0, 0});
    std::vector<bool> have(ids.size(), false);
    for (const auto& [key, val] : od.items()) {
      const std::size_t i = detail::unit_ref(*groupoid, Json(key), "opp_dims");
      if (!val.is_array() || val.size() != 2 || !val[0].is_number_integer() || !val[1].is_number_integer() ||
          val[0].get<long long>() <= 0 || val[1].get<long long>() <= 0) {
        throw InputError("opp_dims." + key + ": expected [n, n'] with positive integers");
      }
      v[i] = {static_cast<std::size_t>(val[0].get<long long>()), static_cast<std::size_t>(val[1].get<long long>())};
      have[i] = true;
    }
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (!have[i]) throw InputError("opp_dims: missing unit '" + ids[i] + "'");
    opp = std::move(v);
  }

  GeometrySpec spec{GeometryConfig{name, FellBundle(*groupoid, dims), chir, sectors, conj, jsq, spin, opp}, {}, std::nullopt, gj};
  try {
    spec.config.validate();
  } catch (const ConfigError& e) {
    throw InputError(std::string("invariant violation: ") + e.what());
  }

  if (root.contains("constraints")) {
    const Json& cs = root["constraints"];
    if (!cs.is_array()) throw InputError("constraints: expected an array of names");
    for (const auto& c : cs) {
      if (!c.is_string() || !parse_constraint(c.get<std::string>())) {
        throw InputError("constraints: unknown constraint " + c.dump());
      }
      spec.constraints.push_back(c.get<std::string>());
    }
  }

  if (root.contains("dirac")) {
    const Json& dj = root["dirac"];
    const FellBundle& b = spec.config.bundle;
    const Json& pj = detail::require(dj, "pattern", "dirac");
    const Json& ej = detail::require(dj, "entries", "dirac");
    if (!pj.is_object() || !ej.is_object()) throw InputError("dirac: pattern and entries must be objects keyed by unit id");
    Pattern p = Pattern::identity(ids.size(), Direction::cotangent);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!pj.contains(ids[i])) throw InputError("dirac.pattern: missing unit '" + ids[i] + "'");
      p.target[i] = detail::unit_ref(*groupoid, pj[ids[i]], "dirac.pattern." + ids[i]);
    }
    if (!pattern_respects(b.groupoid(), p)) throw InputError("dirac.pattern: pattern leaves the groupoid's arrows");
    MorphismField f = zero_field(b, p);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!ej.contains(ids[i])) continue;  // absent rows are zero
      ComplexMatrix blk = matrix_from_json(ej[ids[i]], "dirac.entries." + ids[i]);
      if (blk.rows() != f.fibers[i].rows() || blk.cols() != f.fibers[i].cols()) {
        throw InputError("dirac.entries." + ids[i] + ": block shape must be " + std::to_string(f.fibers[i].rows()) + "x" +
                         std::to_string(f.fibers[i].cols()));
      }
      f.fibers[i] = std::move(blk);
    }
    for (const auto& [key, val] : ej.items()) {
      (void)val;
      if (!groupoid->find(key)) throw InputError("dirac.entries: unknown unit '" + key + "'");
    }
    spec.dirac = ExplicitDirac{p, field_as_matrix(b, f)};
  }
  return spec;
}

inline GeometrySpec parse_spec(const std::string& text) { return parse_spec_json(detail::parse_json_text(text)); }

inline Json spec_to_json(const GeometrySpec& spec) {
  const GeometryConfig& c = spec.config;
  const FiniteGroupoid& g = c.bundle.groupoid();
  Json root;
  root["name"] = c.name;
  Json units = Json::array();
  for (std::size_t i = 0; i < c.unit_count(); ++i) {
    units.push_back(Json{{"id", g.unit_id(i)},
                         {"dim", c.bundle.dim(i)},
                         {"chirality", c.chirality[i]},
                         {"sector", to_string(c.sector[i])}});
  }
  root["units"] = std::move(units);
  Json pairs = Json::array();
  for (std::size_t i = 0; i < c.unit_count(); ++i)
    if (c.conjugation[i] > i) pairs.push_back(Json::array({g.unit_id(i), g.unit_id(c.conjugation[i])}));
  root["conjugation"] = std::move(pairs);
  if (g.is_pair_groupoid()) {
    root["groupoid"] = Json{{"type", "pair"}};
  } else {
    Json classes = Json::array();
    for (const auto& cls : g.classes()) {
      Json members = Json::array();
      for (std::size_t u : cls) members.push_back(g.unit_id(u));
      classes.push_back(std::move(members));
    }
    root["groupoid"] = Json{{"type", "partition"}, {"classes", std::move(classes)}};
  }
  root["j_squared"] = c.j_squared;
  root["spin_sign"] = c.spin_sign;
  root["constraints"] = spec.constraints;
  if (c.opp_dims) {
    Json od = Json::object();
    for (std::size_t i = 0; i < c.unit_count(); ++i) od[g.unit_id(i)] = Json::array({(*c.opp_dims)[i].left, (*c.opp_dims)[i].right});
    root["opp_dims"] = std::move(od);
  }
  if (spec.dirac) {
    Json pat = Json::object();
    Json entries = Json::object();
    const MorphismField f = matrix_as_field(c.bundle, spec.dirac->matrix, Direction::cotangent, spec.dirac->pattern);
    for (std::size_t i = 0; i < c.unit_count(); ++i) {
      pat[g.unit_id(i)] = g.unit_id(spec.dirac->pattern.target[i]);
      entries[g.unit_id(i)] = matrix_to_json(f.fibers[i]);
    }
    root["dirac"] = Json{{"pattern", std::move(pat)}, {"entries", std::move(entries)}};
  }
  return root;
}

// ---------------------------------------------------------------------------
// Fluctuation terms
// ---------------------------------------------------------------------------

inline std::vector<FluctuationTerm> parse_terms(const std::string& text, const GeometryConfig& cfg) {
  const Json root = detail::parse_json_text(text);
  const Json& list = root.is_object() && root.contains("terms") ? root["terms"] : root;
  if (!list.is_array()) throw InputError("terms: expected an array of {r, u} objects");
  const FiniteGroupoid& g = cfg.bundle.groupoid();
  std::vector<FluctuationTerm> out;
  for (std::size_t k = 0; k < list.size(); ++k) {
    const std::string where = "terms[" + std::to_string(k) + "]";
    const Json& r = detail::require(list[k], "r", where);
    if (!r.is_number()) throw InputError(where + ".r: expected a real number");
    const Json& u = detail::require(list[k], "u", where);
    if (!u.is_object()) throw InputError(where + ".u: expected an object mapping unit id to a matrix block");
    FluctuationTerm t{r.get<double>(), {}};
    for (std::size_t i = 0; i < cfg.unit_count(); ++i) {
      const std::string& id = g.unit_id(i);
      if (!u.contains(id)) throw InputError(where + ".u: missing unit '" + id + "'");
      ComplexMatrix blk = matrix_from_json(u[id], where + ".u." + id);
      const auto n = static_cast<Eigen::Index>(cfg.bundle.dim(i));
      if (blk.rows() != n || blk.cols() != n) throw InputError(where + ".u." + id + ": block must be square of the unit's dim");
      t.u.push_back(std::move(blk));
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline Json terms_to_json(const std::vector<FluctuationTerm>& terms, const GeometryConfig& cfg) {
  Json list = Json::array();
  for (const auto& t : terms) {
    Json u = Json::object();
    for (std::size_t i = 0; i < cfg.unit_count(); ++i) u[cfg.unit_id(i)] = matrix_to_json(t.u.at(i));
    list.push_back(Json{{"r", t.r}, {"u", std::move(u)}});
  }
  return list;
}

// ---------------------------------------------------------------------------
// Solver output
// ---------------------------------------------------------------------------

inline Json pattern_to_json(const Pattern& p, const FiniteGroupoid& g) {
  Json j = Json::object();
  for (std::size_t i = 0; i < p.size(); ++i) j[g.unit_id(i)] = g.unit_id(p.target[i]);
  return j;
}

inline Json residuals_to_json(const std::vector<ConstraintResidual>& rs) {
  Json arr = Json::array();
  for (const auto& r : rs) arr.push_back(Json{{"name", r.name}, {"imposed", r.imposed}, {"pass", r.pass}, {"residual", r.residual}});
  return arr;
}

inline Json solution_to_json(const DiracSolution& sol, const Representation& rep) {
  const FiniteGroupoid& g = rep.bundle().groupoid();
  Json basis = Json::array();
  for (const auto& x : sol.basis_matrices) {
    const MorphismField f = matrix_as_field(rep.bundle(), x, Direction::cotangent, sol.pattern);
    Json blocks = Json::object();
    for (std::size_t i = 0; i < f.fibers.size(); ++i) blocks[g.unit_id(i)] = matrix_to_json(f.fibers[i]);
    basis.push_back(std::move(blocks));
  }
  return Json{{"pattern", pattern_to_json(sol.pattern, g)},
              {"real_dimension", sol.real_dimension},
              {"zero_derivation", sol.zero_derivation},
              {"basis", std::move(basis)},
              {"residuals", residuals_to_json(sol.residuals)}};
}

inline Json dirac_space_to_json(const DiracSpace& space, const Representation& rep, const ConstraintSet& cs) {
  Json sols = Json::array();
  for (const auto& s : space.solutions) sols.push_back(solution_to_json(s, rep));
  return Json{{"constraints", cs.names()},
              {"patterns_examined", space.patterns_examined},
              {"solution_count", space.solutions.size()},
              {"total_real_dimension", space.total_real_dimension},
              {"solutions", std::move(sols)}};
}

}  // namespace fellgeom
