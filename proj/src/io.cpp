#include "mixot/io.hpp"

#include "mixot/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace mixot {
namespace {

using json = nlohmann::ordered_json;

constexpr double kWeightSumTolerance = 1e-9;

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

const json& field(const json& obj, const std::string& path, const std::string& key) {
  if (!obj.is_object()) throw SchemaError(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(join(path, key), "missing required field");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(path, "expected a finite number");
  return v;
}

std::size_t positive_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() <= 0) {
    throw SchemaError(path, "expected a positive integer");
  }
  return static_cast<std::size_t>(j.get<long long>());
}

Vector vector_field(const json& j, const std::string& path, std::size_t dim) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of " + std::to_string(dim) + " numbers");
  if (j.size() != dim) {
    throw SchemaError(path, "expected " + std::to_string(dim) + " entries, got " +
                                std::to_string(j.size()));
  }
  Vector v(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], index(path, i));
  return v;
}

SpdMatrix matrix_field(const json& j, const std::string& path, std::size_t dim) {
  if (!j.is_array() || j.size() != dim) {
    throw SchemaError(path, "expected a " + std::to_string(dim) + " x " + std::to_string(dim) +
                                " array of rows");
  }
  Matrix m(dim, dim);
  for (std::size_t r = 0; r < dim; ++r) {
    m.row(static_cast<Eigen::Index>(r)) = vector_field(j[r], index(path, r), dim).transpose();
  }
  try {
    return SpdMatrix(m);
  } catch (const InvalidInput& e) {
    throw SchemaError(path, e.what());
  }
}

GeneratorKind parse_kind(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected a string");
  const std::string s = j.get<std::string>();
  for (GeneratorKind k : {GeneratorKind::Gaussian, GeneratorKind::SlaterElliptical,
                          GeneratorKind::WignerElliptical, GeneratorKind::Gamma1D}) {
    if (s == to_string(k)) return k;
  }
  throw SchemaError(path, "unknown family '" + s + "' (expected gaussian, slater, wigner or gamma)");
}

GeneratorProfile parse_family(const json& j, std::size_t dim_scale) {
  const GeneratorKind kind = parse_kind(field(j, "family", "kind"), "family.kind");
  const std::size_t dim = positive_integer(field(j, "family", "dim"), "family.dim") * dim_scale;
  std::vector<double> params;
  if (const auto it = j.find("params"); it != j.end()) {
    if (!it->is_array()) throw SchemaError("family.params", "expected an array of numbers");
    for (std::size_t i = 0; i < it->size(); ++i) {
      params.push_back(number((*it)[i], index("family.params", i)));
    }
  }
  if (params.empty()) {
    switch (kind) {
      case GeneratorKind::SlaterElliptical: params = GeneratorProfile::slater(dim).params; break;
      case GeneratorKind::WignerElliptical: params = GeneratorProfile::wigner(dim).params; break;
      case GeneratorKind::Gamma1D:
        throw SchemaError("family.params", "gamma family needs [shape, rate]");
      case GeneratorKind::Gaussian: break;
    }
  }
  try {
    return GeneratorProfile::make(kind, std::move(params), dim);
  } catch (const Error& e) {
    throw SchemaError("family", e.what());
  }
}

SymmetryGroup parse_group(const json& j, std::size_t dim) {
  const json& kind = field(j, "group", "kind");
  if (!kind.is_string()) throw SchemaError("group.kind", "expected a string");
  const std::string s = kind.get<std::string>();
  auto optional_size = [&](const char* key, std::size_t fallback) {
    const auto it = j.find(key);
    return it == j.end() ? fallback : positive_integer(*it, join("group", key));
  };
  try {
    if (s == "parity") {
      const std::size_t n = optional_size("n", 1), d = optional_size("d", dim / n);
      if (n * d != dim) throw SchemaError("group", "parity group acts on R^" + std::to_string(n * d));
      return SymmetryGroup::parity(dim);
    }
    if (s == "permutation") {
      const std::size_t n = positive_integer(field(j, "group", "n"), "group.n");
      const std::size_t d = positive_integer(field(j, "group", "d"), "group.d");
      return SymmetryGroup::permutation(n, d);
    }
    if (s == "so2") return SymmetryGroup::so2();
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError("group", e.what());
  }
  throw SchemaError("group.kind", "unknown group '" + s + "' (expected parity, permutation or so2)");
}

Atom make_atom(const GeneratorProfile& family, Vector mean, SpdMatrix scatter,
               const std::string& path) {
  try {
    return Atom(family, std::move(mean), std::move(scatter));
  } catch (const Error& e) {
    throw SchemaError(path, e.what());
  }
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json matrix_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose()));
  return out;
}

SdAtom blocks_of(const Atom& a, std::size_t n, std::size_t d) {
  SdAtom out;
  const auto di = static_cast<Eigen::Index>(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto off = static_cast<Eigen::Index>(i) * di;
    out.means.push_back(a.mean().segment(off, di));
    out.scatters.emplace_back(Matrix(a.scatter().matrix().block(off, off, di, di)));
  }
  return out;
}

double atom_radius(const Atom& a) {
  const double k =
      std::max(kAutoBoundsSigmas, generator_tail_radius(a.generator(), kAutoBoundsTail));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a.scatter().matrix());
  return a.mean().norm() + k * std::sqrt(eig.eigenvalues().maxCoeff());
}

}  // namespace

SymMixture MixtureDocument::symmetric() const {
  if (!group) throw InvalidInput("document has no symmetry group");
  return symmetrize(mixture, *group);
}

SdMixture MixtureDocument::slater_determinants() const {
  if (kind != DocumentKind::SlaterDeterminant) {
    throw InvalidInput("document does not hold Slater determinants");
  }
  SdMixture out;
  out.weights = mixture.weights;
  for (const auto& a : mixture.atoms) out.atoms.push_back(blocks_of(a, group->n(), group->block_dim()));
  return out;
}

double MixtureDocument::density(const Vector& x) const {
  switch (kind) {
    case DocumentKind::Plain: return mixture_density(mixture, x);
    case DocumentKind::Symmetric: return mixture_density(symmetric(), x);
    case DocumentKind::SlaterDeterminant: return sd_mixture_density(slater_determinants(), x);
  }
  return 0.0;
}

bool MixtureDocument::compatible(const MixtureDocument& other) const noexcept {
  return kind == other.kind && family == other.family && group.has_value() == other.group.has_value() &&
         (!group || *group == *other.group);
}

MixtureDocument parse_mixture_document(std::string_view text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("", e.what(), source);
  }
  try {
    if (!j.is_object()) throw SchemaError("", "document must be a JSON object");
    const json& comps = field(j, "", "components");
    if (!comps.is_array() || comps.empty()) {
      throw SchemaError("components", "expected a non-empty array");
    }
    const bool sd = comps[0].is_object() && comps[0].contains("orbitals");

    MixtureDocument doc;
    if (!sd) {
      doc.family = parse_family(field(j, "", "family"), 1);
      if (j.contains("group")) {
        doc.group = parse_group(j["group"], doc.family.dim);
        if (doc.group->dim() != doc.family.dim) {
          throw SchemaError("group", "group acts on R^" + std::to_string(doc.group->dim()) +
                                         ", family lives in R^" + std::to_string(doc.family.dim));
        }
        if (!doc.family.elliptical()) {
          throw SchemaError("group", "symmetry groups need an elliptical family");
        }
        doc.kind = DocumentKind::Symmetric;
      }
    } else {
      if (!j.contains("group")) {
        throw SchemaError("group", "Slater determinant documents need a permutation group");
      }
      const json& fam = field(j, "", "family");
      const std::size_t d = positive_integer(field(fam, "family", "dim"), "family.dim");
      doc.group = parse_group(j["group"], 0);
      if (doc.group->kind() != GroupKind::Permutation || doc.group->block_dim() != d) {
        throw SchemaError("group", "Slater determinants need a permutation group with d = family.dim");
      }
      doc.family = parse_family(fam, doc.group->n());
      if (doc.family.kind != GeneratorKind::Gaussian) {
        throw SchemaError("family.kind", "Slater determinants are built from gaussian orbitals");
      }
      doc.kind = DocumentKind::SlaterDeterminant;
    }

    const std::size_t dim = doc.family.dim;
    double total = 0.0;
    for (std::size_t k = 0; k < comps.size(); ++k) {
      const std::string path = index("components", k);
      const json& c = comps[k];
      const double w = number(field(c, path, "weight"), join(path, "weight"));
      if (w < 0.0) throw SchemaError(join(path, "weight"), "weights must be nonnegative");
      total += w;
      if (!sd) {
        if (c.contains("orbitals")) {
          throw SchemaError(join(path, "orbitals"), "mixes orbitals with plain components");
        }
        doc.mixture.weights.push_back(w);
        doc.mixture.atoms.push_back(
            make_atom(doc.family, vector_field(field(c, path, "mean"), join(path, "mean"), dim),
                      matrix_field(field(c, path, "scatter"), join(path, "scatter"), dim), path));
        continue;
      }
      const std::string opath = join(path, "orbitals");
      const json& orbitals = field(c, path, "orbitals");
      const std::size_t n = doc.group->n(), d = doc.group->block_dim();
      if (!orbitals.is_array() || orbitals.size() != n) {
        throw SchemaError(opath, "expected " + std::to_string(n) + " orbitals");
      }
      SdAtom atom;
      for (std::size_t i = 0; i < n; ++i) {
        const std::string p = index(opath, i);
        atom.means.push_back(vector_field(field(orbitals[i], p, "mean"), join(p, "mean"), d));
        atom.scatters.push_back(matrix_field(field(orbitals[i], p, "scatter"), join(p, "scatter"), d));
      }
      Vector probe(static_cast<Eigen::Index>(dim));
      for (std::size_t i = 0; i < n; ++i) {
        probe.segment(static_cast<Eigen::Index>(i * d), static_cast<Eigen::Index>(d)) = atom.means[i];
      }
      try {
        atom.density(probe);
      } catch (const Error& e) {
        throw SchemaError(opath, e.what());
      }
      doc.mixture.weights.push_back(w);
      // Orbitals are stacked in the order given.
      Vector mean(static_cast<Eigen::Index>(dim));
      Matrix scatter = Matrix::Zero(dim, dim);
      for (std::size_t i = 0; i < n; ++i) {
        const auto off = static_cast<Eigen::Index>(i * d);
        const auto di = static_cast<Eigen::Index>(d);
        mean.segment(off, di) = atom.means[i];
        scatter.block(off, off, di, di) = atom.scatters[i].matrix();
      }
      doc.mixture.atoms.push_back(make_atom(doc.family, mean, SpdMatrix(scatter), path));
    }
    if (std::abs(total - 1.0) > kWeightSumTolerance) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "weights sum to " << total << ", expected 1 within 1e-9";
      throw SchemaError("components", msg.str());
    }
    return doc;
  } catch (const SchemaError& e) {
    throw SchemaError(e.field(), e.message(), source);
  }
}

MixtureDocument load_mixture_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("", "cannot open file", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_mixture_document(buf.str(), path.string());
}

MixtureDocument with_mixture(const MixtureDocument& like, Mixture mixture) {
  MixtureDocument out = like;
  out.mixture = std::move(mixture);
  return out;
}

std::string dump_mixture_document(const MixtureDocument& doc) {
  json j;
  const bool sd = doc.kind == DocumentKind::SlaterDeterminant;
  j["family"] = {{"kind", to_string(doc.family.kind)},
                 {"params", doc.family.params},
                 {"dim", sd ? doc.group->block_dim() : doc.family.dim}};
  if (doc.group) {
    j["group"] = {{"kind", to_string(doc.group->kind())},
                  {"n", doc.group->n()},
                  {"d", doc.group->block_dim()}};
  }
  json comps = json::array();
  for (std::size_t k = 0; k < doc.mixture.size(); ++k) {
    const Atom& a = doc.mixture.atoms[k];
    json c = {{"weight", doc.mixture.weights[k]}};
    if (!sd) {
      c["mean"] = vector_json(a.mean());
      c["scatter"] = matrix_json(a.scatter().matrix());
    } else {
      const SdAtom blocks = blocks_of(a, doc.group->n(), doc.group->block_dim());
      json orbitals = json::array();
      for (std::size_t i = 0; i < blocks.n(); ++i) {
        orbitals.push_back({{"mean", vector_json(blocks.means[i])},
                            {"scatter", matrix_json(blocks.scatters[i].matrix())}});
      }
      c["orbitals"] = std::move(orbitals);
    }
    comps.push_back(std::move(c));
  }
  j["components"] = std::move(comps);
  return j.dump(2) + "\n";
}

GridSpec document_grid(std::span<const MixtureDocument> docs,
                       const std::vector<std::size_t>& points,
                       const std::optional<std::vector<std::pair<double, double>>>& bounds) {
  if (docs.empty()) throw InvalidInput("grid needs at least one document");
  const std::size_t dim = docs.front().dim();
  std::vector<std::size_t> counts = points;
  if (counts.size() == 1) counts.assign(dim, points.front());
  if (counts.size() != dim) {
    throw InvalidInput("grid needs 1 or " + std::to_string(dim) + " point counts");
  }
  if (bounds) return GridSpec(*bounds, counts);

  const auto& group = docs.front().group;
  if (group && !group->finite()) {
    double r = 0.0;
    for (const auto& doc : docs) {
      for (const auto& a : doc.mixture.atoms) r = std::max(r, atom_radius(a));
    }
    return GridSpec({{-r, r}, {-r, r}}, counts);
  }
  std::vector<Mixture> mixtures;
  for (const auto& doc : docs) mixtures.push_back(doc.mixture);
  const GridSpec box = auto_grid(mixtures, counts.front());
  GridSpec spec(box.bounds(), counts);
  if (group) spec = symmetrized_grid(spec, *group);
  return spec;
}

GridDensity rasterize(const MixtureDocument& doc, const GridSpec& spec) {
  switch (doc.kind) {
    case DocumentKind::Plain: return rasterize(doc.mixture, spec);
    case DocumentKind::Symmetric: return rasterize(doc.symmetric(), spec);
    case DocumentKind::SlaterDeterminant: {
      const SdMixture sd = doc.slater_determinants();
      return rasterize([&](const Vector& x) { return sd_mixture_density(sd, x); }, spec);
    }
  }
  throw InvalidInput("unknown document kind");
}

}  // namespace mixot
