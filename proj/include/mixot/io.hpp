#pragma once

// Mixture documents: the JSON exchange format of the command-line tool.
//
//   {"family": {"kind": "slater", "params": [1.414], "dim": 1},
//    "group": {"kind": "parity", "n": 1, "d": 1},
//    "components": [{"weight": 0.5, "mean": [0.0], "scatter": [[1.0]]}, ...]}
//
// `params` defaults to the family's covariance-preserving choice and `group`
// is optional. Squared Slater determinants use a Gaussian family on R^d, a
// permutation group with n blocks of size d, and components of the form
// {"weight": w, "orbitals": [{"mean": [..], "scatter": [[..]]}, ...]}.

#include "mixot/grid_oracle.hpp"
#include "mixot/mixtures.hpp"
#include "mixot/symmetry.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace mixot {

enum class DocumentKind { Plain, Symmetric, SlaterDeterminant };

struct MixtureDocument {
  DocumentKind kind = DocumentKind::Plain;
  /// Generator of the stored atoms. For Slater determinants: Gaussian on R^{n d}.
  GeneratorProfile family;
  std::optional<SymmetryGroup> group;
  /// Components as given; Slater determinants store the block-diagonal
  /// Gaussian image of each determinant.
  Mixture mixture;

  std::size_t dim() const noexcept { return family.dim; }
  SymMixture symmetric() const;
  SdMixture slater_determinants() const;
  /// Probability density of the represented measure.
  double density(const Vector& x) const;
  /// Same family, group and document kind.
  bool compatible(const MixtureDocument& other) const noexcept;
};

/// Parses and validates a document. Throws SchemaError naming the offending
/// field (or the line and column of a syntax error); `source` prefixes the
/// message.
MixtureDocument parse_mixture_document(std::string_view text, const std::string& source = "");
MixtureDocument load_mixture_document(const std::filesystem::path& path);

/// A document with the same family, group and kind as `like`.
MixtureDocument with_mixture(const MixtureDocument& like, Mixture mixture);

/// Two-space indented JSON with shortest round-trip numbers and a trailing newline.
std::string dump_mixture_document(const MixtureDocument& doc);

/// Grid for the given documents: explicit bounds, or auto-bounds over every
/// atom enlarged so that a finite group maps the grid onto itself. SO(2)
/// documents get a centred square covering every rotation.
GridSpec document_grid(std::span<const MixtureDocument> docs,
                       const std::vector<std::size_t>& points,
                       const std::optional<std::vector<std::pair<double, double>>>& bounds);

GridDensity rasterize(const MixtureDocument& doc, const GridSpec& spec);

}  // namespace mixot
