#include "mixot/cli.hpp"

#include "mixot/errors.hpp"
#include "mixot/grid_oracle.hpp"
#include "mixot/io.hpp"
#include "mixot/mixtures.hpp"
#include "mixot/symmetry.hpp"
#include "mixot/validation.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

namespace mixot {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr double kSandwichRelative = 0.02;

struct GridFlags {
  std::string grid;
  std::string bounds = "auto";
  double eps_rel = SinkhornOptions{}.eps_rel;
  int max_iterations = SinkhornOptions{}.max_iterations;

  SinkhornOptions options() const {
    SinkhornOptions o;
    o.eps_rel = eps_rel;
    o.max_iterations = max_iterations;
    return o;
  }
};

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = text.find(',', start);
    parts.push_back(text.substr(start, comma - start));
    if (comma == std::string::npos) return parts;
    start = comma + 1;
  }
}

double parse_double(const std::string& s, const std::string& flag) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw InvalidInput(flag + ": '" + s + "' is not a number");
  }
  return v;
}

std::vector<std::size_t> grid_points(const std::string& grid, std::size_t dim) {
  if (grid.empty()) return {dim == 1 ? kDefaultGridPoints1D : kDefaultGridPoints2D};
  std::vector<std::size_t> points;
  for (const std::string& s : split(grid)) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < 2) {
      throw InvalidInput("--grid: '" + s + "' is not a node count >= 2");
    }
    points.push_back(v);
  }
  return points;
}

std::optional<std::vector<std::pair<double, double>>> grid_bounds(const std::string& bounds) {
  if (bounds == "auto") return std::nullopt;
  const std::vector<std::string> parts = split(bounds);
  if (parts.size() % 2 != 0) throw InvalidInput("--bounds: expected auto or lo,hi[,lo,hi]");
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < parts.size(); i += 2) {
    out.emplace_back(parse_double(parts[i], "--bounds"), parse_double(parts[i + 1], "--bounds"));
  }
  return out;
}

GridSpec make_grid(std::span<const MixtureDocument> docs, const GridFlags& flags) {
  return document_grid(docs, grid_points(flags.grid, docs.front().dim()), grid_bounds(flags.bounds));
}

std::string shortest(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::vector<MixtureDocument> load_all(const std::vector<std::string>& paths) {
  std::vector<MixtureDocument> docs;
  for (const auto& p : paths) docs.push_back(load_mixture_document(p));
  for (std::size_t i = 1; i < docs.size(); ++i) {
    if (!docs[i].compatible(docs.front())) {
      throw FamilyMismatch(paths[i] + " and " + paths.front() +
                           " differ in family, symmetry group or document kind");
    }
  }
  return docs;
}

template <class A>
MixtureDistance distance_p(const BasicMixture<A>& a, const BasicMixture<A>& b, double p) {
  if (p == 2.0) return mixture_distance(a, b);
  const BasicMixture<A> ca = canonicalize(a), cb = canonicalize(b);
  Matrix d(ca.size(), cb.size());
  for (std::size_t j = 0; j < ca.size(); ++j) {
    for (std::size_t k = 0; k < cb.size(); ++k) {
      d(j, k) = std::sqrt(AtomOps<A>::squared_distance(ca.atoms[j], cb.atoms[k]));
    }
  }
  return mixture_distance_from_atom_distances(ca.weights, cb.weights, d, p);
}

MixtureDistance document_distance(const MixtureDocument& a, const MixtureDocument& b, double p) {
  if (a.kind == DocumentKind::Plain) return distance_p(a.mixture, b.mixture, p);
  return distance_p(a.symmetric(), b.symmetric(), p);
}

Mixture representatives(const SymMixture& mu) {
  Mixture out;
  out.weights = mu.weights;
  for (const auto& a : mu.atoms) out.atoms.push_back(a.representative());
  return out;
}

Mixture pair_barycenter(const MixtureDocument& a, const MixtureDocument& b, double t) {
  if (a.kind == DocumentKind::Plain) return mixture_barycenter_pair(a.mixture, b.mixture, t);
  return representatives(mixture_barycenter_pair(a.symmetric(), b.symmetric(), t));
}

Mixture multi_barycenter(const std::vector<MixtureDocument>& docs, const std::vector<double>& w) {
  if (docs.front().kind == DocumentKind::Plain) {
    std::vector<Mixture> mus;
    for (const auto& d : docs) mus.push_back(d.mixture);
    return mixture_barycenter_multi<Atom>(mus, w);
  }
  std::vector<SymMixture> mus;
  for (const auto& d : docs) mus.push_back(d.symmetric());
  return representatives(mixture_barycenter_multi<SymmetrizedAtom>(mus, w));
}

json plan_json(const DiscretePlan& plan) {
  json out = json::array();
  for (const auto& e : plan.entries) {
    out.push_back({{"i", e.index[0]}, {"j", e.index[1]}, {"w", e.weight}});
  }
  return out;
}

json grid_json(const GridSpec& spec) {
  json bounds = json::array();
  for (const auto& [lo, hi] : spec.bounds()) bounds.push_back({lo, hi});
  return {{"bounds", bounds}, {"points", spec.points()}};
}

template <class F>
double time_ms(F&& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw InvalidInput("cannot write " + path.string());
}

void write_grid(const fs::path& path, const GridDensity& p) {
  std::ofstream out(path, std::ios::binary);
  write_csv(out, p);
  if (!out) throw InvalidInput("cannot write " + path.string());
}

// -- subcommands -----------------------------------------------------------

struct DistanceArgs {
  std::vector<std::string> specs;
  double p = 2.0;
  bool no_timing = false;
};

int cmd_distance(const DistanceArgs& args, std::ostream& out) {
  const auto docs = load_all(args.specs);
  MixtureDistance d;
  const double ms = time_ms([&] { d = document_distance(docs[0], docs[1], args.p); });
  json report = {{"value", d.value},
                 {"p", args.p},
                 {"plan", plan_json(d.plan)},
                 {"wall_time_ms", args.no_timing ? json(nullptr) : json(ms)}};
  out << report.dump(2) << "\n";
  return kExitOk;
}

struct BarycenterArgs {
  std::vector<std::string> specs;
  std::vector<double> t;
  std::vector<double> weights;
  std::string out_dir = ".";
  bool rasterize = false;
  bool sinkhorn = false;
  GridFlags grid;
};

int cmd_barycenter(const BarycenterArgs& args, std::ostream& out, std::ostream& err) {
  const auto docs = load_all(args.specs);
  const bool multi = !args.weights.empty();
  if (multi && !args.t.empty()) throw InvalidInput("--t and --weights are exclusive");
  if (multi && args.weights.size() != docs.size()) {
    throw InvalidInput("--weights needs one weight per spec");
  }
  if (!multi && docs.size() != 2) throw InvalidInput("--t needs exactly two specs");
  std::vector<double> ts = args.t;
  if (!multi && ts.empty()) ts = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (double t : ts) {
    if (!(t >= 0.0 && t <= 1.0)) throw InvalidInput("--t values must lie in [0, 1]");
  }

  const fs::path dir(args.out_dir);
  fs::create_directories(dir);
  std::optional<GridSpec> spec;
  std::vector<GridDensity> rasters;
  if (args.rasterize || args.sinkhorn) {
    spec = make_grid(docs, args.grid);
    if (args.sinkhorn) {
      for (const auto& d : docs) rasters.push_back(rasterize(d, *spec));
    }
  }
  const SinkhornOptions options = args.grid.options();

  json outputs = json::array();
  auto emit = [&](const std::string& stem, const Mixture& mixture, std::vector<double> weights,
                  json entry) {
    const MixtureDocument doc = with_mixture(docs.front(), mixture);
    const fs::path json_path = dir / ("bary_" + stem + ".json");
    write_file(json_path, dump_mixture_document(doc));
    entry["json"] = json_path.string();
    entry["components"] = mixture.size();
    if (args.rasterize) {
      const fs::path csv = dir / ("bary_" + stem + ".csv");
      write_grid(csv, rasterize(doc, *spec));
      entry["csv"] = csv.string();
    }
    if (args.sinkhorn) {
      const GridBarycenter bary = sinkhorn_barycenter(rasters, weights, options);
      const fs::path csv = dir / ("sinkhorn_" + stem + ".csv");
      write_grid(csv, bary.density);
      entry["sinkhorn"] = {{"csv", csv.string()},
                           {"converged", bary.converged},
                           {"iterations", bary.iterations},
                           {"violation", bary.violation}};
      if (!bary.converged) {
        err << "warning: Sinkhorn barycenter " << stem << " stopped after " << bary.iterations
            << " iterations with marginal violation " << bary.violation << "\n";
      }
    }
    outputs.push_back(std::move(entry));
  };

  if (multi) {
    emit("weights", multi_barycenter(docs, args.weights), args.weights,
         {{"weights", args.weights}});
  } else {
    for (double t : ts) {
      emit("t" + shortest(t), pair_barycenter(docs[0], docs[1], t), {1.0 - t, t}, {{"t", t}});
    }
  }
  json report = {{"outputs", outputs}};
  if (spec) report["grid"] = grid_json(*spec);
  out << report.dump(2) << "\n";
  return kExitOk;
}

struct CompareArgs {
  std::vector<std::string> specs;
  GridFlags grid;
  bool no_assert = false;
  bool no_timing = false;
};

int cmd_compare(const CompareArgs& args, std::ostream& out, std::ostream& err) {
  const auto docs = load_all(args.specs);
  MixtureDistance d;
  const double mixture_ms = time_ms([&] { d = document_distance(docs[0], docs[1], 2.0); });

  const GridSpec spec = make_grid(docs, args.grid);
  const SinkhornOptions options = args.grid.options();
  SinkhornResult r;
  const double grid_ms = time_ms([&] {
    r = sinkhorn_w2_squared(rasterize(docs[0], spec), rasterize(docs[1], spec), options);
  });

  const double delta2 = d.value * d.value;
  const double bias = entropic_bias(spec, options);
  const double bound = (1.0 + kSandwichRelative) * delta2 + bias;
  // Squared determinants are not orbit averages of their Gaussian images, so
  // the restriction bound does not apply to them.
  const bool applicable = docs[0].kind != DocumentKind::SlaterDeterminant;
  const bool holds = r.value <= bound;
  const double w2 = std::sqrt(std::max(r.value, 0.0));

  const json no_time(nullptr);
  json report = {
      {"mixture",
       {{"value", d.value},
        {"value_squared", delta2},
        {"wall_time_ms", args.no_timing ? no_time : json(mixture_ms)}}},
      {"sinkhorn",
       {{"value", w2},
        {"value_squared", r.value},
        {"converged", r.converged},
        {"iterations", r.iterations},
        {"violation", r.violation},
        {"epsilon", r.epsilon},
        {"bias", bias},
        {"wall_time_ms", args.no_timing ? no_time : json(grid_ms)}}},
      {"grid", grid_json(spec)},
      {"gap", d.value - w2},
      {"relative_gap", d.value > 0.0 ? (d.value - w2) / d.value : 0.0},
      {"sandwich", {{"applicable", applicable}, {"bound", bound}, {"holds", holds}}}};
  out << report.dump(2) << "\n";

  if (!r.converged) {
    err << "error: Sinkhorn did not converge in " << r.iterations << " iterations (violation "
        << r.violation << ")\n";
    return kExitConvergence;
  }
  if (applicable && !holds && !args.no_assert) {
    err << "error: grid W2^2 = " << r.value << " exceeds the sandwich bound " << bound << "\n";
    return kExitOracleViolation;
  }
  return kExitOk;
}

struct ValidateArgs {
  std::string suite = "all";
  std::uint64_t seed = 1;
};

int cmd_validate(const ValidateArgs& args, std::ostream& out) {
  std::vector<std::string> names;
  if (args.suite == "all") {
    names = suite_names();
  } else {
    names.push_back(args.suite);
  }
  std::vector<SuiteReport> reports;
  for (const auto& name : names) reports.push_back(run_suite(name, args.seed));
  out << suite_report_json(reports);
  const bool passed = std::all_of(reports.begin(), reports.end(),
                                  [](const SuiteReport& r) { return r.passed(); });
  return passed ? kExitOk : kExitValidationFailed;
}

void add_grid_flags(CLI::App* cmd, GridFlags& flags) {
  cmd->add_option("--grid", flags.grid, "Nodes per axis: n or n,n (default 200 in 1D, 50,50 in 2D)");
  cmd->add_option("--bounds", flags.bounds, "Grid box: auto or lo,hi[,lo,hi]");
  cmd->add_option("--eps-rel", flags.eps_rel, "Entropic regularization relative to diameter^2")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", flags.max_iterations, "Sinkhorn iteration cap")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transport distances and barycenters between mixtures of elliptical atoms", "mixot"};
  app.require_subcommand(1);

  DistanceArgs distance;
  auto* dist_cmd = app.add_subcommand("distance", "Mixture distance between two specs");
  dist_cmd->add_option("specs", distance.specs, "Two mixture specs")->required()->expected(2);
  dist_cmd->add_option("--p", distance.p, "Transport exponent p > 1 (default 2)");
  dist_cmd->add_flag("--no-timing", distance.no_timing, "Report wall_time_ms as null");

  BarycenterArgs bary;
  auto* bary_cmd = app.add_subcommand("barycenter", "Barycenters along a geodesic or of Q specs");
  bary_cmd->add_option("specs", bary.specs, "Mixture specs")->required()->expected(1, 1 << 20);
  bary_cmd->add_option("--t", bary.t, "Geodesic times (default 0,0.25,0.5,0.75,1)")->delimiter(',');
  bary_cmd->add_option("--weights", bary.weights, "Barycentric weights, one per spec")
      ->delimiter(',');
  bary_cmd->add_option("--out", bary.out_dir, "Output directory");
  bary_cmd->add_flag("--rasterize", bary.rasterize, "Also write each barycenter as a grid CSV");
  bary_cmd->add_flag("--sinkhorn", bary.sinkhorn, "Also write the grid Sinkhorn barycenter");
  add_grid_flags(bary_cmd, bary.grid);

  CompareArgs compare;
  auto* cmp_cmd = app.add_subcommand("compare", "Mixture distance against the grid oracle");
  cmp_cmd->add_option("specs", compare.specs, "Two mixture specs")->required()->expected(2);
  cmp_cmd->add_flag("--no-assert", compare.no_assert, "Do not fail on a sandwich violation");
  cmp_cmd->add_flag("--no-timing", compare.no_timing, "Report wall times as null");
  add_grid_flags(cmp_cmd, compare.grid);

  ValidateArgs validate;
  auto* val_cmd = app.add_subcommand("validate", "Randomized invariant suites");
  std::vector<std::string> choices = suite_names();
  choices.insert(choices.begin(), "all");
  val_cmd->add_option("--suite", validate.suite, "Suite name")->check(CLI::IsMember(choices));
  val_cmd->add_option("--seed", validate.seed, "Random seed");

  std::vector<std::string> argv_storage{"mixot"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitSchema;
  }

  try {
    if (*dist_cmd) return cmd_distance(distance, out);
    if (*bary_cmd) return cmd_barycenter(bary, out, err);
    if (*cmp_cmd) return cmd_compare(compare, out, err);
    return cmd_validate(validate, out);
  } catch (const FamilyMismatch& e) {
    err << "error: " << e.what() << "\n";
    return kExitIncompatible;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSchema;
  }
}

}  // namespace mixot
