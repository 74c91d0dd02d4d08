#include "doctest.h"

#include "mixot/cli.hpp"
#include "mixot/io.hpp"

#include "json.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace mixot;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

/// Fresh scratch directory, removed on destruction.
struct Scratch {
  fs::path dir;
  Scratch() {
    std::random_device rd;
    dir = fs::temp_directory_path() / ("mixot_cli_" + std::to_string(rd()));
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
    return (dir / name).string();
  }
};

std::string read(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

constexpr const char* kA = R"({"family": {"kind": "slater", "dim": 1},
  "components": [{"weight": 0.6, "mean": [1.5], "scatter": [[1.0]]},
                 {"weight": 0.4, "mean": [-2.0], "scatter": [[0.5]]}]})";
constexpr const char* kB = R"({"family": {"kind": "slater", "dim": 1},
  "components": [{"weight": 0.7, "mean": [-1.0], "scatter": [[1.5]]},
                 {"weight": 0.3, "mean": [3.0], "scatter": [[0.3]]}]})";

}  // namespace

TEST_CASE("distance reports the library value bit for bit") {
  Scratch s;
  const std::string a = s.write("a.json", kA), b = s.write("b.json", kB);
  const Run same = run({"distance", a, a});
  REQUIRE(same.code == kExitOk);
  CHECK(json::parse(same.out)["value"].get<double>() == 0.0);

  const Run r = run({"distance", a, b});
  REQUIRE(r.code == kExitOk);
  const json report = json::parse(r.out);
  const MixtureDistance lib =
      mixture_distance(load_mixture_document(a).mixture, load_mixture_document(b).mixture);
  CHECK(report["value"].get<double>() == lib.value);
  REQUIRE(report["plan"].size() == lib.plan.nonzeros());
  for (std::size_t k = 0; k < lib.plan.nonzeros(); ++k) {
    CHECK(report["plan"][k]["i"].get<std::size_t>() == lib.plan.entries[k].index[0]);
    CHECK(report["plan"][k]["j"].get<std::size_t>() == lib.plan.entries[k].index[1]);
    CHECK(report["plan"][k]["w"].get<double>() == lib.plan.entries[k].weight);
  }
  CHECK(report["wall_time_ms"].is_number());

  const Run p15 = run({"distance", a, b, "--p", "1.5"});
  REQUIRE(p15.code == kExitOk);
  CHECK(json::parse(p15.out)["value"].get<double>() <= lib.value + 1e-12);
  CHECK(run({"distance", a, b, "--p", "1"}).code == kExitSchema);
}

TEST_CASE("distance output is deterministic without timing") {
  Scratch s;
  const std::string a = s.write("a.json", kA), b = s.write("b.json", kB);
  const Run r1 = run({"distance", a, b, "--no-timing"});
  const Run r2 = run({"distance", a, b, "--no-timing"});
  CHECK(r1.out == r2.out);
  CHECK(json::parse(r1.out)["wall_time_ms"].is_null());
}

TEST_CASE("exit codes") {
  Scratch s;
  const std::string a = s.write("a.json", kA);
  const std::string bad = s.write("bad.json", "{\"family\": {\"kind\": \"slater\", \"dim\": 1},\n"
                                              " \"components\": [{\"weight\": 1, \"mean\": [0]}]}");
  const Run schema = run({"distance", a, bad});
  CHECK(schema.code == kExitSchema);
  CHECK(schema.err.find("components[0].scatter") != std::string::npos);

  const Run syntax = run({"distance", a, s.write("syntax.json", "{\n\"family\": }")});
  CHECK(syntax.code == kExitSchema);
  CHECK(syntax.err.find("line 2") != std::string::npos);

  const std::string wigner = s.write("w.json", R"({"family": {"kind": "wigner", "dim": 1},
    "components": [{"weight": 1, "mean": [0], "scatter": [[1]]}]})");
  CHECK(run({"distance", a, wigner}).code == kExitIncompatible);

  CHECK(run({}).code == kExitSchema);
  CHECK(run({"frobnicate"}).code == kExitSchema);
  CHECK(run({"validate", "--suite", "nope"}).code == kExitSchema);
  CHECK(run({"barycenter", a, a, "--t", "1.5"}).code == kExitSchema);
  CHECK(run({"distance", a}).code == kExitSchema);
  const Run help = run({"--help"});
  CHECK(help.code == kExitOk);
  CHECK(help.out.find("barycenter") != std::string::npos);
}

TEST_CASE("barycenter path files") {
  Scratch s;
  const std::string a = s.write("a.json", kA), b = s.write("b.json", kB);
  const fs::path out = s.dir / "out";
  const Run r = run({"barycenter", a, b, "--out", out.string(), "--rasterize"});
  REQUIRE(r.code == kExitOk);
  for (const char* t : {"0", "0.25", "0.5", "0.75", "1"}) {
    CHECK(fs::exists(out / ("bary_t" + std::string(t) + ".json")));
    const std::string csv = read(out / ("bary_t" + std::string(t) + ".csv"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 201);
    CHECK(csv.rfind("x,value\n", 0) == 0);
  }

  SUBCASE("t = 0 is the canonical first input") {
    const Mixture got = load_mixture_document(out / "bary_t0.json").mixture;
    const Mixture want = canonicalize(load_mixture_document(a).mixture);
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      CHECK(got.weights[k] == want.weights[k]);
      CHECK(same_parameters(got.atoms[k], want.atoms[k], 0.0));
    }
  }
  SUBCASE("outputs are canonical and round-trip") {
    for (const char* t : {"0.25", "0.5", "0.75"}) {
      const MixtureDocument doc = load_mixture_document(out / ("bary_t" + std::string(t) + ".json"));
      const Mixture canon = canonicalize(doc.mixture);
      REQUIRE(canon.size() == doc.mixture.size());
      for (std::size_t k = 0; k < canon.size(); ++k) {
        CHECK(canon.weights[k] == doc.mixture.weights[k]);
        CHECK(same_parameters(canon.atoms[k], doc.mixture.atoms[k], 0.0));
      }
      CHECK(dump_mixture_document(doc) == read(out / ("bary_t" + std::string(t) + ".json")));
    }
  }
  SUBCASE("a second run is byte identical") {
    const fs::path again = s.dir / "again";
    const Run r2 = run({"barycenter", a, b, "--out", again.string(), "--rasterize"});
    REQUIRE(r2.code == kExitOk);
    for (const auto& entry : fs::directory_iterator(out)) {
      CHECK(read(entry.path()) == read(again / entry.path().filename()));
    }
  }
}

TEST_CASE("barycenter with weights over single-atom specs") {
  Scratch s;
  std::vector<std::string> args{"barycenter"};
  for (int q = 0; q < 3; ++q) {
    args.push_back(s.write("s" + std::to_string(q) + ".json",
                           R"({"family": {"kind": "gaussian", "dim": 1}, "components": [{"weight": 1, "mean": [)" +
                               std::to_string(q) + R"(], "scatter": [[1]]}]})"));
  }
  args.insert(args.end(), {"--weights", "0.2,0.3,0.5", "--out", (s.dir / "w").string()});
  REQUIRE(run(args).code == kExitOk);
  const MixtureDocument doc = load_mixture_document(s.dir / "w" / "bary_weights.json");
  REQUIRE(doc.mixture.size() == 1);
  CHECK(doc.mixture.atoms[0].mean()(0) == doctest::Approx(0.3 + 1.0));

  args.back() = (s.dir / "w2").string();
  args[5] = "0.5,0.5";
  CHECK(run(args).code == kExitSchema);
}

TEST_CASE("symmetric documents go through the quotient metric") {
  Scratch s;
  const std::string a = s.write("a.json", R"({"family": {"kind": "gaussian", "dim": 1},
    "group": {"kind": "parity"}, "components": [{"weight": 1, "mean": [2], "scatter": [[1]]}]})");
  const std::string b = s.write("b.json", R"({"family": {"kind": "gaussian", "dim": 1},
    "group": {"kind": "parity"}, "components": [{"weight": 1, "mean": [-2], "scatter": [[1]]}]})");
  const Run r = run({"distance", a, b});
  REQUIRE(r.code == kExitOk);
  CHECK(json::parse(r.out)["value"].get<double>() == 0.0);
  const Run c = run({"compare", a, b, "--no-timing"});
  CHECK(c.code == kExitOk);
  CHECK(json::parse(c.out)["sandwich"]["holds"].get<bool>());
}

TEST_CASE("compare against the grid oracle") {
  Scratch s;
  const std::string a = s.write("a.json", R"({"family": {"kind": "gaussian", "dim": 1},
    "components": [{"weight": 1, "mean": [0], "scatter": [[1]]}]})");
  const std::string b = s.write("b.json", R"({"family": {"kind": "gaussian", "dim": 1},
    "components": [{"weight": 1, "mean": [4], "scatter": [[4]]}]})");
  const Run r = run({"compare", a, b});
  REQUIRE(r.code == kExitOk);
  const json report = json::parse(r.out);
  const double exact = report["mixture"]["value_squared"].get<double>();
  CHECK(exact == doctest::Approx(17.0));
  CHECK(std::abs(report["sinkhorn"]["value_squared"].get<double>() - exact) / exact <= 0.02);
  CHECK(report["sinkhorn"]["converged"].get<bool>());
  CHECK(report["mixture"]["wall_time_ms"].get<double>() < 10.0);

  // Three nodes at -1, 0, 1: the narrow atoms collapse onto nodes 0 and 1, so
  // the grid distance exceeds the mixture distance.
  const std::string n0 = s.write("n0.json", R"({"family": {"kind": "gaussian", "dim": 1},
    "components": [{"weight": 1, "mean": [0], "scatter": [[0.0001]]}]})");
  const std::string n1 = s.write("n1.json", R"({"family": {"kind": "gaussian", "dim": 1},
    "components": [{"weight": 1, "mean": [0.7], "scatter": [[0.0001]]}]})");
  const std::vector<std::string> coarse{"compare", n0, n1, "--grid", "3", "--bounds", "-1,1"};
  const Run violated = run(coarse);
  CHECK(violated.code == kExitOracleViolation);
  CHECK_FALSE(json::parse(violated.out)["sandwich"]["holds"].get<bool>());
  std::vector<std::string> lenient = coarse;
  lenient.push_back("--no-assert");
  CHECK(run(lenient).code == kExitOk);
  std::vector<std::string> capped{"compare", a, b, "--max-iter", "3"};
  CHECK(run(capped).code == kExitConvergence);
}

TEST_CASE("validate reports per-check JSON") {
  const Run r = run({"validate", "--suite", "solver", "--seed", "7"});
  REQUIRE(r.code == kExitOk);
  const json report = json::parse(r.out);
  CHECK(report["passed"].get<bool>());
  CHECK(report["suites"][0]["suite"] == "solver");
  CHECK(report["suites"][0]["seed"] == 7);
  CHECK(report["suites"][0]["checks"].size() == 2);
  CHECK(run({"validate", "--suite", "solver", "--seed", "7"}).out == r.out);
}
