#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bdt/cli.hpp"
#include "bdt/ensemble.hpp"
#include "bdt/manifest.hpp"

using namespace bdt;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t lines_of(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth") {
  TempDir tmp("bdt_cli_synth");
  auto r = cli({"synth", "--rows", "316", "--seed", "7", "--irrelevant", "9", "--out-dir",
                tmp / "a"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("316 rows") != std::string::npos);
  REQUIRE(cli({"synth", "--rows", "316", "--seed", "7", "--irrelevant", "9", "--out-dir",
               tmp / "b"})
              .code == kExitOk);
  for (const char* f : {"data.csv", "schema.json", "provenance.txt"})
    CHECK(sha256_file(fs::path(tmp / "a") / f) == sha256_file(fs::path(tmp / "b") / f));
  CHECK(lines_of(slurp(fs::path(tmp / "a") / "data.csv")) == 317);

  auto manifest = nlohmann::json::parse(slurp(fs::path(tmp / "a") / "manifest.json"));
  CHECK(manifest["command"] == "synth");
  CHECK(manifest["artifacts"].size() == 3);
  for (const auto& a : manifest["artifacts"])
    CHECK(a["sha256"] == sha256_file(fs::path(tmp / "a") / a["path"].get<std::string>()));

  CHECK(cli({"synth", "--rows", "5", "--out-dir", tmp / "c"}).code == kExitValidation);
  CHECK(cli({"synth", "--irrelevant", "17", "--out-dir", tmp / "c"}).code == kExitValidation);
  CHECK(cli({"synth", "--bogus"}).code == kExitValidation);
}

TEST_CASE("train") {
  TempDir tmp("bdt_cli_train");
  REQUIRE(cli({"synth", "--rows", "60", "--seed", "3", "--out-dir", tmp / "d"}).code == kExitOk);
  const auto data = tmp / "d/data.csv";

  auto r = cli({"train", "--data", data, "--collect", "50", "--burn-in", "500", "--seed", "1",
                "--out-dir", tmp / "t1"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("acceptance") != std::string::npos);
  CHECK(lines_of(slurp(fs::path(tmp / "t1") / "ensemble.jsonl")) == 50);
  REQUIRE(cli({"train", "--data", data, "--collect", "50", "--burn-in", "500", "--seed", "1",
               "--out-dir", tmp / "t2"})
              .code == kExitOk);
  CHECK(sha256_file(fs::path(tmp / "t1") / "ensemble.jsonl") ==
        sha256_file(fs::path(tmp / "t2") / "ensemble.jsonl"));

  auto meta = nlohmann::json::parse(slurp(fs::path(tmp / "t1") / "ensemble.meta.json"));
  CHECK(meta["config"]["burn_in_steps"] == 500);
  CHECK(meta["seed"] == 1);
  CHECK(meta.contains("wall_clock_seconds"));
  auto ens = read_ensemble(fs::path(tmp / "t1") / "ensemble.jsonl",
                           fs::path(tmp / "t1") / "ensemble.meta.json");
  CHECK(ens.size() == 50);
  CHECK(ens.meta.n_features == 16);

  CHECK(cli({"train", "--data", tmp / "missing.csv", "--out-dir", tmp / "t3"}).code == kExitIo);
  CHECK(cli({"train", "--out-dir", tmp / "t3"}).code == kExitValidation);
  CHECK(cli({"train", "--data", data, "--thin", "0", "--out-dir", tmp / "t3"}).code ==
        kExitValidation);

  std::ofstream(tmp / "bad.csv") << "a,b\n1,2\n";
  auto bad = cli({"train", "--data", tmp / "bad.csv", "--out-dir", tmp / "t3"});
  CHECK(bad.code == kExitValidation);
  CHECK(bad.err.find("row 1") != std::string::npos);
}

TEST_CASE("train defaults are paper scale") {
  TempDir tmp("bdt_cli_paper");
  REQUIRE(cli({"synth", "--rows", "20", "--seed", "2", "--out-dir", tmp / "d"}).code == kExitOk);
  REQUIRE(cli({"train", "--data", tmp / "d/data.csv", "--out-dir", tmp / "t"}).code == kExitOk);
  auto meta = nlohmann::json::parse(slurp(fs::path(tmp / "t") / "ensemble.meta.json"));
  CHECK(meta["config"]["burn_in_steps"] == 200000);
  CHECK(meta["config"]["collect_count"] == 10000);
  CHECK(meta["config"]["thin"] == 7);
  CHECK(meta["config"]["min_leaf"] == 3);
}

TEST_CASE("eval, importance and filter") {
  TempDir tmp("bdt_cli_eval");
  REQUIRE(cli({"synth", "--rows", "100", "--seed", "4", "--out-dir", tmp / "d"}).code == kExitOk);
  const auto data = tmp / "d/data.csv";

  auto ev = cli({"eval", "--data", data, "--folds", "5", "--burn-in", "500", "--collect", "40",
                 "--jobs", "3", "--out-dir", tmp / "e"});
  REQUIRE(ev.code == kExitOk);
  auto csv = slurp(fs::path(tmp / "e") / "eval.csv");
  CHECK(lines_of(csv) == 7);  // note, header, five folds
  CHECK(ev.out.find("±") != std::string::npos);
  CHECK(lines_of(slurp(fs::path(tmp / "e") / "folds.csv")) == 101);

  REQUIRE(cli({"train", "--data", data, "--burn-in", "2000", "--collect", "200", "--out-dir",
               tmp / "t"})
              .code == kExitOk);
  const auto ens = tmp / "t/ensemble.jsonl";
  auto imp = cli({"importance", "--ensemble", ens, "--out-dir", tmp / "i"});
  REQUIRE(imp.code == kExitOk);
  CHECK(lines_of(slurp(fs::path(tmp / "i") / "importance.csv")) == 17);
  CHECK(imp.out.find("ExternalInjury") != std::string::npos);
  CHECK(cli({"importance", "--ensemble", ens, "--by-tree", "--out-dir", tmp / "i2"}).code ==
        kExitOk);

  auto f = cli({"filter", "--ensemble", ens, "--variable", "9", "--data", data, "--out-dir",
                tmp / "f"});
  REQUIRE(f.code == kExitOk);
  auto summary = nlohmann::json::parse(slurp(fs::path(tmp / "f") / "selection.json"));
  CHECK(summary["kept_size"].get<int>() + summary["omitted_count"].get<int>() == 200);

  // filtering the already filtered ensemble omits nothing and keeps the metrics
  auto f2 = cli({"filter", "--ensemble", tmp / "f/selected.jsonl", "--variable", "9", "--data",
                 data, "--out-dir", tmp / "f2"});
  REQUIRE(f2.code == kExitOk);
  auto s2 = nlohmann::json::parse(slurp(fs::path(tmp / "f2") / "selection.json"));
  CHECK(s2["omitted_count"] == 0);
  CHECK(s2["before"]["performance_pct"] == s2["after"]["performance_pct"]);
  CHECK(s2["before"]["entropy_bits"] == s2["after"]["entropy_bits"]);
  CHECK(slurp(fs::path(tmp / "f2") / "selected.jsonl") ==
        slurp(fs::path(tmp / "f") / "selected.jsonl"));

  CHECK(cli({"filter", "--ensemble", ens, "--variable", "0", "--out-dir", tmp / "f3"}).code ==
        kExitValidation);
  CHECK(cli({"filter", "--ensemble", ens, "--variable", "17", "--out-dir", tmp / "f3"}).code ==
        kExitValidation);
  CHECK(cli({"importance", "--ensemble", tmp / "nope.jsonl", "--out-dir", tmp / "i3"}).code ==
        kExitIo);
}

TEST_CASE("compare") {
  TempDir tmp("bdt_cli_compare");
  REQUIRE(cli({"synth", "--rows", "80", "--seed", "5", "--out-dir", tmp / "d"}).code == kExitOk);
  std::vector<std::string> args = {"compare", "--data", tmp / "d/data.csv", "--burn-in", "300",
                                   "--collect", "20", "--folds", "3", "--variable", "9",
                                   "--jobs", "2"};
  auto a = args, b = args;
  a.insert(a.end(), {"--out-dir", tmp / "c1"});
  b.insert(b.end(), {"--out-dir", tmp / "c2"});
  auto r = cli(a);
  REQUIRE(r.code == kExitOk);
  REQUIRE(cli(b).code == kExitOk);
  for (const char* name : {"comparison.csv", "comparison.txt", "folds.csv", "importance.csv"})
    CHECK(slurp(fs::path(tmp / "c1") / name) == slurp(fs::path(tmp / "c2") / name));
  auto manifest = nlohmann::json::parse(slurp(fs::path(tmp / "c1") / "manifest.json"));
  CHECK(manifest["config"]["noise_order"] == "before fold split");
  CHECK(manifest["inputs"].size() >= 1);
}

TEST_CASE("version and help") {
  auto v = cli({"--version"});
  CHECK(v.code == kExitOk);
  CHECK_FALSE(v.out.empty());
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({}).code != kExitOk);
}

}  // TEST_SUITE
