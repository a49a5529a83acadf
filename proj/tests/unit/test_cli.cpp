#include <catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "support.hpp"

using namespace lsdf;
using namespace lsdf::test;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "lsdf");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("lsdf_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::size_t line_count(const fs::path& p) {
  const auto text = read_text_file(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("K accepts absolute counts and multiples of N", "[cli]") {
  CHECK(cli::parse_count("20N", 5) == 100);
  CHECK(cli::parse_count("N", 30) == 30);
  CHECK(cli::parse_count("17", 30) == 17);
  CHECK_THROWS_AS(cli::parse_count("0", 5), cli::UsageError);
  CHECK_THROWS_AS(cli::parse_count("xN", 5), cli::UsageError);
  CHECK(cli::parse_schedule("N,2N,5N,10N,20N", 5) == std::vector<std::size_t>{5, 10, 25, 50, 100});
}

TEST_CASE("validate exit codes", "[cli]") {
  const auto ok = run({"validate", "case14"});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("valid") != std::string::npos);

  const auto bad = run({"validate", fixture_path("malformed.m").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("line 13") != std::string::npos);

  const auto island = run({"validate", fixture_path("isolated.json").string()});
  CHECK(island.code == 1);
  CHECK(island.out.find("disconnected") != std::string::npos);

  CHECK(run({"validate", "no_such_case"}).code == 2);
}

TEST_CASE("validate exports canonical JSON", "[cli]") {
  const auto dir = scratch("json");
  const auto path = (dir / "case5.json").string();
  REQUIRE(run({"validate", "case5", "--json-out", path}).code == 0);
  CHECK(load_case(path) == bundled("case5"));
}

TEST_CASE("every subcommand documents its flags", "[cli]") {
  const std::vector<std::pair<std::string, std::vector<std::string>>> expected = {
      {"validate", {"--json-out"}},
      {"pf", {"--out"}},
      {"sample", {"--R", "--K", "--seed", "--freeze-eta", "--jobs", "--out-dir"}},
      {"ptdf", {"--slack", "--out-dir"}},
      {"fit", {"--samples", "--ridge", "--jobs", "--out-dir"}},
      {"evaluate", {"--factors", "--samples", "--jobs", "--out-dir"}},
      {"compare", {"--R", "--K", "--K-test", "--seed", "--test-seed", "--slack", "--ridge", "--jobs", "--out-dir"}},
      {"converge", {"--R", "--schedule", "--reference", "--grid-points", "--seed", "--jobs", "--out-dir"}},
  };
  for (const auto& [cmd, flags] : expected) {
    INFO(cmd);
    const auto r = run({cmd, "--help"});
    CHECK(r.code == 0);
    for (const auto& f : flags) CHECK(r.out.find(f) != std::string::npos);
  }
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("unknown flags and missing seeds are errors", "[cli]") {
  CHECK(run({"validate", "case5", "--frobnicate"}).code == 2);
  CHECK(run({"sample", "case5", "--K", "5"}).code == 2);
  CHECK(run({"compare", "case5"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"sample", "case5", "--seed", "1", "--R", "1.5"}).code == 2);
}

TEST_CASE("pf prints a converged solution", "[cli]") {
  const auto r = run({"pf", "case14"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["converged"].get<bool>());
  CHECK(j["buses"].size() == 14);
}

TEST_CASE("frozen sampling at R = 0 writes identical rows", "[cli]") {
  const auto dir = scratch("sample");
  const auto r = run({"sample", "case5", "--R", "0", "--K", "5", "--freeze-eta", "--seed", "3",
                      "--out-dir", dir.string()});
  REQUIRE(r.code == 0);
  const auto path = dir / "samples" / "case5_R0_K5_s3.csv";
  REQUIRE(fs::exists(path));
  const auto set = parse_samples(read_text_file(path));
  REQUIRE(set.size() == 5);
  for (const auto& s : set.scenarios) {
    CHECK(s.p_inj == set.scenarios[0].p_inj);
    CHECK(s.p_branch == set.scenarios[0].p_branch);
  }
}

TEST_CASE("sample, fit, ptdf and evaluate chain through files", "[cli]") {
  const auto dir = scratch("chain");
  const auto d = dir.string();
  REQUIRE(run({"sample", "case14", "--R", "0.4", "--K", "20N", "--seed", "1", "--out-dir", d}).code == 0);
  REQUIRE(run({"sample", "case14", "--R", "0.4", "--K", "10N", "--seed", "2", "--out-dir", d}).code == 0);
  const auto train = (dir / "samples" / "case14_R0.4_K280_s1.csv").string();
  const auto test = (dir / "samples" / "case14_R0.4_K140_s2.csv").string();
  REQUIRE(run({"fit", "case14", "--samples", train, "--out-dir", d}).code == 0);
  REQUIRE(run({"ptdf", "case14", "--out-dir", d}).code == 0);
  const auto lsdf_csv_path = (dir / "factors" / "case14_lsdf_R0.4_K280_s1.csv").string();
  const auto ptdf_csv_path = (dir / "factors" / "case14_ptdf_slack1.csv").string();
  CHECK(fs::exists(dir / "factors" / "case14_lsdf_R0.4_K280_s1.json"));
  CHECK(fs::exists(dir / "reports" / "case14_ptdf_slack1_histogram.csv"));

  const auto le = run({"evaluate", "case14", "--factors", lsdf_csv_path, "--samples", test, "--out-dir", d});
  REQUIRE(le.code == 0);
  const auto pe = run({"evaluate", "case14", "--factors", ptdf_csv_path, "--samples", test, "--out-dir", d});
  REQUIRE(pe.code == 0);
  const auto lj = nlohmann::json::parse(read_text_file(dir / "reports" / "case14_lsdf_R0.4_K280_s1_on_case14_R0.4_K140_s2.json"));
  const auto pj = nlohmann::json::parse(read_text_file(dir / "reports" / "case14_ptdf_slack1_on_case14_R0.4_K140_s2.json"));
  CHECK(lj["avg_err_mw"].get<double>() * 10.0 < pj["avg_err_mw"].get<double>());

  // Samples from another case are refused.
  CHECK(run({"fit", "case5", "--samples", train, "--out-dir", d}).code == 2);
  CHECK(run({"fit", "case14", "--samples", (dir / "missing.csv").string()}).code == 2);
}

TEST_CASE("converge writes one row per schedule entry", "[cli]") {
  const auto dir = scratch("converge");
  const auto r = run({"converge", "case5", "--R", "0.5", "--schedule", "N,2N,5N,10N,20N", "--seed", "4",
                      "--out-dir", dir.string()});
  REQUIRE(r.code == 0);
  const auto path = dir / "reports" / "case5_converge_R0.5_ref250_s4.csv";
  REQUIRE(fs::exists(path));
  CHECK(line_count(path) == 6);
}

TEST_CASE("sampling beyond the transfer limit exits with 3", "[cli]") {
  const auto dir = scratch("overload");
  auto j = to_json(fixture("two_bus.json"));
  j["buses"][1]["p_load_max"] = 400.0;
  const auto path = (dir / "overloaded.json").string();
  write_text_file(path, j.dump());
  CHECK(run({"sample", path, "--K", "8", "--seed", "1", "--R", "0.1", "--out-dir", dir.string()}).code == 3);
}

TEST_CASE("compare is a pure function of its inputs", "[cli]") {
  const auto a = scratch("pure_a");
  const auto b = scratch("pure_b");
  REQUIRE(run({"compare", "case5", "--R", "0.4", "--K", "20N", "--seed", "7", "--out-dir", a.string()}).code == 0);
  REQUIRE(run({"compare", "case5", "--R", "0.4", "--K", "20N", "--seed", "7", "--out-dir", b.string(),
               "--jobs", "3"})
              .code == 0);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(e.path(), a);
    INFO(rel.string());
    CHECK(read_text_file(e.path()) == read_text_file(b / rel));
  }
  CHECK(files == 6);
}
