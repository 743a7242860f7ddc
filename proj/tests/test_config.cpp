#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "cli.hpp"
#include "config.hpp"

using namespace cpe;
using namespace cpe::cli;

namespace {

const char* kMinimal = R"(seed: 7
domains:
  unit: {shape: interval, lo: 0, hi: 1}
jumps:
  narrow: {kind: uniform, support: half}
processes:
  x: {rate: 1, jump: narrow}
shc:
  process: x
  domain: unit
  times: [0.5, 1, 2]
  n_paths: 2000
)";

std::string with_half(const std::string& text) {
  // Inserts the support interval after the domains header.
  std::string out = text;
  const auto pos = out.find("domains:\n") + 9;
  out.insert(pos, "  half: {shape: interval, lo: -0.25, hi: 0.25}\n");
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cpe_test_config_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("minimal configuration") {
  const RunConfig cfg = parse_config(with_half(kMinimal));
  CHECK(cfg.seed == 7);
  REQUIRE(cfg.shc.has_value());
  CHECK(cfg.shc->n_paths == 2000);
  CHECK(cfg.domain("unit").volume() == doctest::Approx(1.0));
  CHECK(cfg.process("x").rate == 1.0);
  CHECK(cfg.sha256.size() == 64);
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("undefined references are named") {
  try {
    parse_config(kMinimal);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("half") != std::string::npos);
    CHECK(e.line() > 0);
  }
}

TEST_CASE("seed is required") {
  std::string text = with_half(kMinimal);
  text.erase(0, text.find('\n') + 1);
  CHECK_THROWS_WITH_AS(parse_config(text), doctest::Contains("seed required"), ConfigError);
}

TEST_CASE("unknown keys report their line") {
  std::string text = with_half(kMinimal) + "  bogus: 3\n";
  try {
    parse_config(text);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
    CHECK(e.line() == 14);
  }
  CHECK_THROWS_AS(parse_config("seed: 1\ndomains:\n  a: {shape: hexagon}\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed: 1\ndomains:\n  a: {shape: interval, lo: 1, hi: 0}\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed: 1\ndomains:\n  a: {shape: translate, base: a, shift: [1]}\n"), ConfigError);
}

TEST_CASE("shc output does not depend on the worker count") {
  const auto dir = scratch("workers");
  const auto cfg_path = dir / "run.yaml";
  std::ofstream(cfg_path) << with_half(kMinimal);
  std::ostringstream out, err;
  REQUIRE(run({"--config", cfg_path.string(), "--out", (dir / "w1").string(), "--workers", "1", "--quiet", "shc"},
              out, err) == kSuccess);
  REQUIRE(run({"--config", cfg_path.string(), "--out", (dir / "w4").string(), "--workers", "4", "--quiet", "shc"},
              out, err) == kSuccess);
  const std::string a = slurp(dir / "w1" / "shc.csv");
  CHECK(!a.empty());
  CHECK(a == slurp(dir / "w4" / "shc.csv"));
  CHECK(a.rfind("# config_sha256=", 0) == 0);

  const ShcCurve c = read_shc_csv((dir / "w1" / "shc.csv").string());
  CHECK(c.times.size() == 3);
  CHECK(c.volume == 1.0);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("exit");
  std::ostringstream out, err;
  CHECK(run({"--config", (dir / "missing.yaml").string(), "eig"}, out, err) == kPreconditionFailure);
  CHECK(run({"--bogus"}, out, err) == kPreconditionFailure);

  const auto cfg_path = dir / "run.yaml";
  std::ofstream(cfg_path) << with_half(kMinimal)
                          << "experiments:\n  gap:\n    type: stay-gap\n    domain: unit\n    jump: narrow\n"
                             "    steps: [0, 1]\n    quadrature: {method: monte-carlo, samples: 20000}\n";
  CHECK(run({"--config", cfg_path.string(), "--out", dir.string(), "--quiet", "experiment", "gap"}, out, err) ==
        kSuccess);
  CHECK(std::filesystem::exists(dir / "gap.json"));
  CHECK(run({"--config", cfg_path.string(), "--out", dir.string(), "experiment", "nope"}, out, err) ==
        kPreconditionFailure);
  // No eig block.
  CHECK(run({"--config", cfg_path.string(), "--out", dir.string(), "eig"}, out, err) == kPreconditionFailure);
}

TEST_CASE("eig reports the closed form in the large-support case") {
  const auto dir = scratch("eig");
  const auto cfg_path = dir / "run.yaml";
  std::ofstream(cfg_path) << "seed: 5\n"
                             "domains:\n  sq: {shape: box, lo: [0, 0], hi: [1, 1]}\n"
                             "  big: {shape: box, lo: [-4, -4], hi: [4, 4]}\n"
                             "jumps:\n  wide: {kind: uniform, support: big}\n"
                             "processes:\n  x: {rate: 1, jump: wide}\n"
                             "eig: {process: x, domain: sq, quadrature: {method: grid, cells: 64}}\n"
                             "shc: {process: x, domain: sq, times: [0, 1], n_paths: 1000}\n";
  std::ostringstream out, err;
  REQUIRE(run({"--config", cfg_path.string(), "--out", dir.string(), "eig"}, out, err) == kSuccess);
  CHECK(out.str().find("\"lambda1\": 0.984375") != std::string::npos);
  CHECK(out.str().find("\"method\": \"closed-form\"") != std::string::npos);
  REQUIRE(run({"--config", cfg_path.string(), "--out", dir.string(), "--quiet", "shc"}, out, err) == kSuccess);
  const ShcCurve c = read_shc_csv((dir / "shc.csv").string());
  CHECK(c.estimates[0].mean == 1.0);
  CHECK(c.estimates[0].std_error == 0.0);
}
