#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "../support/oracles.hpp"
#include "sipcq/cli.hpp"

using namespace sipcq;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

}  // namespace

TEST_CASE("exit codes") {
  const std::string ex = oracle::data_file("ex3_7.sip");
  CHECK(run({"analyze", ex, "--point=-1,0", "--probe-dirs=4", "--probe-samples=200"}).code == kExitOk);
  const Run inf = run({"analyze", ex, "--point=0,0"});
  CHECK(inf.code == kExitInfeasible);
  CHECK(inf.err.find("g1") != std::string::npos);
  CHECK(run({"analyze", ex, "--point=1"}).code == kExitValidation);
  CHECK(run({"analyze", ex, "--point=-1,0", "--variant=bogus"}).code == kExitValidation);
  CHECK(run({"analyze", ex, "--point=-1,0", "--eps-schedule=0.1,-1"}).code == kExitValidation);
  CHECK(run({"analyze", "/nonexistent.sip", "--point=0"}).code == kExitValidation);
  CHECK(run({"solve", oracle::data_file("disk.sip"), "--max-iters=1", "--report=json"}).code == kExitSolverLimit);
  CHECK(run({"frobnicate"}).code == kExitValidation);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("instance errors carry file and line") {
  const std::string path = "test_cli_bad.sip";
  std::ofstream(path) << "[problem]\nvars = x1\nminimize = x1 +\n";
  const Run r = run({"analyze", path, "--point=0"});
  CHECK(r.code == kExitValidation);
  CHECK(r.err.find(path + ":3:") != std::string::npos);
}

TEST_CASE("deterministic JSON is byte-identical") {
  const std::vector<std::string> args{"analyze",         oracle::data_file("ex3_5.sip"), "--point=-1,0",
                                      "--report=json",   "--deterministic",             "--probe-dirs=8",
                                      "--probe-samples=300"};
  const Run a = run(args);
  const Run b = run(args);
  REQUIRE(a.code == kExitOk);
  CHECK(a.out == b.out);
  const auto j = nlohmann::json::parse(a.out);
  CHECK(j.at("generated_at").is_null());
  CHECK(j.at("cq").at("pmfcq").at("verdict") == "fails");
}

TEST_CASE("solve then analyze") {
  const Run r = run({"solve", oracle::data_file("convex_toy.sip"), "--report=json", "--deterministic",
                     "--probe-dirs=0"});
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("solver").at("status") == "converged");
  CHECK(j.at("point")[0].get<double>() == doctest::Approx(-0.5).epsilon(1e-6));
}

TEST_CASE("output file") {
  const std::string path = "test_cli_out.json";
  const Run r = run({"analyze", oracle::data_file("ex3_7.sip"), "--point=-1,0", "--report=json",
                     "--output=" + path, "--probe-dirs=0"});
  REQUIRE(r.code == kExitOk);
  std::ifstream in(path);
  const auto j = nlohmann::json::parse(in);
  CHECK(j.at("cq").at("nfmcq").at("verdict") == "fails");
}
