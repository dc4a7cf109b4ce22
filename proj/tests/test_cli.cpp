#include <doctest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <string>

#include "support/helpers.hpp"

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(CODECSEP_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  std::array<char, 4096> buf{};
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("help output matches the golden file") {
  std::string combined = run("--help").output;
  for (const char* sub :
       {"synth", "train-codec", "train-sep", "eval", "profile", "grad-check", "info"}) {
    combined += "\n==== " + std::string(sub) + " ====\n";
    combined += run(std::string(sub) + " --help").output;
  }
  const std::string golden_path = std::string(CODECSEP_TEST_DATA_DIR) + "/cli_help.golden";
  INFO("regenerate with: tests/update_cli_golden.sh");
  CHECK(combined == slurp(golden_path));
}

TEST_CASE("unknown flags and missing subcommands are usage errors") {
  CHECK(run("").exit_code == 1);
  CHECK(run("synth --out /tmp/x --bogus-flag 1").exit_code == 1);
  CHECK(run("nonsense").exit_code == 1);
}

TEST_CASE("synth is byte-identical across runs and prints its config") {
  test_support::TempDir dir;
  const RunResult a = run("synth --out " + dir.file("a") + " --num 2 --seed 3");
  const RunResult b = run("synth --out " + dir.file("b") + " --num 2 --seed 3");
  CHECK(a.exit_code == 0);
  CHECK(a.output.find("resolved config:") != std::string::npos);
  CHECK(slurp(dir.file("a") + "/manifest.tsv") == slurp(dir.file("b") + "/manifest.tsv"));
  CHECK(slurp(dir.file("a") + "/ex00000_mix.wav") == slurp(dir.file("b") + "/ex00000_mix.wav"));
}

TEST_CASE("profile prints a table and the waveform-rate comparison") {
  const RunResult r = run("profile --model pipeline --preset paper --duration 2.0 --sr 8000 "
                          "--compare-waveform-rate");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("GMACs") != std::string::npos);
  CHECK(r.output.find("ratio") != std::string::npos);
}

TEST_CASE("info reports data errors with exit code 2") {
  test_support::TempDir dir;
  std::ofstream(dir.file("junk.ntar"), std::ios::binary) << "not an archive";
  const RunResult r = run("info --ckpt " + dir.file("junk.ntar"));
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("error:") != std::string::npos);
}

TEST_CASE("grad-check subcommand runs a single op") {
  const RunResult r = run("grad-check --op snake --tol 1e-3");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("pass") != std::string::npos);
}
