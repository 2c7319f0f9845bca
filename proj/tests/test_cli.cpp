#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "eqcomm/cli.hpp"

using namespace eqcomm;
using namespace eqcomm::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("eqcomm_test_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir.parent_path());
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Every regular file under dir, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

RunConfig config(const std::string& command, std::optional<std::size_t> n = std::nullopt) {
  RunConfig c;
  c.command = command;
  c.n = n;
  c.wall_time = false;
  return c;
}

struct Process {
  int status = -1;
  std::string out;
};

Process run_binary(const std::string& args) {
  const std::string cmd = std::string(EQCOMM_CLI_PATH) + " " + args + " 2>/dev/null";
  Process p;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return p;
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) p.out.append(buf, got);
  const int raw = ::pclose(pipe);
  p.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return p;
}

}  // namespace

TEST(CliRun, ClassicalReport) {
  auto c = config("classical-eq", 6);
  const auto r = run(c);
  EXPECT_EQ(r.exit_code, kExitPass);
  EXPECT_TRUE(r.report["pass"].get<bool>());
  EXPECT_EQ(r.report["schema"], kReportSchema);
  EXPECT_EQ(r.report["derived"]["B"], 288);
  EXPECT_FALSE(r.report.contains("wall_time_s"));
  c.wall_time = true;
  EXPECT_TRUE(run(c).report.contains("wall_time_s"));
}

TEST(CliRun, DeterministicReports) {
  for (const std::string cmd : {"gen-code", "classical-eq", "quantum-pure", "quantum-mixed", "identity-nonneg",
                                "identity-psd", "certify-lb"}) {
    const auto c = config(cmd, 4);
    EXPECT_EQ(run(c).text, run(c).text) << cmd;
  }
  auto s = config("sink-xor");
  s.variant = "nonneg";
  s.m = 3;
  EXPECT_EQ(run(s).text, run(s).text);
}

TEST(CliRun, ExitCodes) {
  auto bad_eps = config("classical-eq", 4);
  bad_eps.epsilon = "1/2";
  EXPECT_EQ(run(bad_eps).exit_code, kExitInvalidConfig);
  auto unparsable = config("classical-eq", 4);
  unparsable.epsilon = "abc";
  EXPECT_EQ(run(unparsable).exit_code, kExitInvalidConfig);
  EXPECT_EQ(run(config("no-such-command", 4)).exit_code, kExitInvalidConfig);
  EXPECT_EQ(run(config("classical-eq")).exit_code, kExitInvalidConfig);
  const auto cap = run(config("classical-eq", 11));
  EXPECT_EQ(cap.exit_code, kExitResourceCap);
  EXPECT_EQ(cap.report["error"]["kind"], "resource_cap");
  auto sink = config("sink-xor");
  sink.variant = "matrix";
  sink.m = 6;
  EXPECT_EQ(run(sink).exit_code, kExitResourceCap);

  auto corrupt = config("certify-lb", 4);
  corrupt.corrupt = std::make_pair(5ULL, 2ULL);
  const auto r = run(corrupt);
  EXPECT_EQ(r.exit_code, kExitAuditFailure);
  EXPECT_EQ(r.report["audit"]["witness"], Json::array({5, 2}));
}

TEST(CliRun, CodeRoundTripAndBandFailure) {
  const auto path = scratch("code") / "c.gf2c";
  fs::create_directories(path.parent_path());
  auto gen = config("gen-code", 6);
  gen.save = path.string();
  EXPECT_EQ(run(gen).exit_code, kExitPass);
  auto verify = config("verify-code");
  verify.input = path.string();
  const auto ok = run(verify);
  EXPECT_EQ(ok.exit_code, kExitPass);
  EXPECT_EQ(ok.report["derived"]["N"], 384);
  verify.delta = "1/100";
  const auto narrow = run(verify);
  EXPECT_EQ(narrow.exit_code, kExitAuditFailure);
  EXPECT_TRUE(narrow.report["audit"].contains("witness"));
  verify.input = (path.parent_path() / "missing.gf2c").string();
  EXPECT_EQ(run(verify).exit_code, kExitInvalidConfig);
}

TEST(CliRun, SinkMatrixCsv) {
  auto c = config("sink-xor");
  c.variant = "matrix";
  c.m = 3;
  const auto r = run(c);
  ASSERT_EQ(r.exit_code, kExitPass);
  c.format = "json";
  EXPECT_EQ(run(c).report["audit"]["ones_per_row"], 6);
  std::istringstream lines(r.text);
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), '1'), 6) << line;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 7);
  }
  EXPECT_EQ(rows, 8);
}

TEST(CliRun, AcceptanceCsvAndReportCsv) {
  auto c = config("quantum-pure", 2);
  c.format = "csv";
  const auto r = run(c);
  ASSERT_EQ(r.exit_code, kExitPass);
  EXPECT_EQ(r.text.rfind("x,y,probability\n", 0), 0u);
  EXPECT_NE(r.text.find("\n0,0,1\n"), std::string::npos);
  auto g = config("gen-code", 2);
  g.format = "csv";
  const auto t = run(g).text;
  EXPECT_EQ(t.rfind("key,value\n", 0), 0u);
  EXPECT_NE(t.find("derived.N,128\n"), std::string::npos);
}

TEST(CliRun, SavedFactorizationsVerifyAndAreDeterministic) {
  struct Case {
    std::string command, variant;
    std::optional<std::size_t> n, m;
  };
  const Case cases[] = {{"identity-nonneg", "", 4, {}},
                        {"identity-psd", "", 3, {}},
                        {"sink-xor", "nonneg", {}, 3},
                        {"sink-xor", "psd", {}, 3}};
  int i = 0;
  for (const auto& k : cases) {
    const auto a = scratch("fact_a" + std::to_string(i));
    const auto b = scratch("fact_b" + std::to_string(i));
    ++i;
    auto c = config(k.command, k.n);
    c.variant = k.variant;
    c.m = k.m;
    c.save = a.string();
    const auto first = run(c);
    ASSERT_EQ(first.exit_code, kExitPass) << first.text;
    c.save = b.string();
    run(c);
    EXPECT_EQ(tree(a), tree(b)) << k.command << " " << k.variant;

    auto v = config("verify-approx");
    v.input = a.string();
    const auto check = run(v);
    EXPECT_EQ(check.exit_code, kExitPass) << check.text;
    EXPECT_TRUE(check.report["audit"]["dim_matches_manifest"].get<bool>());
  }
}

TEST(CliRun, VerifyApproxRejectsTamperedManifest) {
  const auto dir = scratch("tamper");
  auto c = config("identity-nonneg", 3);
  c.save = dir.string();
  ASSERT_EQ(run(c).exit_code, kExitPass);
  auto manifest = Json::parse(slurp(dir / "manifest.json"));
  manifest["dim"] = manifest["dim"].get<std::size_t>() + 1;
  std::ofstream(dir / "manifest.json") << manifest.dump(2);
  auto v = config("verify-approx");
  v.input = dir.string();
  EXPECT_EQ(run(v).exit_code, kExitAuditFailure);
  v.input = (dir / "nope").string();
  EXPECT_EQ(run(v).exit_code, kExitInvalidConfig);
}

TEST(CliBinary, ExitCodesAndByteIdenticalOutput) {
  const auto a = run_binary("classical-eq --n 5 --eps 1/8 --seed 3 --no-wall-time");
  const auto b = run_binary("classical-eq --n 5 --eps 1/8 --seed 3 --no-wall-time");
  EXPECT_EQ(a.status, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(Json::parse(a.out)["derived"]["B"], 480);
  EXPECT_EQ(run_binary("classical-eq --n 5 --eps 1/2").status, 2);
  EXPECT_EQ(run_binary("classical-eq --eps 1/4").status, 2);
  EXPECT_EQ(run_binary("classical-eq --n 12").status, 3);
  EXPECT_EQ(run_binary("certify-lb --n 4 --corrupt 5,2").status, 1);
  EXPECT_EQ(run_binary("certify-lb --n 4 --corrupt 5").status, 2);
  EXPECT_EQ(run_binary("quantum-pure --n 4 --mode bogus").status, 2);
  const auto sink = run_binary("sink-xor matrix --m 3");
  EXPECT_EQ(sink.status, 0);
  EXPECT_EQ(sink.out.rfind("1,", 0), 0u);
  EXPECT_EQ(std::count(sink.out.begin(), sink.out.end(), '\n'), 8);
  EXPECT_EQ(run_binary("gen-code --n 3 --format xml").status, 2);
  EXPECT_EQ(run_binary("").status, 2);
}

TEST(CliBinary, WritesToOutputFile) {
  const auto dir = scratch("binout");
  fs::create_directories(dir);
  const auto out = dir / "r.json";
  const auto p = run_binary("gen-code --n 3 --no-wall-time -o " + out.string());
  EXPECT_EQ(p.status, 0);
  EXPECT_TRUE(p.out.empty());
  EXPECT_TRUE(Json::parse(slurp(out))["pass"].get<bool>());
}
