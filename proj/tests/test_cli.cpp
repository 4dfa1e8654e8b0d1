#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "gconc/cli.hpp"

using namespace gconc;

namespace {

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int shell(const std::string& command) {
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* const kSigma = "y1 - log(1+exp(y1))";

}  // namespace

TEST(Check, AcceptsAndRejects) {
  const Invocation ok = run({"check", "--expr", kSigma, "--dim", "1"});
  EXPECT_EQ(ok.code, 0) << ok.err;
  const Json j = Json::parse(ok.out);
  EXPECT_EQ(j["config"]["command"], "check");
  EXPECT_EQ(j["condition_report"]["condition_i"]["verdict"], "verified-structural");
  EXPECT_EQ(j["condition_report"]["condition_ii"]["verdict"], "verified-on-sample");
  EXPECT_TRUE(j["lemma_report"].is_null());

  const Invocation bad = run({"check", "--expr", "tanh(y1)", "--dim", "1"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_FALSE(Json::parse(bad.out)["condition_report"]["condition_ii"]["witness"].is_null());

  const Invocation text = run({"check", "--expr", "tanh(y1)", "--format", "text"});
  EXPECT_EQ(text.code, 1);
  EXPECT_NE(text.out.find("witness"), std::string::npos);
}

TEST(Check, UsageErrors) {
  const Invocation parse = run({"check", "--expr", "y1 +", "--dim", "1"});
  EXPECT_EQ(parse.code, 2);
  EXPECT_NE(parse.err.find("parse error"), std::string::npos);
  EXPECT_TRUE(parse.out.empty());
  EXPECT_EQ(run({"check", "--expr", "y3", "--dim", "2"}).code, 2);
  EXPECT_EQ(run({"check"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"check", "--expr", "y1", "--dim", "0"}).code, 2);
  EXPECT_EQ(run({"check", "--expr", "y1", "--format", "xml"}).code, 2);
  EXPECT_EQ(run({"check", "--expr", "y1", "--format", "csv"}).code, 2);
  EXPECT_EQ(run({"bounds", "--expr", "y1", "--xs", "2,1"}).code, 2);
  EXPECT_EQ(run({"bounds", "--expr", "y1", "--lambdas", "-1,0"}).code, 2);
  EXPECT_EQ(run({"bounds", "--expr", "y1", "--analytic-K", "-1"}).code, 2);
  EXPECT_EQ(run({"check", "--expr", "y1", "--samples", "abc"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(VerifyLemma, LinearAndGated) {
  const Invocation lin = run({"verify-lemma", "--expr", "y1 + 2*y2", "--dim", "2", "--lambdas", "0,0.5,1"});
  EXPECT_EQ(lin.code, 0) << lin.err;
  const Json j = Json::parse(lin.out);
  ASSERT_EQ(j["lemma_report"]["rows"].size(), 3U);
  for (const auto& row : j["lemma_report"]["rows"]) EXPECT_EQ(row["status"], "pass");
  EXPECT_TRUE(j["lemma_report"]["all_pass"].get<bool>());

  const Invocation sq = run({"verify-lemma", "--expr", "y1^2", "--lambdas", "0,0.1,0.5,1"});
  EXPECT_EQ(sq.code, 0) << sq.out;
  const Json s = Json::parse(sq.out);
  const auto& rows = s["lemma_report"]["rows"];
  EXPECT_EQ(rows[0]["status"], "pass");
  EXPECT_EQ(rows[1]["status"], "pass");
  EXPECT_EQ(rows[2]["status"], "skipped");
  EXPECT_EQ(rows[3]["status"], "skipped");
  EXPECT_TRUE(s["lemma_report"]["mean_t_variance"]["pass"].get<bool>());
  EXPECT_NEAR(s["lemma_report"]["mean_t_variance"]["rhs"].get<double>(), 2.0, 1e-9);
}

TEST(VerifyLemma, RejectedConditionSkipsEveryLambda) {
  const Invocation r = run({"verify-lemma", "--expr", "exp(y1^2)", "--lambdas", "0.5"});
  const Json j = Json::parse(r.out);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(j["lemma_report"]["rows"][0]["status"], "skipped");
  EXPECT_TRUE(j["lemma_report"]["mean_t_variance"].is_null());
  EXPECT_FALSE(j["lemma_report"]["mean_t_variance_skip_reason"].get<std::string>().empty());
}

TEST(Bounds, ReportsAndExitCodes) {
  const Invocation lin = run({"bounds", "--expr", "y1", "--samples", "200000", "--xs", "0,1,2"});
  EXPECT_EQ(lin.code, 0) << lin.err;
  const Json j = Json::parse(lin.out);
  const auto& b = j["bound_report"];
  EXPECT_EQ(b["tail_table"].size(), 3U);
  EXPECT_TRUE(b["improved_certified"].get<bool>());
  EXPECT_EQ(b["K"]["method"], "lower-bound-estimate");
  EXPECT_EQ(b["mgf_curve"]["points"].size(), 9U);
  EXPECT_EQ(j["condition_report"], b["condition_report"]);

  const Invocation k = run({"bounds", "--expr", "y1", "--samples", "1000", "--analytic-K", "2"});
  EXPECT_EQ(Json::parse(k.out)["bound_report"]["K"]["method"], "analytic");

  const Invocation bad = run({"bounds", "--expr", "y1*y2", "--dim", "2", "--samples", "20000"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_FALSE(Json::parse(bad.out)["bound_report"]["improved_certified"].get<bool>());

  const Invocation csv = run({"bounds", "--expr", "y1", "--samples", "1000", "--xs", "0,1", "--format", "csv"});
  EXPECT_EQ(csv.out.substr(0, csv.out.find('\n')),
            "x,empirical,ci_lo,ci_hi,classical,improved,improved_example");
  EXPECT_EQ(std::count(csv.out.begin(), csv.out.end(), '\n'), 3);
}

TEST(Example, BuiltinSigma) {
  const Invocation r = run({"example", "--samples", "200000"});
  EXPECT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  const auto& b = j["bound_report"];
  EXPECT_EQ(b["sigma_sup"].get<double>(), 1.0);
  EXPECT_NEAR(b["mean"]["value"].get<double>(), -0.1137, 0.002);
  EXPECT_EQ(b["tail_table"].size(), 7U);
  for (const auto& row : b["tail_table"]) {
    if (row["x"].get<double>() > 0) {
      EXPECT_LT(row["improved_example"].get<double>(), row["classical"].get<double>());
    }
  }
  const Invocation text = run({"example", "--samples", "1000", "--format", "text"});
  EXPECT_EQ(text.code, 0);
  EXPECT_FALSE(text.out.empty());
}

TEST(Binary, ByteIdenticalReruns) {
  const auto dir = std::filesystem::temp_directory_path() / "gconc_cli_test";
  std::filesystem::create_directories(dir);
  const std::string bin = GCONC_CLI_PATH;
  for (const char* cmd : {"bounds --expr 'y1 - log(1+exp(y1))' --samples 100000",
                          "verify-lemma --expr 'sin(y1) + 0.5*y2' --dim 2 --samples 100000",
                          "example --samples 50000 --format csv"}) {
    const auto a = dir / "a.out", b = dir / "b.out";
    std::filesystem::remove(a);
    std::filesystem::remove(b);
    const int ca = shell(bin + " " + cmd + " --out " + a.string());
    const int cb = shell(bin + " " + cmd + " --workers 3 --out " + b.string());
    EXPECT_EQ(ca, cb) << cmd;
    const std::string sa = slurp(a);
    EXPECT_FALSE(sa.empty()) << cmd;
    if (std::string(cmd).find("--format") == std::string::npos) {
      // The config block records the worker count; compare the rest.
      Json ja = Json::parse(sa), jb = Json::parse(slurp(b));
      ja.erase("config");
      jb.erase("config");
      EXPECT_EQ(dump_json(ja), dump_json(jb)) << cmd;
    } else {
      EXPECT_EQ(sa, slurp(b)) << cmd;
    }
    std::filesystem::remove(b);
    EXPECT_EQ(shell(bin + " " + cmd + " --out " + b.string()), ca);
    EXPECT_EQ(sa, slurp(b)) << cmd;
  }
  EXPECT_EQ(shell(bin + " check --expr 'y1 +' 2>/dev/null"), 2);
  EXPECT_EQ(shell(bin + " check --expr 'tanh(y1)' >/dev/null"), 1);
  std::filesystem::remove_all(dir);
}
