#include <gtest/gtest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "semiclassic/cli.hpp"

using namespace semiclassic;
namespace fs = std::filesystem;

namespace {

std::string fixture(const std::string& name) { return testutil::fixtures_dir() + "/" + name; }

std::string tmp_path(const std::string& name) { return ::testing::TempDir() + name; }

// Good fixtures, with the subcommand read back out of the file itself.
std::vector<std::pair<std::string, std::string>> good_fixtures() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& entry : fs::directory_iterator(testutil::fixtures_dir())) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    const std::string path = entry.path().string();
    const RunConfig cfg = parse_config(testutil::read_file(path));
    out.emplace_back(std::string(to_string(cfg.command)), path);
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  return out;
}

}  // namespace

TEST(ParseConfig, RoundTripAndDefaults) {
  const RunConfig cfg = parse_config(
      R"({"command": "classify", "payload": {"matrix": [[1.0, 0.0], [0.0, 1.0]]}})");
  EXPECT_EQ(cfg.command, Command::Classify);
  EXPECT_EQ(cfg.output.format, OutputFormat::Json);
  EXPECT_EQ(cfg.output.path, "-");

  const RunConfig cfg2 = parse_config(
      R"({"command": "eta", "payload": {"sigma": [0.1, 1.0, 0.0]},
          "output": {"format": "csv", "path": "report.csv"}})");
  EXPECT_EQ(cfg2.command, Command::Eta);
  EXPECT_EQ(cfg2.output.format, OutputFormat::Csv);
  EXPECT_EQ(cfg2.output.path, "report.csv");
}

TEST(ParseConfig, SyntaxErrorsCarryLineAndColumn) {
  const std::string text = "{\n  \"command\": \"classify\",\n  bad\n}";
  try {
    parse_config(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_GE(e.column(), 1);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(ParseConfig, UnknownAndMissingFieldsNameTheField) {
  const auto field_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const SchemaError& e) {
      return e.field();
    }
    return std::string("(no error)");
  };
  EXPECT_EQ(field_of(R"({"comand": "classify", "payload": {}})"), "comand");
  EXPECT_EQ(field_of(R"({"command": "classify",
                         "payload": {"matrix": [[1.0]], "metricc": true}})"),
            "payload.metricc");
  EXPECT_EQ(field_of(R"({"command": "classify", "payload": {}})"), "payload.matrix");
  EXPECT_EQ(field_of(R"({"command": "eta",
                         "payload": {"matrix": [[1.0]], "sigma": [0.0, 1.0, 0.0]}})"),
            "payload.matrix");
  EXPECT_EQ(field_of(R"({"command": "classify", "payload": {"matrix": [[1.0]]},
                         "output": {"format": "yaml"}})"),
            "output.format");
  EXPECT_EQ(field_of(R"({"command": "witten_sum",
                         "payload": {"connections": [], "level": 1, "group": "su2"}})"),
            "payload.b1");
  EXPECT_EQ(field_of(R"({"command": "warp", "payload": {}})"), "command");
  const std::string msg = "schema violation at field \"payload.matrix\"";
  try {
    parse_config(R"({"command": "classify", "payload": {}})");
  } catch (const SchemaError& e) {
    EXPECT_EQ(std::string(e.what()), msg);
  }
}

TEST(Serialization, JsonFloatsUseSeventeenDigitsAndKeepKeyOrder) {
  json doc;
  doc["zeta"] = 0.1;
  doc["alpha"] = json::array({1.0 / 3.0, 7});
  doc["flag"] = true;
  const std::string out = dump_report_json(doc);
  EXPECT_EQ(out,
            "{\"zeta\":0.10000000000000001,"
            "\"alpha\":[0.33333333333333331,7],"
            "\"flag\":true}\n");
}

TEST(Serialization, CsvFieldsQuoteSeparatorsAndQuotes) {
  EXPECT_EQ(detail::csv_field("plain"), "plain");
  EXPECT_EQ(detail::csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(detail::csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(detail::csv_field("1/3,2/3"), "\"1/3,2/3\"");
}

TEST(CliRuns, EveryGoodFixtureExitsZero) {
  const auto fixtures = good_fixtures();
  ASSERT_GE(fixtures.size(), 11u);
  int idx = 0;
  for (const auto& [cmd, path] : fixtures) {
    const std::string out = tmp_path("fixture_" + std::to_string(idx++) + ".json");
    const auto r = testutil::run_cli(cmd + " --config " + path + " --out " + out);
    EXPECT_EQ(r.exit_code, 0) << path << "\n" << r.err;
    const std::string body = testutil::read_file(out);
    EXPECT_EQ(body.rfind("{\"version\":", 0), 0u) << path;
    EXPECT_NE(body.find("\"command\":\"" + cmd + "\""), std::string::npos) << path;
  }
}

TEST(CliRuns, CommandMismatchIsAConfigError) {
  const auto r = testutil::run_cli("eta --config " + fixture("classify.json"));
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("ConfigError"), std::string::npos);
}

TEST(CliRuns, MalformedInputsMapToDocumentedExitCodes) {
  const struct {
    const char* cmd;
    const char* file;
    int code;
    const char* error_class;
  } cases[] = {
      {"classify", "malformed/bad_syntax.json", 2, "ParseError"},
      {"classify", "malformed/unknown_key.json", 2, "SchemaError"},
      {"classify", "malformed/missing_matrix.json", 2, "SchemaError"},
      {"mapping_torus", "malformed/beta_identity.json", 3, "NonIsolatedError"},
      {"eta", "malformed/kernel_sigma.json", 4, "KernelError"},
      {"determinant", "malformed/determinant_low_mmax.json", 5, "OracleMismatchError"},
  };
  for (const auto& c : cases) {
    const auto r = testutil::run_cli(std::string(c.cmd) + " --config " + fixture(c.file));
    EXPECT_EQ(r.exit_code, c.code) << c.file << "\n" << r.err;
    EXPECT_NE(r.err.find(c.error_class), std::string::npos) << c.file;
    // The error report still goes to the configured output (stdout here).
    EXPECT_NE(r.out.find(c.error_class), std::string::npos) << c.file;
  }
}

TEST(CliRuns, UnwritableOutputPathExitsSix) {
  const auto r = testutil::run_cli("witten_sum --config " + fixture("witten_single.json") +
                                   " --out /nonexistent_dir_for_reports/report.json");
  EXPECT_EQ(r.exit_code, 6);
  EXPECT_NE(r.err.find("IoError"), std::string::npos);
}

TEST(CliRuns, StdoutReportKeepsTheDocumentedKeyOrder) {
  const auto r = testutil::run_cli("classify --config " + fixture("classify.json"));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("{\"version\":", 0), 0u);
  const size_t v = r.out.find("\"version\"");
  const size_t c = r.out.find("\"command\"");
  const size_t e = r.out.find("\"config_echo\"");
  const size_t res = r.out.find("\"results\"");
  const size_t d = r.out.find("\"diagnostics\"");
  EXPECT_LT(v, c);
  EXPECT_LT(c, e);
  EXPECT_LT(e, res);
  EXPECT_LT(res, d);
  const json doc = json::parse(r.out);
  EXPECT_EQ(doc["results"]["blocks"].size(), 2u);
  EXPECT_EQ(doc["results"]["blocks"][0]["kind"], "hyperbolic");
}

TEST(CliRuns, ClassifyIsGracefulOffTheSymplecticGroup) {
  const std::string cfg = tmp_path("nonsymp.json");
  testutil::write_file(cfg, R"({"command": "classify",
                                "payload": {"matrix": [[1.0, 1.0], [1.0, 1.0]]}})");
  const auto r = testutil::run_cli("classify --config " + cfg);
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("\"symplectic\":false"), std::string::npos);

  const std::string cfg2 = tmp_path("parabolic.json");
  testutil::write_file(cfg2, R"({"command": "classify",
                                 "payload": {"matrix": [[1.0, 1.0], [0.0, 1.0]]}})");
  const auto r2 = testutil::run_cli("classify --config " + cfg2);
  EXPECT_EQ(r2.exit_code, 0) << r2.err;
  EXPECT_NE(r2.out.find("\"sl2_class\":\"parabolic\""), std::string::npos);
  EXPECT_NE(r2.out.find("no block decomposition"), std::string::npos);
}

TEST(CliRuns, RepeatedRunsAreByteIdentical) {
  // The identical invocation twice: the report echoes the effective output
  // path, so the runs must share it for the bytes to be comparable.
  const std::string out = tmp_path("repeat.json");
  const std::string cfg = fixture("witten_multi.json");
  ASSERT_EQ(testutil::run_cli("witten_sum --config " + cfg + " --out " + out).exit_code, 0);
  const std::string first = testutil::read_file(out);
  ASSERT_EQ(testutil::run_cli("witten_sum --config " + cfg + " --out " + out).exit_code, 0);
  EXPECT_EQ(first, testutil::read_file(out));
  EXPECT_FALSE(first.empty());
}

TEST(CliRuns, CsvFormatTabulatesResults) {
  const std::string out = tmp_path("classify.csv");
  const auto r = testutil::run_cli("classify --config " + fixture("classify.json") +
                                   " --format csv --out " + out);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const std::string body = testutil::read_file(out);
  EXPECT_EQ(body.rfind("block,kind,param_h,param_z_re,param_z_im\n", 0), 0u);
  EXPECT_NE(body.find("0,hyperbolic,"), std::string::npos);
  EXPECT_NE(body.find("1,hyperbolic,"), std::string::npos);

  const std::string out2 = tmp_path("witten.csv");
  const auto r2 = testutil::run_cli("witten_sum --config " + fixture("witten_multi.json") +
                                    " --format csv --out " + out2);
  ASSERT_EQ(r2.exit_code, 0) << r2.err;
  const std::string body2 = testutil::read_file(out2);
  EXPECT_EQ(body2.rfind("label,term_re,term_im\n", 0), 0u);
  EXPECT_NE(body2.find("\"cs=1/4,mult=2\","), std::string::npos);
}

TEST(CliRuns, SpectralFlowWritesACompanionPlotTable) {
  const std::string out = tmp_path("flow.json");
  const auto r = testutil::run_cli("spectral_flow --config " +
                                   fixture("spectral_flow_crossing.json") + " --out " + out);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const std::string plot = testutil::read_file(out + ".plot.csv");
  EXPECT_EQ(plot.rfind("tau,lambda_0", 0), 0u);
  const size_t lines = std::count(plot.begin(), plot.end(), '\n');
  EXPECT_EQ(lines, 402u);  // header plus steps+1 samples
  const json doc = json::parse(testutil::read_file(out));
  EXPECT_EQ(doc["results"]["flow"].get<int>(), -1);

  // To stdout the table is skipped and the skip is recorded.
  const auto r2 =
      testutil::run_cli("spectral_flow --config " + fixture("spectral_flow_crossing.json"));
  ASSERT_EQ(r2.exit_code, 0) << r2.err;
  EXPECT_NE(r2.out.find("eigenvalue plot table skipped"), std::string::npos);
}

TEST(CliRuns, FormatOverrideRejectsUnknownValues) {
  const auto r = testutil::run_cli("classify --config " + fixture("classify.json") +
                                   " --format xml");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("ConfigError"), std::string::npos);
}
