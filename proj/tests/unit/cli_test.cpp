#include "efcn_cli/cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "test_util.hpp"

namespace efcn {
namespace {

using test::TempDir;

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::vector<std::string>> csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

// Rows of one table keyed by the act column.
std::map<std::string, std::vector<double>> table(const std::string& text, const std::string& name) {
  std::map<std::string, std::vector<double>> t;
  for (const auto& row : csv(text)) {
    if (row.size() < 3 || row[0] != name) continue;
    std::vector<double> v;
    for (std::size_t i = 2; i < row.size(); ++i) v.push_back(std::stod(row[i]));
    t[row[1]] = v;
  }
  return t;
}

TEST(CliOwa, ReproducesExtendedTable) {
  const CliRun r = run({"owa", "--gamma", "0.8", "--m", "3", "--acts", "singletons,pairs,omega"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = table(r.out, "extended");
  ASSERT_EQ(t.size(), 7u);
  EXPECT_EQ(t.at("w1"), (std::vector<double>{1, 0, 0}));
  for (const char* pair : {"w1+w2", "w1+w3", "w2+w3"}) {
    double sum = 0;
    for (double v : t.at(pair)) {
      EXPECT_TRUE(v == 0.0 || std::abs(v - 0.8) < 1e-3) << pair;
      sum += v;
    }
    EXPECT_NEAR(sum, 1.6, 1e-9);
  }
  for (double v : t.at("Omega")) EXPECT_NEAR(v, 0.6819, 1e-3);
}

TEST(CliOwa, ReproducesSoftLabelTable) {
  const CliRun r = run({"owa", "--gamma", "0.8", "--m", "3", "--soft-labels", "pairs,omega"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = table(r.out, "soft");
  ASSERT_EQ(t.at("w1").size(), 7u);
  EXPECT_NEAR(t.at("w1")[3], 0.625, 1e-3);
  EXPECT_NEAR(t.at("w1")[6], 0.489, 1e-3);
  EXPECT_NEAR(t.at("w1+w2")[6], 0.782, 1e-3);
  EXPECT_NEAR(t.at("Omega")[3], 0.853, 1e-3);
  EXPECT_NEAR(t.at("w1+w2")[4], 0.5, 1e-3);
}

TEST(CliErrors, MachineReadableLineAndDistinctCodes) {
  const CliRun bad_gamma = run({"owa", "--gamma", "1.5"});
  EXPECT_EQ(bad_gamma.code, exit_code(ErrorKind::InvalidArgument));
  const auto j = nlohmann::json::parse(bad_gamma.err);
  EXPECT_EQ(j.at("error"), "invalid_argument");
  EXPECT_EQ(j.at("code"), bad_gamma.code);

  EXPECT_EQ(run({"train", "--data", "/nonexistent", "--out", "/tmp/x.efcn"}).code, exit_code(ErrorKind::Io));
  EXPECT_NE(run({"frobnicate"}).code, 0);
  EXPECT_NE(run({"owa", "--no-such-flag"}).code, 0);
  EXPECT_EQ(run({"--help"}).code, 0);

  TempDir dir;
  std::ofstream(dir.path() / "c.json") << R"({"classes": ["a", "b"], "surprise": true})";
  EXPECT_EQ(run({"synth", "--config", (dir.path() / "c.json").string(), "--out", (dir.path() / "d").string()}).code,
            exit_code(ErrorKind::Config));

  std::set<int> codes;
  for (int k = 0; k <= static_cast<int>(ErrorKind::ContractViolation); ++k) codes.insert(exit_code(ErrorKind(k)));
  EXPECT_EQ(codes.size(), static_cast<std::size_t>(ErrorKind::ContractViolation) + 1);
  EXPECT_EQ(codes.count(0), 0u);
}

TEST(CliPipeline, TrainThenEvaluateIsDeterministic) {
  TempDir dir;
  const std::string cfg = (dir.path() / "run.json").string();
  std::ofstream(cfg) << R"({"classes": ["bg", "a", "b"], "prototypes": 6,
    "training": {"epochs": 2, "batch_size": 4},
    "synthetic": {"train": 8, "test": 4}})";
  const std::string data = (dir.path() / "data").string();
  ASSERT_EQ(run({"synth", "--config", cfg, "--out", data}).code, 0);
  std::string first;
  for (int rep = 0; rep < 2; ++rep) {
    const std::string model = (dir.path() / ("m" + std::to_string(rep) + ".efcn")).string();
    const CliRun t = run({"train", "--config", cfg, "--data", data, "--out", model, "--quiet"});
    ASSERT_EQ(t.code, 0) << t.err;
    const CliRun e = run({"evaluate", "--model", model, "--data", data, "--config", cfg, "--gamma-sweep"});
    ASSERT_EQ(e.code, 0) << e.err;
    const auto rows = csv(e.out);
    ASSERT_GT(rows.size(), 11u);
    EXPECT_EQ(rows[0][0], "kind");
    if (rep == 0) first = e.out;
    else EXPECT_EQ(e.out, first);
  }

  const std::string model = (dir.path() / "m0.efcn").string();
  const std::string pred = (dir.path() / "pred").string();
  const CliRun p = run({"predict", "--model", model, "--data", data, "--out", pred});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "pred" / "predictions.json"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "pred" / "00008.ppm"));
  const CliRun fromPred = run({"evaluate", "--predictions", pred, "--data", data, "--config", cfg});
  ASSERT_EQ(fromPred.code, 0) << fromPred.err;
  const CliRun fromModel = run({"evaluate", "--model", model, "--data", data, "--config", cfg});
  EXPECT_EQ(fromPred.out, fromModel.out);

  const CliRun c = run({"calibrate", "--model", model, "--data", data, "--bins", "5"});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_EQ(csv(c.out).size(), 6u);
}

TEST(CliGradcheck, SmallReport) {
  const CliRun r = run({"gradcheck", "--params", "40"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv(r.out);
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0][0], "checked");
  EXPECT_LT(std::stod(rows[1][2]), 1e-4);
}

}  // namespace
}  // namespace efcn
