#include <gtest/gtest.h>

#include <json.hpp>
#include <sstream>

#include "qpkam/config.hpp"
#include "qpkam/pipeline.hpp"

using namespace qpkam;
using nlohmann::json;

namespace {

// reference tables on a small cut so every stage runs in a few seconds
json small_config() {
  return json::parse(R"({
    "d": 2,
    "omega": [1.2360679774997896, 1.4142135623730951],
    "epsilon": 1e-3,
    "jmax": 12,
    "lmax": 6,
    "pad": 6,
    "evolution": { "T": 1, "dt": 1e-3, "sample_dt": 0.5 },
    "measure": { "gammas": [0.1, 0.05], "sites": 2, "lmax": 3, "samples": 500 },
    "seed": 7,
    "potential": {
      "V2": [ { "l": [0, 0], "k": 0, "re": 0.15 }, { "l": [1, 0], "k": 1, "re": 0.125 } ],
      "W1": [ { "l": [0, 0], "k": 0, "re": 0.2 }, { "l": [0, 1], "k": 0, "re": 0.1 } ],
      "W0": [ { "l": [0, 0], "k": 0, "re": 0.25 }, { "l": [0, 0], "k": 1, "re": 0.125 } ]
    }
  })");
}

PipelineResult run(const json& cfg, Stage stage = Stage::All) {
  PipelineOptions opt;
  opt.stage = stage;
  return run_pipeline(parse_config(cfg.dump()), opt);
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, ReferenceFileLoads) {
  RunConfig c = load_config(std::string(QPKAM_SOURCE_DIR) + "/configs/reference.json");
  EXPECT_EQ(c.d, 2);
  EXPECT_EQ(c.jmax, 32);
  EXPECT_EQ(c.potential.V2.size(), 3u);
  EXPECT_NEAR(c.gamma_value(), std::sqrt(1e-3), 1e-15);
  BuiltInput b = build_input(c);
  EXPECT_TRUE(b.symmetry_completed);
  EXPECT_LT(b.input.symmetry_defect(), 1e-13);
  // echo is a fixed point
  EXPECT_EQ(config_echo(parse_config(config_echo(c))), config_echo(c));
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, SyntaxErrorNamesLine) {
  const std::string msg = config_error("{\n  \"d\": 2,\n  \"omega\": [1.1, 1.3,\n}\n");
  EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
}

TEST(Config, MalformedRecordNamesField) {
  json c = small_config();
  c["potential"]["V2"][1].erase("k");
  EXPECT_NE(config_error(c.dump()).find("'potential.V2[1]': missing 'k'"), std::string::npos) << config_error(c.dump());
  c = small_config();
  c["potential"]["W0"][0]["l"] = {0, 0, 0};
  EXPECT_NE(config_error(c.dump()).find("potential.W0[0].l"), std::string::npos) << config_error(c.dump());
  c = small_config();
  c["kam"] = {{"chi", 1.5}, {"typo", 1}};
  EXPECT_NE(config_error(c.dump()).find("kam.typo"), std::string::npos) << config_error(c.dump());
  c = small_config();
  c["epsilon"] = -1.0;
  EXPECT_NE(config_error(c.dump()).find("'epsilon'"), std::string::npos);
}

TEST(Config, DirectTablesMustBeSelfAdjoint) {
  json c = small_config();
  c["potential"].erase("W1");
  c["potential"].erase("W0");
  c["potential"]["V2"] = json::parse(R"([ { "l": [0, 0], "k": 0, "re": 0.15 } ])");
  // with constant V2: V1 = i w1 with w1 real constant is admissible; a real constant V1 is not
  c["potential"]["V1"] = json::parse(R"([ { "l": [0, 0], "k": 0, "re": 0.0, "im": 0.2 } ])");
  c["potential"]["V0"] = json::parse(R"([ { "l": [0, 0], "k": 0, "re": 0.25 } ])");
  EXPECT_NO_THROW(build_input(parse_config(c.dump())));
  c["potential"]["V1"] = json::parse(R"([ { "l": [0, 0], "k": 0, "re": 0.2 } ])");
  EXPECT_THROW(build_input(parse_config(c.dump())), ConfigError);
}

TEST(Config, SampledOmegaIsSeeded) {
  json c = small_config();
  c["omega"] = "sample";
  const Frequency a = resolve_omega(parse_config(c.dump()));
  const Frequency b = resolve_omega(parse_config(c.dump()));
  EXPECT_EQ(a.values(), b.values());
  for (double w : a.values()) {
    EXPECT_GE(w, 1.0);
    EXPECT_LT(w, 2.0);
  }
  c["seed"] = 8;
  EXPECT_NE(resolve_omega(parse_config(c.dump())).values(), a.values());
}

TEST(Stages, Names) {
  for (Stage s : {Stage::Regularize, Stage::Kam, Stage::Evolve, Stage::Measure, Stage::All})
    EXPECT_EQ(parse_stage(stage_name(s)), s);
  EXPECT_THROW(parse_stage("bogus"), ConfigError);
}

TEST(Pipeline, FullRunSucceedsWithCertificates) {
  PipelineResult r = run(small_config());
  ASSERT_EQ(r.exit_code, kExitOk) << r.message;
  for (const char* f : {"run.json", "kam_log.jsonl", "spectrum.csv", "trace.csv", "measure.csv"})
    EXPECT_TRUE(r.files.count(f)) << f;
  EXPECT_FALSE(r.files.count("operator.txt"));
  EXPECT_FALSE(r.certificates.empty());
  for (const auto& c : r.certificates) EXPECT_TRUE(c.pass) << c.name << " " << c.value << " > " << c.limit;
  json rep = json::parse(r.files.at("run.json"));
  EXPECT_EQ(rep["status"], "ok");
  EXPECT_EQ(rep["exit_code"], 0);
  EXPECT_EQ(r.files.at("kam_log.jsonl").find("wall_ms"), std::string::npos);
}

TEST(Pipeline, DeterministicBundle) {
  PipelineResult a = run(small_config(), Stage::Kam), b = run(small_config(), Stage::Kam);
  ASSERT_EQ(a.exit_code, kExitOk);
  EXPECT_EQ(a.files, b.files);
  EXPECT_FALSE(a.files.count("trace.csv"));
}

TEST(Pipeline, ZeroEpsilonIsTrivial) {
  json c = small_config();
  c["epsilon"] = 0.0;
  c["gamma"] = 0.01;
  PipelineResult r = run(c, Stage::Evolve);
  ASSERT_EQ(r.exit_code, kExitOk) << r.message;
  json rep = json::parse(r.files.at("run.json"));
  EXPECT_EQ(rep["regularization"]["lambdas"], json({1.0, 0.0, 0.0, 0.0})) << rep["regularization"].dump();
  EXPECT_EQ(rep["kam"]["steps"], 0);
}

TEST(Pipeline, ResonantOmegaIsExcluded) {
  json c = small_config();
  c["omega"] = {1.5, 1.5};
  PipelineResult r = run(c, Stage::Regularize);
  EXPECT_EQ(r.exit_code, kExitOmegaExcluded);
  EXPECT_EQ(json::parse(r.files.at("run.json"))["status"], "omega excluded");
}

TEST(Pipeline, DumpOperatorAndLogs) {
  PipelineOptions opt;
  opt.stage = Stage::Regularize;
  opt.dump_operator = true;
  opt.json_logs = true;
  std::ostringstream log;
  opt.log = &log;
  PipelineResult r = run_pipeline(parse_config(small_config().dump()), opt);
  ASSERT_EQ(r.exit_code, kExitOk);
  EXPECT_TRUE(r.files.count("operator.txt"));
  std::istringstream lines(log.str());
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    EXPECT_NO_THROW((void)json::parse(line)) << line;
    ++n;
  }
  EXPECT_GT(n, 0);
}
