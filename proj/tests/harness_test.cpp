#include "gectl/harness.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "gectl/errors.hpp"

namespace gectl {
namespace {

namespace fs = std::filesystem;

KeyValueConfig ParseText(const std::string& text) {
  std::istringstream is(text);
  return KeyValueConfig::Parse(is, {"drag_sample"});
}

TEST(KeyValueConfigTest, ParsesCommentsAndTypes) {
  const KeyValueConfig c = ParseText(
      "# header\n"
      "a = 1.5   # trailing\n"
      "\n"
      "v = 1, 2, 3\n"
      "flag = on\n");
  EXPECT_EQ(c.GetDouble("a", 0.0), 1.5);
  EXPECT_EQ(c.GetVec3("v", Vec3::Zero()), Vec3(1, 2, 3));
  EXPECT_TRUE(c.GetBool("flag", false));
  EXPECT_EQ(c.GetDouble("missing", 7.0), 7.0);
}

TEST(KeyValueConfigTest, ErrorsCarryKeyAndLine) {
  try {
    ParseText("a = 1\n\nb = oops\n").GetDouble("b", 0.0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "b");
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_THROW(ParseText("a = 1\na = 2\n"), ConfigError);
  EXPECT_NO_THROW(ParseText("drag_sample = 1\ndrag_sample = 2\n"));
  EXPECT_THROW(ParseText("no equals sign\n"), ConfigError);
  EXPECT_THROW(ParseText("v = 1, 2\n").GetVec3("v", Vec3::Zero()), ConfigError);
  EXPECT_THROW(ParseText("x = 1\n").GetU64("seed"), ConfigError);
}

TEST(ScenarioConfigTest, UnknownKeyRejected) {
  try {
    ScenarioFromConfig(ParseText("seed = 1\ntrajectory.typo = 3\n"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "trajectory.typo");
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(ScenarioConfigTest, InvalidValuesRejected) {
  EXPECT_THROW(ScenarioFromConfig(ParseText("seed = 1\ngains.torque_mode = magic\n")),
               ConfigError);
  EXPECT_THROW(ScenarioFromConfig(ParseText("seed = 1\nsim.dt = -1\n")), ConfigError);
  EXPECT_THROW(ScenarioFromConfig(ParseText("seed = 1\nvehicle.mass = 0\n")), ConfigError);
}

TEST(ScenarioConfigTest, SerializeRoundTrip) {
  Scenario s;
  s.name = "round_trip";
  s.seed = 42;
  s.trajectory.kind = TrajectorySpec::Kind::kHoverDescent;
  s.trajectory.descent.end_height = 0.11;
  s.trajectory.duration = 12.5;
  s.vehicle.mass = 1.234;
  s.ground.g5 = 1.1e-3;
  s.sim.model_mismatch = 0.05;
  s.sim.external.force = Vec3(0.5, 0, 0);
  s.gains.torque_mode = TorqueMode::kIndi;
  s.policy = PolicyKind::kFeedforward;
  s.lookahead = 0.001;
  const std::string text = SerializeScenario(s);
  const Scenario back = ScenarioFromConfig(ParseText(text));
  EXPECT_EQ(SerializeScenario(back), text);
  EXPECT_EQ(back.vehicle.mass, 1.234);
  EXPECT_EQ(back.gains.torque_mode, TorqueMode::kIndi);
}

TEST(ScenarioConfigTest, GroundFileMerges) {
  const fs::path dir = fs::temp_directory_path() / "gectl_ground_file_test";
  fs::create_directories(dir);
  {
    std::ofstream g(dir / "ground.cfg");
    g << "ground.g2 = 0.05\nground.g1 = 0.1\n";
    std::ofstream s(dir / "scn.cfg");
    s << "seed = 3\nground_file = ground.cfg\nground.g1 = 0.2\n";
    std::ofstream bad(dir / "bad_ground.cfg");
    bad << "sim.dt = 0.001\n";
    std::ofstream sb(dir / "bad.cfg");
    sb << "seed = 3\nground_file = bad_ground.cfg\n";
  }
  const Scenario s = LoadScenario(dir / "scn.cfg");
  EXPECT_EQ(s.ground.g2, 0.05);
  EXPECT_EQ(s.ground.g1, 0.2);
  EXPECT_THROW(LoadScenario(dir / "bad.cfg"), ConfigError);
  EXPECT_THROW(LoadScenario(dir / "missing.cfg"), ConfigError);
  fs::remove_all(dir);
}

Scenario ShortLemniscate(std::uint64_t seed) {
  Scenario s;
  s.name = "lem";
  s.seed = seed;
  s.trajectory.kind = TrajectorySpec::Kind::kLemniscate;
  s.trajectory.lemniscate.center = Vec3(0, 0, 0.3);
  s.trajectory.duration = 3.0;
  s.sim.imu_noise = {0.05, 0.005};
  s.sim.model_mismatch = 0.05;
  return s;
}

TEST(LogCsvTest, RoundTripIsExact) {
  const RunResult r = gectl::Run(ShortLemniscate(3));
  ASSERT_EQ(r.exit_code, kExitOk);
  std::stringstream ss;
  WriteLogCsv(ss, r.log);
  const TrajectoryLog back = ReadLogCsv(ss);
  ASSERT_EQ(back.rows.size(), r.log.rows.size());
  for (std::size_t i = 0; i < back.rows.size(); ++i) ASSERT_TRUE(back.rows[i] == r.log.rows[i]);
  std::istringstream bad("t,p_x\n1,2\n");
  EXPECT_THROW(ReadLogCsv(bad), InputError);
}

TEST(FormatDoubleTest, ShortestRoundTrip) {
  EXPECT_EQ(FormatDouble(0.1), "0.1");
  EXPECT_EQ(FormatDouble(-2.0), "-2");
  const double x = 1.0 / 3.0;
  EXPECT_EQ(std::stod(FormatDouble(x)), x);
}

TEST(MetricsTest, AggregatesDominateComponents) {
  const RunResult r = gectl::Run(ShortLemniscate(4));
  const MetricsReport& m = r.metrics;
  EXPECT_GE(m.rmse_all, m.rmse_xoy);
  EXPECT_GE(m.rmse_all, m.rmse_z);
  EXPECT_GE(m.max_error, m.rmse_all * 0.999);
  EXPECT_GT(m.samples, 0);
  EXPECT_EQ(m.status, "ok");
  const MetricsReport back = MetricsReport::FromJson(m.ToJson());
  EXPECT_EQ(back.ToJson(), m.ToJson());
}

TEST(MetricsTest, LogDecimationInvariant) {
  Scenario a = ShortLemniscate(5);
  a.sim.imu_noise = {};
  a.log_decimation = 1;
  Scenario b = a;
  b.log_decimation = 4;
  const MetricsReport ma = gectl::Run(a).metrics, mb = gectl::Run(b).metrics;
  EXPECT_NEAR(ma.rmse_all, mb.rmse_all, 0.01 * ma.rmse_all);
}

TEST(MetricsTest, Deterministic) {
  const RunResult a = gectl::Run(ShortLemniscate(9)), b = gectl::Run(ShortLemniscate(9));
  std::stringstream sa, sb;
  WriteLogCsv(sa, a.log);
  WriteLogCsv(sb, b.log);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.metrics.ToJson(), b.metrics.ToJson());
  const RunResult c = gectl::Run(ShortLemniscate(10));
  std::stringstream sc;
  WriteLogCsv(sc, c.log);
  EXPECT_NE(sa.str(), sc.str());
}

TEST(ProfileTest, ZeroErrorLogAndEmpty) {
  TrajectoryLog log;
  for (int i = 0; i < 500; ++i) {
    LogRow r;
    r.t = 0.01 * i;
    r.h = 0.1 + 0.001 * i;
    log.rows.push_back(r);
  }
  const auto bins = AngleErrorProfile(log, 0.02);
  ASSERT_FALSE(bins.empty());
  for (const ProfileBin& b : bins) {
    EXPECT_EQ(b.error, 0.0);
    EXPECT_GE(b.samples, 10);
  }
  EXPECT_THROW(AngleErrorProfile(TrajectoryLog{}, 0.02), InputError);
}

TEST(CompareTest, ReductionAndComparability) {
  MetricsReport a, b, c;
  a.name = "base";
  a.trajectory = b.trajectory = "lemniscate";
  c.trajectory = "hover";
  a.rmse_all = 10.0;
  b.name = "better";
  b.rmse_all = 2.0;
  c.name = "other";
  const auto rows = Compare({a, b, c}, "base");
  EXPECT_EQ(rows[0].reduction_pct, 0.0);
  EXPECT_NEAR(rows[1].reduction_pct, 80.0, 1e-12);
  EXPECT_TRUE(rows[1].comparable);
  EXPECT_FALSE(rows[2].comparable);
  EXPECT_EQ(Compare({a, a})[1].reduction_pct, 0.0);
  EXPECT_THROW(Compare({}), InputError);
  EXPECT_THROW(Compare({a}, "nobody"), InputError);
  EXPECT_NE(ComparisonText(rows).find("better"), std::string::npos);
  EXPECT_NE(ComparisonCsv(rows).find("reduction_pct"), std::string::npos);
}

TEST(RunTest, ExitCodes) {
  Scenario crash;
  crash.seed = 1;
  crash.trajectory.kind = TrajectorySpec::Kind::kHover;
  crash.trajectory.hover_position = Vec3(0, 0, 1.0);
  crash.trajectory.duration = 2.0;
  crash.policy = PolicyKind::kFeedforward;
  crash.sim.external.force = Vec3(0, 0, -30.0);
  EXPECT_EQ(gectl::Run(crash).exit_code, kExitCrash);

  Scenario infeasible = crash;
  infeasible.sim.external.force = Vec3::Zero();
  infeasible.policy = PolicyKind::kFeedback;
  infeasible.trajectory.kind = TrajectorySpec::Kind::kLemniscate;
  infeasible.trajectory.lemniscate.peak_speed = 40.0;
  EXPECT_EQ(gectl::Run(infeasible).exit_code, kExitInfeasible);
}

TEST(RunTest, WritesDirectory) {
  const fs::path dir = fs::temp_directory_path() / "gectl_run_dir_test";
  Scenario s = ShortLemniscate(2);
  s.trajectory.duration = 0.5;
  RunToDirectory(s, dir);
  EXPECT_TRUE(fs::exists(dir / "log.csv"));
  EXPECT_TRUE(fs::exists(dir / "metrics.json"));
  EXPECT_EQ(SerializeScenario(LoadScenario(dir / "scenario.resolved")), SerializeScenario(s));
  fs::remove_all(dir);
}

}  // namespace
}  // namespace gectl
