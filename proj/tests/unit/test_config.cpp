#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mspflow/config.hpp"
#include "mspflow/errors.hpp"

using namespace mspflow;

TEST(Config, DefaultsMirrorTheBundledSetup) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c.grid.nx, 100);
  EXPECT_EQ(c.grid.block, 10);
  EXPECT_DOUBLE_EQ(c.time.dt, 100.0);
  EXPECT_DOUBLE_EQ(c.time.T, 8000.0);
  ASSERT_EQ(c.time.rebuild_times.size(), 1u);
  EXPECT_DOUBLE_EQ(c.time.rebuild_times[0], 4000.0);
  EXPECT_DOUBLE_EQ(c.props.mu_w, 1.0);
  EXPECT_DOUBLE_EQ(c.props.mu_n, 5.0);
  EXPECT_DOUBLE_EQ(c.props.rho_w, 1000.0);
  EXPECT_DOUBLE_EQ(c.props.rho_n, 800.0);
  EXPECT_DOUBLE_EQ(c.wells.rate, 0.2);
  EXPECT_EQ(c.sweep.dts.size(), 4u);
}

TEST(Config, ParsesSections) {
  const RunConfig c = parse_config(R"(
[grid]
nx = 20
ny = 40
block = 5
[time]
dt = 50.0
T = 500.0
substep = "none"
[ms]
bases = "2+1"
[wells]
kind = "two_point"
rate = 0.1
[solver]
gauge = "pin_first"
sink = "prescribed"
[sweep]
blocks = [5, 10]
)");
  EXPECT_EQ(c.grid.ny, 40);
  EXPECT_EQ(c.time.substep, SubstepMode::None);
  EXPECT_EQ(c.ms.offline, 2);
  EXPECT_EQ(c.ms.online, 1);
  EXPECT_EQ(c.wells.kind, WellConfig::Kind::TwoPoint);
  EXPECT_EQ(c.gauge, Gauge::PinFirst);
  EXPECT_EQ(c.sink, SinkTreatment::Prescribed);
  EXPECT_EQ(c.sweep.blocks, (std::vector<int>{5, 10}));
}

TEST(Config, RejectsInvalidInput) {
  EXPECT_THROW(parse_config("[grid]\nnx = 10\ncolour = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[nonsense]\n"), ConfigError);
  EXPECT_THROW(parse_config("[time]\ndt = 300.0\nT = 1000.0\n"), ConfigError);
  EXPECT_THROW(parse_config("[grid]\nnx = 25\nny = 25\nblock = 10\n"), ConfigError);
  EXPECT_THROW(parse_config("[medium]\nfile = \"missing.txt\"\n"), ConfigError);
  EXPECT_THROW(parse_config("[grid\n"), ConfigError);
  EXPECT_THROW(parse_config("[grid]\nnx = \"ten\"\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.toml"), ConfigError);
}

TEST(Config, CustomWellsResolveRelativeToConfig) {
  const auto dir = std::filesystem::temp_directory_path() / "mspflow_config_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "wells.txt") << "# i j qw qn\n0 0 1.0 0.0\n3 3 -1.0 0.0\n";
    std::ofstream(dir / "run.toml") << "[grid]\nnx = 4\nny = 4\nblock = 2\n[sweep]\nblocks = [2]\n"
                                       "[wells]\nkind = \"custom\"\nfile = \"wells.txt\"\n";
  }
  const RunConfig c = load_config((dir / "run.toml").string());
  const Problem p = make_problem(c);
  EXPECT_DOUBLE_EQ(p.sources.qw[p.grid.cell(0, 0)], 1.0);
  EXPECT_DOUBLE_EQ(p.sources.qw[p.grid.cell(3, 3)], -1.0);
  EXPECT_DOUBLE_EQ(p.sources.total().sum(), 0.0);
  std::filesystem::remove_all(dir);
}

TEST(Config, MakeProblemHonorsBlockOverride) {
  RunConfig c;
  c.grid.nx = 20;
  c.grid.ny = 20;
  c.grid.block = 5;
  EXPECT_EQ(make_problem(c).grid.block(), 5);
  EXPECT_EQ(make_problem(c, 10).grid.block(), 10);
}
