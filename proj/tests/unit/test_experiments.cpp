#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mspflow/experiments.hpp"

using namespace mspflow;

namespace {

RunConfig small() {
  RunConfig c;
  c.grid.nx = 10;
  c.grid.ny = 10;
  c.grid.block = 5;
  c.sweep.blocks = {5};
  c.time.T = 1000.0;
  c.time.rebuild_times.clear();
  c.sweep.reference_dt = 100.0;
  return c;
}

}  // namespace

TEST(ReferenceRun, CacheRoundTripsAndKeysOnSetup) {
  const auto dir = std::filesystem::temp_directory_path() / "mspflow_ref_cache_test";
  std::filesystem::remove_all(dir);
  const RunConfig c = small();
  const RunResult a = reference_run(c, dir.string());
  const RunResult b = reference_run(c, dir.string());
  ASSERT_EQ(a.trajectory.states.size(), b.trajectory.states.size());
  for (size_t k = 0; k < a.trajectory.states.size(); ++k) {
    EXPECT_EQ(a.trajectory.states[k].sw, b.trajectory.states[k].sw);
    EXPECT_EQ(a.trajectory.states[k].ut, b.trajectory.states[k].ut);
  }
  RunConfig other = c;
  other.medium.seed += 1;
  EXPECT_NE(reference_key(c, make_problem(c)), reference_key(other, make_problem(other)));
  std::filesystem::remove_all(dir);
}

TEST(RunCase, ErrorSeriesCoversOutputTimes) {
  const RunConfig c = small();
  const RunResult ref = reference_run(c);
  const CaseResult r = run_case(c, {"2+0", 0, 0.0, "2+0"}, ref.trajectory);
  ASSERT_FALSE(r.series.t.empty());
  EXPECT_DOUBLE_EQ(r.series.t.back(), c.time.T);
  for (const double e : r.series.e_s) EXPECT_GE(e, 0.0);
  for (const double f : r.series.flux_sign) {
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
  }
}

TEST(WriteErrorTable, KeepsOnlyCommonTimes) {
  const auto dir = std::filesystem::temp_directory_path() / "mspflow_table_test";
  std::filesystem::create_directories(dir);
  ErrorSeries a{"a", {0.0, 100.0, 200.0}, {0.0, 0.1, 0.2}, {1, 1, 1}};
  ErrorSeries b{"b", {0.0, 200.0}, {0.0, 0.3}, {1, 1}};
  const std::string path = (dir / "t.csv").string();
  write_error_table(path, {a, b});
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  EXPECT_EQ(s.str(), "t,a,b\n0,0,0\n200,0.20000000000000001,0.29999999999999999\n");
  std::filesystem::remove_all(dir);
}
