#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mspflow/errors.hpp"
#include "mspflow/io.hpp"

using namespace mspflow;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch() {
  const auto dir = std::filesystem::temp_directory_path() / "mspflow_io_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(WriteField, CsvHasHeaderAndOneRowPerCell) {
  const auto dir = scratch();
  const GridHierarchy g = GridHierarchy::build(2, 2, 1, 1.0, 1.0);
  write_field_csv((dir / "f.csv").string(), g, Vector::LinSpaced(4, 0.0, 0.3));
  const std::string text = slurp(dir / "f.csv");
  EXPECT_EQ(text.rfind("x,y,value\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
  EXPECT_NE(text.find("0.25,0.25,0\n"), std::string::npos);
  // Values round-trip exactly.
  const Vector v = Vector::LinSpaced(4, 0.0, 0.3);
  std::istringstream rows(text);
  std::string line;
  std::getline(rows, line);
  for (int k = 0; k < 4; ++k) {
    std::getline(rows, line);
    EXPECT_EQ(std::stod(line.substr(line.rfind(',') + 1)), v[k]);
  }
}

TEST(WriteField, VtkIsLegacyStructuredPoints) {
  const auto dir = scratch();
  const GridHierarchy g = GridHierarchy::build(3, 2, 1, 1.5, 1.0);
  write_fields_vtk((dir / "f.vtk").string(), g, {{"S_w", Vector::Zero(6)}, {"p_w", Vector::Ones(6)}});
  const std::string text = slurp(dir / "f.vtk");
  EXPECT_EQ(text.rfind("# vtk DataFile Version 3.0\n", 0), 0u);
  EXPECT_NE(text.find("DIMENSIONS 4 3 1"), std::string::npos);
  EXPECT_NE(text.find("CELL_DATA 6"), std::string::npos);
  EXPECT_NE(text.find("SCALARS p_w double 1"), std::string::npos);
}

TEST(WriteTimeseries, LeavesMissingValuesEmpty) {
  const auto dir = scratch();
  write_timeseries((dir / "t.csv").string(), {"a", "b"}, {{0.0, 1.0, std::nan("")}, {100.0, 2.0, 3.0}});
  EXPECT_EQ(slurp(dir / "t.csv"), "t,a,b\n0,1,\n100,2,3\n");
}

TEST(Output, UnwritableDirectoryIsAConfigError) {
  const auto dir = scratch();
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(ensure_writable_dir((dir / "file" / "sub").string()), ConfigError);
  EXPECT_NO_THROW(ensure_writable_dir((dir / "a" / "b").string()));
}

TEST(Output, RepeatedWritesAreByteIdentical) {
  const auto dir = scratch();
  const GridHierarchy g = GridHierarchy::build(4, 4, 2, 1.0, 1.0);
  const Vector v = Vector::LinSpaced(16, -1.0, std::acos(-1.0));
  write_field_csv((dir / "a.csv").string(), g, v);
  write_field_csv((dir / "b.csv").string(), g, v);
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
}
