#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mspflow/msbasis.hpp"
#include "mspflow/pimpes.hpp"

namespace mspflow {

struct GridConfig {
  int nx = 100;
  int ny = 100;
  int block = 10;
  double lx = 1.0;
  double ly = 1.0;
};

struct MediumConfig {
  std::string file;  // loaded when set, otherwise generated
  double contrast = 2000.0;
  HighContrastPattern pattern = HighContrastPattern::Mixed;
  std::uint64_t seed = 7;
  bool central_symmetry = true;
};

struct WellConfig {
  enum class Kind { TwoPoint, FivePoint, Custom };
  Kind kind = Kind::FivePoint;
  double rate = 0.2;
  std::string file;  // custom: one "i j qw qn" line per source cell
};

struct SweepConfig {
  double reference_dt = 100.0;
  std::vector<double> dts{100.0, 200.0, 400.0, 800.0};
  std::vector<int> blocks{5, 10, 20};
  std::string h_bases = "5+0";
  std::string dt_bases = "5+0";
  std::vector<std::string> bases{"3+0", "6+0", "3+1"};
};

struct OutputConfig {
  std::string dir = "out";
  bool csv = true;
  bool vtk = true;
};

struct RunConfig {
  GridConfig grid;
  TimeGrid time;
  FluidProps props;
  MediumConfig medium;
  WellConfig wells;
  CapillaryModel capillary;
  bool gravity = false;
  double gravity_g = 9.81;
  BasisConfig ms;
  double initial_sw = -1.0;  // negative: s_rw + 1e-6
  double solver_tol = 1e-12;
  Gauge gauge = Gauge::ZeroMean;
  SinkTreatment sink = SinkTreatment::FractionalFlow;
  SweepConfig sweep;
  OutputConfig output;
  std::string base_dir;  // relative paths in the file resolve against this

  /// Defaults of the bundled experiments: 100x100 unit square, block 10,
  /// dt 100, T 8000, rebuild at 4000, five-point wells at rate 0.2.
  RunConfig();

  double initial_saturation() const { return initial_sw < 0.0 ? props.s_rw + 1e-6 : initial_sw; }
  void validate() const;
};

/// Parses TOML text; unknown keys are rejected. Raises ConfigError.
RunConfig parse_config(const std::string& text, const std::string& base_dir = "");
RunConfig load_config(const std::string& path);

GridHierarchy make_grid(const RunConfig& config, int block = 0);
Medium make_medium(const RunConfig& config, const GridHierarchy& grid);
Sources make_sources(const RunConfig& config, const GridHierarchy& grid);
/// Problem on the configured grid; `block` > 0 overrides the coarse block size.
Problem make_problem(const RunConfig& config, int block = 0);

HighContrastPattern parse_pattern(const std::string& name);

}  // namespace mspflow
