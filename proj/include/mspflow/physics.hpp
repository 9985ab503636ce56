#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include "mspflow/mesh.hpp"

namespace mspflow {

using Vector = Eigen::VectorXd;

enum class Phase { Wetting, NonWetting };

/// Fluid and rock constants. Defaults are the two-phase setup used for the
/// bundled experiments (water/oil viscosity ratio 1:5, quadratic Corey curves).
struct FluidProps {
  double mu_w = 1.0;
  double mu_n = 5.0;
  double rho_w = 1000.0;
  double rho_n = 800.0;
  double s_rw = 1e-6;
  double s_rn = 1e-6;
  double porosity = 1.0;
  int kr_exponent = 2;

  void validate() const;
  /// Same fluids with the roles of the two phases exchanged.
  FluidProps swapped() const;
};

struct PhasePair {
  double w = 0.0;
  double n = 0.0;
};

/// (S_w - S_rw) / (1 - S_rn - S_rw), clamped to [0, 1].
double effective_saturation(double sw, const FluidProps& props);
PhasePair phase_mobilities(double sw, const FluidProps& props);
/// Mobilities with the non-wetting curve evaluated at its own saturation `sn`.
PhasePair phase_mobilities(double sw, double sn, const FluidProps& props);
double total_mobility(double sw, const FluidProps& props);
double total_mobility(double sw, double sn, const FluidProps& props);

/// Both fractional flows. The smaller one is computed as a ratio and the larger
/// as its complement, so f_w + f_n == 1 holds exactly in floating point and the
/// evaluation is symmetric under exchanging the phases.
PhasePair fractional_flows(double sw, const FluidProps& props);
PhasePair fractional_flows(double sw, double sn, const FluidProps& props);
double fractional_flow(double sw, const FluidProps& props, Phase phase);

/// Per-cell isotropic absolute permeability.
struct Medium {
  int nx = 0;
  int ny = 0;
  Vector kappa;

  void validate(const GridHierarchy& grid) const;
};

/// kappa_n = lambda_t(S_w) * kappa, cellwise.
Vector total_mobility_field(const Vector& sw, const Medium& medium, const FluidProps& props);
Vector total_mobility_field(const Vector& sw, const Vector& sn, const Medium& medium, const FluidProps& props);

/// Per-cell volumetric source densities for each phase.
struct Sources {
  Vector qw;
  Vector qn;

  Vector total() const { return qw + qn; }
  Sources swapped() const { return {qn, qw}; }
};

Sources zero_sources(const GridHierarchy& grid);
/// +rate in the lower-left corner cell, -rate in the upper-right corner cell.
Sources two_point_source(const GridHierarchy& grid, double rate);
/// +rate in each corner cell, -4 rate on the h-square centered in the domain
/// (split over the four central cells when the counts are even).
Sources five_point_source(const GridHierarchy& grid, double rate);

/// How a production cell (q_t < 0) splits its withdrawal between the phases.
enum class SinkTreatment {
  Prescribed,      // use q_w, q_n as given
  FractionalFlow,  // q_alpha = f_alpha(S_w) * q_t in the producing cell
};

/// Phase sources actually applied in a transport update at saturation `sw`.
Sources effective_sources(const Sources& sources, const Vector& sw, const FluidProps& props,
                          SinkTreatment treatment);

struct CapillaryModel {
  enum class Kind { Off, Linear };
  Kind kind = Kind::Off;
  double entry_pressure = 0.0;

  bool enabled() const { return kind != Kind::Off; }
  double pc(double sw) const;
  Vector pc_field(const Vector& sw) const;
};

struct GravityModel {
  bool enabled = false;
  double g = 9.81;
  Vector depth;  // per fine cell
};

/// Depth measured downward from the top of the domain (z = Ly - y).
Vector depth_from_top(const GridHierarchy& grid);

enum class HighContrastPattern { Channels, Inclusions, Mixed };

/// Binary high-contrast field: background 1, channels / inclusions at `contrast`.
/// Geometry is defined in domain-relative coordinates, so the same seed yields
/// the same layout at every resolution. Deterministic across platforms.
Medium gen_high_contrast(const GridHierarchy& grid, double contrast, HighContrastPattern pattern,
                         std::uint64_t seed, bool central_symmetry = true);
Medium homogeneous_medium(const GridHierarchy& grid, double value = 1.0);
Medium load_medium(const std::string& path, const GridHierarchy& grid);
void save_medium(const Medium& medium, const std::string& path);

}  // namespace mspflow
