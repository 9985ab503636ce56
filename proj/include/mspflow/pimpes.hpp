#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "mspflow/fineops.hpp"
#include "mspflow/linalg.hpp"
#include "mspflow/verify.hpp"

namespace mspflow {

/// Everything that defines a two-phase flow problem on the fine grid.
struct Problem {
  GridHierarchy grid;
  Medium medium;
  FluidProps props;
  Sources sources;
  CapillaryModel capillary;
  GravityModel gravity;
  BoundaryConditions bc;
  SinkTreatment sink = SinkTreatment::FractionalFlow;
  MassQuadrature quadrature = MassQuadrature::Exact;
  Gauge gauge = Gauge::ZeroMean;
  double solver_tol = 1e-12;

  void validate() const;
  /// The same problem with the two phases relabeled.
  Problem swapped() const;
  /// Gauge actually used: none when Dirichlet edges fix the pressure level.
  Gauge effective_gauge() const { return bc.has_dirichlet() ? Gauge::None : gauge; }
};

struct State {
  double t = 0.0;
  Vector sw;
  Vector sn;
  Vector pw;
  Vector pn;
  Vector ut;  // total normal flux per fine edge
  Vector xi;  // capillary-driven normal flux per fine edge
};

State initial_state(const Problem& problem, const Vector& sw0);
State initial_state(const Problem& problem, double sw0);

enum class SubstepMode {
  None,  // one explicit transport update per pressure step
  Cfl,   // split the step into equal substeps no longer than cfl_dt
};

struct TimeGrid {
  double dt = 100.0;
  double T = 8000.0;
  int output_every = 1;  // steps between stored states; the final state is always stored
  std::vector<double> rebuild_times;
  SubstepMode substep = SubstepMode::Cfl;
  double cfl_safety = 0.5;

  void validate() const;
  int num_steps() const;
  bool is_output_step(int step) const;
};

/// Stable explicit step for frozen fluxes:
/// safety * porosity * h / max(max_e |u_t.n| + |xi_c.n|, h max_c |q_t|).
/// Infinite when nothing moves.
double cfl_dt(const GridHierarchy& grid, const FluidProps& props, const Vector& ut, const Vector& xi,
              double safety = 0.5, const Vector& qt = Vector());

/// Grid-level operators that do not change during a run.
struct FineOperators {
  DofLayout layout;
  SparseMatrix R;   // edge -> velocity dof restriction
  SparseMatrix Rt;  // its transpose
  StaticOperators st;
  SparseMatrix G;   // R * C
  Vector prescribed;  // Neumann boundary fluxes in stored orientation
  Vector qt;          // total source density per cell
  UpwindAssembler upwind;

  explicit FineOperators(const Problem& problem);
};

/// Solves A xi = C P_c - (p_n^B - p_w^B) D - (rho_n - rho_w) E.
Vector step_capillary(const Problem& problem, const FineOperators& ops, const MobilityOperators& mob);

struct PressureVelocity {
  Vector ut;
  Vector pw;
  Vector pn;
};

/// Solves [A, -C; B_t, 0] [u_t; p_w] = [A_n xi - p_w^B D - rho_w E; F_t] and sets p_n = p_w + P_c.
/// The B_t row uses upwind directions from the fluxes stored in `state`. When
/// `cache` is given, its factorization is updated in place across steps.
PressureVelocity step_pressure_velocity(const Problem& problem, const FineOperators& ops,
                                        const MobilityOperators& mob, const State& state, const Vector& xi_next,
                                        std::optional<SaddleSolver>* cache = nullptr);

/// Both phases advance by their own balance. Where the two updates agree to
/// 1e-12 they are averaged symmetrically, which makes the scheme exactly
/// invariant under relabeling the phases. Where they disagree (counter-current
/// upwinding, or a pressure row assembled with other directions) S_w follows
/// its own balance and S_n = 1 - S_w.
struct SaturationUpdate {
  Vector sw;             // combined S_w
  Vector sn;             // combined S_n, 1 - sw to round-off
  Vector sn_direct;      // S_n + dt/porosity P^{-1} (F_n - B_c xi - B_n u)
  Vector sn_complement;  // 1 - (S_w + dt/porosity P^{-1} (F_w + B_c xi - B_w u))
  Sources applied;       // phase sources used in the update
};

struct TransportStats {
  int substeps = 1;
  double dt_sub = 0.0;
  double conservation_w = 0.0;
  double conservation_n = 0.0;
  double dual_consistency = 0.0;
  double sw_min = 0.0;
  double sw_max = 0.0;
  int bounds_violations = 0;
};

struct TransportResult {
  Vector sw;
  Vector sn;
  TransportStats stats;
};

/// Explicit upwind saturation update shared by the fine and multiscale solvers.
/// Keeps a reference to `problem`, which must outlive the stepper.
class SaturationStepper {
 public:
  explicit SaturationStepper(const Problem& problem);

  /// One explicit update with upwind directions from (ut, xi) and values at (sw, sn).
  SaturationUpdate step(const Vector& sw, const Vector& sn, const Vector& ut, const Vector& xi, double dt) const;

  /// Advances over dt with frozen fluxes, substepping as requested; when
  /// `monitor` is set every substep is checked for conservation, dual
  /// consistency and bounds.
  TransportResult advance(const Vector& sw, const Vector& sn, const Vector& ut, const Vector& xi, double dt,
                          SubstepMode mode, double safety, bool monitor = true) const;

 private:
  const Problem* problem_;
  UpwindAssembler assembler_;
  Vector P_;
  // Scratch reused across updates; a stepper is not shared between threads.
  mutable UpwindChoice choice_;
  mutable UpwindOperators ops_;
};

/// One update from S_w with S_n = 1 - S_w.
SaturationUpdate step_saturation(const Problem& problem, const Vector& sw, const Vector& ut, const Vector& xi,
                                 double dt);

struct PhaseFluxes {
  Vector uw;
  Vector un;
};

/// u_w = f_w u_t - f_w f_n xi_c and u_n = f_n u_t + f_w f_n xi_c per edge, with
/// both fractional flows taken at the saturation upwind of the total flux, so
/// u_w + u_n = u_t holds edge by edge.
PhaseFluxes phase_velocities(const GridHierarchy& grid, const FluidProps& props, const Vector& sw, const Vector& ut,
                             const Vector& xi);

struct Trajectory {
  std::vector<State> states;

  /// State stored at time t (within a relative 1e-9), or nullptr.
  const State* at(double t) const;
  const State& final() const { return states.back(); }
};

struct RunResult {
  Trajectory trajectory;
  RunReport report;
};

struct RunOptions {
  bool monitor = true;  // per-substep conservation / bounds checks
};

RunResult run_fine(const Problem& problem, const TimeGrid& time, const State& initial,
                   const RunOptions& options = {});

}  // namespace mspflow
