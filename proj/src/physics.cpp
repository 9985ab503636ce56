#include <vector>
#include "mspflow/physics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "mspflow/errors.hpp"

namespace mspflow {

void FluidProps::validate() const {
  if (!(mu_w > 0.0) || !(mu_n > 0.0)) throw ConfigError("fluid: viscosities must be positive");
  if (!(rho_w > 0.0) || !(rho_n > 0.0)) throw ConfigError("fluid: densities must be positive");
  if (s_rw < 0.0 || s_rn < 0.0 || !(s_rw + s_rn < 1.0)) {
    throw ConfigError("fluid: residual saturations must be nonnegative with s_rw + s_rn < 1");
  }
  if (!(porosity > 0.0) || porosity > 1.0) throw ConfigError("fluid: porosity must lie in (0, 1]");
  if (kr_exponent != 1 && kr_exponent != 2) throw ConfigError("fluid: kr_exponent must be 1 or 2");
}

FluidProps FluidProps::swapped() const {
  FluidProps s = *this;
  std::swap(s.mu_w, s.mu_n);
  std::swap(s.rho_w, s.rho_n);
  std::swap(s.s_rw, s.s_rn);
  return s;
}

double effective_saturation(double sw, const FluidProps& props) {
  // Denominator written symmetrically so swapping s_rw and s_rn is bit-exact.
  const double se = (sw - props.s_rw) / (1.0 - (props.s_rw + props.s_rn));
  return std::clamp(se, 0.0, 1.0);
}

namespace {

double relperm(double s, int exponent) { return exponent == 1 ? s : s * s; }

}  // namespace

PhasePair phase_mobilities(double sw, double sn, const FluidProps& props) {
  // Each curve is evaluated through its own effective saturation with a
  // symmetric denominator, so exchanging the phases maps the two mobilities
  // onto each other exactly.
  const double denom = 1.0 - (props.s_rw + props.s_rn);
  const double se_w = std::clamp((sw - props.s_rw) / denom, 0.0, 1.0);
  const double se_n = std::clamp((sn - props.s_rn) / denom, 0.0, 1.0);
  return {relperm(se_w, props.kr_exponent) / props.mu_w, relperm(se_n, props.kr_exponent) / props.mu_n};
}

PhasePair phase_mobilities(double sw, const FluidProps& props) { return phase_mobilities(sw, 1.0 - sw, props); }

double total_mobility(double sw, double sn, const FluidProps& props) {
  const PhasePair m = phase_mobilities(sw, sn, props);
  return m.w + m.n;
}

double total_mobility(double sw, const FluidProps& props) { return total_mobility(sw, 1.0 - sw, props); }

PhasePair fractional_flows(double sw, const FluidProps& props) { return fractional_flows(sw, 1.0 - sw, props); }

PhasePair fractional_flows(double sw, double sn, const FluidProps& props) {
  const PhasePair m = phase_mobilities(sw, sn, props);
  const double lt = m.w + m.n;
  if (!(lt > 0.0)) throw AssemblyError("fractional flow: total mobility vanished");
  if (m.w <= m.n) {
    const double fw = m.w / lt;
    return {fw, 1.0 - fw};
  }
  const double fn = m.n / lt;
  return {1.0 - fn, fn};
}

double fractional_flow(double sw, const FluidProps& props, Phase phase) {
  const PhasePair f = fractional_flows(sw, props);
  return phase == Phase::Wetting ? f.w : f.n;
}

void Medium::validate(const GridHierarchy& grid) const {
  if (nx != grid.nx() || ny != grid.ny() || kappa.size() != grid.num_cells()) {
    throw IngestionError("medium: dimensions " + std::to_string(nx) + "x" + std::to_string(ny) +
                         " do not match grid " + std::to_string(grid.nx()) + "x" + std::to_string(grid.ny()));
  }
  for (Eigen::Index c = 0; c < kappa.size(); ++c) {
    if (!(kappa[c] > 0.0) || !std::isfinite(kappa[c])) {
      throw IngestionError("medium: nonpositive permeability at cell " + std::to_string(c));
    }
  }
}

Vector total_mobility_field(const Vector& sw, const Medium& medium, const FluidProps& props) {
  return total_mobility_field(sw, Vector::Ones(sw.size()) - sw, medium, props);
}

Vector total_mobility_field(const Vector& sw, const Vector& sn, const Medium& medium, const FluidProps& props) {
  Vector out(sw.size());
  for (Eigen::Index c = 0; c < sw.size(); ++c) out[c] = total_mobility(sw[c], sn[c], props) * medium.kappa[c];
  return out;
}

Sources zero_sources(const GridHierarchy& grid) {
  return {Vector::Zero(grid.num_cells()), Vector::Zero(grid.num_cells())};
}

Sources two_point_source(const GridHierarchy& grid, double rate) {
  Sources s = zero_sources(grid);
  s.qw[grid.cell(0, 0)] = rate;
  s.qw[grid.cell(grid.nx() - 1, grid.ny() - 1)] = -rate;
  return s;
}

Sources five_point_source(const GridHierarchy& grid, double rate) {
  Sources s = zero_sources(grid);
  const int nx = grid.nx();
  const int ny = grid.ny();
  s.qw[grid.cell(0, 0)] += rate;
  s.qw[grid.cell(nx - 1, 0)] += rate;
  s.qw[grid.cell(0, ny - 1)] += rate;
  s.qw[grid.cell(nx - 1, ny - 1)] += rate;
  // The sink is the h-square centered in the domain. For even counts it straddles
  // two cells per direction and its cell averages split evenly between them.
  auto center = [](int n) {
    return n % 2 ? std::vector<std::pair<int, double>>{{n / 2, 1.0}}
                 : std::vector<std::pair<int, double>>{{n / 2 - 1, 0.5}, {n / 2, 0.5}};
  };
  for (const auto& [i, wi] : center(nx)) {
    for (const auto& [j, wj] : center(ny)) s.qw[grid.cell(i, j)] -= 4.0 * rate * wi * wj;
  }
  return s;
}

Sources effective_sources(const Sources& sources, const Vector& sw, const FluidProps& props,
                          SinkTreatment treatment) {
  if (treatment == SinkTreatment::Prescribed) return sources;
  Sources eff = sources;
  for (Eigen::Index c = 0; c < sw.size(); ++c) {
    const double qt = sources.qw[c] + sources.qn[c];
    if (qt < 0.0) {
      const PhasePair f = fractional_flows(sw[c], props);
      eff.qw[c] = f.w * qt;
      eff.qn[c] = f.n * qt;
    }
  }
  return eff;
}

double CapillaryModel::pc(double sw) const {
  if (kind == Kind::Off) return 0.0;
  return entry_pressure * (1.0 - sw);
}

Vector CapillaryModel::pc_field(const Vector& sw) const {
  Vector out(sw.size());
  for (Eigen::Index c = 0; c < sw.size(); ++c) out[c] = pc(sw[c]);
  return out;
}

Vector depth_from_top(const GridHierarchy& grid) {
  Vector z(grid.num_cells());
  for (int c = 0; c < grid.num_cells(); ++c) z[c] = grid.ly() - grid.cell_center(c)[1];
  return z;
}

namespace {

// Uniform double in [0,1) from the standardized mt19937_64 stream.
// std::uniform_real_distribution is implementation-defined, this is not.
class UnitRng {
 public:
  explicit UnitRng(std::uint64_t seed) : engine_(seed) {}
  double next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double range(double lo, double hi) { return lo + (hi - lo) * next(); }

 private:
  std::mt19937_64 engine_;
};

struct Channel {
  double center, amplitude, wavelength, phase, half_width, x0, x1;
  bool horizontal;
};

struct Inclusion {
  double cx, cy, rx, ry;
};

}  // namespace

Medium gen_high_contrast(const GridHierarchy& grid, double contrast, HighContrastPattern pattern,
                         std::uint64_t seed, bool central_symmetry) {
  if (!(contrast >= 1.0)) throw ConfigError("gen_high_contrast: contrast must be >= 1");
  Medium m = homogeneous_medium(grid, 1.0);
  if (contrast == 1.0) return m;

  UnitRng rng(seed);
  std::vector<Channel> channels;
  std::vector<Inclusion> inclusions;
  const bool want_channels = pattern != HighContrastPattern::Inclusions;
  const bool want_inclusions = pattern != HighContrastPattern::Channels;
  if (want_channels) {
    const int count = pattern == HighContrastPattern::Channels ? 6 : 4;
    for (int k = 0; k < count; ++k) {
      Channel ch{};
      ch.horizontal = (k % 2 == 0);
      ch.center = rng.range(0.12, 0.88);
      ch.amplitude = rng.range(0.02, 0.08);
      ch.wavelength = rng.range(0.3, 0.8);
      ch.phase = rng.range(0.0, 2.0 * std::numbers::pi);
      ch.half_width = rng.range(0.012, 0.025);
      ch.x0 = rng.range(0.0, 0.3);
      ch.x1 = rng.range(0.7, 1.0);
      channels.push_back(ch);
    }
  }
  if (want_inclusions) {
    const int count = pattern == HighContrastPattern::Inclusions ? 24 : 14;
    for (int k = 0; k < count; ++k) {
      inclusions.push_back({rng.range(0.05, 0.95), rng.range(0.05, 0.95), rng.range(0.015, 0.05),
                            rng.range(0.015, 0.05)});
    }
  }

  auto is_high = [&](double x, double y) {
    for (const Channel& ch : channels) {
      const double along = ch.horizontal ? x : y;
      const double across = ch.horizontal ? y : x;
      if (along < ch.x0 || along > ch.x1) continue;
      const double c = ch.center + ch.amplitude * std::sin(2.0 * std::numbers::pi * along / ch.wavelength + ch.phase);
      if (std::abs(across - c) <= ch.half_width) return true;
    }
    for (const Inclusion& inc : inclusions) {
      const double dx = (x - inc.cx) / inc.rx;
      const double dy = (y - inc.cy) / inc.ry;
      if (dx * dx + dy * dy <= 1.0) return true;
    }
    return false;
  };

  int high_count = 0;
  for (int c = 0; c < grid.num_cells(); ++c) {
    const auto p = grid.cell_center(c);
    const double x = p[0] / grid.lx();
    const double y = p[1] / grid.ly();
    bool high = is_high(x, y);
    if (central_symmetry) high = high || is_high(1.0 - x, 1.0 - y);
    if (high) {
      m.kappa[c] = contrast;
      ++high_count;
    }
  }
  if (high_count == 0) {
    // Resolution too coarse to hit any feature; keep the requested contrast.
    m.kappa[grid.cell(grid.nx() / 2, grid.ny() / 2)] = contrast;
  }
  return m;
}

Medium homogeneous_medium(const GridHierarchy& grid, double value) {
  Medium m;
  m.nx = grid.nx();
  m.ny = grid.ny();
  m.kappa = Vector::Constant(grid.num_cells(), value);
  return m;
}

Medium load_medium(const std::string& path, const GridHierarchy& grid) {
  std::ifstream in(path);
  if (!in) throw IngestionError("medium: cannot open " + path);
  Medium m;
  if (!(in >> m.nx >> m.ny)) throw IngestionError("medium: missing 'nx ny' header in " + path);
  if (m.nx <= 0 || m.ny <= 0) throw IngestionError("medium: invalid header dimensions in " + path);
  const long long count = static_cast<long long>(m.nx) * m.ny;
  m.kappa.resize(count);
  for (long long k = 0; k < count; ++k) {
    if (!(in >> m.kappa[k])) {
      throw IngestionError("medium: expected " + std::to_string(count) + " values, found " + std::to_string(k) +
                           " in " + path);
    }
  }
  double extra = 0.0;
  if (in >> extra) throw IngestionError("medium: more values than nx*ny in " + path);
  m.validate(grid);
  return m;
}

void save_medium(const Medium& medium, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IngestionError("medium: cannot write " + path);
  out << medium.nx << ' ' << medium.ny << '\n';
  char buf[32];
  for (int j = 0; j < medium.ny; ++j) {
    for (int i = 0; i < medium.nx; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", medium.kappa[j * medium.nx + i]);
      out << buf << (i + 1 < medium.nx ? ' ' : '\n');
    }
  }
  if (!out) throw IngestionError("medium: write failed for " + path);
}

}  // namespace mspflow
