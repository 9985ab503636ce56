#include "mspflow/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <toml.hpp>

#include "mspflow/errors.hpp"

namespace mspflow {

namespace {

// Reads typed values from one TOML table and rejects keys nobody asked for.
class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!table_) return;
    const toml::node* node = table_->get(key);
    if (!node) return;
    if constexpr (std::is_same_v<T, double>) {
      if (auto v = node->value<double>()) {
        out = *v;
        return;
      }
    } else if constexpr (std::is_same_v<T, bool>) {
      if (auto v = node->value_exact<bool>()) {
        out = *v;
        return;
      }
    } else if constexpr (std::is_integral_v<T>) {
      if (auto v = node->value_exact<int64_t>()) {
        out = static_cast<T>(*v);
        return;
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = node->value_exact<std::string>()) {
        out = *v;
        return;
      }
    }
    throw ConfigError("config: [" + name_ + "] " + key + " has the wrong type");
  }

  template <typename T>
  void get_list(const char* key, std::vector<T>& out) {
    seen_.insert(key);
    if (!table_) return;
    const toml::node* node = table_->get(key);
    if (!node) return;
    const toml::array* arr = node->as_array();
    if (!arr) throw ConfigError("config: [" + name_ + "] " + key + " must be an array");
    std::vector<T> values;
    for (const toml::node& item : *arr) {
      std::optional<T> v;
      if constexpr (std::is_same_v<T, double>) {
        v = item.value<double>();
      } else if constexpr (std::is_integral_v<T>) {
        if (auto i = item.value_exact<int64_t>()) v = static_cast<T>(*i);
      } else {
        v = item.value_exact<std::string>();
      }
      if (!v) throw ConfigError("config: [" + name_ + "] " + key + " has an entry of the wrong type");
      values.push_back(*v);
    }
    out = std::move(values);
  }

  void finish() const {
    if (!table_) return;
    for (const auto& [key, value] : *table_) {
      if (!seen_.count(std::string(key.str()))) {
        throw ConfigError("config: unknown key '" + std::string(key.str()) + "' in [" + name_ + "]");
      }
    }
  }

 private:
  const toml::table* table_;
  std::string name_;
  std::set<std::string> seen_;
};

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty() || base.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base) / path).string();
}

}  // namespace

RunConfig::RunConfig() { time.rebuild_times = {4000.0}; }

HighContrastPattern parse_pattern(const std::string& name) {
  const std::string n = lower(name);
  if (n == "channels") return HighContrastPattern::Channels;
  if (n == "inclusions") return HighContrastPattern::Inclusions;
  if (n == "mixed") return HighContrastPattern::Mixed;
  throw ConfigError("config: unknown medium pattern '" + name + "'");
}

void RunConfig::validate() const {
  if (grid.nx <= 0 || grid.ny <= 0 || grid.block <= 0) throw ConfigError("config: grid sizes must be positive");
  if (grid.nx % grid.block || grid.ny % grid.block) throw ConfigError("config: block must divide nx and ny");
  if (!(grid.lx > 0.0) || !(grid.ly > 0.0)) throw ConfigError("config: domain lengths must be positive");
  time.validate();
  props.validate();
  if (!(medium.contrast >= 1.0)) throw ConfigError("config: contrast must be at least 1");
  if (!medium.file.empty() && !std::filesystem::exists(medium.file)) {
    throw ConfigError("config: medium file not found: " + medium.file);
  }
  if (wells.kind == WellConfig::Kind::Custom && !std::filesystem::exists(wells.file)) {
    throw ConfigError("config: well file not found: " + wells.file);
  }
  if (initial_sw >= 0.0 && initial_sw > 1.0) throw ConfigError("config: initial_sw must lie in [0, 1]");
  if (!(solver_tol > 0.0)) throw ConfigError("config: solver tol must be positive");
  if (ms.offline < 1 && !ms.full_snapshot) throw ConfigError("config: at least one offline basis is required");
  if (ms.online < 0) throw ConfigError("config: online iterations must be nonnegative");
  if (!(sweep.reference_dt > 0.0)) throw ConfigError("config: reference dt must be positive");
  for (const double dt : sweep.dts) {
    if (!(dt > 0.0)) throw ConfigError("config: sweep dts must be positive");
  }
  for (const int b : sweep.blocks) {
    if (b <= 0 || grid.nx % b || grid.ny % b) throw ConfigError("config: sweep block must divide nx and ny");
  }
  parse_basis_label(sweep.h_bases);
  parse_basis_label(sweep.dt_bases);
  for (const auto& label : sweep.bases) parse_basis_label(label);
}

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(msg.str());
  }
  static const std::set<std::string> sections{"grid",    "time",   "fluids", "medium", "wells", "capillary",
                                              "gravity", "ms",     "solver", "sweep",  "output"};
  for (const auto& [key, value] : root) {
    if (!sections.count(std::string(key.str()))) {
      throw ConfigError("config: unknown section [" + std::string(key.str()) + "]");
    }
    if (!value.is_table()) throw ConfigError("config: [" + std::string(key.str()) + "] must be a table");
  }
  auto table = [&](const char* name) { return root.get_as<toml::table>(name); };

  RunConfig c;
  c.base_dir = base_dir;

  Section grid(table("grid"), "grid");
  grid.get("nx", c.grid.nx);
  grid.get("ny", c.grid.ny);
  grid.get("block", c.grid.block);
  grid.get("lx", c.grid.lx);
  grid.get("ly", c.grid.ly);
  grid.finish();

  Section time(table("time"), "time");
  std::string substep = "cfl";
  time.get("dt", c.time.dt);
  time.get("T", c.time.T);
  time.get("output_every", c.time.output_every);
  time.get_list("rebuild_times", c.time.rebuild_times);
  time.get("substep", substep);
  time.get("cfl_safety", c.time.cfl_safety);
  time.finish();
  substep = lower(substep);
  if (substep == "cfl") {
    c.time.substep = SubstepMode::Cfl;
  } else if (substep == "none") {
    c.time.substep = SubstepMode::None;
  } else {
    throw ConfigError("config: [time] substep must be 'cfl' or 'none'");
  }

  Section fluids(table("fluids"), "fluids");
  fluids.get("mu_w", c.props.mu_w);
  fluids.get("mu_n", c.props.mu_n);
  fluids.get("rho_w", c.props.rho_w);
  fluids.get("rho_n", c.props.rho_n);
  fluids.get("s_rw", c.props.s_rw);
  fluids.get("s_rn", c.props.s_rn);
  fluids.get("porosity", c.props.porosity);
  fluids.get("kr_exponent", c.props.kr_exponent);
  fluids.get("initial_sw", c.initial_sw);
  fluids.finish();

  Section medium(table("medium"), "medium");
  std::string pattern = "mixed";
  int64_t seed = static_cast<int64_t>(c.medium.seed);
  medium.get("file", c.medium.file);
  medium.get("contrast", c.medium.contrast);
  medium.get("pattern", pattern);
  medium.get("seed", seed);
  medium.get("central_symmetry", c.medium.central_symmetry);
  medium.finish();
  if (seed < 0) throw ConfigError("config: [medium] seed must be nonnegative");
  c.medium.seed = static_cast<std::uint64_t>(seed);
  c.medium.pattern = parse_pattern(pattern);
  c.medium.file = resolve(base_dir, c.medium.file);

  Section wells(table("wells"), "wells");
  std::string kind = "five_point";
  wells.get("kind", kind);
  wells.get("rate", c.wells.rate);
  wells.get("file", c.wells.file);
  wells.finish();
  kind = lower(kind);
  if (kind == "two_point") {
    c.wells.kind = WellConfig::Kind::TwoPoint;
  } else if (kind == "five_point") {
    c.wells.kind = WellConfig::Kind::FivePoint;
  } else if (kind == "custom") {
    c.wells.kind = WellConfig::Kind::Custom;
  } else {
    throw ConfigError("config: [wells] kind must be two_point, five_point or custom");
  }
  c.wells.file = resolve(base_dir, c.wells.file);

  Section cap(table("capillary"), "capillary");
  std::string cap_kind = "off";
  cap.get("kind", cap_kind);
  cap.get("entry_pressure", c.capillary.entry_pressure);
  cap.finish();
  cap_kind = lower(cap_kind);
  if (cap_kind == "off") {
    c.capillary.kind = CapillaryModel::Kind::Off;
  } else if (cap_kind == "linear") {
    c.capillary.kind = CapillaryModel::Kind::Linear;
  } else {
    throw ConfigError("config: [capillary] kind must be 'off' or 'linear'");
  }

  Section grav(table("gravity"), "gravity");
  grav.get("enabled", c.gravity);
  grav.get("g", c.gravity_g);
  grav.finish();

  Section ms(table("ms"), "ms");
  std::string label;
  ms.get("bases", label);
  if (!label.empty()) c.ms = parse_basis_label(label);
  ms.get("offline", c.ms.offline);
  ms.get("online", c.ms.online);
  ms.get("tol", c.ms.tol);
  ms.get("oversample_layers", c.ms.oversample_layers);
  ms.get("full_snapshot", c.ms.full_snapshot);
  ms.finish();

  Section solver(table("solver"), "solver");
  std::string gauge = "zero_mean";
  std::string sink = "fractional_flow";
  solver.get("tol", c.solver_tol);
  solver.get("gauge", gauge);
  solver.get("sink", sink);
  solver.finish();
  gauge = lower(gauge);
  if (gauge == "zero_mean") {
    c.gauge = Gauge::ZeroMean;
  } else if (gauge == "pin_first") {
    c.gauge = Gauge::PinFirst;
  } else {
    throw ConfigError("config: [solver] gauge must be 'zero_mean' or 'pin_first'");
  }
  sink = lower(sink);
  if (sink == "fractional_flow") {
    c.sink = SinkTreatment::FractionalFlow;
  } else if (sink == "prescribed") {
    c.sink = SinkTreatment::Prescribed;
  } else {
    throw ConfigError("config: [solver] sink must be 'fractional_flow' or 'prescribed'");
  }
  c.ms.solver_tol = c.solver_tol;

  Section sweep(table("sweep"), "sweep");
  sweep.get("reference_dt", c.sweep.reference_dt);
  sweep.get_list("dts", c.sweep.dts);
  sweep.get_list("blocks", c.sweep.blocks);
  sweep.get("h_bases", c.sweep.h_bases);
  sweep.get("dt_bases", c.sweep.dt_bases);
  sweep.get_list("bases", c.sweep.bases);
  sweep.finish();

  Section output(table("output"), "output");
  std::vector<std::string> formats{"csv", "vtk"};
  output.get("dir", c.output.dir);
  output.get_list("formats", formats);
  output.finish();
  c.output.csv = c.output.vtk = false;
  for (const auto& f : formats) {
    const std::string name = lower(f);
    if (name == "csv") {
      c.output.csv = true;
    } else if (name == "vtk") {
      c.output.vtk = true;
    } else {
      throw ConfigError("config: [output] unknown format '" + f + "'");
    }
  }
  c.output.dir = resolve(base_dir, c.output.dir);

  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::filesystem::path(path).parent_path().string());
}

GridHierarchy make_grid(const RunConfig& config, int block) {
  return GridHierarchy::build(config.grid.nx, config.grid.ny, block > 0 ? block : config.grid.block, config.grid.lx,
                              config.grid.ly);
}

Medium make_medium(const RunConfig& config, const GridHierarchy& grid) {
  if (!config.medium.file.empty()) return load_medium(config.medium.file, grid);
  return gen_high_contrast(grid, config.medium.contrast, config.medium.pattern, config.medium.seed,
                           config.medium.central_symmetry);
}

Sources make_sources(const RunConfig& config, const GridHierarchy& grid) {
  switch (config.wells.kind) {
    case WellConfig::Kind::TwoPoint: return two_point_source(grid, config.wells.rate);
    case WellConfig::Kind::FivePoint: return five_point_source(grid, config.wells.rate);
    case WellConfig::Kind::Custom: break;
  }
  std::ifstream in(config.wells.file);
  if (!in) throw IngestionError("wells: cannot open " + config.wells.file);
  Sources s = zero_sources(grid);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    int i = 0, j = 0;
    double qw = 0.0, qn = 0.0;
    if (!(row >> i >> j >> qw >> qn)) {
      throw IngestionError("wells: expected 'i j qw qn' on line " + std::to_string(lineno));
    }
    if (i < 0 || j < 0 || i >= grid.nx() || j >= grid.ny()) {
      throw IngestionError("wells: cell out of range on line " + std::to_string(lineno));
    }
    s.qw[grid.cell(i, j)] += qw;
    s.qn[grid.cell(i, j)] += qn;
  }
  return s;
}

Problem make_problem(const RunConfig& config, int block) {
  Problem p;
  p.grid = make_grid(config, block);
  p.medium = make_medium(config, p.grid);
  p.props = config.props;
  p.sources = make_sources(config, p.grid);
  p.capillary = config.capillary;
  p.gravity.enabled = config.gravity;
  p.gravity.g = config.gravity_g;
  if (config.gravity) p.gravity.depth = depth_from_top(p.grid);
  p.sink = config.sink;
  p.gauge = config.gauge;
  p.solver_tol = config.solver_tol;
  return p;
}

}  // namespace mspflow
