#include "fwi/config.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace fwi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Typed access to one JSON object that remembers which keys were read, so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(j_.at(key), key);
  }

  template <typename T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where_ + "." + key + " is required");
    return convert<T>(j_.at(key), key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where_ + "." + key + " is required");
    return j_.at(key);
  }

  Section sub(const std::string& key) { return Section(raw(key), where_ + "." + key); }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw ConfigError("unknown key " + where_ + "." + k);
    }
  }

 private:
  template <typename T>
  T convert(const json& v, const std::string& key) const {
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void positive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(what + " must be positive");
}

ModelSpec parse_model(Section s) {
  ModelSpec m;
  if (s.has("file")) {
    m.file = s.require<std::string>("file");
    if (s.has("generator")) throw ConfigError(s.path("file") + " and generator are exclusive");
  } else {
    m.generator = s.require<std::string>("generator");
    m.params = s.get<json>("params", json::object());
    if (!m.params.is_object()) throw ConfigError(s.path("params") + " must be an object");
  }
  s.finish();
  return m;
}

// {"positions": [[x, z], ...]} or {"count", "z", "x_min", "x_max"}.
std::vector<Position> parse_line(Section s, const Grid2D& grid) {
  std::vector<Position> out;
  if (s.has("positions")) {
    const json& arr = s.raw("positions");
    if (!arr.is_array()) throw ConfigError(s.path("positions") + " must be an array");
    for (const auto& p : arr) {
      if (!p.is_array() || p.size() != 2) throw ConfigError(s.path("positions") + " entries must be [x, z]");
      out.push_back({p[0].get<double>(), p[1].get<double>()});
    }
  } else {
    const int count = s.require<int>("count");
    const double z = s.require<double>("z");
    const double x0 = s.get<double>("x_min", 0.0);
    const double x1 = s.get<double>("x_max", grid.x_extent());
    if (count < 1) throw ConfigError(s.path("count") + " must be at least 1");
    for (int i = 0; i < count; ++i) {
      const double x = count == 1 ? 0.5 * (x0 + x1) : x0 + (x1 - x0) * i / (count - 1);
      out.push_back({x, z});
    }
  }
  s.finish();
  if (out.empty()) throw ConfigError(s.path("positions") + " is empty");
  return out;
}

MisfitSpec parse_misfit(Section s) {
  MisfitSpec m;
  const std::string type = s.get<std::string>("type", "l2");
  if (type == "l2") {
    m.type = MisfitKind::Type::kL2;
  } else if (type == "w2") {
    m.type = MisfitKind::Type::kW2;
  } else {
    throw ConfigError(s.path("type") + " must be l2 or w2");
  }
  try {
    m.scaling = parse_scaling(s.get<std::string>("scaling", "linear"));
  } catch (const ConfigError& e) {
    throw ConfigError(s.path("scaling") + ": " + e.what());
  }
  if (s.has("b") && s.has("b_rel")) throw ConfigError(s.path("b") + " and b_rel are exclusive");
  if (s.has("c") && s.has("c_rel")) throw ConfigError(s.path("c") + " and c_rel are exclusive");
  if (s.has("b_rel")) {
    m.b = s.require<double>("b_rel");
    m.b_relative = true;
  } else {
    m.b = s.get<double>("b", 0.0);
  }
  if (s.has("c_rel")) {
    m.c = s.require<double>("c_rel");
    m.c_relative = true;
  } else {
    m.c = s.get<double>("c", 0.0);
  }
  m.both_sides = s.get<bool>("both_sides", false);
  if (m.c < 0.0) throw ConfigError(s.path("c") + " must be nonnegative");
  if (m.type == MisfitKind::Type::kW2 && (m.scaling == Scaling::kExponential || m.scaling == Scaling::kSoftplus)) {
    positive(m.b, s.path("b"));
  }
  s.finish();
  return m;
}

Range parse_range(Section s) {
  Range r{s.require<double>("min"), s.require<double>("max"), s.require<int>("n")};
  s.finish();
  if (r.n < 1 || (r.n > 1 && !(r.max > r.min))) throw ConfigError("range needs n >= 1 and max > min");
  return r;
}

SignalSpec parse_signal(Section s) {
  SignalSpec g;
  g.type = s.get<std::string>("type", g.type);
  g.nt = s.get<std::size_t>("nt", g.nt);
  g.dt = s.get<double>("dt", g.dt);
  g.centre = s.get<double>("centre", g.centre);
  g.freq = s.get<double>("freq", g.freq);
  g.sigma = s.get<double>("sigma", g.sigma);
  g.width = s.get<double>("width", g.width);
  g.amplitude = s.get<double>("amplitude", g.amplitude);
  s.finish();
  static const std::set<std::string> known{"ricker", "gaussian", "raised_cosine", "cosine_density"};
  if (!known.contains(g.type)) throw ConfigError("unknown signal type '" + g.type + "'");
  if (g.nt < 2) throw ConfigError("signal needs at least 2 samples");
  positive(g.dt, "signal dt");
  return g;
}

LandscapeScan parse_scan(Section s) {
  LandscapeScan sc;
  sc.name = s.require<std::string>("name");
  sc.kind = s.require<std::string>("kind");
  sc.signal = parse_signal(s.sub("signal"));
  if (sc.kind == "shift_dilate") {
    sc.s = parse_range(s.sub("s"));
    if (s.has("lambda")) sc.lambda = parse_range(s.sub("lambda"));
    sc.metric = parse_misfit(s.sub("metric"));
    if (s.has("centre")) sc.centre = s.require<double>("centre");
    sc.analytic = s.get<bool>("analytic", false);
  } else if (sc.kind == "huber") {
    sc.s = parse_range(s.sub("s"));
    sc.c_values = s.require<std::vector<double>>("c");
  } else if (sc.kind == "noise") {
    sc.eta = s.require<std::vector<double>>("eta");
    sc.n_values = s.require<std::vector<int>>("n");
    sc.trials = s.get<int>("trials", sc.trials);
  } else {
    throw ConfigError("unknown scan kind '" + sc.kind + "'");
  }
  s.finish();
  return sc;
}

double param(const json& p, const char* key, double fallback) {
  if (!p.contains(key)) return fallback;
  if (!p.at(key).is_number()) throw ConfigError(std::string("model parameter ") + key + " must be a number");
  return p.at(key).get<double>();
}

void only_keys(const json& p, std::initializer_list<const char*> keys, const std::string& name) {
  for (const auto& [k, v] : p.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* x) { return k == x; })) {
      throw ConfigError("unknown parameter '" + k + "' for model generator " + name);
    }
  }
}

}  // namespace

MisfitKind MisfitSpec::resolve(double data_max) const {
  if (type == MisfitKind::Type::kL2) return MisfitKind::l2();
  NormalizationScheme s;
  s.kind = scaling;
  s.both_sides = both_sides;
  if ((b_relative || c_relative) && !(data_max > 0.0)) {
    throw ConfigError("relative normalization parameters need nonzero data");
  }
  s.b = b_relative ? b / data_max : b;
  s.c = c_relative ? c * data_max : c;
  return MisfitKind::w2(s);
}

Trace SignalSpec::make() const {
  Trace t;
  t.dt = dt;
  t.samples.resize(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    const double x = t.time(i) - centre;
    double v = 0.0;
    if (type == "ricker") {
      v = ricker_value(freq, 0.0, x);
    } else if (type == "gaussian") {
      v = std::exp(-0.5 * x * x / (sigma * sigma)) / (sigma * std::sqrt(2.0 * std::numbers::pi));
    } else if (type == "raised_cosine") {
      v = std::abs(x) < 0.5 * width ? 1.0 + std::cos(2.0 * std::numbers::pi * x / width) : 0.0;
    } else {  // cosine_density over the whole window
      v = 1.0 + 0.5 * std::cos(2.0 * std::numbers::pi * (t.time(i) + 0.5 * dt) / (static_cast<double>(nt) * dt));
    }
    t.samples[i] = amplitude * v;
  }
  return t;
}

std::vector<double> Range::values() const {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? min : min + (max - min) * i / (n - 1);
  return v;
}

VelocityModel builtin_model(const std::string& name, const Grid2D& grid, const json& p) {
  const json params = p.is_null() ? json::object() : p;
  std::vector<double> v(grid.size());
  auto fill = [&](auto fn) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      for (int iz = 0; iz < grid.nz; ++iz) v[grid.index(ix, iz)] = fn(ix * grid.dx, iz * grid.dz);
    }
  };
  if (name == "constant") {
    only_keys(params, {"v"}, name);
    const double c = param(params, "v", 2000.0);
    fill([&](double, double) { return c; });
  } else if (name == "layered") {
    only_keys(params, {"v1", "v2", "z_interface"}, name);
    const double v1 = param(params, "v1", 2000.0);
    const double v2 = param(params, "v2", 4000.0);
    const double zi = param(params, "z_interface", 1000.0);
    fill([&](double, double z) { return z < zi ? v1 : v2; });
  } else if (name == "camembert") {
    only_keys(params, {"v_bg", "v_anom", "cx", "cz", "radius"}, name);
    const double vb = param(params, "v_bg", 4000.0);
    const double va = param(params, "v_anom", 4600.0);
    const double cx = param(params, "cx", 0.5 * grid.x_extent());
    const double cz = param(params, "cz", 0.5 * grid.z_extent());
    const double r = param(params, "radius", 0.25 * std::min(grid.x_extent(), grid.z_extent()));
    fill([&](double x, double z) { return (x - cx) * (x - cx) + (z - cz) * (z - cz) <= r * r ? va : vb; });
  } else if (name == "gradient") {
    only_keys(params, {"v0", "k"}, name);
    const double v0 = param(params, "v0", 2000.0);
    const double k = param(params, "k", 0.5);
    fill([&](double, double z) { return v0 + k * z; });
  } else {
    throw ConfigError("unknown model generator '" + name + "'");
  }
  for (double x : v) positive(x, "generated velocity");
  return VelocityModel::from_velocity(grid, v);
}

VelocityModel make_model(const ModelSpec& spec, const Grid2D& grid, const fs::path& base_dir) {
  if (spec.file.empty()) return builtin_model(spec.generator, grid, spec.params);
  const fs::path p = spec.file.is_absolute() ? spec.file : base_dir / spec.file;
  VelocityModel m = read_model(p);
  if (!(m.grid() == grid)) throw ConfigError("model file " + p.string() + " does not match the configured grid");
  return m;
}

Wavelet make_wavelet(const ExperimentConfig& cfg) {
  const double t0 = cfg.wavelet.t0 > 0.0 ? cfg.wavelet.t0 : 1.2 / cfg.wavelet.peak_freq;
  return ricker(cfg.wavelet.peak_freq, t0, cfg.sim.nt, cfg.sim.dt).scaled(cfg.wavelet.amplitude);
}

ExperimentConfig parse_config(const json& doc, const fs::path& base_dir) {
  ExperimentConfig c;
  c.base_dir = base_dir;
  Section root(doc, "config");
  c.name = root.get<std::string>("name", c.name);
  c.seed = root.get<std::uint64_t>("seed", 0);
  c.threads = root.get<int>("threads", 0);
  if (c.threads < 0) throw ConfigError("config.threads must be nonnegative");

  if (root.has("grid")) {
    Section g = root.sub("grid");
    const int nx = g.require<int>("nx");
    const int nz = g.require<int>("nz");
    const double dx = g.require<double>("dx");
    const double dz = g.get<double>("dz", dx);
    g.finish();
    try {
      c.grid = Grid2D::make(nx, nz, dx, dz);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("config.grid: ") + e.what());
    }
  }

  if (root.has("model")) {
    if (!root.has("grid")) throw ConfigError("config.model needs config.grid");
    Section m = root.sub("model");
    c.true_model = parse_model(m.sub("true"));
    if (m.has("initial")) c.initial_model = parse_model(m.sub("initial"));
    m.finish();

    Section a = root.sub("acquisition");
    c.acquisition.sources = parse_line(a.sub("sources"), c.grid);
    c.acquisition.receivers = parse_line(a.sub("receivers"), c.grid);
    c.acquisition.dt_record = a.require<double>("dt_record");
    c.acquisition.record_time = a.require<double>("record_time");
    a.finish();
    positive(c.acquisition.dt_record, "acquisition.dt_record");
    positive(c.acquisition.record_time, "acquisition.record_time");

    if (root.has("wavelet")) {
      Section w = root.sub("wavelet");
      c.wavelet.peak_freq = w.get<double>("peak_freq", c.wavelet.peak_freq);
      c.wavelet.t0 = w.get<double>("t0", c.wavelet.t0);
      c.wavelet.amplitude = w.get<double>("amplitude", c.wavelet.amplitude);
      w.finish();
      positive(c.wavelet.peak_freq, "wavelet.peak_freq");
    }

    Section s = root.sub("sim");
    c.sim.dt = s.require<double>("dt");
    c.sim.stencil_order = s.get<int>("stencil_order", c.sim.stencil_order);
    c.sim.sponge_width = s.get<int>("sponge_width", c.sim.sponge_width);
    c.sim.sponge_reflection = s.get<double>("sponge_reflection", c.sim.sponge_reflection);
    c.sim.sponge_velocity = s.get<double>("sponge_velocity", c.sim.sponge_velocity);
    c.sim.store_stride = s.get<int>("store_stride", c.sim.store_stride);
    c.sim.source_mask_radius = s.get<int>("source_mask_radius", c.sim.source_mask_radius);
    c.sim.check_every = s.get<int>("check_every", c.sim.check_every);
    s.finish();
    positive(c.sim.dt, "sim.dt");
    c.sim.peak_freq = c.wavelet.peak_freq;
    try {
      c.acquisition.validate(c.grid, c.sim.dt);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("config.acquisition: ") + e.what());
    }
    c.sim.nt = steps_for(c.acquisition, c.sim.dt);
  } else {
    for (const char* k : {"acquisition", "wavelet", "sim"}) {
      if (root.has(k)) throw ConfigError(std::string("config.") + k + " needs config.model");
    }
  }

  if (root.has("misfit")) c.misfit = parse_misfit(root.sub("misfit"));

  if (root.has("optimizer")) {
    Section o = root.sub("optimizer");
    auto& op = c.optimizer;
    op.memory = o.get<int>("memory", op.memory);
    op.max_iters = o.get<int>("max_iters", op.max_iters);
    op.c1 = o.get<double>("c1", op.c1);
    op.c2 = o.get<double>("c2", op.c2);
    op.initial_step = o.get<double>("initial_step", op.initial_step);
    op.first_step_fraction = o.get<double>("first_step_fraction", op.first_step_fraction);
    op.grad_tol = o.get<double>("grad_tol", op.grad_tol);
    op.step_tol = o.get<double>("step_tol", op.step_tol);
    op.v_min = o.get<double>("v_min", op.v_min);
    op.v_max = o.get<double>("v_max", op.v_max);
    op.max_line_search = o.get<int>("max_line_search", op.max_line_search);
    o.finish();
    try {
      op.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("config.optimizer: ") + e.what());
    }
  }

  if (root.has("outputs")) {
    Section o = root.sub("outputs");
    c.outputs.snapshot_every = o.get<int>("snapshot_every", c.outputs.snapshot_every);
    c.outputs.k_cut = o.get<int>("k_cut", c.outputs.k_cut);
    c.outputs.write_synthetic = o.get<bool>("write_synthetic", c.outputs.write_synthetic);
    const std::string fmt = o.get<std::string>("format", "f32");
    if (fmt == "f32") {
      c.outputs.format = SampleFormat::kF32;
    } else if (fmt == "f64") {
      c.outputs.format = SampleFormat::kF64;
    } else {
      throw ConfigError("config.outputs.format must be f32 or f64");
    }
    o.finish();
    if (c.outputs.snapshot_every < 0 || c.outputs.k_cut < 0) throw ConfigError("config.outputs values must be >= 0");
  }

  if (root.has("landscape")) {
    const json& scans = root.raw("landscape");
    if (!scans.is_array()) throw ConfigError("config.landscape must be an array of scans");
    for (std::size_t i = 0; i < scans.size(); ++i) {
      c.landscape.push_back(parse_scan(Section(scans[i], "config.landscape[" + std::to_string(i) + "]")));
    }
  }
  root.finish();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

}  // namespace fwi
