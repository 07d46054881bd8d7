#include <filesystem>

#include "doctest.h"
#include "fwi/config.hpp"

using namespace fwi;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json small_config() {
  return json::parse(R"({
    "name": "small",
    "seed": 7,
    "grid": {"nx": 40, "nz": 30, "dx": 10.0},
    "model": {
      "true": {"generator": "layered", "params": {"v1": 2000, "v2": 3000, "z_interface": 150}},
      "initial": {"generator": "constant", "params": {"v": 2000}}
    },
    "acquisition": {
      "sources": {"count": 2, "z": 20.0, "x_min": 100.0, "x_max": 300.0},
      "receivers": {"count": 11, "z": 20.0},
      "dt_record": 0.002,
      "record_time": 0.3
    },
    "wavelet": {"peak_freq": 15.0},
    "sim": {"dt": 0.001, "sponge_width": 15},
    "misfit": {"type": "w2", "scaling": "softplus", "b_rel": 2.0},
    "optimizer": {"max_iters": 3, "v_min": 1500, "v_max": 3500},
    "outputs": {"snapshot_every": 1, "format": "f64"}
  })");
}

}  // namespace

TEST_CASE("a complete config parses with derived fields") {
  const ExperimentConfig c = parse_config(small_config());
  CHECK(c.name == "small");
  CHECK(c.seed == 7);
  CHECK(c.grid == Grid2D::make(40, 30, 10.0, 10.0));
  REQUIRE(c.acquisition.sources.size() == 2);
  CHECK(c.acquisition.sources[1].x == doctest::Approx(300.0));
  REQUIRE(c.acquisition.receivers.size() == 11);
  CHECK(c.acquisition.receivers.front().x == 0.0);
  CHECK(c.acquisition.receivers.back().x == doctest::Approx(390.0));
  CHECK(c.sim.nt == steps_for(c.acquisition, 0.001));
  CHECK(c.sim.peak_freq == 15.0);
  CHECK(c.optimizer.max_iters == 3);
  CHECK(c.outputs.format == SampleFormat::kF64);
  CHECK(c.misfit.b_relative);
}

TEST_CASE("unknown keys are rejected at every level") {
  for (const char* ptr : {"/extra", "/grid/extra", "/model/true/extra", "/acquisition/sources/extra",
                          "/sim/extra", "/misfit/extra", "/optimizer/extra", "/outputs/extra", "/wavelet/extra"}) {
    CAPTURE(ptr);
    json j = small_config();
    j[json::json_pointer(ptr)] = 1;
    CHECK_THROWS_AS(parse_config(j), ConfigError);
  }
}

TEST_CASE("schema violations raise ConfigError") {
  auto broken = [](const char* ptr, json value) {
    json j = small_config();
    j[json::json_pointer(ptr)] = std::move(value);
    return j;
  };
  CHECK_THROWS_AS(parse_config(broken("/grid/nx", "forty")), ConfigError);
  CHECK_THROWS_AS(parse_config(broken("/grid/nx", 2)), ConfigError);
  CHECK_THROWS_AS(parse_config(broken("/misfit/type", "w1")), ConfigError);
  CHECK_THROWS_AS(parse_config(broken("/misfit/scaling", "cubic")), ConfigError);
  CHECK_THROWS_AS(parse_config(broken("/sim/dt", -1.0)), ConfigError);
  CHECK_THROWS_AS(parse_config(broken("/acquisition/dt_record", 0.0015)), ConfigError);
  CHECK_THROWS_AS(parse_config(broken("/acquisition/sources/z", 5000.0)), ConfigError);
  CHECK_THROWS_AS(parse_config(broken("/optimizer/c2", 2.0)), ConfigError);
  CHECK_THROWS_AS(parse_config(broken("/outputs/format", "f16")), ConfigError);
  json no_grid = small_config();
  no_grid.erase("grid");
  CHECK_THROWS_AS(parse_config(no_grid), ConfigError);
  CHECK_THROWS_AS(parse_config(json::array()), ConfigError);
}

TEST_CASE("a model entry takes a generator or a file, not both") {
  json j = small_config();
  j["model"]["true"]["file"] = "m.bin";
  CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("relative normalization parameters scale with the data maximum") {
  MisfitSpec m;
  m.type = MisfitKind::Type::kW2;
  m.scaling = Scaling::kSoftplus;
  m.b = 4.0;
  m.b_relative = true;
  m.c = 0.5;
  m.c_relative = true;
  const MisfitKind k = m.resolve(2.0);
  CHECK(k.type == MisfitKind::Type::kW2);
  CHECK(k.scheme.b == 2.0);
  CHECK(k.scheme.c == 1.0);
  CHECK_THROWS_AS(m.resolve(0.0), ConfigError);
  m.type = MisfitKind::Type::kL2;
  CHECK(m.resolve(0.0).type == MisfitKind::Type::kL2);
}

TEST_CASE("layered generator is a step at the interface depth") {
  const Grid2D g = Grid2D::make(11, 101, 15.0, 15.0);
  const VelocityModel m = builtin_model("layered", g, {{"v1", 2000.0}, {"v2", 4000.0}, {"z_interface", 1000.0}});
  for (int iz = 0; iz < g.nz; ++iz) {
    const double expect = iz * 15.0 < 1000.0 ? 2000.0 : 4000.0;
    CHECK(m.velocity(5, iz) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("camembert generator places a disk at the anomaly velocity") {
  const Grid2D g = Grid2D::make(101, 81, 30.0, 30.0);
  const VelocityModel m = builtin_model("camembert", g, {{"v_bg", 4000.0}, {"v_anom", 4600.0}, {"radius", 600.0}});
  CHECK(m.velocity(50, 40) == doctest::Approx(4600.0));
  CHECK(m.velocity(50 + 19, 40) == doctest::Approx(4600.0));
  CHECK(m.velocity(50 + 21, 40) == doctest::Approx(4000.0));
  CHECK(m.velocity(0, 0) == doctest::Approx(4000.0));
  int inside = 0;
  for (int ix = 0; ix < g.nx; ++ix) {
    for (int iz = 0; iz < g.nz; ++iz) inside += m.velocity(ix, iz) > 4300.0;
  }
  CHECK(std::abs(inside * 900.0 - M_PI * 600.0 * 600.0) < 0.05 * M_PI * 600.0 * 600.0);
}

TEST_CASE("constant and gradient generators") {
  const Grid2D g = Grid2D::make(5, 6, 10.0, 10.0);
  const VelocityModel c = builtin_model("constant", g, {{"v", 2500.0}});
  CHECK(c.min_velocity() == doctest::Approx(2500.0));
  CHECK(c.max_velocity() == doctest::Approx(2500.0));
  const VelocityModel gr = builtin_model("gradient", g, {{"v0", 1500.0}, {"k", 1.0}});
  CHECK(gr.velocity(2, 5) == doctest::Approx(1550.0));
  CHECK_THROWS_AS(builtin_model("marmousi", g), ConfigError);
  CHECK_THROWS_AS(builtin_model("constant", g, {{"speed", 1.0}}), ConfigError);
  CHECK_THROWS_AS(builtin_model("constant", g, {{"v", -1.0}}), ConfigError);
}

TEST_CASE("model files resolve relative to the config directory") {
  const fs::path dir = fs::temp_directory_path() / "fwi_test_config_model";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const Grid2D g = Grid2D::make(40, 30, 10.0, 10.0);
  write_model(dir / "m.bin", VelocityModel::constant_velocity(g, 2200.0));
  json j = small_config();
  j["model"]["initial"] = {{"file", "m.bin"}};
  write_text(dir / "cfg.json", j.dump());
  const ExperimentConfig c = load_config(dir / "cfg.json");
  const VelocityModel m = make_model(*c.initial_model, c.grid, c.base_dir);
  CHECK(m.velocity(3, 3) == doctest::Approx(2200.0).epsilon(1e-6));
  const Grid2D other = Grid2D::make(41, 30, 10.0, 10.0);
  CHECK_THROWS_AS(make_model(*c.initial_model, other, c.base_dir), ConfigError);
}

TEST_CASE("load_config distinguishes unreadable and invalid files") {
  CHECK_THROWS_AS(load_config("/nonexistent/cfg.json"), IoError);
  const fs::path p = fs::temp_directory_path() / "fwi_test_config_bad.json";
  write_text(p, "{\"grid\": ");
  CHECK_THROWS_AS(load_config(p), ConfigError);
}

TEST_CASE("wavelet defaults its delay to 1.2 periods") {
  const ExperimentConfig c = parse_config(small_config());
  const Wavelet w = make_wavelet(c);
  CHECK(w.nt() == c.sim.nt);
  CHECK(w.t0 == doctest::Approx(1.2 / 15.0));
}

TEST_CASE("landscape scans parse and ranges are inclusive") {
  const json j = json::parse(R"({"landscape": [
    {"name": "a", "kind": "shift_dilate", "signal": {"type": "ricker", "freq": 10},
     "s": {"min": -0.2, "max": 0.2, "n": 5}, "lambda": {"min": 0.8, "max": 1.2, "n": 3},
     "metric": {"type": "w2", "scaling": "exponential", "b_rel": 4.0}},
    {"name": "b", "kind": "huber", "signal": {"type": "raised_cosine"}, "s": {"min": 0, "max": 8, "n": 9}, "c": [1]},
    {"name": "c", "kind": "noise", "signal": {"type": "cosine_density"}, "eta": [0.01], "n": [50, 100]}
  ]})");
  const ExperimentConfig c = parse_config(j);
  REQUIRE(c.landscape.size() == 3);
  const auto s = c.landscape[0].s.values();
  CHECK(s.size() == 5);
  CHECK(s.front() == -0.2);
  CHECK(s.back() == 0.2);
  CHECK(c.landscape[0].lambda->values()[1] == doctest::Approx(1.0));
  CHECK(c.landscape[2].trials == 20);
  json bad = j;
  bad["landscape"][0]["kind"] = "spiral";
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = j;
  bad["landscape"][1]["signal"]["colour"] = "red";
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
}

TEST_CASE("signals integrate as documented") {
  SignalSpec g;
  g.type = "gaussian";
  g.nt = 2001;
  g.dt = 0.01;
  g.centre = 10.0;
  g.sigma = 1.0;
  const Trace t = g.make();
  double mass = 0.0;
  for (double v : t.samples) mass += v * t.dt;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  g.type = "raised_cosine";
  g.width = 2.0;
  const Trace r = g.make();
  CHECK(r.samples[1000] == doctest::Approx(2.0));
  CHECK(r.samples[1000 + 101] == 0.0);
}
