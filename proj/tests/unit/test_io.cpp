#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "fwi/io.hpp"

using namespace fwi;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fwi_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

VelocityModel random_model(std::uint64_t seed) {
  const Grid2D g = Grid2D::make(17, 11, 12.5, 10.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> v(1500.0, 4500.0);
  std::vector<double> vel(g.size());
  for (auto& x : vel) x = v(rng);
  return VelocityModel::from_velocity(g, vel);
}

ShotGather random_gather(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> d(7 * 50);
  for (auto& x : d) x = n(rng);
  return ShotGather(7, 50, 2e-3, 3, d);
}

std::vector<char> bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("sidecar path swaps the extension") {
  CHECK(sidecar_path("a/b/shot_001.bin") == fs::path("a/b/shot_001.json"));
}

TEST_CASE("crc32 matches the standard check value") {
  const std::string s = "123456789";
  CHECK(crc32_of(std::span(reinterpret_cast<const unsigned char*>(s.data()), s.size())) == 0xCBF43926u);
}

TEST_CASE("f64 model round trip is bit-exact") {
  const fs::path dir = scratch("f64");
  const VelocityModel m = random_model(1);
  write_model(dir / "m.bin", m, SampleFormat::kF64);
  const VelocityModel r = read_model(dir / "m.bin");
  REQUIRE(r.grid() == m.grid());
  for (std::size_t i = 0; i < m.m().size(); ++i) {
    CHECK(std::bit_cast<std::uint64_t>(r.m()[i]) == std::bit_cast<std::uint64_t>(m.m()[i]));
  }
}

TEST_CASE("f32 model round trip stores float roundings and is stable") {
  const fs::path dir = scratch("f32");
  const VelocityModel m = random_model(2);
  write_model(dir / "a.bin", m);
  const VelocityModel r = read_model(dir / "a.bin");
  for (std::size_t i = 0; i < m.m().size(); ++i) CHECK(r.m()[i] == static_cast<double>(static_cast<float>(m.m()[i])));
  write_model(dir / "b.bin", r);
  CHECK(bytes_of(dir / "a.bin") == bytes_of(dir / "b.bin"));
}

TEST_CASE("velocity-quantity model files are accepted") {
  const fs::path dir = scratch("vel");
  const VelocityModel m = VelocityModel::constant_velocity(Grid2D::make(5, 4, 10.0, 10.0), 2500.0);
  write_model(dir / "v.bin", m, SampleFormat::kF64, ModelQuantity::kVelocity);
  const VelocityModel r = read_model(dir / "v.bin");
  CHECK(r.velocity(2, 2) == doctest::Approx(2500.0).epsilon(1e-14));
  CHECK(fs::file_size(dir / "v.bin") == 5 * 4 * 8);
}

TEST_CASE("gather round trip keeps shape, dt, source index and samples") {
  const fs::path dir = scratch("gather");
  const ShotGather g = random_gather(3);
  write_gather(dir / "g.bin", g, SampleFormat::kF64);
  const ShotGather r = read_gather(dir / "g.bin");
  CHECK(r.same_geometry(g));
  CHECK(r.source_index() == 3);
  for (std::size_t i = 0; i < g.data().size(); ++i) CHECK(r.data()[i] == g.data()[i]);
}

TEST_CASE("binary layout is little-endian with the documented ordering") {
  const fs::path dir = scratch("layout");
  ShotGather g(2, 3, 1e-3, 0);
  g.at(1, 0) = 1.5;
  write_gather(dir / "g.bin", g);
  const auto b = bytes_of(dir / "g.bin");
  REQUIRE(b.size() == 6 * 4);
  float v = 0.0f;
  std::memcpy(&v, b.data() + 3 * 4, 4);  // receiver 1, sample 0 with time fastest
  CHECK(v == 1.5f);
}

TEST_CASE("corrupted binaries and headers raise IoError") {
  const fs::path dir = scratch("corrupt");
  write_gather(dir / "g.bin", random_gather(4));
  SUBCASE("flipped byte") {
    std::fstream f(dir / "g.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(10);
    f.put('\x7f');
    f.close();
    CHECK_THROWS_AS(read_gather(dir / "g.bin"), IoError);
  }
  SUBCASE("truncated") {
    fs::resize_file(dir / "g.bin", 20);
    CHECK_THROWS_AS(read_gather(dir / "g.bin"), IoError);
  }
  SUBCASE("missing sidecar") {
    fs::remove(dir / "g.json");
    CHECK_THROWS_AS(read_gather(dir / "g.bin"), IoError);
  }
  SUBCASE("wrong kind") { CHECK_THROWS_AS(read_model(dir / "g.bin"), IoError); }
  SUBCASE("malformed header") {
    write_text(dir / "g.json", "{not json");
    CHECK_THROWS_AS(read_gather(dir / "g.bin"), IoError);
  }
}

TEST_CASE("missing files raise IoError with the matching exit code") {
  try {
    read_text("/nonexistent/dir/file.txt");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(e.exit_code() == ExitCode::kIo);
  }
  CHECK_THROWS_AS(write_text("/nonexistent/dir/file.txt", "x"), IoError);
}

TEST_CASE("manifest lists every file and detects changes") {
  const fs::path dir = scratch("manifest");
  fs::create_directories(dir / "sub");
  write_gather(dir / "a.bin", random_gather(5));
  write_text(dir / "sub" / "note.txt", "hello\n");
  Manifest m(dir);
  m.add_all();
  m.write();
  const std::string text = read_text(dir / "manifest.json");
  CHECK(text.find("a.bin") != std::string::npos);
  CHECK(text.find("a.json") != std::string::npos);
  CHECK(text.find("sub/note.txt") != std::string::npos);
  CHECK(text.find("manifest.json") == std::string::npos);
  CHECK(text.find("a.bin") < text.find("sub/note.txt"));
  CHECK(Manifest::verify(dir));
  write_text(dir / "sub" / "note.txt", "hellO\n");
  CHECK_FALSE(Manifest::verify(dir));
}
