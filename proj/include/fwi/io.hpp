#pragma once

// Binary grid and gather files with JSON sidecars, and run manifests.
//
// A binary file holds little-endian IEEE floats, row-major: z fastest for
// models, time fastest for gathers. The sidecar `<name>.json` next to
// `<name>.bin` records shape, spacing, dt, units, the sample format and a
// CRC-32 of the binary.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fwi/grid.hpp"

namespace fwi {

enum class SampleFormat { kF32, kF64 };

// Which quantity a model file stores. Writers emit squared slowness so that
// a model survives a round trip unchanged; readers also accept velocity.
enum class ModelQuantity { kSlowness2, kVelocity };

std::filesystem::path sidecar_path(const std::filesystem::path& bin);

std::uint32_t crc32_of(std::span<const unsigned char> bytes);
std::uint32_t file_crc32(const std::filesystem::path& path);

// With kF32 the stored values are the float roundings of the samples; a
// second write of the data read back is byte-identical to the first.
void write_model(const std::filesystem::path& bin, const VelocityModel& model,
                 SampleFormat fmt = SampleFormat::kF32, ModelQuantity q = ModelQuantity::kSlowness2);
VelocityModel read_model(const std::filesystem::path& bin);

void write_gather(const std::filesystem::path& bin, const ShotGather& gather, SampleFormat fmt = SampleFormat::kF32);
ShotGather read_gather(const std::filesystem::path& bin);

// Records every file written under a root directory with its size and
// CRC-32; `manifest.json` lists them sorted by relative path.
class Manifest {
 public:
  explicit Manifest(std::filesystem::path root) : root_(std::move(root)) {}
  void add(const std::filesystem::path& file);
  // Adds every regular file under the root except the manifest itself.
  void add_all();
  void write() const;
  static bool verify(const std::filesystem::path& root);

 private:
  struct Entry {
    std::string path;
    std::uintmax_t bytes = 0;
    std::uint32_t crc = 0;
  };
  std::filesystem::path root_;
  std::vector<Entry> entries_;
};

// Text helpers that raise IoError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace fwi
