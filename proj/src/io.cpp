#include "fwi/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

namespace fwi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) out |= ((v >> (8 * i)) & 0xFF) << (8 * (sizeof(U) - 1 - i));
    return out;
  }
  return v;
}

std::vector<unsigned char> encode(std::span<const double> values, SampleFormat fmt) {
  const std::size_t width = fmt == SampleFormat::kF32 ? 4 : 8;
  std::vector<unsigned char> bytes(values.size() * width);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (fmt == SampleFormat::kF32) {
      const auto u = to_little(std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
      std::memcpy(bytes.data() + 4 * i, &u, 4);
    } else {
      const auto u = to_little(std::bit_cast<std::uint64_t>(values[i]));
      std::memcpy(bytes.data() + 8 * i, &u, 8);
    }
  }
  return bytes;
}

std::vector<double> decode(std::span<const unsigned char> bytes, SampleFormat fmt) {
  const std::size_t width = fmt == SampleFormat::kF32 ? 4 : 8;
  std::vector<double> out(bytes.size() / width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (fmt == SampleFormat::kF32) {
      std::uint32_t u = 0;
      std::memcpy(&u, bytes.data() + 4 * i, 4);
      out[i] = std::bit_cast<float>(to_little(u));
    } else {
      std::uint64_t u = 0;
      std::memcpy(&u, bytes.data() + 8 * i, 8);
      out[i] = std::bit_cast<double>(to_little(u));
    }
  }
  return out;
}

std::string format_name(SampleFormat f) { return f == SampleFormat::kF32 ? "f32" : "f64"; }

SampleFormat parse_format(const std::string& s) {
  if (s == "f32") return SampleFormat::kF32;
  if (s == "f64") return SampleFormat::kF64;
  throw IoError("unknown sample format '" + s + "'");
}

std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << v;
  return os.str();
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return bytes;
}

void write_bytes(const fs::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void write_binary_with_header(const fs::path& bin, std::span<const double> values, SampleFormat fmt, json header) {
  const auto bytes = encode(values, fmt);
  write_bytes(bin, bytes);
  header["format"] = format_name(fmt);
  header["byte_order"] = "little";
  header["checksum"] = "crc32:" + hex32(crc32_of(bytes));
  write_text(sidecar_path(bin), header.dump(2) + "\n");
}

struct Loaded {
  json header;
  std::vector<double> values;
};

Loaded load_binary(const fs::path& bin, const std::string& kind) {
  json header;
  try {
    header = json::parse(read_text(sidecar_path(bin)));
  } catch (const json::exception& e) {
    throw IoError("malformed header for " + bin.string() + ": " + e.what());
  }
  try {
    if (header.at("kind").get<std::string>() != kind) throw IoError(bin.string() + " is not a " + kind + " file");
    const auto bytes = read_bytes(bin);
    const std::string want = header.at("checksum").get<std::string>();
    if (want != "crc32:" + hex32(crc32_of(bytes))) throw IoError("checksum mismatch for " + bin.string());
    const SampleFormat fmt = parse_format(header.at("format").get<std::string>());
    std::size_t count = 1;
    for (const auto& d : header.at("shape")) count *= d.get<std::size_t>();
    const std::size_t width = fmt == SampleFormat::kF32 ? 4 : 8;
    if (bytes.size() != count * width) throw IoError("size of " + bin.string() + " does not match its header");
    return {header, decode(bytes, fmt)};
  } catch (const json::exception& e) {
    throw IoError("incomplete header for " + bin.string() + ": " + e.what());
  }
}

}  // namespace

fs::path sidecar_path(const fs::path& bin) {
  fs::path p = bin;
  p.replace_extension(".json");
  return p;
}

std::uint32_t crc32_of(std::span<const unsigned char> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t file_crc32(const fs::path& path) { return crc32_of(read_bytes(path)); }

void write_model(const fs::path& bin, const VelocityModel& model, SampleFormat fmt, ModelQuantity q) {
  const Grid2D& g = model.grid();
  json h;
  h["kind"] = "model";
  h["shape"] = {g.nx, g.nz};
  h["spacing"] = {g.dx, g.dz};
  h["order"] = "z_fastest";
  if (q == ModelQuantity::kSlowness2) {
    h["quantity"] = "slowness2";
    h["units"] = "s2/m2";
    write_binary_with_header(bin, model.m(), fmt, h);
  } else {
    h["quantity"] = "velocity";
    h["units"] = "m/s";
    write_binary_with_header(bin, model.velocity(), fmt, h);
  }
}

VelocityModel read_model(const fs::path& bin) {
  Loaded l = load_binary(bin, "model");
  try {
    const auto shape = l.header.at("shape").get<std::vector<int>>();
    const auto spacing = l.header.at("spacing").get<std::vector<double>>();
    if (shape.size() != 2 || spacing.size() != 2) throw IoError("model header needs 2D shape and spacing");
    const Grid2D g = Grid2D::make(shape[0], shape[1], spacing[0], spacing[1]);
    const std::string q = l.header.at("quantity").get<std::string>();
    if (q == "slowness2") return VelocityModel(g, std::move(l.values));
    if (q == "velocity") return VelocityModel::from_velocity(g, l.values);
    throw IoError("unknown model quantity '" + q + "'");
  } catch (const json::exception& e) {
    throw IoError("incomplete header for " + bin.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError(bin.string() + ": " + e.what());
  }
}

void write_gather(const fs::path& bin, const ShotGather& gather, SampleFormat fmt) {
  json h;
  h["kind"] = "gather";
  h["shape"] = {gather.nrec(), gather.nt()};
  h["dt"] = gather.dt();
  h["order"] = "time_fastest";
  h["units"] = "pressure";
  h["source_index"] = gather.source_index();
  write_binary_with_header(bin, gather.data(), fmt, h);
}

ShotGather read_gather(const fs::path& bin) {
  Loaded l = load_binary(bin, "gather");
  try {
    const auto shape = l.header.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw IoError("gather header needs a 2D shape");
    return ShotGather(shape[0], shape[1], l.header.at("dt").get<double>(), l.header.at("source_index").get<int>(),
                      std::move(l.values));
  } catch (const json::exception& e) {
    throw IoError("incomplete header for " + bin.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError(bin.string() + ": " + e.what());
  }
}

void Manifest::add(const fs::path& file) {
  const fs::path rel = fs::relative(file, root_);
  const std::string key = rel.generic_string();
  std::erase_if(entries_, [&](const Entry& e) { return e.path == key; });
  entries_.push_back({key, fs::file_size(file), file_crc32(file)});
}

void Manifest::add_all() {
  std::error_code ec;
  for (const auto& e : fs::recursive_directory_iterator(root_, ec)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json") add(e.path());
  }
  if (ec) throw IoError("cannot list " + root_.string() + ": " + ec.message());
}

void Manifest::write() const {
  std::vector<Entry> sorted = entries_;
  std::ranges::sort(sorted, {}, &Entry::path);
  json files = json::array();
  for (const auto& e : sorted) files.push_back({{"path", e.path}, {"bytes", e.bytes}, {"crc32", hex32(e.crc)}});
  write_text(root_ / "manifest.json", json{{"files", files}}.dump(2) + "\n");
}

bool Manifest::verify(const fs::path& root) {
  const json m = json::parse(read_text(root / "manifest.json"));
  for (const auto& f : m.at("files")) {
    const fs::path p = root / f.at("path").get<std::string>();
    if (!fs::exists(p) || fs::file_size(p) != f.at("bytes").get<std::uintmax_t>()) return false;
    if (hex32(file_crc32(p)) != f.at("crc32").get<std::string>()) return false;
  }
  return true;
}

void write_text(const fs::path& path, const std::string& text) {
  write_bytes(path, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_bytes(path);
  return {bytes.begin(), bytes.end()};
}

}  // namespace fwi
