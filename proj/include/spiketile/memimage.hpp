#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiketile/errors.hpp"
#include "spiketile/tiles.hpp"

namespace spiketile {

inline constexpr int kMemFormatVersion = 1;

/// Flat byte-level view of a TileProgram, in load order.
///   weight_mem[tile*256 + pre_slot*16 + post_slot]
///   index_mem[tile] = x << 16 | y
///   membrane_mem: 16 zero bytes per distinct postsynaptic tile row
struct MemoryImage {
  int format_version = kMemFormatVersion;
  int tile_count = 0;
  int neuron_count = 0;
  std::vector<int> output_tile_ids;
  double scale = 1.0;
  long long threshold_q = 1;
  std::vector<std::uint8_t> weight_mem;
  std::vector<std::uint32_t> index_mem;
  std::vector<std::uint8_t> membrane_mem;

  friend bool operator==(const MemoryImage&, const MemoryImage&) = default;
};

namespace detail {

inline char hex_digit(unsigned v) { return "0123456789ABCDEF"[v & 0xF]; }

/// 16 bytes -> 32 uppercase hex chars, last byte of the group first
/// (so byte 0 occupies the final two characters of the line).
inline std::string hex_line16(const std::uint8_t* bytes) {
  std::string s(32, '0');
  for (int i = 0; i < 16; ++i) {
    std::uint8_t b = bytes[15 - i];
    s[2 * i] = hex_digit(b >> 4);
    s[2 * i + 1] = hex_digit(b);
  }
  return s;
}

inline std::string hex_word32(std::uint32_t w) {
  std::string s(8, '0');
  for (int i = 0; i < 8; ++i) s[i] = hex_digit(w >> (28 - 4 * i));
  return s;
}

inline int hex_value(char c, const std::string& where) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  throw ParseError(where + ": invalid hex character '" + std::string(1, c) +
                   "' (uppercase hex required)");
}

inline std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + p.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + p.string());
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Flattens a program to its byte-level image. Tiles must already be in
/// stream order; membrane rows are emitted for each distinct tile row.
inline MemoryImage render_image(const TileProgram& p) {
  MemoryImage img;
  img.tile_count = static_cast<int>(p.tiles.size());
  img.neuron_count = p.neuron_count;
  img.output_tile_ids = p.output_tile_ids;
  img.scale = p.scale;
  img.threshold_q = p.threshold_q;

  img.weight_mem.reserve(p.tiles.size() * 256);
  img.index_mem.reserve(p.tiles.size());
  std::set<int> rows;
  for (const Tile& t : p.tiles) {
    for (std::int8_t w : t.weights) img.weight_mem.push_back(static_cast<std::uint8_t>(w));
    img.index_mem.push_back(static_cast<std::uint32_t>(t.x) << 16 |
                            static_cast<std::uint32_t>(t.y));
    rows.insert(t.y);
  }
  img.membrane_mem.assign(rows.size() * kTileDim, 0);
  return img;
}

/// Writes weights.mem, indices.mem, membranes.mem and metadata.json into dir
/// (created if absent). Returns the rendered image.
inline MemoryImage emit_mem(const TileProgram& p, const std::filesystem::path& dir) {
  MemoryImage img = render_image(p);

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  std::string weights;
  weights.reserve(img.weight_mem.size() * 2 + img.weight_mem.size() / 16);
  for (std::size_t off = 0; off < img.weight_mem.size(); off += 16) {
    weights += detail::hex_line16(img.weight_mem.data() + off);
    weights += '\n';
  }
  detail::write_text(dir / "weights.mem", weights);

  std::string indices;
  for (std::uint32_t w : img.index_mem) {
    indices += detail::hex_word32(w);
    indices += '\n';
  }
  detail::write_text(dir / "indices.mem", indices);

  std::string membranes;
  for (std::size_t off = 0; off < img.membrane_mem.size(); off += 16) {
    membranes += detail::hex_line16(img.membrane_mem.data() + off);
    membranes += '\n';
  }
  detail::write_text(dir / "membranes.mem", membranes);

  nlohmann::ordered_json meta;
  meta["format_version"] = img.format_version;
  meta["tile_count"] = img.tile_count;
  meta["neuron_count"] = img.neuron_count;
  meta["output_tile_ids"] = img.output_tile_ids;
  meta["scale"] = img.scale;
  meta["threshold_q"] = img.threshold_q;
  detail::write_text(dir / "metadata.json", meta.dump(2) + "\n");

  return img;
}

/// The image as a self-contained C source string (uint8/uint32 arrays plus
/// size macros), for baking into firmware.
inline std::string render_c_array(const MemoryImage& img, const std::string& prefix = "snn") {
  std::ostringstream os;
  os << "/* Tile memory image, generated - do not edit. */\n";
  os << "#include <stdint.h>\n\n";
  os << "#define " << prefix << "_FORMAT_VERSION " << img.format_version << "\n";
  os << "#define " << prefix << "_TILE_DIM " << kTileDim << "\n";
  os << "#define " << prefix << "_TILE_COUNT " << img.tile_count << "\n";
  os << "#define " << prefix << "_NEURON_COUNT " << img.neuron_count << "\n";
  os << "#define " << prefix << "_THRESHOLD_Q " << img.threshold_q << "\n";
  os << "#define " << prefix << "_WEIGHT_SCALE " << detail::format_double(img.scale) << "\n";
  os << "#define " << prefix << "_OUTPUT_TILE_COUNT " << img.output_tile_ids.size() << "\n";
  os << "#define " << prefix << "_WEIGHT_MEM_LEN " << img.weight_mem.size() << "\n";
  os << "#define " << prefix << "_INDEX_MEM_LEN " << img.index_mem.size() << "\n";
  os << "#define " << prefix << "_MEMBRANE_MEM_LEN " << img.membrane_mem.size() << "\n\n";

  auto emit_u8 = [&os, &prefix](const char* name, const std::vector<std::uint8_t>& v) {
    if (v.empty()) {
      os << "static const uint8_t " << prefix << "_" << name << "[1] = { 0 }; /* empty */\n\n";
      return;
    }
    os << "static const uint8_t " << prefix << "_" << name << "[" << v.size() << "] = {";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i % 12 == 0) os << "\n ";
      char buf[8];
      std::snprintf(buf, sizeof buf, " 0x%02X", v[i]);
      os << buf << (i + 1 < v.size() ? "," : "");
    }
    os << "\n};\n\n";
  };

  if (img.output_tile_ids.empty()) {
    os << "static const uint16_t " << prefix << "_output_tile_ids[1] = { 0 }; /* empty */\n\n";
  } else {
    os << "static const uint16_t " << prefix << "_output_tile_ids["
       << img.output_tile_ids.size() << "] = {";
    for (std::size_t i = 0; i < img.output_tile_ids.size(); ++i)
      os << (i ? ", " : " ") << img.output_tile_ids[i];
    os << " };\n\n";
  }

  emit_u8("weight_mem", img.weight_mem);

  if (img.index_mem.empty()) {
    os << "static const uint32_t " << prefix << "_index_mem[1] = { 0 }; /* empty */\n\n";
  } else {
    os << "static const uint32_t " << prefix << "_index_mem[" << img.index_mem.size()
       << "] = {";
    for (std::size_t i = 0; i < img.index_mem.size(); ++i) {
      if (i % 6 == 0) os << "\n ";
      char buf[16];
      std::snprintf(buf, sizeof buf, " 0x%08Xu", img.index_mem[i]);
      os << buf << (i + 1 < img.index_mem.size() ? "," : "");
    }
    os << "\n};\n\n";
  }

  emit_u8("membrane_mem", img.membrane_mem);
  return os.str();
}

/// Parses a directory written by emit_mem back into a TileProgram. Strict:
/// any deviation from the emitted grammar is a ParseError naming file and
/// line. Cross-file consistency (counts, ordering, metadata) is checked.
inline TileProgram parse_mem(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  for (const char* f : {"weights.mem", "indices.mem", "membranes.mem", "metadata.json"})
    if (!fs::exists(dir / f)) throw IoError("missing " + (dir / f).string());

  auto wlines = detail::read_lines(dir / "weights.mem");
  auto ilines = detail::read_lines(dir / "indices.mem");
  auto mlines = detail::read_lines(dir / "membranes.mem");

  auto parse_line16 = [](const std::string& line, const std::string& where,
                         std::uint8_t out[16]) {
    if (line.size() != 32)
      throw ParseError(where + ": expected 32 hex characters, got " +
                       std::to_string(line.size()));
    for (int i = 0; i < 16; ++i) {
      int hi = detail::hex_value(line[2 * i], where);
      int lo = detail::hex_value(line[2 * i + 1], where);
      out[15 - i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
  };

  if (wlines.size() % 16 != 0)
    throw ParseError("weights.mem: line count " + std::to_string(wlines.size()) +
                     " is not a multiple of 16");
  std::size_t tile_count = wlines.size() / 16;
  if (ilines.size() != tile_count)
    throw ParseError("indices.mem: " + std::to_string(ilines.size()) +
                     " entries for " + std::to_string(tile_count) + " weight tiles");

  std::vector<Tile> tiles(tile_count);
  for (std::size_t t = 0; t < tile_count; ++t) {
    for (int row = 0; row < 16; ++row) {
      std::size_t ln = t * 16 + row;
      std::uint8_t bytes[16];
      parse_line16(wlines[ln], "weights.mem:" + std::to_string(ln + 1), bytes);
      for (int post = 0; post < 16; ++post)
        tiles[t].weights[row * 16 + post] = static_cast<std::int8_t>(bytes[post]);
    }
    const std::string& line = ilines[t];
    std::string where = "indices.mem:" + std::to_string(t + 1);
    if (line.size() != 8)
      throw ParseError(where + ": expected 8 hex characters, got " +
                       std::to_string(line.size()));
    std::uint32_t w = 0;
    for (char c : line) w = w << 4 | static_cast<std::uint32_t>(detail::hex_value(c, where));
    tiles[t].x = static_cast<std::uint16_t>(w >> 16);
    tiles[t].y = static_cast<std::uint16_t>(w & 0xFFFF);
  }

  for (std::size_t t = 1; t < tile_count; ++t) {
    auto key = [](const Tile& x) { return std::pair<int, int>(x.y, x.x); };
    if (!(key(tiles[t - 1]) < key(tiles[t])))
      throw ParseError("indices.mem:" + std::to_string(t + 1) +
                       ": tiles out of stream order (ascending y, then x, no duplicates)");
  }

  std::set<int> rows;
  for (const Tile& t : tiles) rows.insert(t.y);
  if (mlines.size() != rows.size())
    throw ParseError("membranes.mem: " + std::to_string(mlines.size()) + " rows, expected " +
                     std::to_string(rows.size()) + " (one per distinct tile row)");
  for (std::size_t i = 0; i < mlines.size(); ++i) {
    std::string where = "membranes.mem:" + std::to_string(i + 1);
    std::uint8_t bytes[16];
    parse_line16(mlines[i], where, bytes);
    for (int k = 0; k < 16; ++k)
      if (bytes[k] != 0)
        throw ParseError(where + ": initial membranes must be zero");
  }

  nlohmann::json meta;
  try {
    std::ifstream in(dir / "metadata.json");
    if (!in) throw IoError("cannot open " + (dir / "metadata.json").string());
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("metadata.json: " + std::string(e.what()));
  }

  TileProgram p;
  try {
    int version = meta.at("format_version").get<int>();
    if (version != kMemFormatVersion)
      throw ParseError("metadata.json: unsupported format_version " + std::to_string(version));
    p.neuron_count = meta.at("neuron_count").get<int>();
    p.output_tile_ids = meta.at("output_tile_ids").get<std::vector<int>>();
    p.scale = meta.at("scale").get<double>();
    p.threshold_q = meta.at("threshold_q").get<long long>();
    if (meta.at("tile_count").get<long long>() != static_cast<long long>(tile_count))
      throw ParseError("metadata.json: tile_count " +
                       meta.at("tile_count").dump() + " does not match " +
                       std::to_string(tile_count) + " tiles on disk");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("metadata.json: " + std::string(e.what()));
  }
  if (p.neuron_count < 1) throw ParseError("metadata.json: neuron_count must be >= 1");
  if (p.threshold_q < 1) throw ParseError("metadata.json: threshold_q must be >= 1");
  if (!(p.scale > 0.0) || !std::isfinite(p.scale))
    throw ParseError("metadata.json: scale must be positive and finite");

  int row_limit = tile_row_count(p.neuron_count);
  for (const Tile& t : tiles)
    if (t.x >= row_limit || t.y >= row_limit)
      throw ParseError("indices.mem: tile (" + std::to_string(t.x) + ", " +
                       std::to_string(t.y) + ") lies beyond neuron_count " +
                       std::to_string(p.neuron_count));
  if (!std::is_sorted(p.output_tile_ids.begin(), p.output_tile_ids.end()) ||
      std::adjacent_find(p.output_tile_ids.begin(), p.output_tile_ids.end()) !=
          p.output_tile_ids.end())
    throw ParseError("metadata.json: output_tile_ids must be strictly ascending");
  for (int r : p.output_tile_ids)
    if (r < 0 || r >= row_limit)
      throw ParseError("metadata.json: output tile id " + std::to_string(r) +
                       " lies beyond neuron_count");
  if (static_cast<int>(p.output_tile_ids.size()) > kMaxOutputTiles)
    throw ParseError("metadata.json: more than " + std::to_string(kMaxOutputTiles) +
                     " output tile rows");

  p.tiles = std::move(tiles);
  p.horizon_cap = kMaxTimesteps;
  return p;
}

}  // namespace spiketile
