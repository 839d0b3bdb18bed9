#pragma once

// JSON and flat binary serialization of grids, fields and masks.
//
// Binary layout (little endian): "CAPX", uint8 type (0 field, 1 mask),
// int32 dim, float64 half_width, int32 points_per_axis, then row-major
// float64 values (field) or uint8 members (mask).

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"

#include "capax/grid.hpp"

namespace capax {

using json = nlohmann::ordered_json;

inline json grid_to_json(const Grid& g) {
  return json{{"dim", g.dim}, {"half_width", g.half_width}, {"points_per_axis", g.points}};
}

inline Grid grid_from_json(const json& j) {
  try {
    return Grid(j.at("dim").get<int>(), j.at("half_width").get<double>(), j.at("points_per_axis").get<int>());
  } catch (const json::exception& e) {
    throw invalid_input(std::string("malformed grid header: ") + e.what());
  }
}

inline json field_to_json(const Field& f) {
  json j = grid_to_json(f.grid());
  j["values"] = f.data();
  return j;
}

inline Field field_from_json(const json& j) {
  Grid g = grid_from_json(j);
  try {
    return Field(g, j.at("values").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw invalid_input(std::string("malformed field values: ") + e.what());
  }
}

inline json mask_to_json(const Mask& m) {
  json j = grid_to_json(m.grid());
  std::vector<int> members(m.bytes().begin(), m.bytes().end());
  j["values"] = members;
  return j;
}

inline Mask mask_from_json(const json& j) {
  Grid g = grid_from_json(j);
  try {
    auto v = j.at("values").get<std::vector<int>>();
    return Mask(g, std::vector<std::uint8_t>(v.begin(), v.end()));
  } catch (const json::exception& e) {
    throw invalid_input(std::string("malformed mask values: ") + e.what());
  }
}

namespace detail {

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw invalid_input("truncated binary grid file");
  return v;
}

inline void write_header(std::ostream& os, std::uint8_t type, const Grid& g) {
  os.write("CAPX", 4);
  put<std::uint8_t>(os, type);
  put<std::int32_t>(os, g.dim);
  put<double>(os, g.half_width);
  put<std::int32_t>(os, g.points);
}

inline Grid read_header(std::istream& is, std::uint8_t expected) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "CAPX", 4) != 0) throw invalid_input("not a capax binary grid file");
  if (get<std::uint8_t>(is) != expected) throw invalid_input("binary file holds the wrong object type");
  int dim = get<std::int32_t>(is);
  double L = get<double>(is);
  int N = get<std::int32_t>(is);
  return Grid(dim, L, N);
}

}  // namespace detail

inline void write_field_binary(std::ostream& os, const Field& f) {
  detail::write_header(os, 0, f.grid());
  os.write(reinterpret_cast<const char*>(f.data().data()), static_cast<std::streamsize>(f.size() * sizeof(double)));
}

inline Field read_field_binary(std::istream& is) {
  Grid g = detail::read_header(is, 0);
  std::vector<double> v(g.size());
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!is) throw invalid_input("truncated binary field");
  return Field(g, std::move(v));
}

inline void write_mask_binary(std::ostream& os, const Mask& m) {
  detail::write_header(os, 1, m.grid());
  os.write(reinterpret_cast<const char*>(m.bytes().data()), static_cast<std::streamsize>(m.size()));
}

inline Mask read_mask_binary(std::istream& is) {
  Grid g = detail::read_header(is, 1);
  std::vector<std::uint8_t> v(g.size());
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size()));
  if (!is) throw invalid_input("truncated binary mask");
  return Mask(g, std::move(v));
}

inline bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Loads a field from .json or the binary format (anything else).
inline Field load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_input("cannot open input file '" + path + "'");
  if (has_suffix(path, ".json")) {
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw invalid_input("cannot parse '" + path + "': " + e.what());
    }
    return field_from_json(j);
  }
  return read_field_binary(in);
}

inline Mask load_mask(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_input("cannot open input file '" + path + "'");
  if (has_suffix(path, ".json")) {
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw invalid_input("cannot parse '" + path + "': " + e.what());
    }
    return mask_from_json(j);
  }
  return read_mask_binary(in);
}

}  // namespace capax
