#pragma once

// Flat binary container for grid fields, CSV export, and the sigma cache.
//
// Container layout (all little-endian):
//   char[4]  "VPLB"
//   uint32   format version
//   float64  L_v
//   int32    N
//   int32[3] mode k
//   float64  twist
//   uint32   array count
//   per array: uint32 name length, name bytes, uint64 element count,
//              element count x (float64 re, float64 im)
//   uint64   FNV-1a hash of every preceding byte

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vpl/collision.hpp"
#include "vpl/grid.hpp"

namespace vpl {

static_assert(std::endian::native == std::endian::little, "binary container assumes a little-endian host");

inline constexpr std::uint32_t container_version = 1;

/** @brief In-memory form of one container file. */
struct Container {
  VelocityGrid grid;
  Mode k{0, 0, 0};
  double twist = 0.0;
  std::map<std::string, Field> arrays;
};

namespace detail {

inline void put_bytes(std::string& buf, const void* p, std::size_t n) { buf.append(static_cast<const char*>(p), n); }

template <class T>
void put(std::string& buf, T x) {
  put_bytes(buf, &x, sizeof(T));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  template <class T>
  T get() {
    if (pos + sizeof(T) > buf.size()) throw NumericalError("binary container truncated");
    T x;
    std::memcpy(&x, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return x;
  }
};

}  // namespace detail

/** @brief Serialize a container to bytes (with trailing content hash). */
inline std::string encode_container(const Container& c) {
  std::string buf;
  buf.append("VPLB", 4);
  detail::put<std::uint32_t>(buf, container_version);
  detail::put<double>(buf, c.grid.half_width);
  detail::put<std::int32_t>(buf, c.grid.n);
  for (int a = 0; a < 3; ++a) detail::put<std::int32_t>(buf, c.k[a]);
  detail::put<double>(buf, c.twist);
  detail::put<std::uint32_t>(buf, std::uint32_t(c.arrays.size()));
  for (const auto& [name, data] : c.arrays) {
    detail::put<std::uint32_t>(buf, std::uint32_t(name.size()));
    detail::put_bytes(buf, name.data(), name.size());
    detail::put<std::uint64_t>(buf, data.size());
    detail::put_bytes(buf, data.data(), data.size() * sizeof(cplx));
  }
  detail::put<std::uint64_t>(buf, fnv1a(buf.data(), buf.size()));
  return buf;
}

/** @brief Parse bytes produced by encode_container; verifies magic, version and hash. */
inline Container decode_container(const std::string& buf) {
  if (buf.size() < 12 || buf.compare(0, 4, "VPLB") != 0) throw NumericalError("not a VPLB container");
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
  if (stored != fnv1a(buf.data(), buf.size() - 8)) throw NumericalError("binary container content hash mismatch");
  detail::Reader r{buf, 4};
  if (r.get<std::uint32_t>() != container_version) throw NumericalError("unsupported container version");
  Container c;
  double L = r.get<double>();
  int n = r.get<std::int32_t>();
  c.grid = build_grid(L, n);
  for (int a = 0; a < 3; ++a) c.k[a] = r.get<std::int32_t>();
  c.twist = r.get<double>();
  std::uint32_t count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t len = r.get<std::uint32_t>();
    if (r.pos + len > buf.size()) throw NumericalError("binary container truncated");
    std::string name = buf.substr(r.pos, len);
    r.pos += len;
    std::uint64_t m = r.get<std::uint64_t>();
    if (r.pos + m * sizeof(cplx) > buf.size() - 8) throw NumericalError("binary container truncated");
    Field data(m);
    std::memcpy(data.data(), buf.data() + r.pos, m * sizeof(cplx));
    r.pos += m * sizeof(cplx);
    c.arrays.emplace(std::move(name), std::move(data));
  }
  return c;
}

/** @brief Write a file atomically (temporary file, then rename). */
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void save_container(const std::filesystem::path& path, const Container& c) {
  write_file_atomic(path, encode_container(c));
}

inline Container load_container(const std::filesystem::path& path) { return decode_container(read_file(path)); }

/** @brief Container holding one ModeField under the name "h". */
inline Container field_container(const ModeField& h) {
  Container c;
  c.grid = h.grid;
  c.k = h.k;
  c.twist = h.twist;
  c.arrays["h"] = h.values;
  return c;
}

inline ModeField field_from_container(const Container& c, const std::string& name = "h") {
  auto it = c.arrays.find(name);
  if (it == c.arrays.end()) throw NumericalError("container has no array named " + name);
  if (it->second.size() != c.grid.size()) throw NumericalError("array length does not match the grid");
  ModeField h(c.grid, c.k, c.twist);
  h.values = it->second;
  return h;
}

/** @brief Shortest round-trip decimal form of a double. */
inline std::string format_double(double x) {
  std::ostringstream ss;
  ss << std::setprecision(17) << x;
  return ss.str();
}

/** @brief CSV of a field: v1, v2, v3, re, im (one row per node); small grids only. */
inline std::string field_csv(const ModeField& h, int max_points_per_axis = 32) {
  if (h.grid.n > max_points_per_axis)
    throw ConfigError("CSV export is limited to N <= " + std::to_string(max_points_per_axis) + "; use the binary container");
  std::ostringstream ss;
  ss << "v1,v2,v3,re,im\n";
  for (std::size_t n = 0; n < h.grid.size(); ++n) {
    auto v = h.grid.velocity(n);
    ss << format_double(v[0]) << ',' << format_double(v[1]) << ',' << format_double(v[2]) << ','
       << format_double(h.values[n].real()) << ',' << format_double(h.values[n].imag()) << '\n';
  }
  return ss.str();
}

// ---------------------------------------------------------------------------
// Collision-field cache
// ---------------------------------------------------------------------------

inline Container collision_container(const CollisionFields& cf) {
  Container c;
  c.grid = cf.grid;
  for (int i = 0; i < 6; ++i) {
    Field f(cf.sigma[i].begin(), cf.sigma[i].end());
    c.arrays["sigma" + std::to_string(i)] = std::move(f);
  }
  return c;
}

/** @brief Rebuild collision fields from cached sigma (derived fields recomputed). */
inline CollisionFields collision_from_container(const Container& c) {
  CollisionFields cf;
  cf.grid = c.grid;
  for (int i = 0; i < 6; ++i) {
    auto it = c.arrays.find("sigma" + std::to_string(i));
    if (it == c.arrays.end() || it->second.size() != c.grid.size())
      throw NumericalError("collision cache is missing sigma component " + std::to_string(i));
    cf.sigma[i].resize(c.grid.size());
    for (std::size_t n = 0; n < c.grid.size(); ++n) cf.sigma[i][n] = it->second[n].real();
  }
  cf.kernel = build_kernel_spectrum(c.grid);
  finish_collision_fields(cf);
  return cf;
}

/** @brief Cache file name for (L_v, N). */
inline std::string collision_cache_name(const VelocityGrid& g) {
  std::ostringstream ss;
  ss << "sigma_L" << std::setprecision(10) << g.half_width << "_N" << g.n << ".vplb";
  return ss.str();
}

/**
 * @brief compute_sigma with an on-disk cache keyed by (L_v, N). A cache entry
 * that fails its content hash is recomputed and overwritten.
 */
inline CollisionFields cached_collision_fields(const VelocityGrid& g, const std::filesystem::path& dir) {
  if (dir.empty()) return compute_sigma(g);
  auto path = dir / collision_cache_name(g);
  if (std::filesystem::exists(path)) {
    try {
      auto c = load_container(path);
      if (c.grid == g) return collision_from_container(c);
    } catch (const NumericalError& e) {
      warn(std::string("ignoring collision cache: ") + e.what());
    }
  }
  auto cf = compute_sigma(g);
  std::filesystem::create_directories(dir);
  save_container(path, collision_container(cf));
  return cf;
}

}  // namespace vpl
