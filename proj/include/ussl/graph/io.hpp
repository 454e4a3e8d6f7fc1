#pragma once

#include "ussl/graph/dataset.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cctype>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

// Dataset manifest (JSON):
//   { "graph_id", "num_nodes", "num_classes",
//     "edges_file", "features_file", "labels_file", "splits_file" }
// Paths are relative to the manifest's directory.
//   edges_file    two integers per line ("u,v"), one undirected edge each
//   features_file CSV of reals, one node per row; or, when the name ends in ".bin",
//                 u32 rows, u32 cols (little-endian) then row-major little-endian f32
//   labels_file   one integer per line
//   splits_file   "node_index,split" per line, split in {train,val,test}; optional header

namespace ussl {

namespace fs = std::filesystem;

namespace io_detail {

// Fields separated by commas and/or whitespace; empty fields are skipped.
inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  auto is_sep = [](char c) { return c == ',' || std::isspace(static_cast<unsigned char>(c)); };
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_sep(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool blank(std::string_view line) {
  for (char c : line)
    if (!std::isspace(static_cast<unsigned char>(c))) return c == '#';
  return true;
}

template <typename T>
T parse_number(std::string_view s, const std::string& file, long line) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DatasetError(file, line, "cannot parse '" + std::string(s) + "' as a number");
  return value;
}

inline std::ifstream open_in(const fs::path& p, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(p, mode);
  if (!in) throw DatasetError(p.string(), 0, "cannot open file");
  return in;
}

inline std::uint32_t read_u32_le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_u32_le(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

static_assert(std::endian::native == std::endian::little,
              "float blobs are written in native order; big-endian hosts need byte swapping");

}  // namespace io_detail

/// Read a float32 blob of `count` values (little-endian).
inline std::vector<float> read_f32_blob(std::istream& in, std::size_t count, const std::string& file) {
  std::vector<float> out(count);
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float))
    throw DatasetError(file, 0, "truncated float blob");
  return out;
}

inline void write_f32_blob(std::ostream& out, const float* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(float)));
}

inline MatF read_features_binary(const fs::path& p) {
  auto in = io_detail::open_in(p, std::ios::binary);
  const std::uint32_t rows = io_detail::read_u32_le(in);
  const std::uint32_t cols = io_detail::read_u32_le(in);
  if (!in) throw DatasetError(p.string(), 0, "truncated feature header");
  auto values = read_f32_blob(in, static_cast<std::size_t>(rows) * cols, p.string());
  MatF m(rows, cols);
  if (!values.empty()) std::memcpy(m.data(), values.data(), values.size() * sizeof(float));
  return m;
}

inline void write_features_binary(const fs::path& p, const MatF& m) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DatasetError(p.string(), 0, "cannot write file");
  io_detail::write_u32_le(out, static_cast<std::uint32_t>(m.rows()));
  io_detail::write_u32_le(out, static_cast<std::uint32_t>(m.cols()));
  write_f32_blob(out, m.data(), static_cast<std::size_t>(m.size()));
}

inline MatF read_features_csv(const fs::path& p) {
  auto in = io_detail::open_in(p);
  const std::string file = p.string();
  std::vector<float> values;
  long cols = -1, rows = 0, lineno = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (io_detail::blank(line)) continue;
    auto fields = io_detail::split_fields(line);
    if (cols < 0) cols = static_cast<long>(fields.size());
    if (static_cast<long>(fields.size()) != cols)
      throw DatasetError(file, lineno,
                         "ragged feature row: expected " + std::to_string(cols) + " values, got " +
                             std::to_string(fields.size()));
    for (auto f : fields) values.push_back(io_detail::parse_number<float>(f, file, lineno));
    ++rows;
  }
  MatF m(rows, std::max(cols, 0L));
  if (!values.empty()) std::memcpy(m.data(), values.data(), values.size() * sizeof(float));
  return m;
}

/// Load and validate one graph from its manifest.
inline GraphDataset load_dataset(const fs::path& manifest_path) {
  using nlohmann::json;
  const std::string mfile = manifest_path.string();
  auto min = io_detail::open_in(manifest_path);
  json m;
  try {
    min >> m;
  } catch (const json::exception& e) {
    throw DatasetError(mfile, 0, std::string("invalid JSON: ") + e.what());
  }
  static const char* required[] = {"graph_id",      "num_nodes",   "num_classes", "edges_file",
                                   "features_file", "labels_file", "splits_file"};
  for (const char* key : required)
    if (!m.contains(key)) throw DatasetError(mfile, 0, std::string("missing key '") + key + "'");

  GraphDataset g;
  try {
    g.graph_id = m.at("graph_id").get<std::string>();
    g.num_nodes = m.at("num_nodes").get<NodeId>();
    g.num_classes = m.at("num_classes").get<int>();
  } catch (const json::exception& e) {
    throw DatasetError(mfile, 0, std::string("bad manifest value: ") + e.what());
  }
  if (g.num_nodes <= 0) throw DatasetError(mfile, 0, "num_nodes must be positive");
  if (g.num_classes <= 0) throw DatasetError(mfile, 0, "num_classes must be positive");
  const fs::path base = manifest_path.parent_path();
  auto resolve = [&](const char* key) { return base / m.at(key).get<std::string>(); };

  // edges
  {
    const fs::path p = resolve("edges_file");
    auto in = io_detail::open_in(p);
    std::vector<Edge> raw;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (io_detail::blank(line)) continue;
      auto fields = io_detail::split_fields(line);
      if (fields.size() != 2)
        throw DatasetError(p.string(), lineno, "expected two node indices per edge line");
      long u = io_detail::parse_number<long>(fields[0], p.string(), lineno);
      long v = io_detail::parse_number<long>(fields[1], p.string(), lineno);
      for (long x : {u, v})
        if (x < 0 || x >= g.num_nodes)
          throw DatasetError(p.string(), lineno, "node index " + std::to_string(x) + " out of range");
      raw.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }
    g.edges = canonicalize_edges(std::move(raw));
  }

  // features
  {
    const fs::path p = resolve("features_file");
    g.features = p.extension() == ".bin" ? read_features_binary(p) : read_features_csv(p);
    if (g.features.rows() != g.num_nodes)
      throw DatasetError(p.string(), 0,
                         "expected " + std::to_string(g.num_nodes) + " feature rows, found " +
                             std::to_string(g.features.rows()));
    if (!g.features.allFinite()) throw DatasetError(p.string(), 0, "features contain NaN/Inf");
  }

  // labels
  {
    const fs::path p = resolve("labels_file");
    auto in = io_detail::open_in(p);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (io_detail::blank(line)) continue;
      auto fields = io_detail::split_fields(line);
      if (fields.size() != 1) throw DatasetError(p.string(), lineno, "expected one label per line");
      int y = io_detail::parse_number<int>(fields[0], p.string(), lineno);
      if (y < 0 || y >= g.num_classes)
        throw DatasetError(p.string(), lineno, "label " + std::to_string(y) + " out of range");
      g.labels.push_back(y);
    }
    if (static_cast<NodeId>(g.labels.size()) != g.num_nodes)
      throw DatasetError(p.string(), 0,
                         "expected " + std::to_string(g.num_nodes) + " labels, found " +
                             std::to_string(g.labels.size()));
  }

  // splits
  {
    const fs::path p = resolve("splits_file");
    auto in = io_detail::open_in(p);
    std::string line;
    long lineno = 0;
    std::vector<int> owner(static_cast<std::size_t>(g.num_nodes), -1);
    while (std::getline(in, line)) {
      ++lineno;
      if (io_detail::blank(line)) continue;
      auto fields = io_detail::split_fields(line);
      if (fields.size() != 2) throw DatasetError(p.string(), lineno, "expected 'node_index,split'");
      if (fields[0] == "node_index") continue;
      long v = io_detail::parse_number<long>(fields[0], p.string(), lineno);
      if (v < 0 || v >= g.num_nodes)
        throw DatasetError(p.string(), lineno, "node index " + std::to_string(v) + " out of range");
      Split s;
      if (fields[1] == "train") s = Split::train;
      else if (fields[1] == "val") s = Split::val;
      else if (fields[1] == "test") s = Split::test;
      else throw DatasetError(p.string(), lineno, "unknown split '" + std::string(fields[1]) + "'");
      if (owner[v] >= 0)
        throw DatasetError(p.string(), lineno,
                           "overlapping splits: node " + std::to_string(v) + " already assigned to " +
                               to_string(static_cast<Split>(owner[v])));
      owner[v] = static_cast<int>(s);
      g.splits.get(s).push_back(static_cast<NodeId>(v));
    }
  }
  validate(g);
  return g;
}

/// Write `g` as manifest + CSV files into `dir`. Returns the manifest path.
inline fs::path save_dataset(const GraphDataset& g, const fs::path& dir, bool binary_features = false) {
  fs::create_directories(dir);
  auto open_out = [](const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw DatasetError(p.string(), 0, "cannot write file");
    return out;
  };
  {
    auto out = open_out(dir / "edges.csv");
    for (auto [u, v] : g.edges) out << u << ',' << v << '\n';
  }
  const std::string feat_name = binary_features ? "features.bin" : "features.csv";
  if (binary_features) {
    write_features_binary(dir / feat_name, g.features);
  } else {
    auto out = open_out(dir / feat_name);
    out << std::setprecision(std::numeric_limits<float>::max_digits10);
    for (Eigen::Index r = 0; r < g.features.rows(); ++r) {
      for (Eigen::Index c = 0; c < g.features.cols(); ++c) {
        if (c) out << ',';
        out << g.features(r, c);
      }
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / "labels.csv");
    for (int y : g.labels) out << y << '\n';
  }
  {
    auto out = open_out(dir / "splits.csv");
    out << "node_index,split\n";
    for (Split s : {Split::train, Split::val, Split::test})
      for (NodeId v : g.splits.get(s)) out << v << ',' << to_string(s) << '\n';
  }
  nlohmann::json m = {{"graph_id", g.graph_id},          {"num_nodes", g.num_nodes},
                      {"num_classes", g.num_classes},    {"edges_file", "edges.csv"},
                      {"features_file", feat_name},      {"labels_file", "labels.csv"},
                      {"splits_file", "splits.csv"}};
  const fs::path manifest = dir / "manifest.json";
  auto out = open_out(manifest);
  out << m.dump(2) << '\n';
  return manifest;
}

}  // namespace ussl
