#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "dynsamp/error.hpp"
#include "dynsamp/sbm.hpp"

namespace dynsamp {

// Shortest decimal string that round-trips to the same double. All floating
// CSV output goes through this so files are byte-stable across platforms.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ' ' || c == '\t' || c == ',') {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline bool is_comment_or_blank(const std::string& line) {
  for (char c : line) {
    if (c == ' ' || c == '\t' || c == '\r') continue;
    return c == '#';
  }
  return true;
}

}  // namespace detail

struct LoadedGraph {
  ObservedGraph graph;  // labels left empty; vertices are dense 0..n-1
  std::vector<std::string> ids;  // dense id -> original id
  std::unordered_map<std::string, std::uint32_t> id_map;
  std::uint64_t duplicates_dropped = 0;
  std::uint64_t self_loops_dropped = 0;
};

// Text edge list: one "src<sep>dst" pair per line, separator space, tab or
// comma; lines starting with '#' (after whitespace) are comments. Original
// ids of any textual form are remapped to dense 0..n-1 in order of first
// appearance; duplicates and self-loops are dropped and counted.
inline LoadedGraph load_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::file_error, "cannot open edge list: " + path);
  LoadedGraph out;
  const auto dense = [&out](const std::string& id) {
    const auto it = out.id_map.find(id);
    if (it != out.id_map.end()) return it->second;
    const auto next = static_cast<std::uint32_t>(out.ids.size());
    out.id_map.emplace(id, next);
    out.ids.push_back(id);
    return next;
  };
  std::string line;
  std::size_t line_no = 0;
  EdgeList edges;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_comment_or_blank(line)) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != 2)
      fail(errc::malformed_line,
           path + ":" + std::to_string(line_no) + ": expected \"src dst\", got " +
               std::to_string(fields.size()) + " fields");
    const std::uint32_t a = dense(fields[0]);
    const std::uint32_t b = dense(fields[1]);
    if (a == b) {
      ++out.self_loops_dropped;
      continue;
    }
    edges.push_back(a < b ? Edge{a, b} : Edge{b, a});
  }
  std::sort(edges.begin(), edges.end());
  const auto last = std::unique(edges.begin(), edges.end());
  out.duplicates_dropped = static_cast<std::uint64_t>(edges.end() - last);
  edges.erase(last, edges.end());
  out.graph.n = out.ids.size();
  out.graph.edges = std::move(edges);
  return out;
}

// Labels file: "id<sep>label" per line, same separators and comment rule as
// edge lists; ids go through the edge list's map. Every vertex must receive
// exactly one integer label.
inline std::vector<int> load_labels(const std::string& path,
                                    const std::unordered_map<std::string, std::uint32_t>& id_map,
                                    std::size_t n) {
  std::ifstream in(path);
  if (!in) fail(errc::file_error, "cannot open labels file: " + path);
  std::vector<int> labels(n, -1);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_comment_or_blank(line)) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != 2)
      fail(errc::malformed_line,
           path + ":" + std::to_string(line_no) + ": expected \"id label\"");
    const auto it = id_map.find(fields[0]);
    if (it == id_map.end())
      fail(errc::unknown_vertex,
           path + ":" + std::to_string(line_no) + ": vertex \"" + fields[0] +
               "\" does not appear in the edge list");
    int value = 0;
    const auto res = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), value);
    if (res.ec != std::errc{} || res.ptr != fields[1].data() + fields[1].size())
      fail(errc::malformed_line,
           path + ":" + std::to_string(line_no) + ": label \"" + fields[1] + "\" is not an integer");
    if (labels[it->second] != -1)
      fail(errc::malformed_line,
           path + ":" + std::to_string(line_no) + ": duplicate label for vertex \"" + fields[0] + "\"");
    labels[it->second] = value;
  }
  std::size_t missing = 0;
  for (int v : labels)
    if (v == -1) ++missing;
  if (missing > 0)
    fail(errc::malformed_line,
         path + ": " + std::to_string(missing) + " vertices have no label");
  return labels;
}

inline void write_vertex_map(const std::string& path, const std::vector<std::string>& ids) {
  std::ofstream out(path);
  if (!out) fail(errc::file_error, "cannot write " + path);
  out << "original_id,dense_id\n";
  for (std::size_t i = 0; i < ids.size(); ++i) out << ids[i] << "," << i << "\n";
  if (!out) fail(errc::file_error, "write failed: " + path);
}

inline void write_edge_list(const std::string& path, const ObservedGraph& g) {
  std::ofstream out(path);
  if (!out) fail(errc::file_error, "cannot write " + path);
  for (const Edge& e : g.edges) out << e.i << " " << e.j << "\n";
  if (!out) fail(errc::file_error, "write failed: " + path);
}

// Minimal CSV emitter with a fixed column count per file.
class CsvFile {
 public:
  CsvFile(const std::string& path, const std::vector<std::string>& columns)
      : out_(path), cols_(columns.size()) {
    if (!out_) fail(errc::file_error, "cannot write " + path);
    path_ = path;
    write_row(columns);
  }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != cols_)
      fail(errc::bad_config, "csv row width mismatch in " + path_);
    write_row(fields);
  }

  void close() {
    out_.close();
    if (!out_) fail(errc::file_error, "write failed: " + path_);
  }

 private:
  void write_row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
  }

  std::ofstream out_;
  std::string path_;
  std::size_t cols_;
};

}  // namespace dynsamp
