#pragma once

// Plain-text mesh files:
//
//   TSFEM-MESH 1
//   <node_count> <triangle_count> <boundary_edge_count>
//   x y                      (node_count lines, 17 significant digits)
//   i j k                    (triangle_count lines, 0-based)
//   i j marker               (boundary_edge_count lines, marker outer|hole)
//   PERIODIC <class_count>   (optional)
//   i j ...                  (one class per line)

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "tsfem/mesh.hpp"

namespace tsfem {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_mesh(const TriMesh& mesh, std::ostream& os) {
  os << "TSFEM-MESH 1\n";
  os << mesh.nodes.size() << ' ' << mesh.triangles.size() << ' ' << mesh.boundary_edges.size() << '\n';
  for (const auto& p : mesh.nodes) os << format_double(p[0]) << ' ' << format_double(p[1]) << '\n';
  for (const auto& t : mesh.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& e : mesh.boundary_edges) os << e.nodes[0] << ' ' << e.nodes[1] << ' ' << to_string(e.marker) << '\n';
  if (!mesh.periodic_classes.empty()) {
    os << "PERIODIC " << mesh.periodic_classes.size() << '\n';
    for (const auto& cls : mesh.periodic_classes) {
      for (std::size_t k = 0; k < cls.size(); ++k) os << (k ? " " : "") << cls[k];
      os << '\n';
    }
  }
}

inline void write_mesh(const TriMesh& mesh, const std::string& path) {
  validate(mesh);
  std::ofstream os(path);
  if (!os) fail(ErrorKind::io, "cannot open '" + path + "' for writing");
  write_mesh(mesh, os);
  if (!os) fail(ErrorKind::io, "failed writing '" + path + "'");
}

namespace detail {

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  /// Next non-empty line; false at end of input.
  bool next(std::string& line) {
    while (std::getline(is_, line)) {
      ++number_;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  }

  std::string require(const char* what) {
    std::string line;
    if (!next(line)) error(std::string("unexpected end of file, expected ") + what);
    return line;
  }

  [[noreturn]] void error(const std::string& message) const {
    fail(ErrorKind::parse, "line " + std::to_string(number_) + ": " + message);
  }

  std::size_t line_number() const noexcept { return number_; }

 private:
  std::istream& is_;
  std::size_t number_ = 0;
};

template <class... T>
void parse_fields(LineReader& reader, const std::string& line, const char* what, T&... out) {
  std::istringstream ls(line);
  ((ls >> out), ...);
  std::string rest;
  if (ls.fail() || (ls >> rest)) reader.error(std::string("malformed ") + what + ": '" + line + "'");
}

}  // namespace detail

inline TriMesh read_mesh(std::istream& is, DomainTag tag = DomainTag::macro) {
  detail::LineReader reader(is);
  const std::string header = reader.require("header");
  if (header.rfind("TSFEM-MESH 1", 0) != 0 || header.find_first_not_of(" \t\r", 12) != std::string::npos)
    reader.error("bad header '" + header + "', expected 'TSFEM-MESH 1'");
  std::size_t n_nodes = 0, n_tri = 0, n_edges = 0;
  detail::parse_fields(reader, reader.require("counts"), "count line", n_nodes, n_tri, n_edges);

  TriMesh mesh;
  mesh.domain_tag = tag;
  mesh.nodes.resize(n_nodes);
  for (auto& p : mesh.nodes) {
    const std::string line = reader.require("node line");
    // strtod keeps the written 17-digit values bit-exact
    char* end = nullptr;
    p[0] = std::strtod(line.c_str(), &end);
    char* end2 = nullptr;
    p[1] = std::strtod(end, &end2);
    if (end == line.c_str() || end2 == end || std::string(end2).find_first_not_of(" \t\r") != std::string::npos)
      reader.error("malformed node line: '" + line + "'");
  }
  mesh.triangles.resize(n_tri);
  for (std::size_t t = 0; t < n_tri; ++t) {
    auto& tri = mesh.triangles[t];
    detail::parse_fields(reader, reader.require("triangle line"), "triangle line", tri[0], tri[1], tri[2]);
    for (auto v : tri) {
      if (v >= n_nodes)
        reader.error("triangle " + std::to_string(t) + " index " + std::to_string(v) + " out of range (node count " +
                     std::to_string(n_nodes) + ")");
    }
    if (!(triangle_area(mesh, t) > 0.0))
      reader.error("triangle " + std::to_string(t) + " is not counter-clockwise (non-positive area)");
  }
  mesh.boundary_edges.resize(n_edges);
  for (auto& edge : mesh.boundary_edges) {
    std::string marker;
    detail::parse_fields(reader, reader.require("boundary edge line"), "boundary edge line", edge.nodes[0],
                         edge.nodes[1], marker);
    if (edge.nodes[0] >= n_nodes || edge.nodes[1] >= n_nodes) reader.error("boundary edge index out of range");
    if (marker == "outer") {
      edge.marker = BoundaryMarker::outer;
    } else if (marker == "hole") {
      edge.marker = BoundaryMarker::hole;
    } else {
      reader.error("unknown boundary marker '" + marker + "'");
    }
  }
  std::string line;
  if (reader.next(line)) {
    std::size_t count = 0;
    std::string keyword;
    detail::parse_fields(reader, line, "PERIODIC line", keyword, count);
    if (keyword != "PERIODIC") reader.error("unexpected trailing content '" + line + "'");
    for (std::size_t c = 0; c < count; ++c) {
      std::istringstream ls(reader.require("periodic class"));
      std::vector<std::size_t> cls;
      std::string token;
      while (ls >> token) {
        std::size_t pos = 0;
        std::size_t v = 0;
        try {
          v = std::stoul(token, &pos);
        } catch (...) {
          pos = 0;
        }
        if (pos != token.size()) reader.error("malformed periodic index '" + token + "'");
        if (v >= n_nodes) reader.error("periodic index out of range");
        cls.push_back(v);
      }
      mesh.periodic_classes.push_back(std::move(cls));
    }
    if (reader.next(line)) reader.error("unexpected trailing content '" + line + "'");
  }
  try {
    validate(mesh);
  } catch (const Error& e) {
    fail(ErrorKind::validation, std::string("mesh validation failed: ") + e.what());
  }
  return mesh;
}

inline TriMesh read_mesh(const std::string& path, DomainTag tag = DomainTag::macro) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::io, "cannot open '" + path + "'");
  return read_mesh(is, tag);
}

}  // namespace tsfem
