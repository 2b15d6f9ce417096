#pragma once

// TOML scenario files. Top-level keys `scenario` (a named preset the rest of
// the file overrides) and `name`; sections [geometry], [resolution], [time],
// [reactions], [diffusion], [bc], [initial], [output], [nondim]. Omitted
// keys keep their defaults; unknown keys are errors.

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include <toml.hpp>

#include "tsfem/mesh_io.hpp"
#include "tsfem/scenario.hpp"

namespace tsfem {

namespace detail {

class TomlReader {
 public:
  TomlReader(const toml::table& table, std::string path) : table_(table), path_(std::move(path)) {}

  std::string key(std::string_view k) const { return path_.empty() ? std::string(k) : path_ + "." + std::string(k); }

  void allow(std::initializer_list<std::string_view> keys) const {
    for (const auto& [k, v] : table_) {
      bool known = false;
      for (auto a : keys) known = known || a == k.str();
      if (!known) fail(ErrorKind::validation, "unknown key '" + key(k.str()) + "'" + where(v));
    }
  }

  const toml::node* find(std::string_view k) const { return table_.get(k); }

  void read(std::string_view k, double& out) const {
    if (const auto* n = find(k)) out = number(*n, key(k));
  }
  void read(std::string_view k, std::size_t& out) const {
    if (const auto* n = find(k)) out = static_cast<std::size_t>(integer(*n, key(k)));
  }
  void read(std::string_view k, unsigned& out) const {
    if (const auto* n = find(k)) out = static_cast<unsigned>(integer(*n, key(k)));
  }
  void read(std::string_view k, std::string& out) const {
    if (const auto* n = find(k)) out = string(*n, key(k));
  }
  void read(std::string_view k, Point2& out) const {
    if (const auto* n = find(k)) out = pair(*n, key(k));
  }

  std::optional<TomlReader> section(std::string_view k) const {
    const auto* n = find(k);
    if (!n) return std::nullopt;
    const auto* t = n->as_table();
    if (!t) fail(ErrorKind::validation, key(k) + ": expected a table" + where(*n));
    return TomlReader(*t, key(k));
  }

  static std::string where(const toml::node& n) {
    const auto& src = n.source();
    return src.begin.line ? " (line " + std::to_string(src.begin.line) + ")" : "";
  }

  static double number(const toml::node& n, const std::string& key) {
    if (auto v = n.value_exact<double>()) return *v;
    if (auto v = n.value_exact<int64_t>()) return static_cast<double>(*v);
    fail(ErrorKind::validation, key + ": expected a number" + where(n));
  }
  static int64_t integer(const toml::node& n, const std::string& key) {
    const auto v = n.value_exact<int64_t>();
    if (!v || *v < 0) fail(ErrorKind::validation, key + ": expected a nonnegative integer" + where(n));
    return *v;
  }
  static std::string string(const toml::node& n, const std::string& key) {
    const auto v = n.value_exact<std::string>();
    if (!v) fail(ErrorKind::validation, key + ": expected a string" + where(n));
    return *v;
  }
  static Point2 pair(const toml::node& n, const std::string& key) {
    const auto* a = n.as_array();
    if (!a || a->size() != 2) fail(ErrorKind::validation, key + ": expected an array of two numbers" + where(n));
    return {number(*a->get(0), key + "[0]"), number(*a->get(1), key + "[1]")};
  }

 private:
  const toml::table& table_;
  std::string path_;
};

inline SourceTerm read_source(const toml::node& n, const std::string& key) {
  const auto* t = n.as_table();
  if (!t) fail(ErrorKind::validation, key + ": expected a table {kind, value}" + TomlReader::where(n));
  TomlReader r(*t, key);
  r.allow({"kind", "value"});
  std::string kind = "zero";
  double value = 0.0;
  r.read("kind", kind);
  r.read("value", value);
  if (kind == "zero") return SourceTerm::zero();
  if (kind == "constant") return SourceTerm::constant(value);
  if (kind == "linear") return SourceTerm::linear(value);
  fail(ErrorKind::validation, key + ".kind: unknown source kind '" + kind + "' (expected zero|constant|linear)");
}

template <class Fn>
auto keyed(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    fail(ErrorKind::validation, key + ": " + e.what());
  }
}

inline void read_config(const toml::table& root, ScenarioConfig& c) {
  TomlReader top(root, "");
  top.allow({"scenario", "name", "geometry", "resolution", "time", "reactions", "diffusion", "bc", "initial", "output",
             "nondim"});
  if (const auto* n = top.find("scenario")) c = keyed("scenario", [&] { return named_scenario(TomlReader::string(*n, "scenario")); });
  top.read("name", c.name);

  if (auto s = top.section("geometry")) {
    s->allow({"macro_lower", "macro_upper", "cell", "radius", "ellipse", "y_lower", "y_upper"});
    auto& g = c.geometry;
    s->read("macro_lower", g.macro_lower);
    s->read("macro_upper", g.macro_upper);
    std::string kind(to_string(g.cell.kind));
    s->read("cell", kind);
    g.cell.kind = keyed(s->key("cell"), [&] { return parse_cell_kind(kind); });
    s->read("radius", g.cell.radius);
    Point2 e{g.cell.ellipse_coefficients[0], g.cell.ellipse_coefficients[1]};
    s->read("ellipse", e);
    g.cell.ellipse_coefficients = {e[0], e[1]};
    s->read("y_lower", g.cell.lower);
    s->read("y_upper", g.cell.upper);
  }
  if (auto s = top.section("resolution")) {
    s->allow({"macro_cells", "macro_level", "micro_rings", "micro_segments", "micro_level", "cell_level", "cell_segments",
              "cell_layers", "cell_grading", "cell_clustering"});
    auto& r = c.resolution;
    s->read("macro_cells", r.macro_cells);
    s->read("macro_level", r.macro_level);
    s->read("micro_rings", r.micro_rings);
    s->read("micro_segments", r.micro_segments);
    s->read("micro_level", r.micro_level);
    s->read("cell_level", r.cell_level);
    s->read("cell_segments", r.cell.segments);
    s->read("cell_layers", r.cell.layers);
    s->read("cell_grading", r.cell.grading);
    s->read("cell_clustering", r.cell.clustering);
  }
  if (auto s = top.section("time")) {
    s->allow({"tau", "T", "sample_every"});
    s->read("tau", c.time.tau);
    s->read("T", c.time.end_time);
    s->read("sample_every", c.time.sample_every);
  }
  if (auto s = top.section("reactions")) {
    s->allow({"a_e", "b_e", "a_i", "b_i", "gamma_i", "kappa_i", "d_f", "d_b", "d_d", "d_a", "F_e", "F_i", "F_f", "F_d",
              "treatment"});
    auto& r = c.reactions;
    s->read("a_e", r.a_e);
    s->read("b_e", r.b_e);
    s->read("a_i", r.a_i);
    s->read("b_i", r.b_i);
    s->read("gamma_i", r.gamma_i);
    s->read("kappa_i", r.kappa_i);
    s->read("d_f", r.d_f);
    s->read("d_b", r.d_b);
    s->read("d_d", r.d_d);
    s->read("d_a", r.d_a);
    const std::pair<const char*, SourceTerm*> sources[] = {{"F_e", &r.F_e}, {"F_i", &r.F_i}, {"F_f", &r.F_f}, {"F_d", &r.F_d}};
    for (const auto& [name, f] : sources)
      if (const auto* n = s->find(name)) *f = read_source(*n, s->key(name));
    std::string treatment(to_string(c.treatment));
    s->read("treatment", treatment);
    c.treatment = keyed(s->key("treatment"), [&] { return parse_reaction_treatment(treatment); });
  }
  if (auto s = top.section("diffusion")) {
    s->allow({"D_e", "D_i", "D_f", "D_b", "D_d", "D_a", "d_hom", "theta_e"});
    auto& d = c.diffusion;
    s->read("D_e", d.d_e);
    s->read("D_i", d.micro.d_i);
    s->read("D_f", d.micro.d_f);
    s->read("D_b", d.micro.d_b);
    s->read("D_d", d.micro.d_d);
    s->read("D_a", d.micro.d_a);
    if (const auto* n = s->find("d_hom")) {
      const auto* a = n->as_array();
      const std::string key = s->key("d_hom");
      if (!a || a->size() != 2) fail(ErrorKind::validation, key + ": expected [[d11, d12], [d21, d22]]" + TomlReader::where(*n));
      Tensor2 t;
      for (int i = 0; i < 2; ++i) {
        const auto row = TomlReader::pair(*a->get(static_cast<std::size_t>(i)), key + "[" + std::to_string(i) + "]");
        t(i, 0) = row[0];
        t(i, 1) = row[1];
      }
      d.d_hom = t;
    }
    if (const auto* n = s->find("theta_e")) d.theta_e = TomlReader::number(*n, s->key("theta_e"));
  }
  if (auto s = top.section("bc")) {
    s->allow({"kind", "threshold", "value"});
    std::string kind(to_string(c.bc.kind));
    s->read("kind", kind);
    c.bc.kind = keyed(s->key("kind"), [&] { return parse_boundary_kind(kind); });
    s->read("threshold", c.bc.threshold);
    s->read("value", c.bc.value);
  }
  if (auto s = top.section("initial")) {
    s->allow({"preset", "c_e", "c_i", "r_f", "r_b", "p_d", "p_a", "amplitude"});
    auto& i = c.initial;
    std::string preset(to_string(i.preset));
    s->read("preset", preset);
    i.preset = keyed(s->key("preset"), [&] { return parse_initial_preset(preset); });
    s->read("c_e", i.c_e);
    s->read("c_i", i.c_i);
    s->read("r_f", i.r_f);
    s->read("r_b", i.r_b);
    s->read("p_d", i.p_d);
    s->read("p_a", i.p_a);
    s->read("amplitude", i.amplitude);
  }
  if (auto s = top.section("output")) {
    s->allow({"directory", "probes"});
    s->read("directory", c.output.directory);
    if (const auto* n = s->find("probes")) {
      const auto* a = n->as_array();
      if (!a) fail(ErrorKind::validation, s->key("probes") + ": expected an array of {id, x}" + TomlReader::where(*n));
      c.output.probes.clear();
      for (std::size_t k = 0; k < a->size(); ++k) {
        const std::string key = s->key("probes") + "[" + std::to_string(k) + "]";
        const auto* t = a->get(k)->as_table();
        if (!t) fail(ErrorKind::validation, key + ": expected a table {id, x}" + TomlReader::where(*a->get(k)));
        TomlReader p(*t, key);
        p.allow({"id", "x"});
        ProbeConfig probe{"probe" + std::to_string(k), {}};
        p.read("id", probe.id);
        if (!p.find("x")) fail(ErrorKind::validation, key + ".x: missing");
        p.read("x", probe.x);
        c.output.probes.push_back(probe);
      }
    }
  }
  if (auto s = top.section("nondim")) {
    s->allow({"t_hat", "x_hat", "r_hat", "c_hat", "epsilon"});
    s->read("t_hat", c.nondim.t_hat);
    s->read("x_hat", c.nondim.x_hat);
    s->read("r_hat", c.nondim.r_hat);
    s->read("c_hat", c.nondim.c_hat);
    s->read("epsilon", c.nondim.epsilon);
  }
}

inline std::string toml_string(std::string_view s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + "\"";
}

inline std::string toml_pair(const Point2& p) { return "[" + format_double(p[0]) + ", " + format_double(p[1]) + "]"; }

inline std::string toml_source(const SourceTerm& f) {
  return "{ kind = " + toml_string(to_string(f.kind)) + ", value = " + format_double(f.value) + " }";
}

}  // namespace detail

/// Parses TOML text; `origin` names the source in error messages.
inline ScenarioConfig parse_config_string(std::string_view text, std::string_view origin = "<string>") {
  toml::table root;
  try {
    root = toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    fail(ErrorKind::parse, std::string(origin) + ":" + std::to_string(e.source().begin.line) + ":" +
                               std::to_string(e.source().begin.column) + ": " + std::string(e.description()));
  }
  ScenarioConfig c;
  detail::read_config(root, c);
  c.validate();
  return c;
}

inline ScenarioConfig parse_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::input, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_string(ss.str(), path);
}

/// Complete TOML form of a config; parse_config_string inverts it exactly.
/// Custom boundary predicates have no text form and are rejected.
inline std::string to_toml(const ScenarioConfig& c) {
  using detail::toml_pair;
  using detail::toml_source;
  using detail::toml_string;
  if (c.bc.kind == BoundarySpec::Kind::custom) fail(ErrorKind::validation, "bc: custom predicates cannot be serialised");
  const auto f = format_double;
  std::ostringstream os;
  os << "name = " << toml_string(c.name) << "\n";
  const auto& g = c.geometry;
  os << "\n[geometry]\n"
     << "macro_lower = " << toml_pair(g.macro_lower) << "\n"
     << "macro_upper = " << toml_pair(g.macro_upper) << "\n"
     << "cell = " << toml_string(to_string(g.cell.kind)) << "\n"
     << "radius = " << f(g.cell.radius) << "\n"
     << "ellipse = " << toml_pair({g.cell.ellipse_coefficients[0], g.cell.ellipse_coefficients[1]}) << "\n"
     << "y_lower = " << toml_pair(g.cell.lower) << "\n"
     << "y_upper = " << toml_pair(g.cell.upper) << "\n";
  const auto& r = c.resolution;
  os << "\n[resolution]\n"
     << "macro_cells = " << r.macro_cells << "\n"
     << "macro_level = " << r.macro_level << "\n"
     << "micro_rings = " << r.micro_rings << "\n"
     << "micro_segments = " << r.micro_segments << "\n"
     << "micro_level = " << r.micro_level << "\n"
     << "cell_level = " << r.cell_level << "\n"
     << "cell_segments = " << r.cell.segments << "\n"
     << "cell_layers = " << r.cell.layers << "\n"
     << "cell_grading = " << f(r.cell.grading) << "\n"
     << "cell_clustering = " << f(r.cell.clustering) << "\n";
  os << "\n[time]\n"
     << "tau = " << f(c.time.tau) << "\n"
     << "T = " << f(c.time.end_time) << "\n"
     << "sample_every = " << c.time.sample_every << "\n";
  const auto& k = c.reactions;
  os << "\n[reactions]\n"
     << "treatment = " << toml_string(to_string(c.treatment)) << "\n"
     << "a_e = " << f(k.a_e) << "\n"
     << "b_e = " << f(k.b_e) << "\n"
     << "a_i = " << f(k.a_i) << "\n"
     << "b_i = " << f(k.b_i) << "\n"
     << "gamma_i = " << f(k.gamma_i) << "\n"
     << "kappa_i = " << f(k.kappa_i) << "\n"
     << "d_f = " << f(k.d_f) << "\n"
     << "d_b = " << f(k.d_b) << "\n"
     << "d_d = " << f(k.d_d) << "\n"
     << "d_a = " << f(k.d_a) << "\n"
     << "F_e = " << toml_source(k.F_e) << "\n"
     << "F_i = " << toml_source(k.F_i) << "\n"
     << "F_f = " << toml_source(k.F_f) << "\n"
     << "F_d = " << toml_source(k.F_d) << "\n";
  const auto& d = c.diffusion;
  os << "\n[diffusion]\n"
     << "D_e = " << f(d.d_e) << "\n"
     << "D_i = " << f(d.micro.d_i) << "\n"
     << "D_f = " << f(d.micro.d_f) << "\n"
     << "D_b = " << f(d.micro.d_b) << "\n"
     << "D_d = " << f(d.micro.d_d) << "\n"
     << "D_a = " << f(d.micro.d_a) << "\n";
  if (d.d_hom) {
    const auto& t = *d.d_hom;
    os << "d_hom = [" << toml_pair({t(0, 0), t(0, 1)}) << ", " << toml_pair({t(1, 0), t(1, 1)}) << "]\n";
  }
  if (d.theta_e) os << "theta_e = " << f(*d.theta_e) << "\n";
  os << "\n[bc]\n"
     << "kind = " << toml_string(to_string(c.bc.kind)) << "\n"
     << "threshold = " << f(c.bc.threshold) << "\n"
     << "value = " << f(c.bc.value) << "\n";
  const auto& i = c.initial;
  os << "\n[initial]\n"
     << "preset = " << toml_string(to_string(i.preset)) << "\n"
     << "c_e = " << f(i.c_e) << "\n"
     << "c_i = " << f(i.c_i) << "\n"
     << "r_f = " << f(i.r_f) << "\n"
     << "r_b = " << f(i.r_b) << "\n"
     << "p_d = " << f(i.p_d) << "\n"
     << "p_a = " << f(i.p_a) << "\n"
     << "amplitude = " << f(i.amplitude) << "\n";
  os << "\n[output]\n"
     << "directory = " << toml_string(c.output.directory) << "\n"
     << "probes = [";
  for (std::size_t p = 0; p < c.output.probes.size(); ++p)
    os << (p ? ", " : "") << "{ id = " << toml_string(c.output.probes[p].id) << ", x = " << toml_pair(c.output.probes[p].x) << " }";
  os << "]\n";
  const auto& n = c.nondim;
  os << "\n[nondim]\n"
     << "t_hat = " << f(n.t_hat) << "\n"
     << "x_hat = " << f(n.x_hat) << "\n"
     << "r_hat = " << f(n.r_hat) << "\n"
     << "c_hat = " << f(n.c_hat) << "\n"
     << "epsilon = " << f(n.epsilon) << "\n";
  return os.str();
}

}  // namespace tsfem
