#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tsfem/cli.hpp"
#include "tsfem/config.hpp"
#include "tsfem/output.hpp"

using namespace tsfem;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("tsfem_cli_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void expect_error(const std::string& text, ErrorKind kind, const std::string& fragment) {
  try {
    parse_config_string(text);
    FAIL() << "expected an error containing " << fragment;
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

struct CliResult {
  int code;
  std::string out, err;
};

CliResult invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "tsfem");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Small Dirichlet scenario that runs in well under a second.
const char* small_config = R"(
name = "small"
[geometry]
cell = "circle"
radius = 1.0
[resolution]
macro_cells = 4
micro_rings = 2
micro_segments = 8
cell_level = 0
[time]
tau = 0.01
T = 0.05
[reactions]
a_e = 1.0
b_e = 0.5
[diffusion]
d_hom = [[0.01, 0.0], [0.0, 0.01]]
theta_e = 0.8
[bc]
kind = "all_boundary"
value = 1.0
[initial]
r_f = 0.2
p_d = 0.1
[output]
probes = [{ id = "mid", x = [0.05, 0.05] }]
)";

}  // namespace

TEST(ParseConfig, MinimalFileMaterialisesBioPreset) {
  const auto c = parse_config_string("scenario = \"bio-ellipse\"\n");
  EXPECT_EQ(c, bio_scenario(CellKind::ellipse));
  EXPECT_EQ(c.reactions.a_i, 6e3);
  EXPECT_EQ(c.reactions.a_e, 100.0);
  EXPECT_EQ(c.diffusion.micro.d_i, 10.0);
  EXPECT_EQ(c.geometry.cell.kind, CellKind::ellipse);
  EXPECT_EQ(c.time.tau, 1e-2);
  EXPECT_EQ(c.time.end_time, 50.0);
}

TEST(ParseConfig, FileOverridesPreset) {
  const auto c = parse_config_string("scenario = \"bio-dziuk\"\n[time]\nT = 2\n[reactions]\nb_e = 3\n");
  EXPECT_EQ(c.geometry.cell.kind, CellKind::dziuk);
  EXPECT_EQ(c.time.end_time, 2.0);
  EXPECT_EQ(c.reactions.b_e, 3.0);
  EXPECT_EQ(c.reactions.a_i, 6e3);
}

TEST(ParseConfig, ZeroTauNamesTimeTau) {
  expect_error("scenario = \"bio-ellipse\"\n[time]\ntau = 0\n", ErrorKind::validation, "time.tau");
}

TEST(ParseConfig, UnknownKeyIsNamed) {
  expect_error("[reactions]\nfoo = 1\n", ErrorKind::validation, "reactions.foo");
  expect_error("colour = 1\n", ErrorKind::validation, "colour");
  expect_error("[output]\nprobes = [{ id = \"a\", x = [0, 0], z = 1 }]\n", ErrorKind::validation, "output.probes[0].z");
}

TEST(ParseConfig, SyntaxErrorCarriesLine) {
  expect_error("[time]\ntau = 0.1\nT = = 2\n", ErrorKind::parse, ":3:");
}

TEST(ParseConfig, TypeAndRangeErrorsNameTheKey) {
  expect_error("[time]\ntau = \"fast\"\n", ErrorKind::validation, "time.tau");
  expect_error("[reactions]\na_e = -1\n", ErrorKind::validation, "reactions.a_e");
  expect_error("[geometry]\ncell = \"square\"\n", ErrorKind::validation, "geometry.cell");
  expect_error("[bc]\nkind = \"robin\"\n", ErrorKind::validation, "bc.kind");
  expect_error("[time]\ntau = 0.1\nT = 0.05\n", ErrorKind::validation, "time.T");
  expect_error("scenario = \"bio-square\"\n", ErrorKind::validation, "scenario");
  expect_error("[geometry]\nradius = 3.0\ncell = \"circle\"\n", ErrorKind::validation, "geometry.cell");
}

TEST(ParseConfig, MissingFileIsInputError) {
  try {
    parse_config("/nonexistent/tsfem.toml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::input);
  }
}

TEST(ConfigRoundTrip, BioPresetsAndCustomValues) {
  auto custom = parse_config_string(small_config);
  custom.reactions.F_e = SourceTerm::linear(0.1 + 0.2);  // a value without a short decimal form
  custom.reactions.F_d = SourceTerm::constant(1.0 / 3.0);
  custom.treatment = ReactionTreatment::lagged_implicit;
  custom.nondim.epsilon = 2e-3;
  for (const auto& c : {bio_scenario(CellKind::ellipse), bio_scenario(CellKind::dziuk), custom}) {
    const auto text = to_toml(c);
    const auto back = parse_config_string(text);
    EXPECT_EQ(back, c) << text;
    EXPECT_EQ(to_toml(back), text);
  }
}

TEST(ConfigRoundTrip, CustomPredicateIsRejected) {
  auto c = parse_config_string(small_config);
  c.bc = BoundarySpec::custom([](const Point2&) { return false; }, 1.0);
  EXPECT_THROW(to_toml(c), Error);
}

TEST(WriteTimeseries, EmptyTrajectoryGivesHeaderOnly) {
  std::ostringstream os;
  write_timeseries(Trajectory{}, os);
  EXPECT_EQ(os.str(), "time,probe_id,species,value\n");
}

TEST(WriteTimeseries, RowsPerSampleProbeAndSpecies) {
  auto c = parse_config_string(small_config);
  c.time.sample_every = 2;
  const auto traj = run_two_scale(c);
  ASSERT_EQ(traj.samples.size(), 4u);  // steps 0, 2, 4, 5
  std::ostringstream os;
  write_timeseries(traj, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "time,probe_id,species,value");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    if (rows == 1) {
      EXPECT_EQ(line, "0,mid,c_e,0");
    }
  }
  EXPECT_EQ(rows, 4u * 6u);
}

TEST(WriteSnapshot, TwoTriangleSquare) {
  const auto mesh = generate_mesh(SquareSpec{{0, 0}, {1, 1}, 1}, 0);
  auto snap = make_snapshot(mesh, 0.5);
  snap.scalars = {{"u", Vector::Ones(4)}};
  std::ostringstream os;
  write_snapshot(snap, os);
  const auto text = os.str();
  EXPECT_NE(text.find("DATASET POLYDATA\nPOINTS 4 double\n"), std::string::npos);
  EXPECT_NE(text.find("POLYGONS 2 8\n"), std::string::npos);
  EXPECT_NE(text.find("POINT_DATA 4\nSCALARS u double 1\nLOOKUP_TABLE default\n1\n1\n1\n1\n"), std::string::npos);
}

TEST(WriteSnapshot, CurveUsesLines) {
  const auto micro = make_micro_meshes(IdentityMap{}, 1, 8, 0);
  auto snap = make_snapshot(micro.gamma, 0.0);
  std::ostringstream os;
  write_snapshot(snap, os);
  EXPECT_NE(os.str().find("LINES 8 24\n"), std::string::npos);
}

TEST(WriteSnapshot, SizeMismatchIsRejected) {
  const auto mesh = generate_mesh(SquareSpec{{0, 0}, {1, 1}, 1}, 0);
  auto snap = make_snapshot(mesh, 0.0);
  snap.scalars = {{"u", Vector::Ones(3)}};
  std::ostringstream os;
  EXPECT_THROW(write_snapshot(snap, os), Error);
}

TEST(WriteOutput, UnwritablePathIsIoError) {
  const auto mesh = generate_mesh(SquareSpec{{0, 0}, {1, 1}, 1}, 0);
  for (auto fn : {+[](const TriMesh& m) { write_snapshot(make_snapshot(m, 0.0), "/nonexistent/dir/x.vtk"); },
                  +[](const TriMesh&) { write_timeseries(Trajectory{}, "/nonexistent/dir/x.csv"); }}) {
    try {
      fn(mesh);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::io);
    }
  }
}

TEST(Cli, CellProblemWithoutHole) {
  const auto r = invoke({"cell-problem", "--geometry", "none", "--level", "0"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("d_hom 1.000000e-02 0.000000e+00 0.000000e+00 1.000000e-02"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("theta_e 1.000000e+00"), std::string::npos) << r.out;
}

TEST(Cli, BenchmarkTableHasEocColumns) {
  const auto r = invoke({"benchmark", "--levels", "0..1"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream is(r.out);
  std::string header, l0, l1;
  std::getline(is, header);
  std::getline(is, l0);
  std::getline(is, l1);
  EXPECT_EQ(header.rfind("level,h_omega,h_yi,h_gamma,tau,c_e_l2h1,c_e_linfl2,c_e_eoc_l2h1,c_e_eoc_linfl2", 0), 0u);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 20);
  EXPECT_EQ(std::count(l1.begin(), l1.end(), ','), 20);
  EXPECT_EQ(l0.rfind("0,", 0), 0u);
  EXPECT_EQ(l1.rfind("1,", 0), 0u);
}

TEST(Cli, ExitCodesAndErrorPrefix) {
  auto r = invoke({"benchmark", "--levels", "3..1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error[validation]:", 0), 0u) << r.err;
  r = invoke({"simulate", "--config", "/nonexistent.toml"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error[input]:", 0), 0u);
  r = invoke({"cell-problem", "--geometry", "hexagon"});
  EXPECT_EQ(r.code, 2);
  r = invoke({});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error[usage]:", 0), 0u);
  r = invoke({"mesh", "gen", "--shape", "square", "-o", "/nonexistent/dir/m.mesh"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error[io]:", 0), 0u);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, MeshGenAndInfo) {
  const auto dir = scratch_dir("mesh");
  const auto path = (dir / "sq.mesh").string();
  ASSERT_EQ(invoke({"mesh", "gen", "--shape", "square", "--n", "1", "-o", path}).code, 0);
  const auto r = invoke({"mesh", "info", path});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("nodes 4\ntriangles 2\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("area 1\n"), std::string::npos);
}

TEST(Cli, SimulateIsByteIdenticalAcrossRuns) {
  const auto dir = scratch_dir("simulate");
  const auto cfg = dir / "small.toml";
  std::ofstream(cfg) << small_config;
  const auto a = dir / "a", b = dir / "b";
  auto r = invoke({"simulate", "--config", cfg.string(), "-o", a.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(invoke({"simulate", "--config", cfg.string(), "-o", b.string()}).code, 0);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    ++files;
    EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path();
  }
  EXPECT_GT(files, 3u);
  EXPECT_TRUE(fs::exists(a / "timeseries.csv"));
  EXPECT_TRUE(fs::exists(a / "micro_mid_membrane.vtk"));
}
