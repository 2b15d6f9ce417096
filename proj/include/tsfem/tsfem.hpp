#pragma once

#include "tsfem/error.hpp"
#include "tsfem/parallel.hpp"
#include "tsfem/mesh.hpp"
#include "tsfem/mesh_io.hpp"
#include "tsfem/sparse.hpp"
#include "tsfem/assembly.hpp"
#include "tsfem/solver.hpp"
#include "tsfem/cell_problem.hpp"
#include "tsfem/micro_dynamics.hpp"
#include "tsfem/macro_dynamics.hpp"
#include "tsfem/scenario.hpp"
#include "tsfem/simulation.hpp"
#include "tsfem/benchmark.hpp"
#include "tsfem/config.hpp"
#include "tsfem/output.hpp"
#include "tsfem/cli.hpp"
