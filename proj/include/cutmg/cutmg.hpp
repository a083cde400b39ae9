#pragma once

// Umbrella header: mesh hierarchy, cut geometry, cut spaces, assembly, sparse
// linear algebra, multigrid and the experiment drivers.

#include "cutmg/common.hpp"
#include "cutmg/quadrature.hpp"
#include "cutmg/mesh.hpp"
#include "cutmg/sparse_matrix.hpp"
#include "cutmg/linear_solvers.hpp"
#include "cutmg/spectral.hpp"
#include "cutmg/cut_geometry.hpp"
#include "cutmg/cut_space.hpp"
#include "cutmg/assembly.hpp"
#include "cutmg/multigrid.hpp"
#include "cutmg/experiments.hpp"
