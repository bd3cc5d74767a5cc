#pragma once

#include "occ/model.hpp"
#include "occ/golden.hpp"
#include "occ/coarse_solver.hpp"
#include "occ/simplex_grid.hpp"
#include "occ/lp.hpp"
#include "occ/concavify.hpp"
#include "occ/described.hpp"
#include "occ/partitions.hpp"
#include "occ/analysis.hpp"
#include "occ/ridehailing.hpp"
#include "occ/io.hpp"
