#pragma once

#include "nablavar/errors.hpp"
#include "nablavar/expr.hpp"
#include "nablavar/fundamental.hpp"
#include "nablavar/grid_function.hpp"
#include "nablavar/nabla_calc.hpp"
#include "nablavar/solver.hpp"
#include "nablavar/summation.hpp"
#include "nablavar/timescale.hpp"
#include "nablavar/variational.hpp"
