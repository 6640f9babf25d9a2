#pragma once

#include "fracmin/core.hpp"
#include "fracmin/grid.hpp"
#include "fracmin/geometry.hpp"
#include "fracmin/quadrature.hpp"
#include "fracmin/energy.hpp"
#include "fracmin/curvature.hpp"
#include "fracmin/levelsets.hpp"
#include "fracmin/barrier.hpp"
#include "fracmin/minimizer.hpp"
#include "fracmin/fixtures.hpp"
#include "fracmin/nlsg.hpp"
