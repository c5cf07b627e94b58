#pragma once

#include "dgwave/dense_matrix.hpp"
#include "dgwave/errors.hpp"
#include "dgwave/fem_space.hpp"
#include "dgwave/marcher.hpp"
#include "dgwave/quadrature.hpp"
#include "dgwave/slab_system.hpp"
#include "dgwave/study.hpp"
#include "dgwave/time_basis.hpp"
