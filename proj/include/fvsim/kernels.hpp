#pragma once

// Ready-made configuration kernels for CustomKernel rebirths.

#include "fvsim/engine.hpp"

namespace fvsim {

/// Uniform-survivor rebirth written as a configuration kernel: survivors kept,
/// killed particle copies one of them.
CustomKernel fleming_viot_as_custom();

/// Killed particle reborn at the fixed position x0 (environment kept).
CustomKernel fixed_point_kernel(const Vec& x0);

/// Killed particle reborn at distance `epsilon` from the boundary point
/// nearest to its kill position. Breaks the A_i condition.
CustomKernel boundary_hugging_kernel(const Domain& domain, double epsilon = 1e-9);

/// Uniform-survivor rebirth that also pulls one other survivor towards the
/// boundary, scaling its distance by `factor` in (0, 1). Breaks B_{e,x}.
CustomKernel survivor_squeezing_kernel(const Domain& domain, double factor = 0.5);

}  // namespace fvsim
