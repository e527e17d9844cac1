#pragma once

#include <functional>

#include "isomer/numerics/dense_array.hpp"

namespace isomer {

using ScalarFn = std::function<double(const DenseArray&)>;

/// Central-difference gradient: (f(x + h e_i) - f(x - h e_i)) / (2h) per coordinate.
DenseArray finite_diff(const ScalarFn& f, const DenseArray& x, double h = 1e-5);

}  // namespace isomer
