#include "isomer/numerics/finite_diff.hpp"

#include <stdexcept>

namespace isomer {

DenseArray finite_diff(const ScalarFn& f, const DenseArray& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff: step must be positive");
  DenseArray grad(x.shape());
  DenseArray probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = f(probe);
    probe[i] = orig - h;
    const double fm = f(probe);
    probe[i] = orig;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace isomer
