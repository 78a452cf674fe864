#pragma once

#include <functional>

namespace spiked::quad {

/// Adaptive Gauss-Kronrod integration of `f` over [a, b] (finite bounds).
/// Throws NumericalError when the integrand is non-finite or the error
/// estimate exceeds `abs_tol` after refinement.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = 1e-10);

}  // namespace spiked::quad
