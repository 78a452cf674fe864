#pragma once

// Reference computations that share no code with the library. They are slow
// or limited to small inputs, which is fine for checking.

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// det(S - x I) by Gaussian elimination with partial pivoting.
double char_poly(const Eigen::MatrixXd& s, double x);

/// Eigenvalues of a small symmetric matrix (descending) by scanning the sign
/// of the characteristic polynomial on a fine grid inside the Gershgorin
/// bounds and bisecting each sign change. Intended for n <= 8 with
/// well-separated eigenvalues.
std::vector<double> char_poly_eigenvalues(const Eigen::MatrixXd& s);

/// Composite trapezoid rule with `n` panels.
double trapezoid(const std::function<double(double)>& f, double a, double b, int n);

/// erfc from the Maclaurin series of erf (accurate for |x| <= 3).
double erfc_series(double x);

/// int f dmu_MP by a midpoint rule in theta with x = d- + (d+ - d-) sin^2 theta.
double mp_expectation(const std::function<double(double)>& f, double d, int n = 200000);

/// Stieltjes transform of the MP law by brute-force quadrature.
double stieltjes(double z, double d);

/// (1/pi) int_0^pi cos(l theta) f(2 cos theta) d theta by a fine midpoint rule.
double chebyshev_tau(const std::function<double(double)>& f, int l, int n = 200000);

}  // namespace oracle
