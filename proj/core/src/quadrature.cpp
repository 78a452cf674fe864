#include "spiked/quadrature.hpp"

#include <cmath>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "spiked/errors.hpp"

namespace spiked::quad {

double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol) {
    if (!(a < b)) {
        if (a == b) return 0.0;
        return -integrate(f, b, a, abs_tol);
    }
    bool finite = true;
    auto guarded = [&](double x) {
        double y = f(x);
        if (!std::isfinite(y)) {
            finite = false;
            return 0.0;
        }
        return y;
    };
    double err = 0.0;
    double l1 = 0.0;
    // Relative tolerance near machine precision; the absolute check happens below.
    double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        guarded, a, b, 20, 1e-14, &err, &l1);
    if (!finite) {
        throw NumericalError("quadrature: non-finite integrand on [" + std::to_string(a) + ", " +
                             std::to_string(b) + "]");
    }
    if (!(err <= abs_tol) && !(err <= 1e-12 * l1)) {
        throw NumericalError("quadrature: error estimate " + std::to_string(err) +
                             " exceeds tolerance " + std::to_string(abs_tol));
    }
    return value;
}

}  // namespace spiked::quad
