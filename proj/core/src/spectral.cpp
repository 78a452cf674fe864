#include "spiked/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

#include "spiked/errors.hpp"
#include "spiked/quadrature.hpp"

namespace spiked {

Ratio::Ratio(double d) : d_(d) {
    if (!(d > 0.0 && d <= 1.0)) {
        throw DomainError("ratio d = M/N must lie in (0, 1], got " + std::to_string(d));
    }
}

Ratio Ratio::of(Eigen::Index rows, Eigen::Index cols) {
    if (rows < 1 || cols < 1) {
        throw ValidationError("matrix must be non-empty");
    }
    return Ratio(static_cast<double>(rows) / static_cast<double>(cols));
}

double Ratio::sqrt() const { return std::sqrt(d_); }

namespace detail {

Tridiagonal tridiagonalize(Matrix& a, Vector& tau) {
    const Eigen::Index n = a.rows();
    Tridiagonal t;
    t.diag.resize(n);
    t.sub.resize(std::max<Eigen::Index>(n - 1, 0));
    tau.setZero(std::max<Eigen::Index>(n - 1, 0));

    Vector v;
    Vector w;
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        const Eigen::Index m = n - k - 1;
        auto x = a.col(k).tail(m);
        const double alpha = x(0);
        const double sigma = m > 1 ? x.tail(m - 1).squaredNorm() : 0.0;
        if (sigma == 0.0) {
            t.sub(k) = alpha;
            continue;
        }
        const double beta = -std::copysign(std::sqrt(alpha * alpha + sigma), alpha);
        const double coeff = (beta - alpha) / beta;
        x.tail(m - 1) /= (alpha - beta);
        x(0) = 1.0;
        v = x;
        x(0) = beta;
        tau(k) = coeff;
        t.sub(k) = beta;

        auto a22 = a.bottomRightCorner(m, m);
        w.noalias() = coeff * (a22.selfadjointView<Eigen::Lower>() * v);
        w -= (0.5 * coeff * w.dot(v)) * v;
        a22.selfadjointView<Eigen::Lower>().rankUpdate(v, w, -1.0);
    }
    t.diag = a.diagonal();
    return t;
}

std::vector<double> tridiagonal_eigenvalues(Tridiagonal t) {
    const int n = static_cast<int>(t.diag.size());
    std::vector<double> d(t.diag.data(), t.diag.data() + n);
    std::vector<double> e(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i + 1 < n; ++i) e[i] = t.sub(i);

    constexpr int kMaxIter = 60;
    const double eps = std::numeric_limits<double>::epsilon();
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m = l;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= eps * dd) break;
            }
            if (m != l) {
                if (iter++ == kMaxIter) {
                    throw NumericalError("implicit QL did not converge for eigenvalue " +
                                         std::to_string(l) + " after " +
                                         std::to_string(kMaxIter) + " iterations");
                }
                // Wilkinson-type shift from the leading 2x2 block.
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0;
                double c = 1.0;
                double p = 0.0;
                int i = m - 1;
                for (; i >= l; --i) {
                    const double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if (r == 0.0 && i >= l) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
    std::sort(d.begin(), d.end(), std::greater<>());
    return d;
}

Vector tridiagonal_eigenvector(const Tridiagonal& t, double eigenvalue) {
    const Eigen::Index n = t.diag.size();
    if (n == 1) return Vector::Ones(1);

    double norm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double row = std::abs(t.diag(i));
        if (i > 0) row += std::abs(t.sub(i - 1));
        if (i + 1 < n) row += std::abs(t.sub(i));
        norm = std::max(norm, row);
    }
    const double tiny = std::max(norm, 1.0) * std::numeric_limits<double>::epsilon();

    // LU with partial pivoting of T - eigenvalue * I (as in LAPACK dgttrf).
    Vector dl = t.sub;
    Vector dd = t.diag.array() - eigenvalue;
    Vector du = t.sub;
    Vector du2 = Vector::Zero(std::max<Eigen::Index>(n - 2, 0));
    std::vector<bool> swapped(static_cast<std::size_t>(n - 1), false);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        if (std::abs(dd(i)) >= std::abs(dl(i))) {
            if (dd(i) == 0.0) dd(i) = tiny;
            const double fact = dl(i) / dd(i);
            dl(i) = fact;
            dd(i + 1) -= fact * du(i);
        } else {
            const double fact = dd(i) / dl(i);
            dd(i) = dl(i);
            dl(i) = fact;
            const double temp = du(i);
            du(i) = dd(i + 1);
            dd(i + 1) = temp - fact * dd(i + 1);
            if (i + 2 < n) {
                du2(i) = du(i + 1);
                du(i + 1) = -fact * du(i + 1);
            }
            swapped[static_cast<std::size_t>(i)] = true;
        }
    }
    if (dd(n - 1) == 0.0) dd(n - 1) = tiny;

    Vector z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = 1.0 + 0.5 * std::sin(static_cast<double>(i) + 1.0);
    for (int sweep = 0; sweep < 3; ++sweep) {
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            if (!swapped[static_cast<std::size_t>(i)]) {
                z(i + 1) -= dl(i) * z(i);
            } else {
                const double temp = z(i);
                z(i) = z(i + 1);
                z(i + 1) = temp - dl(i) * z(i);
            }
        }
        z(n - 1) /= dd(n - 1);
        z(n - 2) = (z(n - 2) - du(n - 2) * z(n - 1)) / dd(n - 2);
        for (Eigen::Index i = n - 3; i >= 0; --i) {
            z(i) = (z(i) - du(i) * z(i + 1) - du2(i) * z(i + 2)) / dd(i);
        }
        z.normalize();
    }
    return z;
}

void apply_householder(const Matrix& a, const Vector& tau, Vector& z) {
    const Eigen::Index n = a.rows();
    for (Eigen::Index k = n - 2; k >= 0; --k) {
        if (tau(k) == 0.0) continue;
        const Eigen::Index m = n - k - 1;
        auto seg = z.segment(k + 1, m);
        auto tail = a.col(k).tail(m - 1);
        const double s = tau(k) * (seg(0) + tail.dot(seg.tail(m - 1)));
        seg(0) -= s;
        seg.tail(m - 1) -= s * tail;
    }
}

}  // namespace detail

namespace {

void check_symmetric(const Matrix& s) {
    if (s.rows() != s.cols()) {
        throw ValidationError("eigensolver input must be square, got " + std::to_string(s.rows()) +
                              "x" + std::to_string(s.cols()));
    }
    if (s.size() == 0) throw ValidationError("eigensolver input is empty");
    if (!s.allFinite()) throw ValidationError("eigensolver input has non-finite entries");
    const double scale = s.cwiseAbs().maxCoeff();
    const double asym = (s - s.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale) {
        throw ValidationError("matrix is not symmetric: max |S_ij - S_ji| = " +
                              std::to_string(asym));
    }
}

std::vector<double> lower_eigenvalues(Matrix a) {
    Vector tau;
    return detail::tridiagonal_eigenvalues(detail::tridiagonalize(a, tau));
}

Eigenpair lower_top_eigenpair(Matrix a) {
    Vector tau;
    auto t = detail::tridiagonalize(a, tau);
    const double top = detail::tridiagonal_eigenvalues(t).front();
    Vector z = detail::tridiagonal_eigenvector(t, top);
    detail::apply_householder(a, tau, z);
    z.normalize();
    return {top, std::move(z)};
}

}  // namespace

std::vector<double> sym_eigenvalues(const Matrix& s) {
    check_symmetric(s);
    return lower_eigenvalues(s);
}

Eigenpair sym_top_eigenpair(const Matrix& s) {
    check_symmetric(s);
    return lower_top_eigenpair(s);
}

Matrix gram(const Matrix& y, bool lower_only) {
    Matrix s = Matrix::Zero(y.rows(), y.rows());
    s.selfadjointView<Eigen::Lower>().rankUpdate(y);
    if (!lower_only) s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
    return s;
}

std::vector<double> gram_eigenvalues(const Matrix& y) {
    if (y.size() == 0) throw ValidationError("data matrix is empty");
    return lower_eigenvalues(gram(y, true));
}

Eigenpair gram_top_eigenpair(const Matrix& y) {
    if (y.size() == 0) throw ValidationError("data matrix is empty");
    return lower_top_eigenpair(gram(y, true));
}

SpectralSummary summarize(const Matrix& y) {
    Ratio d = Ratio::of(y.rows(), y.cols());
    return SpectralSummary{gram_eigenvalues(y), d, mp_edges(d)};
}

MpEdges mp_edges(Ratio d) {
    const double r = d.sqrt();
    return {(1.0 - r) * (1.0 - r), (1.0 + r) * (1.0 + r)};
}

double mp_density(double x, Ratio d) {
    const auto [lo, hi] = mp_edges(d);
    if (!(x > lo && x < hi)) return 0.0;
    return std::sqrt((x - lo) * (hi - x)) / (2.0 * std::numbers::pi * d.value() * x);
}

double stieltjes(double z, Ratio d) {
    const auto [lo, hi] = mp_edges(d);
    if (z > lo && z < hi) {
        throw DomainError("Stieltjes transform evaluated inside the MP support at z = " +
                          std::to_string(z));
    }
    const double dv = d.value();
    const double b = 1.0 - dv - z;
    const double root = std::sqrt(std::max(b * b - 4.0 * dv * z, 0.0));
    // Rationalized roots of d z s^2 - (1 - d - z) s + 1 = 0: the branch
    // decaying like -1/z above the support and the finite one below it.
    if (z >= hi) return 2.0 / (b - root);
    return 2.0 / (b + root);
}

double bbp_outlier(double lambda, Ratio d) {
    if (lambda > d.sqrt()) return (1.0 + lambda) * (1.0 + d.value() / lambda);
    return mp_edges(d).upper;
}

double mp_integral(const std::function<double(double)>& f, Ratio d) {
    const MpEdges edges = mp_edges(d);
    const double lo = edges.lower;
    const double width = edges.upper - edges.lower;
    const double dv = d.value();
    auto integrand = [&](double theta) {
        const double s = std::sin(theta);
        const double c = std::cos(theta);
        const double x = lo + width * s * s;
        const double weight = width * width * s * s * c * c / (std::numbers::pi * dv * x);
        return f(x) * weight;
    };
    return quad::integrate(integrand, 0.0, std::numbers::pi / 2.0, 1e-10);
}

}  // namespace spiked
