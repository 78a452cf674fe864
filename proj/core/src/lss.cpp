#include "spiked/lss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spiked/matrix_io.hpp"
#include "spiked/noise.hpp"

namespace spiked {

namespace {

constexpr double kSeriesTol = 1e-12;
constexpr int kMaxSeriesTerms = 10000;
constexpr int kMinNodes = 4096;
constexpr double kW4Tolerance = 0.2;

// N^2 * mean(Y^4) over a column block, normalized with the full width N.
double block_w4(const Matrix& y, Eigen::Index first, Eigen::Index count) {
    const double n = static_cast<double>(y.cols());
    return n * n * y.middleCols(first, count).array().square().square().mean();
}

std::string fmt(double x) { return format_double(x); }

}  // namespace

TestParams::TestParams(double omega, Ratio d, double w4) : omega_(omega), d_(d), w4_(w4) {
    if (!(omega > 0.0)) {
        throw DomainError("omega must be > 0 (the test function is undefined at omega = 0)");
    }
    if (!(omega < d.sqrt())) {
        throw DomainError("omega = " + fmt(omega) + " must be below sqrt(d) = " + fmt(d.sqrt()));
    }
    if (!(w4 > 1.0) || !std::isfinite(w4)) throw DomainError("w4 must be finite and > 1");
}

double TestParams::shift() const { return (1.0 + d() / omega_) * (1.0 + omega_); }

OutlierEigenvalueError::OutlierEigenvalueError(double eigenvalue, double shift)
    : DomainError("eigenvalue " + fmt(eigenvalue) + " is at or beyond the log-determinant shift " +
                  fmt(shift) + "; the data look supercritical for this omega, use PCA instead"),
      eigenvalue_(eigenvalue),
      shift_(shift) {}

std::string to_string(Decision d) { return d == Decision::AcceptH0 ? "accept_h0" : "reject_h0"; }

double phi(double x, const TestParams& p) {
    const double arg = p.shift() - x;
    if (!(arg > 0.0)) throw OutlierEigenvalueError(x, p.shift());
    return (p.omega() / p.d()) * p.trace_weight() * x - std::log(arg);
}

double lss_statistic(std::span<const double> eigenvalues, const TestParams& p) {
    const double shift = p.shift();
    const double d = p.d();
    const double w = p.omega();
    double log_det = 0.0;
    double trace = 0.0;
    for (double mu : eigenvalues) {
        const double arg = shift - mu;
        if (!(arg > 0.0)) throw OutlierEigenvalueError(mu, shift);
        log_det += std::log(arg);
        trace += mu;
    }
    const double m = static_cast<double>(eigenvalues.size());
    const double centering = w / d - std::log(w / d) - ((1.0 - d) / d) * std::log1p(w);
    return -log_det + (w / d) * p.trace_weight() * (trace - m) + m * centering;
}

double lss_statistic(const Matrix& y, const TestParams& p) {
    const auto eig = gram_eigenvalues(y);
    return lss_statistic(std::span<const double>(eig), p);
}

double lss_statistic_spectral_sum(std::span<const double> eigenvalues, const TestParams& p) {
    double sum = 0.0;
    for (double mu : eigenvalues) sum += phi(mu, p);
    const double bulk = mp_integral([&](double x) { return phi(x, p); }, p.ratio());
    return sum - static_cast<double>(eigenvalues.size()) * bulk;
}

double limiting_mean(double lambda, const TestParams& p) {
    const double d = p.d();
    if (!(lambda >= 0.0) || !(lambda < p.ratio().sqrt())) {
        throw DomainError("true SNR lambda = " + fmt(lambda) + " must lie in [0, sqrt(d))");
    }
    const double w2 = p.omega() * p.omega() / d;
    const double l2 = lambda * lambda / d;
    // The fourth-cumulant correction enters with a plus sign: for f(x) = x^2
    // the exact finite-N mean of tr S^2 - M(1+d) is d(w4 - 2) = d + (w4 - 3) tau_2.
    return -0.5 * std::log1p(-w2) + 0.5 * w2 * (p.w4() - 3.0) - std::log1p(-l2) +
           l2 * p.trace_weight();
}

double limiting_variance(const TestParams& p) {
    const double w2 = p.omega() * p.omega() / p.d();
    return -2.0 * std::log1p(-w2) + 2.0 * w2 * p.trace_weight();
}

double threshold(const TestParams& p) {
    const double w2 = p.omega() * p.omega() / p.d();
    return -std::log1p(-w2) + 0.5 * w2 * (2.0 / (p.w4() - 1.0) + p.w4() - 4.0);
}

double predicted_error(const TestParams& p) {
    return std::erfc(std::sqrt(limiting_variance(p)) / (4.0 * std::numbers::sqrt2));
}

Decision decide(double statistic, const TestParams& p) {
    return statistic <= threshold(p) ? Decision::AcceptH0 : Decision::RejectH0;
}

ChebyshevCoeffs chebyshev_tau(const std::function<double(double)>& f, int truncation, int nodes) {
    if (truncation < 0) throw ValidationError("Chebyshev truncation must be >= 0");
    const int n = std::max({nodes, kMinNodes, 4 * truncation});
    ChebyshevCoeffs out;
    out.tau.assign(static_cast<std::size_t>(truncation) + 1, 0.0);
    for (int k = 0; k < n; ++k) {
        const double theta = std::numbers::pi * (k + 0.5) / n;
        const double c = std::cos(theta);
        const double fx = f(2.0 * c);
        if (!std::isfinite(fx)) {
            throw NumericalError("Chebyshev quadrature: f is not finite at x = " + fmt(2.0 * c));
        }
        // cos(l theta) by the three-term recurrence.
        double prev = 1.0;
        double cur = c;
        out.tau[0] += fx;
        for (int l = 1; l <= truncation; ++l) {
            out.tau[static_cast<std::size_t>(l)] += fx * cur;
            const double next = 2.0 * c * cur - prev;
            prev = cur;
            cur = next;
        }
    }
    for (double& t : out.tau) t /= n;
    return out;
}

namespace {

struct Series {
    ChebyshevCoeffs coeffs;
    int terms = 0;
};

// Coefficients of f~ with enough terms that the tail is negligible.
Series converged_tau(const std::function<double(double)>& ft) {
    for (int l = 64;; l *= 2) {
        const int trunc = std::min(l, kMaxSeriesTerms);
        Series s{chebyshev_tau(ft, trunc), 0};
        const auto& tau = s.coeffs.tau;
        double scale = 1.0;
        for (double t : tau) scale = std::max(scale, std::abs(t));
        int last = 0;
        for (int i = trunc; i >= 1; --i) {
            const double t = std::abs(tau[static_cast<std::size_t>(i)]);
            if (t >= kSeriesTol * scale || i * t * t >= kSeriesTol * scale * scale) {
                last = i;
                break;
            }
        }
        s.terms = last + 1;
        if (last <= trunc / 2) return s;
        if (trunc == kMaxSeriesTerms) {
            throw NumericalError("Chebyshev series did not converge within " +
                                 std::to_string(kMaxSeriesTerms) + " terms");
        }
    }
}

}  // namespace

CltMoments clt_moments(const std::function<double(double)>& f, double lambda, Ratio d, double w4) {
    const double sd = d.sqrt();
    if (!(lambda >= 0.0) || !(lambda < sd)) {
        throw DomainError("true SNR lambda = " + fmt(lambda) +
                          " must lie in [0, sqrt(d)) for the series to converge");
    }
    const double dv = d.value();
    auto ft = [&](double x) { return f(sd * x + 1.0 + dv); };
    const Series s = converged_tau(ft);
    const auto& tau = s.coeffs.tau;
    auto at = [&](int l) { return l < static_cast<int>(tau.size()) ? tau[static_cast<std::size_t>(l)] : 0.0; };

    CltMoments out;
    out.terms = s.terms;
    out.mean = 0.25 * (ft(2.0) + ft(-2.0)) - 0.5 * at(0) + (w4 - 3.0) * at(2);
    out.variance = (w4 - 3.0) * at(1) * at(1);
    const double ratio = lambda / sd;
    double power = 1.0;
    for (int l = 1; l < static_cast<int>(tau.size()); ++l) {
        power *= ratio;
        out.mean += power * at(l);
        out.variance += 2.0 * l * at(l) * at(l);
    }
    return out;
}

double efficiency(const std::function<double(double)>& f, const TestParams& p) {
    const double sd = p.ratio().sqrt();
    const double dv = p.d();
    const Series s = converged_tau([&](double x) { return f(sd * x + 1.0 + dv); });
    const auto& tau = s.coeffs.tau;
    const double t = p.omega() / sd;
    double shift = 0.0;
    double variance = tau.size() > 1 ? (p.w4() - 3.0) * tau[1] * tau[1] : 0.0;
    double power = 1.0;
    double scale = 0.0;
    for (std::size_t l = 1; l < tau.size(); ++l) {
        power *= t;
        shift += power * tau[l];
        variance += 2.0 * static_cast<double>(l) * tau[l] * tau[l];
        scale = std::max(scale, std::abs(tau[l]));
    }
    if (!(variance > 1e-24 * std::max(1.0, scale * scale))) {
        throw DomainError("efficiency: f has zero limiting variance (constant on the spectrum)");
    }
    return std::abs(shift) / std::sqrt(variance);
}

W4Diagnostics w4_diagnostics(const Matrix& y, std::optional<double> supplied) {
    if (y.cols() < 2) throw ValidationError("w4 estimation needs at least two columns");
    W4Diagnostics out;
    const Eigen::Index half = y.cols() / 2;
    out.estimate = estimate_w4(y);
    out.left_half = block_w4(y, 0, half);
    out.right_half = block_w4(y, half, y.cols() - half);
    if (std::abs(out.left_half - out.right_half) > kW4Tolerance) {
        out.warnings.push_back("w4 estimates on the two column halves differ: " + fmt(out.left_half) +
                               " vs " + fmt(out.right_half));
    }
    if (supplied && std::abs(*supplied - out.estimate) > kW4Tolerance) {
        out.warnings.push_back("supplied w4 = " + fmt(*supplied) + " differs from the data estimate " +
                               fmt(out.estimate));
    }
    return out;
}

nlohmann::json to_json(const LssTestResult& r) {
    return nlohmann::json{{"statistic", r.statistic},
                          {"threshold", r.threshold},
                          {"decision", to_string(r.decision)},
                          {"m0", r.m0},
                          {"m1", r.m1},
                          {"V0", r.v0},
                          {"predicted_error", r.predicted_error},
                          {"omega", r.omega},
                          {"d", r.d},
                          {"w4", r.w4},
                          {"w4_estimated", r.w4_estimated},
                          {"warnings", r.warnings}};
}

LssTestResult run_lss_test(const Matrix& y, double omega, std::optional<double> w4,
                           std::optional<Ratio> ratio) {
    const Ratio d = ratio.value_or(Ratio::of(y.rows(), y.cols()));
    const W4Diagnostics diag = w4_diagnostics(y, w4);
    LssTestResult r;
    r.w4_estimated = !w4.has_value();
    r.w4 = w4.value_or(diag.estimate);
    r.warnings = diag.warnings;
    const TestParams p(omega, d, r.w4);
    r.statistic = lss_statistic(y, p);
    r.threshold = threshold(p);
    r.decision = decide(r.statistic, p);
    r.m0 = limiting_mean(0.0, p);
    r.m1 = limiting_mean(omega, p);
    r.v0 = limiting_variance(p);
    r.predicted_error = predicted_error(p);
    r.omega = omega;
    r.d = d.value();
    return r;
}

}  // namespace spiked
