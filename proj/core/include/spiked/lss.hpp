#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spiked/errors.hpp"
#include "spiked/spectral.hpp"

namespace spiked {

/// Parameters of the weak-detection test: hypothesized SNR omega in
/// (0, sqrt d), aspect ratio d and noise fourth moment w4 > 1.
class TestParams {
public:
    /// Throws DomainError unless 0 < omega < sqrt(d) and w4 > 1.
    TestParams(double omega, Ratio d, double w4);

    double omega() const { return omega_; }
    Ratio ratio() const { return d_; }
    double d() const { return d_.value(); }
    double w4() const { return w4_; }

    /// 2/(w4 - 1) - 1, the weight of the trace term.
    double trace_weight() const { return 2.0 / (w4_ - 1.0) - 1.0; }
    /// (1 + d/omega)(1 + omega): the log-determinant shift.
    double shift() const;

private:
    double omega_;
    Ratio d_;
    double w4_;
};

/// Raised when an eigenvalue reaches the log-determinant shift, i.e. the
/// data look supercritical for the requested omega.
class OutlierEigenvalueError : public DomainError {
public:
    OutlierEigenvalueError(double eigenvalue, double shift);
    double eigenvalue() const { return eigenvalue_; }
    double shift() const { return shift_; }

private:
    double eigenvalue_;
    double shift_;
};

enum class Decision { AcceptH0, RejectH0 };

std::string to_string(Decision d);

/// phi_omega(x) = (omega/d) k x - log(shift - x), k = 2/(w4-1) - 1.
double phi(double x, const TestParams& p);

/// L_omega from the eigenvalues of Y Y^T in closed form:
///   -sum log(shift - mu_i) + (omega/d) k (sum mu_i - M)
///   + M [omega/d - log(omega/d) - ((1-d)/d) log(1 + omega)].
double lss_statistic(std::span<const double> eigenvalues, const TestParams& p);
double lss_statistic(const Matrix& y, const TestParams& p);

/// The same statistic as sum phi(mu_i) - M int phi dmu_MP, with the MP
/// integral evaluated by quadrature. Used as a cross-check.
double lss_statistic_spectral_sum(std::span<const double> eigenvalues, const TestParams& p);

/// Limiting mean of L_omega when the true SNR is lambda in [0, sqrt d):
///   -1/2 log(1 - omega^2/d) + (omega^2/2d)(w4 - 3)
///   - log(1 - lambda^2/d) + (lambda^2/d) k.
double limiting_mean(double lambda, const TestParams& p);

/// V0 = -2 log(1 - omega^2/d) + (2 omega^2/d) k.
double limiting_variance(const TestParams& p);

/// Midpoint of the two limiting means:
/// -log(1 - omega^2/d) + (omega^2/2d)(2/(w4-1) + w4 - 4).
double threshold(const TestParams& p);

/// erfc(sqrt(V0) / (4 sqrt 2)): limiting Type-I plus Type-II error.
double predicted_error(const TestParams& p);

/// Accepts H0 iff L <= threshold (the boundary accepts).
Decision decide(double statistic, const TestParams& p);

/// tau_l(f) = (1/pi) int_{-2}^{2} T_l(x/2) f(x) / sqrt(4 - x^2) dx, l = 0..L.
struct ChebyshevCoeffs {
    std::vector<double> tau;
    int truncation() const { return static_cast<int>(tau.size()) - 1; }
};

/// Gauss-Chebyshev quadrature with max(4096, 4L) nodes unless `nodes` is
/// larger. Throws NumericalError if f is not finite at a node.
ChebyshevCoeffs chebyshev_tau(const std::function<double(double)>& f, int truncation,
                              int nodes = 0);

struct CltMoments {
    double mean = 0.0;
    double variance = 0.0;
    int terms = 0;  // series length used
};

/// Limiting mean and variance of sum f(mu_i) - M int f dmu_MP for f
/// analytic near the MP support, with true SNR lambda:
///   m = (f~(2) + f~(-2))/4 - tau0/2 - (w4 - 3) tau2 + sum_l (lambda/sqrt d)^l tau_l
///   V = 2 sum_l l tau_l^2 + (w4 - 3) tau1^2
/// where f~(x) = f(sqrt(d) x + 1 + d) and tau_l = tau_l(f~). Series stop
/// once terms fall below 1e-12 (at most 10^4 terms). Throws DomainError
/// for lambda outside [0, sqrt d).
CltMoments clt_moments(const std::function<double(double)>& f, double lambda, Ratio d, double w4);

/// |m(f | lambda = omega) - m(f | 0)| / sqrt(V(f)). Throws DomainError
/// when V(f) vanishes.
double efficiency(const std::function<double(double)>& f, const TestParams& p);

/// Split-half check of the fourth moment: estimates on the left and right
/// column halves (normalized with the full N) and on the whole matrix.
struct W4Diagnostics {
    double estimate = 0.0;
    double left_half = 0.0;
    double right_half = 0.0;
    std::vector<std::string> warnings;
};

/// Warns when the halves differ by more than 0.2, or when a supplied w4
/// differs from the estimate by more than 0.2.
W4Diagnostics w4_diagnostics(const Matrix& y, std::optional<double> supplied = {});

struct LssTestResult {
    double statistic = 0.0;
    double threshold = 0.0;
    Decision decision = Decision::AcceptH0;
    double m0 = 0.0;
    double m1 = 0.0;
    double v0 = 0.0;
    double predicted_error = 0.0;
    double omega = 0.0;
    double d = 0.0;
    double w4 = 0.0;
    bool w4_estimated = false;
    std::vector<std::string> warnings;
};

nlohmann::json to_json(const LssTestResult& r);

/// Runs the full test on a data matrix. When `w4` is absent it is
/// estimated from the data. `ratio` defaults to M/N.
LssTestResult run_lss_test(const Matrix& y, double omega, std::optional<double> w4,
                           std::optional<Ratio> ratio = {});

}  // namespace spiked
