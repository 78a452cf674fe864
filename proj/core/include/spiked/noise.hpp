#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spiked/rng.hpp"
#include "spiked/spectral.hpp"

namespace spiked {

/// Gaussian-kernel density estimate tabulated on a uniform grid.
///
/// Node values of g, g' and g'' come from the exact kernel sum over the
/// linearly binned samples; between nodes g and g' are cubic Hermite
/// interpolants (using g' and g'' as slopes).
struct KdeGrid {
    double x0 = 0.0;
    double step = 0.0;
    std::vector<double> density;
    std::vector<double> derivative;
    std::vector<double> second_derivative;
    double bandwidth = 0.0;
    std::size_t sample_count = 0;
};

/// E[f'(xi)], E[f(xi)^2], E[xi f(xi)] for xi ~ g.
struct TransformMoments {
    double m;
    double v;
    double e;
};

/// Unit-variance symmetric noise density g for the normalized entries
/// sqrt(N) X_ij, with its score h = -g'/g.
///
/// Values are immutable and cheap to copy (the tabulated state of a KDE
/// fit is shared).
class NoiseModel {
public:
    enum class Kind { Gaussian, Bimodal, StudentT, Kde };

    Kind kind() const { return kind_; }
    std::string name() const;

    double density(double x) const;
    double derivative(double x) const;
    /// h(x) = -g'(x)/g(x). For KDE fits, extended linearly outside the
    /// region where g >= 1e-12.
    double score(double x) const;
    double score_derivative(double x) const;
    /// False where a KDE score is being extrapolated.
    bool reliable(double x) const;

    double fisher() const { return fisher_; }
    double w3() const { return w3_; }
    double w4() const { return w4_; }

    /// Truncation radius used for quadrature over the real line.
    double radius() const { return radius_; }

    /// One draw of sqrt(N) X_ij.
    double sample(Rng& rng) const;

    nlohmann::json to_json() const;
    static NoiseModel from_json(const nlohmann::json& j);

private:
    struct KdeState;
    friend NoiseModel gaussian_noise();
    friend NoiseModel bimodal_noise();
    friend NoiseModel student_t_noise(double nu);
    friend NoiseModel kde_from_grid(KdeGrid grid);
    friend double fisher_information(const NoiseModel& model);
    friend TransformMoments transform_moments(const NoiseModel& model,
                                              const std::function<double(double)>& f,
                                              const std::function<double(double)>& f_prime);

    explicit NoiseModel(Kind kind) : kind_(kind) {}
    void finalize();

    Kind kind_;
    double nu_ = 0.0;      // Student-t degrees of freedom
    double t_scale_ = 1.0; // Student-t scale giving unit variance
    double t_norm_ = 0.0;
    std::shared_ptr<const KdeState> kde_;
    double radius_ = 40.0;
    double fisher_ = 1.0;
    double w3_ = 0.0;
    double w4_ = 3.0;
};


NoiseModel gaussian_noise();

/// g(x) = (e^{-2(x - sqrt3/2)^2} + e^{-2(x + sqrt3/2)^2}) / sqrt(2 pi), the
/// law of N/2 + (sqrt3/2) R with R Rademacher.
NoiseModel bimodal_noise();

/// Student-t with `nu` > 4 degrees of freedom, rescaled to unit variance.
NoiseModel student_t_noise(double nu);

/// Looks up a built-in model by name ("gaussian", "bimodal").
NoiseModel builtin_noise(const std::string& name);

/// F_g = int g'^2 / g by adaptive quadrature on [-R, R], R the smallest
/// radius with g(R) < 1e-12 (capped at 40).
double fisher_information(const NoiseModel& model);

TransformMoments transform_moments(const NoiseModel& model,
                                   const std::function<double(double)>& f,
                                   const std::function<double(double)>& f_prime);

/// Gaussian KDE of a noise density from samples of sqrt(N) Y_ij.
///
/// The estimate is symmetrized (samples s and -s are both used) and
/// rescaled to unit variance. Default bandwidth n^{-1/5}. Requires at least
/// 1000 samples.
NoiseModel kde_fit(std::span<const double> samples, std::optional<double> bandwidth = {});

/// Rebuilds a KDE model from a stored grid.
NoiseModel kde_from_grid(KdeGrid grid);

/// (1/MN) sum (sqrt(N) Y_ij)^4.
double estimate_w4(const Matrix& y);

}  // namespace spiked
