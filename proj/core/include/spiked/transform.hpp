#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "spiked/models.hpp"
#include "spiked/noise.hpp"
#include "spiked/spectral.hpp"

namespace spiked {

/// Member of the transform family h_alpha(x) = h(x) + alpha x, with h the
/// score of `noise`.
struct TransformSpec {
    double alpha = 0.0;
    NoiseModel noise = gaussian_noise();

    /// alpha^2 + 2 alpha + F_g = E[h_alpha(xi)^2]. Throws DomainError if not positive.
    double normalization() const;
    double apply(double x) const { return noise.score(x) + alpha * x; }
    double derivative(double x) const { return noise.score_derivative(x) + alpha; }
};

/// Transformed matrix plus a record of score extrapolation.
struct TransformResult {
    Matrix values;
    std::size_t clamped = 0;
    std::optional<std::string> warning;
};

/// Y~_ij = h_alpha(sqrt(N) Y_ij) / sqrt((alpha^2 + 2 alpha + F_g) N).
TransformResult entrywise_transform(const Matrix& y, const TransformSpec& spec);

/// Quadrature moments (m, v, e) of h_alpha under the spec's noise.
TransformMoments h_alpha_moments(const TransformSpec& spec);

/// lambda m_f^2 / v_f.
double effective_snr_additive(double lambda, const TransformMoments& tm);

/// (2 gamma m_f e_f + gamma^2 m_f^2) / v_f.
double effective_snr_multiplicative(double gamma, const TransformMoments& tm);

/// Optimal alpha for the multiplicative model:
/// (-gamma F + sqrt(4F + 4 gamma F + gamma^2 F^2)) / (2 (1 + gamma)).
double alpha_star(double gamma, double fisher);

/// Effective SNR at alpha_star: gamma + gamma^2 F / 2 + gamma sqrt(4F + 4 gamma F + gamma^2 F^2) / 2.
double lambda_g(double gamma, double fisher);

/// Closed-form effective SNR of h_alpha for the multiplicative model.
double lambda_h_alpha(double gamma, double alpha, double fisher);

/// Default alpha: 0 (pure score) for the additive model, sqrt(F_g) otherwise.
double default_alpha(ModelKind kind, double fisher);

/// 3 M^{-2/3}: edge-fluctuation allowance above d+.
double default_margin(Eigen::Index rows);

struct PcaVerdict {
    double largest_eigenvalue = 0.0;
    double threshold = 0.0;
    bool detected = false;
    std::optional<double> predicted_outlier;
    std::optional<double> effective_snr;
};

nlohmann::json to_json(const PcaVerdict& v);

/// Declares mu_1(Y Y^T) > d+ + margin. With a known SNR the verdict also
/// carries the BBP prediction.
PcaVerdict pca_detect(const Matrix& y, Ratio d, double margin, std::optional<double> snr = {});

/// Model kind and raw SNR used to predict the transformed outlier.
struct SnrContext {
    ModelKind kind = ModelKind::Additive;
    double snr = 0.0;
};

/// Effective SNR of h_alpha: lambda m^2/v (additive) or lambda_f (multiplicative).
double transformed_effective_snr(const TransformSpec& spec, const SnrContext& ctx);

PcaVerdict transformed_pca_detect(const Matrix& y, const TransformSpec& spec, Ratio d, double margin,
                                  std::optional<SnrContext> ctx = {});

struct SingularTriple {
    double sigma = 0.0;
    Vector left;
    Vector right;
};

/// Leading singular triple via the top eigenpair of Y Y^T. The left vector's
/// largest-magnitude coordinate is made positive.
SingularTriple top_singular_pair(const Matrix& y);

/// Limit of |<u_hat, u>|^2 for the left singular vector of a rank-one
/// additive spike: (1 - d/lambda^2) / (1 + d/lambda) above sqrt(d), else 0.
double overlap_limit(double lambda, Ratio d);

}  // namespace spiked
