#include "spiked/transform.hpp"

#include <cmath>
#include <string>

#include "spiked/errors.hpp"

namespace spiked {

namespace {

// Fraction of extrapolated score evaluations above which a warning is attached.
constexpr double kClampWarnFraction = 1e-3;

double fisher_root_term(double gamma, double fisher) {
    return std::sqrt(4.0 * fisher + 4.0 * gamma * fisher + gamma * gamma * fisher * fisher);
}

void check_gamma_fisher(double gamma, double fisher) {
    if (!(gamma >= 0.0)) throw DomainError("gamma must be >= 0");
    if (!(fisher >= 1.0 - 1e-6)) throw DomainError("Fisher information must be >= 1");
}

}  // namespace

double TransformSpec::normalization() const {
    const double c = alpha * alpha + 2.0 * alpha + noise.fisher();
    if (!(c > 0.0)) {
        throw DomainError("transform normalization alpha^2 + 2 alpha + F_g is not positive (alpha = " +
                          std::to_string(alpha) + ")");
    }
    return c;
}

TransformResult entrywise_transform(const Matrix& y, const TransformSpec& spec) {
    const double n = static_cast<double>(y.cols());
    const double root_n = std::sqrt(n);
    const double scale = 1.0 / std::sqrt(spec.normalization() * n);

    TransformResult out;
    out.values.resize(y.rows(), y.cols());
    const double* src = y.data();
    double* dst = out.values.data();
    const Eigen::Index count = y.size();
    const bool check = spec.noise.kind() == NoiseModel::Kind::Kde;
    for (Eigen::Index k = 0; k < count; ++k) {
        const double x = root_n * src[k];
        if (check && !spec.noise.reliable(x)) ++out.clamped;
        dst[k] = scale * spec.apply(x);
    }
    if (count > 0 && static_cast<double>(out.clamped) > kClampWarnFraction * static_cast<double>(count)) {
        out.warning = "score extrapolated beyond the reliable density region for " +
                      std::to_string(out.clamped) + " of " + std::to_string(count) + " entries";
    }
    return out;
}

TransformMoments h_alpha_moments(const TransformSpec& spec) {
    return transform_moments(
        spec.noise, [&](double x) { return spec.apply(x); },
        [&](double x) { return spec.derivative(x); });
}

double effective_snr_additive(double lambda, const TransformMoments& tm) {
    if (!(tm.v > 0.0)) throw DomainError("transform second moment v_f must be positive");
    return lambda * tm.m * tm.m / tm.v;
}

double effective_snr_multiplicative(double gamma, const TransformMoments& tm) {
    if (!(tm.v > 0.0)) throw DomainError("transform second moment v_f must be positive");
    return (2.0 * gamma * tm.m * tm.e + gamma * gamma * tm.m * tm.m) / tm.v;
}

double alpha_star(double gamma, double fisher) {
    check_gamma_fisher(gamma, fisher);
    return (-gamma * fisher + fisher_root_term(gamma, fisher)) / (2.0 * (1.0 + gamma));
}

double lambda_g(double gamma, double fisher) {
    check_gamma_fisher(gamma, fisher);
    return gamma + 0.5 * gamma * gamma * fisher + 0.5 * gamma * fisher_root_term(gamma, fisher);
}

double lambda_h_alpha(double gamma, double alpha, double fisher) {
    const double denom = alpha * alpha + 2.0 * alpha + fisher;
    if (!(denom > 0.0)) throw DomainError("alpha^2 + 2 alpha + F_g must be positive");
    const double shifted = fisher + alpha;
    return (2.0 * gamma * (1.0 + alpha) * shifted + gamma * gamma * shifted * shifted) / denom;
}

double default_alpha(ModelKind kind, double fisher) {
    return kind == ModelKind::Multiplicative ? std::sqrt(fisher) : 0.0;
}

double default_margin(Eigen::Index rows) {
    return 3.0 * std::pow(static_cast<double>(rows), -2.0 / 3.0);
}

nlohmann::json to_json(const PcaVerdict& v) {
    nlohmann::json j{{"largest_eigenvalue", v.largest_eigenvalue},
                     {"threshold", v.threshold},
                     {"detected", v.detected}};
    j["predicted_outlier"] = v.predicted_outlier ? nlohmann::json(*v.predicted_outlier) : nlohmann::json();
    j["effective_snr"] = v.effective_snr ? nlohmann::json(*v.effective_snr) : nlohmann::json();
    return j;
}

namespace {

PcaVerdict verdict_from_top(double top, Ratio d, double margin) {
    if (!(margin >= 0.0)) throw ValidationError("detection margin must be >= 0");
    PcaVerdict v;
    v.largest_eigenvalue = top;
    v.threshold = mp_edges(d).upper + margin;
    v.detected = top > v.threshold;
    return v;
}

}  // namespace

PcaVerdict pca_detect(const Matrix& y, Ratio d, double margin, std::optional<double> snr) {
    PcaVerdict v = verdict_from_top(gram_eigenvalues(y).front(), d, margin);
    if (snr) {
        v.effective_snr = *snr;
        v.predicted_outlier = bbp_outlier(*snr, d);
    }
    return v;
}

double transformed_effective_snr(const TransformSpec& spec, const SnrContext& ctx) {
    const TransformMoments tm = h_alpha_moments(spec);
    if (ctx.kind == ModelKind::Multiplicative) {
        return effective_snr_multiplicative(gamma_of_lambda(ctx.snr), tm);
    }
    if (ctx.kind == ModelKind::Null) return 0.0;
    return effective_snr_additive(ctx.snr, tm);
}

PcaVerdict transformed_pca_detect(const Matrix& y, const TransformSpec& spec, Ratio d, double margin,
                                  std::optional<SnrContext> ctx) {
    const TransformResult t = entrywise_transform(y, spec);
    PcaVerdict v = verdict_from_top(gram_eigenvalues(t.values).front(), d, margin);
    if (ctx) {
        const double eff = transformed_effective_snr(spec, *ctx);
        v.effective_snr = eff;
        v.predicted_outlier = bbp_outlier(eff, d);
    }
    return v;
}

SingularTriple top_singular_pair(const Matrix& y) {
    Eigenpair top = gram_top_eigenpair(y);
    Eigen::Index idx = 0;
    top.vector.cwiseAbs().maxCoeff(&idx);
    if (top.vector(idx) < 0.0) top.vector = -top.vector;

    SingularTriple out;
    out.sigma = std::sqrt(std::max(top.value, 0.0));
    out.right = y.transpose() * top.vector;
    if (out.sigma > 0.0) out.right /= out.sigma;
    out.left = std::move(top.vector);
    return out;
}

double overlap_limit(double lambda, Ratio d) {
    if (!(lambda > d.sqrt())) return 0.0;
    const double dv = d.value();
    return (1.0 - dv / (lambda * lambda)) / (1.0 + dv / lambda);
}

}  // namespace spiked
