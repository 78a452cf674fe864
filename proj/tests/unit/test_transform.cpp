#include <gtest/gtest.h>

#include <cmath>

#include "spiked/errors.hpp"
#include "spiked/models.hpp"
#include "spiked/quadrature.hpp"
#include "spiked/transform.hpp"

using namespace spiked;

namespace {

ModelSpec spec_of(ModelKind kind, Eigen::Index m, Eigen::Index n, double snr, NoiseModel noise) {
    ModelSpec s;
    s.kind = kind;
    s.rows = m;
    s.cols = n;
    s.snr = snr;
    s.noise = std::move(noise);
    return s;
}

const double kReportedFisher = 2.50810;

}  // namespace

TEST(EntrywiseTransform, GaussianScoreIsIdentity) {
    Rng rng(1);
    const Matrix y = sample_noise(gaussian_noise(), 20, 40, rng);
    const TransformResult t = entrywise_transform(y, TransformSpec{0.0, gaussian_noise()});
    EXPECT_LT((t.values - y).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(t.clamped, 0u);
    EXPECT_FALSE(t.warning.has_value());
}

TEST(EntrywiseTransform, WhitensBimodalNoise) {
    Rng rng(2);
    const Matrix y = sample_noise(bimodal_noise(), 1024, 2048, rng);
    const TransformResult t = entrywise_transform(y, TransformSpec{0.0, bimodal_noise()});
    const double nvar = 2048.0 * t.values.squaredNorm() / static_cast<double>(t.values.size());
    EXPECT_NEAR(nvar, 1.0, 0.02);
}

TEST(EntrywiseTransform, LargeAlphaApproachesIdentity) {
    Rng rng(3);
    const Matrix y = sample_noise(bimodal_noise(), 10, 20, rng);
    double prev = 1e9;
    for (double alpha : {1e1, 1e3, 1e5}) {
        const double err = (entrywise_transform(y, TransformSpec{alpha, bimodal_noise()}).values - y).norm();
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 1e-3);
}

TEST(EntrywiseTransform, RejectsNonPositiveNormalization) {
    // alpha^2 + 2 alpha + F = (alpha + 1)^2 + F - 1 vanishes only for F = 1, alpha = -1.
    EXPECT_THROW((TransformSpec{-1.0, gaussian_noise()}.normalization()), DomainError);
}

TEST(Transform, VarianceIdentity) {
    for (const NoiseModel& g : {gaussian_noise(), bimodal_noise(), student_t_noise(7.0)}) {
        const double f = g.fisher();
        for (double alpha : {0.0, 0.5, 1.0, std::sqrt(f), alpha_star(0.2239, f)}) {
            const TransformSpec spec{alpha, g};
            const TransformMoments tm = h_alpha_moments(spec);
            EXPECT_NEAR(tm.v, spec.normalization(), 1e-5 * spec.normalization()) << g.name() << " alpha=" << alpha;
        }
    }
}

TEST(Transform, OddForSymmetricNoise) {
    const TransformSpec spec{0.7, bimodal_noise()};
    for (double x = 0.0; x < 6.0; x += 0.13) EXPECT_NEAR(spec.apply(-x), -spec.apply(x), 1e-12);
}

TEST(EffectiveSnr, AdditiveExamples) {
    EXPECT_DOUBLE_EQ(effective_snr_additive(0.7, TransformMoments{1.0, 1.0, 1.0}), 0.7);
    const TransformMoments tm = h_alpha_moments(TransformSpec{0.0, bimodal_noise()});
    EXPECT_NEAR(effective_snr_additive(0.4945, tm), 0.4945 * bimodal_noise().fisher(), 1e-7);
    EXPECT_THROW(effective_snr_additive(1.0, TransformMoments{1.0, 0.0, 1.0}), DomainError);
}

TEST(EffectiveSnr, AdditiveScoreIsOptimalInFamily) {
    const NoiseModel g = bimodal_noise();
    const auto ratio = [&](double alpha) {
        const TransformMoments tm = h_alpha_moments(TransformSpec{alpha, g});
        return tm.m * tm.m / tm.v;
    };
    const double best = ratio(0.0);
    for (double alpha = -0.5; alpha <= 4.0; alpha += 0.1) EXPECT_LE(ratio(alpha), best + 1e-9);
}

TEST(EffectiveSnr, MultiplicativeExamples) {
    const double gamma = 0.3;
    const double raw = 2 * gamma + gamma * gamma;
    EXPECT_NEAR(effective_snr_multiplicative(gamma, TransformMoments{1.0, 1.0, 1.0}), raw, 1e-15);
    for (double alpha : {0.0, 0.5, 2.0}) {
        const TransformMoments tm = h_alpha_moments(TransformSpec{alpha, gaussian_noise()});
        EXPECT_NEAR(effective_snr_multiplicative(gamma, tm), raw, 1e-8);
    }
    const NoiseModel g = bimodal_noise();
    const double gam = 0.222494;
    const TransformMoments tm = h_alpha_moments(TransformSpec{alpha_star(gam, g.fisher()), g});
    EXPECT_NEAR(effective_snr_multiplicative(gam, tm), 0.67907, 1e-4);
    EXPECT_NEAR(effective_snr_multiplicative(gam, tm), lambda_g(gam, g.fisher()), 1e-7);
}

TEST(AlphaStar, Examples) {
    EXPECT_NEAR(alpha_star(0.0, kReportedFisher), std::sqrt(kReportedFisher), 1e-14);
    for (double gamma : {0.1, 0.5, 2.0}) EXPECT_NEAR(alpha_star(gamma, 1.0), 1.0 / (1.0 + gamma), 1e-14);
    EXPECT_NEAR(alpha_star(0.222494, kReportedFisher), 1.22221, 1e-4);
    EXPECT_THROW(alpha_star(-0.1, 2.0), DomainError);
    EXPECT_THROW(alpha_star(0.1, 0.5), DomainError);
}

TEST(AlphaStar, IsStationary) {
    for (double f : {1.0, 1.5, kReportedFisher}) {
        for (double gamma : {0.1, 0.2239, 0.5, 1.0}) {
            const double a = alpha_star(gamma, f);
            const double h = 1e-5;
            const double slope = (lambda_h_alpha(gamma, a + h, f) - lambda_h_alpha(gamma, a - h, f)) / (2 * h);
            EXPECT_LT(std::abs(slope), 1e-6) << "gamma=" << gamma << " F=" << f;
        }
    }
}

TEST(LambdaG, Examples) {
    for (double gamma : {0.0, 0.3, 1.0}) EXPECT_NEAR(lambda_g(gamma, 1.0), 2 * gamma + gamma * gamma, 1e-14);
    EXPECT_EQ(lambda_g(0.0, 2.0), 0.0);
    EXPECT_NEAR(lambda_g(0.222494, kReportedFisher), 0.67907, 1e-4);
    for (double gamma : {0.05, 0.3, 1.0, 3.0}) {
        EXPECT_GT(lambda_g(gamma, kReportedFisher), 2 * gamma + gamma * gamma);
        EXPECT_GE(lambda_h_alpha(gamma, std::sqrt(kReportedFisher), kReportedFisher), 2 * gamma + gamma * gamma);
    }
}

TEST(LambdaHAlpha, ClosedForms) {
    for (double alpha : {0.0, 0.5, 3.0}) {
        EXPECT_NEAR(lambda_h_alpha(0.4, alpha, 1.0), 0.8 + 0.16, 1e-14);
    }
    for (double f : {1.0, 1.5, kReportedFisher}) {
        for (double gamma : {0.1, 0.2239, 0.5, 1.0}) {
            EXPECT_NEAR(lambda_h_alpha(gamma, alpha_star(gamma, f), f), lambda_g(gamma, f), 1e-10);
        }
    }
    const double g = 0.2, sf = std::sqrt(kReportedFisher);
    EXPECT_NEAR(lambda_h_alpha(g, sf, kReportedFisher), g * (1 + sf) + 0.5 * g * g * (kReportedFisher + sf), 1e-12);
}

TEST(LambdaHAlpha, AlphaStarIsGridOptimal) {
    for (double f : {1.0, 1.5, kReportedFisher}) {
        for (double gamma : {0.1, 0.2239, 0.5, 1.0}) {
            const double best = lambda_g(gamma, f);
            const double hi = 3.0 * std::sqrt(f);
            for (int k = 0; k < 200; ++k) {
                const double alpha = -0.5 + (hi + 0.5) * k / 199.0;
                EXPECT_LE(lambda_h_alpha(gamma, alpha, f), best + 1e-12);
            }
        }
    }
}

TEST(LambdaHAlpha, MatchesQuadratureMoments) {
    const NoiseModel g = bimodal_noise();
    for (double alpha : {0.0, 0.8, 2.0}) {
        const TransformMoments tm = h_alpha_moments(TransformSpec{alpha, g});
        EXPECT_NEAR(effective_snr_multiplicative(0.35, tm), lambda_h_alpha(0.35, alpha, g.fisher()), 1e-7);
    }
}

TEST(Defaults, AlphaAndMargin) {
    EXPECT_EQ(default_alpha(ModelKind::Additive, 2.5), 0.0);
    EXPECT_DOUBLE_EQ(default_alpha(ModelKind::Multiplicative, 2.25), 1.5);
    EXPECT_NEAR(default_margin(512), 3.0 / std::pow(512.0, 2.0 / 3.0), 1e-15);
}

TEST(PcaDetect, ZeroMatrixIsNotDetected) {
    const PcaVerdict v = pca_detect(Matrix::Zero(8, 16), Ratio(0.5), 0.0);
    EXPECT_FALSE(v.detected);
    EXPECT_EQ(v.largest_eigenvalue, 0.0);
    EXPECT_NEAR(v.threshold, 2.914213562373095, 1e-12);
    EXPECT_THROW(pca_detect(Matrix::Zero(8, 16), Ratio(0.5), -1.0), ValidationError);
}

TEST(PcaDetect, SupercriticalGaussianSpikeIsDetected) {
    const ModelSpec s = spec_of(ModelKind::Additive, 512, 1024, 1.5, gaussian_noise());
    int hits = 0;
    for (int k = 0; k < 100; ++k) {
        Rng rng = Rng::child(5, static_cast<std::uint64_t>(k));
        const PcaVerdict v = pca_detect(generate(s, rng).values, s.ratio(), default_margin(512), 1.5);
        hits += v.detected ? 1 : 0;
        EXPECT_EQ(v.detected, v.largest_eigenvalue > v.threshold);
        EXPECT_NEAR(*v.predicted_outlier, 2.5 * (1 + 0.5 / 1.5), 1e-12);
    }
    EXPECT_GE(hits, 95);
}

TEST(TransformedPcaDetect, GaussianMatchesPlainPca) {
    const ModelSpec s = spec_of(ModelKind::Additive, 64, 128, 0.5, gaussian_noise());
    Rng rng(6);
    const Matrix y = generate(s, rng).values;
    const PcaVerdict a = pca_detect(y, s.ratio(), 0.05);
    const PcaVerdict b = transformed_pca_detect(y, TransformSpec{0.0, gaussian_noise()}, s.ratio(), 0.05);
    EXPECT_EQ(a.detected, b.detected);
    EXPECT_NEAR(a.largest_eigenvalue, b.largest_eigenvalue, 1e-9);
}

TEST(TransformedPcaDetect, PredictsOutlierAndIgnoresNull) {
    const NoiseModel g = bimodal_noise();
    const ModelSpec null_spec = spec_of(ModelKind::Null, 256, 512, 0.0, g);
    int hits = 0;
    for (int k = 0; k < 20; ++k) {
        Rng rng = Rng::child(7, static_cast<std::uint64_t>(k));
        hits += transformed_pca_detect(generate(null_spec, rng).values, TransformSpec{0.0, g}, Ratio(0.5),
                                       default_margin(256))
                    .detected;
    }
    EXPECT_LE(hits, 1);

    const ModelSpec s = spec_of(ModelKind::Additive, 256, 512, 0.4945, g);
    Rng rng(8);
    const PcaVerdict v = transformed_pca_detect(generate(s, rng).values, TransformSpec{0.0, g}, s.ratio(),
                                                default_margin(256), SnrContext{ModelKind::Additive, 0.4945});
    ASSERT_TRUE(v.predicted_outlier.has_value());
    EXPECT_NEAR(*v.effective_snr, 0.4945 * g.fisher(), 1e-7);
    EXPECT_NEAR(*v.predicted_outlier, 3.14345, 1e-4);
}

TEST(SingularPair, RecoversExactRankOne) {
    Rng rng(9);
    const Vector u = sample_prior(prior::Spherical{}, 30, rng);
    const Vector v = sample_prior(prior::Spherical{}, 50, rng);
    const SingularTriple t = top_singular_pair(3.0 * u * v.transpose());
    EXPECT_NEAR(t.sigma, 3.0, 1e-12);
    EXPECT_NEAR(std::pow(t.left.dot(u), 2), 1.0, 1e-10);
    EXPECT_NEAR(std::pow(t.right.dot(v), 2), 1.0, 1e-10);
    Eigen::Index idx = 0;
    t.left.cwiseAbs().maxCoeff(&idx);
    EXPECT_GT(t.left(idx), 0.0);
    EXPECT_NEAR(t.left.norm(), 1.0, 1e-12);
}

TEST(SingularPair, OverlapIsStableAcrossSizes) {
    const auto mean_overlap = [](Eigen::Index m) {
        const ModelSpec s = spec_of(ModelKind::Additive, m, 2 * m, 2.0, gaussian_noise());
        double sum = 0.0;
        const int trials = 30;
        for (int k = 0; k < trials; ++k) {
            Rng rng = Rng::child(10 + static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(k));
            const DataMatrix y = generate(s, rng);
            sum += std::pow(top_singular_pair(y.values).left.dot(y.planted_u), 2);
        }
        return sum / trials;
    };
    const double a = mean_overlap(128);
    const double b = mean_overlap(256);
    EXPECT_NEAR(a, b, 0.05);
    EXPECT_NEAR(b, overlap_limit(2.0, Ratio(0.5)), 0.05);
}

TEST(OverlapLimit, BelowThresholdIsZero) {
    EXPECT_EQ(overlap_limit(0.5, Ratio(0.5)), 0.0);
    EXPECT_NEAR(overlap_limit(2.0, Ratio(0.5)), (1 - 0.5 / 4) / (1 + 0.25), 1e-15);
}
