#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "spiked/errors.hpp"
#include "spiked/models.hpp"

using namespace spiked;

namespace {

ModelSpec spec_of(ModelKind kind, Eigen::Index m, Eigen::Index n, double snr,
                  NoiseModel noise = gaussian_noise()) {
    ModelSpec s;
    s.kind = kind;
    s.rows = m;
    s.cols = n;
    s.snr = snr;
    s.noise = std::move(noise);
    return s;
}

double mean_top_eigenvalue(const ModelSpec& spec, int seeds) {
    double sum = 0.0;
    for (int s = 0; s < seeds; ++s) {
        Rng rng = Rng::child(99, static_cast<std::uint64_t>(s));
        sum += gram_eigenvalues(generate(spec, rng).values).front();
    }
    return sum / seeds;
}

}  // namespace

TEST(Prior, SphericalHasUnitNorm) {
    Rng rng(1);
    EXPECT_NEAR(sample_prior(prior::Spherical{}, 100, rng).norm(), 1.0, 1e-14);
}

TEST(Prior, RademacherEntries) {
    Rng rng(2);
    const Vector u = sample_prior(prior::IidRademacher{}, 4, rng);
    for (Eigen::Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(std::abs(u(i)), 0.5);
    EXPECT_DOUBLE_EQ(u.norm(), 1.0);
}

TEST(Prior, SphericalIsIsotropic) {
    const int dim = 10000, draws = 1000;
    Rng rng(3);
    double diag = 0.0, off = 0.0;
    for (int k = 0; k < draws; ++k) {
        const Vector u = sample_prior(prior::Spherical{}, dim, rng);
        diag += u(0) * u(0);
        off += u(0) * u(1);
    }
    diag /= draws;
    off /= draws;
    // u_0^2 has mean 1/dim and sd about sqrt(2)/dim per draw.
    const double band = 5.0 * std::sqrt(2.0) / dim / std::sqrt(draws);
    EXPECT_NEAR(diag, 1.0 / dim, band);
    EXPECT_NEAR(off, 0.0, band);
}

TEST(Prior, CustomAndFixed) {
    Rng rng(4);
    prior::IidCustom c{[](Rng& r) { return r.sign() * 2.0; }, "pm2"};
    const Vector u = sample_prior(c, 16, rng);
    for (Eigen::Index i = 0; i < 16; ++i) EXPECT_DOUBLE_EQ(std::abs(u(i)), 0.5);
    Vector raw(3);
    raw << 3.0, 0.0, 4.0;
    const Vector f = sample_prior(prior::Fixed{raw}, 3, rng);
    EXPECT_DOUBLE_EQ(f(0), 0.6);
    EXPECT_DOUBLE_EQ(f(2), 0.8);
    EXPECT_THROW(sample_prior(prior::Fixed{raw}, 4, rng), ValidationError);
    EXPECT_THROW(sample_prior(prior::Spherical{}, 0, rng), ValidationError);
}

TEST(Noise, VarianceNormalization) {
    Rng rng(5);
    const Matrix x = sample_noise(gaussian_noise(), 256, 512, rng);
    EXPECT_NEAR(512.0 * x.squaredNorm() / x.size(), 1.0, 0.02);
}

TEST(Noise, BimodalFourthMoment) {
    Rng rng(6);
    const Matrix x = sample_noise(bimodal_noise(), 256, 512, rng);
    EXPECT_NEAR(estimate_w4(x), 1.875, 0.05);
}

TEST(Noise, SeedDeterminism) {
    Rng a(77), b(77);
    const Matrix x = sample_noise(bimodal_noise(), 20, 30, a);
    const Matrix y = sample_noise(bimodal_noise(), 20, 30, b);
    EXPECT_EQ(0, std::memcmp(x.data(), y.data(), sizeof(double) * x.size()));
}

TEST(Generate, ZeroSnrReproducesNoiseBitExact) {
    for (ModelKind kind : {ModelKind::Additive, ModelKind::Multiplicative, ModelKind::Null}) {
        const ModelSpec s = spec_of(kind, 12, 30, 0.0, bimodal_noise());
        Rng a(8), b(8);
        const Matrix y = generate(s, a).values;
        const Matrix x = sample_noise(s.noise, 12, 30, b);
        EXPECT_EQ(0, std::memcmp(x.data(), y.data(), sizeof(double) * x.size()));
    }
}

TEST(Generate, AdditiveMeanIsRankOne) {
    const ModelSpec s = spec_of(ModelKind::Additive, 10, 20, 2.0);
    Rng a(9), b(9);
    const DataMatrix y = generate_additive(s, a);
    const Matrix x = sample_noise(s.noise, 10, 20, b);
    const Matrix mean = y.values - x;
    ASSERT_TRUE(y.planted_v.has_value());
    EXPECT_LT((mean - std::sqrt(2.0) * y.planted_u * y.planted_v->transpose()).norm(), 1e-12);
    EXPECT_NEAR(y.planted_u.norm(), 1.0, 1e-8);
    const auto sv = Eigen::JacobiSVD<Matrix>(mean).singularValues();
    EXPECT_LT(sv(1), 1e-10 * sv(0));
}

TEST(Generate, MultiplicativeSquareRootIsExact) {
    Rng rng(10);
    const Vector u = sample_prior(prior::Spherical{}, 30, rng);
    for (double lambda : {0.3, 1.0, 3.0}) {
        const double g = gamma_of_lambda(lambda);
        const Matrix a = Matrix::Identity(30, 30) + g * u * u.transpose();
        const Matrix want = Matrix::Identity(30, 30) + lambda * u * u.transpose();
        EXPECT_LT((a * a - want).norm(), 1e-12);
    }
}

TEST(Generate, MultiplicativeColumnCovariance) {
    // Columns of sqrt(N) Y have covariance I + lambda u u^T.
    ModelSpec s = spec_of(ModelKind::Multiplicative, 20, 10000, 1.5);
    Rng rng(11);
    const DataMatrix y = generate_multiplicative(s, rng);
    const Matrix cov = y.values * y.values.transpose();
    const Matrix want = Matrix::Identity(20, 20) + 1.5 * y.planted_u * y.planted_u.transpose();
    const double err = Eigen::SelfAdjointEigenSolver<Matrix>(cov - want).eigenvalues().cwiseAbs().maxCoeff();
    EXPECT_LT(err, 0.3);  // fluctuation ~ (2 sqrt(M/N) + M/N)(1 + lambda)
    EXPECT_FALSE(y.planted_v.has_value());
}

TEST(Generate, ValidatesSpec) {
    Rng rng(12);
    EXPECT_THROW(generate(spec_of(ModelKind::Additive, 20, 10, 1.0), rng), DomainError);
    EXPECT_THROW(generate(spec_of(ModelKind::Additive, 5, 10, -1.0), rng), DomainError);
    EXPECT_THROW(generate_additive(spec_of(ModelKind::Multiplicative, 5, 10, 1.0), rng), ValidationError);
}

TEST(Gamma, Values) {
    EXPECT_EQ(gamma_of_lambda(0.0), 0.0);
    EXPECT_DOUBLE_EQ(gamma_of_lambda(3.0), 1.0);
    EXPECT_NEAR(gamma_of_lambda(0.4945), 0.2224974, 1e-7);
    for (double l : {0.1, 0.4945, 2.0, 10.0}) {
        const double g = gamma_of_lambda(l);
        EXPECT_NEAR(2 * g + g * g, l, 1e-12);
    }
    EXPECT_THROW(gamma_of_lambda(-0.1), DomainError);
}

TEST(Generate, BbpOutlierBothModels) {
    for (ModelKind kind : {ModelKind::Additive, ModelKind::Multiplicative}) {
        const double mean = mean_top_eigenvalue(spec_of(kind, 512, 1024, 0.9), 40);
        EXPECT_NEAR(mean, 2.955556, 0.06) << to_string(kind);
    }
}

TEST(Spike, LoadsAndNormalizesFile) {
    const auto path = std::filesystem::temp_directory_path() / "spiked_spike_test.txt";
    {
        std::ofstream f(path);
        f << "3\n0\n4\n";
    }
    const Vector u = load_spike(path);
    EXPECT_EQ(u.size(), 3);
    EXPECT_DOUBLE_EQ(u(0), 0.6);
    std::filesystem::remove(path);
    EXPECT_THROW(load_spike("/nonexistent/spike.txt"), ValidationError);
}

TEST(ModelJson, RoundTrip) {
    const nlohmann::json j = {{"kind", "multiplicative"}, {"M", 64}, {"N", 128}, {"snr", 0.7},
                              {"prior_u", "rademacher"},  {"noise", "bimodal"}, {"seed", 5}};
    const ModelSpec s = model_spec_from_json(j);
    EXPECT_EQ(s.kind, ModelKind::Multiplicative);
    EXPECT_EQ(s.rows, 64);
    EXPECT_EQ(s.noise.kind(), NoiseModel::Kind::Bimodal);
    EXPECT_TRUE(std::holds_alternative<prior::IidRademacher>(s.prior_u));
    const ModelSpec back = model_spec_from_json(to_json(s));
    EXPECT_EQ(back.cols, 128);
    EXPECT_DOUBLE_EQ(back.snr, 0.7);
    EXPECT_EQ(back.seed, 5u);
    EXPECT_THROW(model_spec_from_json({{"kind", "additive"}, {"M", 10}}), ValidationError);
    EXPECT_THROW(model_spec_from_json({{"kind", "weird"}, {"M", 1}, {"N", 2}}), ValidationError);
}
