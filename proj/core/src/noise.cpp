#include "spiked/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/random/chi_squared_distribution.hpp>

#include "kde_state.hpp"
#include "spiked/errors.hpp"
#include "spiked/quadrature.hpp"

namespace spiked {

namespace {

constexpr double kTailDensity = 1e-12;
constexpr double kMaxRadius = 40.0;

// sqrt(3)/2: offset of the bimodal components.
constexpr double kBimodalShift = 0.8660254037844386;

double gaussian_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double bimodal_pdf(double x) {
    const double a = x - kBimodalShift;
    const double b = x + kBimodalShift;
    return (std::exp(-2.0 * a * a) + std::exp(-2.0 * b * b)) / std::sqrt(2.0 * std::numbers::pi);
}

// -g'/g = 4x - 2 sqrt(3) tanh(2 sqrt(3) x)
double bimodal_score(double x) {
    const double k = 4.0 * kBimodalShift;
    return 4.0 * x - k * std::tanh(k * x);
}

double bimodal_score_derivative(double x) {
    const double k = 4.0 * kBimodalShift;
    const double sech = 1.0 / std::cosh(k * x);
    return 4.0 - k * k * sech * sech;
}

double tail_radius(const std::function<double(double)>& g) {
    for (double r = 0.5; r < kMaxRadius; r += 0.25) {
        if (g(r) < kTailDensity) return r;
    }
    return kMaxRadius;
}

double moment(const NoiseModel& model, int k) {
    const double r = model.radius();
    return quad::integrate([&](double x) { return std::pow(x, k) * model.density(x); }, -r, r,
                           1e-9);
}

}  // namespace

std::string NoiseModel::name() const {
    switch (kind_) {
        case Kind::Gaussian: return "gaussian";
        case Kind::Bimodal: return "bimodal";
        case Kind::StudentT: return "student_t";
        case Kind::Kde: return "kde";
    }
    return "unknown";
}

double NoiseModel::density(double x) const {
    switch (kind_) {
        case Kind::Gaussian: return gaussian_pdf(x);
        case Kind::Bimodal: return bimodal_pdf(x);
        case Kind::StudentT: {
            const double z = x / t_scale_;
            return t_norm_ * std::pow(1.0 + z * z / nu_, -0.5 * (nu_ + 1.0));
        }
        case Kind::Kde: return kde_->density(x);
    }
    return 0.0;
}

double NoiseModel::derivative(double x) const {
    if (kind_ == Kind::Kde) return kde_->derivative(x);
    return -score(x) * density(x);
}

double NoiseModel::score(double x) const {
    switch (kind_) {
        case Kind::Gaussian: return x;
        case Kind::Bimodal: return bimodal_score(x);
        case Kind::StudentT: {
            const double s2 = t_scale_ * t_scale_;
            return (nu_ + 1.0) * x / (nu_ * s2 + x * x);
        }
        case Kind::Kde: return kde_->score(x);
    }
    return 0.0;
}

double NoiseModel::score_derivative(double x) const {
    switch (kind_) {
        case Kind::Gaussian: return 1.0;
        case Kind::Bimodal: return bimodal_score_derivative(x);
        case Kind::StudentT: {
            const double c = nu_ * t_scale_ * t_scale_;
            const double q = c + x * x;
            return (nu_ + 1.0) * (c - x * x) / (q * q);
        }
        case Kind::Kde: return kde_->score_derivative(x);
    }
    return 0.0;
}

bool NoiseModel::reliable(double x) const {
    return kind_ != Kind::Kde || std::abs(x) <= kde_->reliable_radius;
}

double NoiseModel::sample(Rng& rng) const {
    switch (kind_) {
        case Kind::Gaussian: return rng.normal();
        case Kind::Bimodal: {
            const double z = rng.normal();
            return 0.5 * z + kBimodalShift * rng.sign();
        }
        case Kind::StudentT: {
            boost::random::chi_squared_distribution<double> chi2(nu_);
            const double z = rng.normal();
            return t_scale_ * z / std::sqrt(chi2(rng) / nu_);
        }
        case Kind::Kde: return kde_->sample(rng);
    }
    return 0.0;
}

void NoiseModel::finalize() {
    if (kind_ == Kind::Kde) {
        radius_ = kde_->reliable_radius;
        fisher_ = kde_->fisher();
        w3_ = kde_->moment(3);
        w4_ = kde_->moment(4);
        return;
    }
    radius_ = tail_radius([this](double x) { return density(x); });
    fisher_ = fisher_information(*this);
    if (kind_ == Kind::StudentT) {
        // Polynomial tails make truncated moment quadrature too coarse.
        w3_ = 0.0;
        w4_ = 3.0 * (nu_ - 2.0) / (nu_ - 4.0);
        return;
    }
    w3_ = moment(*this, 3);
    w4_ = moment(*this, 4);
}

nlohmann::json NoiseModel::to_json() const {
    nlohmann::json j;
    j["kind"] = name();
    if (kind_ == Kind::StudentT) {
        j["params"] = {{"nu", nu_}};
    } else if (kind_ == Kind::Kde) {
        const KdeGrid& g = kde_->grid;
        j["bandwidth"] = g.bandwidth;
        j["sample_count"] = g.sample_count;
        j["grid"] = {{"x0", g.x0},
                     {"step", g.step},
                     {"density", g.density},
                     {"derivative", g.derivative},
                     {"second_derivative", g.second_derivative}};
    }
    j["fisher"] = fisher_;
    j["w4"] = w4_;
    return j;
}

NoiseModel NoiseModel::from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind")) {
        throw ValidationError("noise model document must be an object with a \"kind\" field");
    }
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gaussian") return gaussian_noise();
    if (kind == "bimodal") return bimodal_noise();
    if (kind == "student_t") {
        double nu = 5.0;
        if (j.contains("params") && j["params"].contains("nu")) nu = j["params"]["nu"].get<double>();
        return student_t_noise(nu);
    }
    if (kind == "kde") {
        if (!j.contains("grid")) throw ValidationError("kde noise model requires a \"grid\" field");
        const auto& g = j.at("grid");
        KdeGrid grid;
        grid.x0 = g.at("x0").get<double>();
        grid.step = g.at("step").get<double>();
        grid.density = g.at("density").get<std::vector<double>>();
        grid.derivative = g.at("derivative").get<std::vector<double>>();
        grid.second_derivative = g.at("second_derivative").get<std::vector<double>>();
        grid.bandwidth = j.value("bandwidth", 0.0);
        grid.sample_count = j.value("sample_count", std::size_t{0});
        return kde_from_grid(std::move(grid));
    }
    throw ValidationError("unknown noise model kind \"" + kind + "\"");
}

NoiseModel gaussian_noise() {
    static const NoiseModel cached = [] {
        NoiseModel m(NoiseModel::Kind::Gaussian);
        m.finalize();
        return m;
    }();
    return cached;
}

NoiseModel bimodal_noise() {
    static const NoiseModel cached = [] {
        NoiseModel m(NoiseModel::Kind::Bimodal);
        m.finalize();
        return m;
    }();
    return cached;
}

NoiseModel student_t_noise(double nu) {
    if (!(nu > 4.0)) {
        throw ValidationError("student_t noise needs nu > 4 for a finite fourth moment");
    }
    NoiseModel m(NoiseModel::Kind::StudentT);
    m.nu_ = nu;
    m.t_scale_ = std::sqrt((nu - 2.0) / nu);
    m.t_norm_ = std::exp(std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu)) /
                (std::sqrt(nu * std::numbers::pi) * m.t_scale_);
    m.finalize();
    return m;
}

NoiseModel builtin_noise(const std::string& name) {
    if (name == "gaussian") return gaussian_noise();
    if (name == "bimodal") return bimodal_noise();
    throw ValidationError("unknown built-in noise \"" + name + "\" (expected gaussian or bimodal)");
}

double fisher_information(const NoiseModel& model) {
    if (model.kind() == NoiseModel::Kind::Kde) return model.kde_->fisher();
    const double r = model.radius();
    auto integrand = [&](double x) {
        const double g = model.density(x);
        if (!(g > 0.0)) {
            throw DomainError("fisher information: density not positive at x = " +
                              std::to_string(x));
        }
        const double gp = model.derivative(x);
        return gp * gp / g;
    };
    return quad::integrate(integrand, -r, r, 1e-8);
}

TransformMoments transform_moments(const NoiseModel& model, const std::function<double(double)>& f,
                                   const std::function<double(double)>& f_prime) {
    if (model.kind() == NoiseModel::Kind::Kde) {
        const auto& k = *model.kde_;
        return TransformMoments{k.expect(f_prime), k.expect([&](double x) {
                                    const double y = f(x);
                                    return y * y;
                                }),
                                k.expect([&](double x) { return x * f(x); })};
    }
    const double r = model.radius();
    auto expect = [&](auto&& fn) {
        return quad::integrate([&](double x) { return fn(x) * model.density(x); }, -r, r, 1e-9);
    };
    TransformMoments tm{};
    tm.m = expect(f_prime);
    tm.v = expect([&](double x) {
        const double y = f(x);
        return y * y;
    });
    tm.e = expect([&](double x) { return x * f(x); });
    return tm;
}

NoiseModel kde_from_grid(KdeGrid grid) {
    NoiseModel m(NoiseModel::Kind::Kde);
    m.kde_ = std::make_shared<const NoiseModel::KdeState>(std::move(grid));
    m.finalize();
    return m;
}

double estimate_w4(const Matrix& y) {
    if (y.size() == 0) throw ValidationError("estimate_w4: empty matrix");
    const double n = static_cast<double>(y.cols());
    return n * n * y.array().square().square().mean();
}

}  // namespace spiked
