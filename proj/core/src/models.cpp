#include "spiked/models.hpp"

#include <cmath>

#include "spiked/errors.hpp"
#include "spiked/matrix_io.hpp"

namespace spiked {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

}  // namespace

void ModelSpec::validate() const {
    if (rows < 1 || cols < 1) throw ValidationError("model dimensions must be positive");
    if (rows > cols) {
        throw DomainError("model requires M <= N (got M = " + std::to_string(rows) +
                          ", N = " + std::to_string(cols) + ")");
    }
    if (!(snr >= 0.0) || !std::isfinite(snr)) throw DomainError("SNR must be finite and >= 0");
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Null: return "null";
        case ModelKind::Additive: return "additive";
        case ModelKind::Multiplicative: return "multiplicative";
    }
    return "null";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "null") return ModelKind::Null;
    if (s == "additive") return ModelKind::Additive;
    if (s == "multiplicative") return ModelKind::Multiplicative;
    throw ValidationError("unknown model kind \"" + s + "\"");
}

Vector sample_prior(const PriorKind& kind, Eigen::Index dim, Rng& rng) {
    if (dim < 1) throw ValidationError("prior dimension must be positive");
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    Vector u(dim);
    std::visit(overloaded{
                   [&](const prior::Spherical&) {
                       for (Eigen::Index i = 0; i < dim; ++i) u(i) = rng.normal();
                       u /= u.norm();
                   },
                   [&](const prior::IidRademacher&) {
                       for (Eigen::Index i = 0; i < dim; ++i) u(i) = scale * rng.sign();
                   },
                   [&](const prior::IidCustom& c) {
                       if (!c.sampler) throw ValidationError("custom prior has no sampler");
                       for (Eigen::Index i = 0; i < dim; ++i) u(i) = scale * c.sampler(rng);
                   },
                   [&](const prior::Fixed& f) {
                       if (f.values.size() != dim) {
                           throw ValidationError("fixed spike has length " +
                                                 std::to_string(f.values.size()) + ", expected " +
                                                 std::to_string(dim));
                       }
                       const double norm = f.values.norm();
                       if (!(norm > 0.0)) throw ValidationError("fixed spike is zero");
                       u = f.values / norm;
                   },
               },
               kind);
    return u;
}

Matrix sample_noise(const NoiseModel& noise, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    if (rows < 1 || cols < 1) throw ValidationError("noise dimensions must be positive");
    Matrix x(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    double* data = x.data();
    const Eigen::Index n = x.size();
    for (Eigen::Index k = 0; k < n; ++k) data[k] = scale * noise.sample(rng);
    return x;
}

double gamma_of_lambda(double lambda) {
    if (!(lambda >= 0.0)) throw DomainError("gamma_of_lambda: lambda must be >= 0");
    return std::sqrt(1.0 + lambda) - 1.0;
}

DataMatrix generate_additive(const ModelSpec& spec, Rng& rng) {
    spec.validate();
    if (spec.kind != ModelKind::Additive) throw ValidationError("generate_additive: spec is not additive");
    DataMatrix out;
    out.spec = spec;
    out.values = sample_noise(spec.noise, spec.rows, spec.cols, rng);
    out.planted_u = sample_prior(spec.prior_u, spec.rows, rng);
    Vector v = sample_prior(spec.prior_v, spec.cols, rng);
    if (spec.snr > 0.0) {
        out.values.noalias() += std::sqrt(spec.snr) * out.planted_u * v.transpose();
    }
    out.planted_v = std::move(v);
    return out;
}

DataMatrix generate_multiplicative(const ModelSpec& spec, Rng& rng) {
    spec.validate();
    if (spec.kind != ModelKind::Multiplicative) {
        throw ValidationError("generate_multiplicative: spec is not multiplicative");
    }
    DataMatrix out;
    out.spec = spec;
    out.values = sample_noise(spec.noise, spec.rows, spec.cols, rng);
    out.planted_u = sample_prior(spec.prior_u, spec.rows, rng);
    const double gamma = gamma_of_lambda(spec.snr);
    if (gamma > 0.0) {
        const Eigen::RowVectorXd projected = out.planted_u.transpose() * out.values;
        out.values.noalias() += gamma * out.planted_u * projected;
    }
    return out;
}

DataMatrix generate(const ModelSpec& spec, Rng& rng) {
    switch (spec.kind) {
        case ModelKind::Additive: return generate_additive(spec, rng);
        case ModelKind::Multiplicative: return generate_multiplicative(spec, rng);
        case ModelKind::Null: break;
    }
    spec.validate();
    DataMatrix out;
    out.spec = spec;
    out.values = sample_noise(spec.noise, spec.rows, spec.cols, rng);
    out.planted_u = Vector::Zero(spec.rows);
    return out;
}

Vector load_spike(const std::filesystem::path& path) {
    const auto numbers = read_numbers(path);
    if (numbers.empty()) throw ValidationError("spike file " + path.string() + " is empty");
    Vector u = Eigen::Map<const Vector>(numbers.data(), static_cast<Eigen::Index>(numbers.size()));
    const double norm = u.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw ValidationError("spike file " + path.string() + " has zero or non-finite norm");
    }
    return u / norm;
}

nlohmann::json to_json(const PriorKind& p) {
    return std::visit(overloaded{
                          [](const prior::Spherical&) { return nlohmann::json("spherical"); },
                          [](const prior::IidRademacher&) { return nlohmann::json("rademacher"); },
                          [](const prior::IidCustom& c) {
                              return nlohmann::json{{"kind", "custom"}, {"label", c.label}};
                          },
                          [](const prior::Fixed& f) {
                              return nlohmann::json{
                                  {"kind", "fixed"},
                                  {"values", std::vector<double>(f.values.begin(), f.values.end())}};
                          },
                      },
                      p);
}

PriorKind prior_from_json(const nlohmann::json& j) {
    std::string kind;
    if (j.is_string()) {
        kind = j.get<std::string>();
    } else if (j.is_object() && j.contains("kind")) {
        kind = j.at("kind").get<std::string>();
    } else {
        throw ValidationError("prior must be a string or an object with \"kind\"");
    }
    if (kind == "spherical") return prior::Spherical{};
    if (kind == "rademacher") return prior::IidRademacher{};
    if (kind == "gaussian") {
        return prior::IidCustom{[](Rng& rng) { return rng.normal(); }, "gaussian"};
    }
    if (kind == "file") return prior::Fixed{load_spike(j.at("path").get<std::string>())};
    if (kind == "fixed") {
        const auto values = j.at("values").get<std::vector<double>>();
        Vector u = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
        return prior::Fixed{u};
    }
    throw ValidationError("unknown prior kind \"" + kind + "\"");
}

nlohmann::json to_json(const ModelSpec& spec) {
    return nlohmann::json{{"kind", to_string(spec.kind)},
                          {"M", spec.rows},
                          {"N", spec.cols},
                          {"snr", spec.snr},
                          {"prior_u", to_json(spec.prior_u)},
                          {"prior_v", to_json(spec.prior_v)},
                          {"noise", spec.noise.to_json()},
                          {"seed", spec.seed}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("model spec must be a JSON object");
    try {
        ModelSpec spec;
        spec.kind = model_kind_from_string(j.value("kind", std::string("null")));
        spec.rows = j.at("M").get<Eigen::Index>();
        spec.cols = j.at("N").get<Eigen::Index>();
        spec.snr = j.value("snr", 0.0);
        if (j.contains("prior_u")) spec.prior_u = prior_from_json(j.at("prior_u"));
        if (j.contains("prior_v")) spec.prior_v = prior_from_json(j.at("prior_v"));
        if (j.contains("noise")) {
            const auto& n = j.at("noise");
            spec.noise = n.is_string() ? builtin_noise(n.get<std::string>()) : NoiseModel::from_json(n);
        }
        spec.seed = j.value("seed", std::uint64_t{0});
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("model spec: ") + e.what());
    }
}

}  // namespace spiked
