#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "spiked/noise.hpp"
#include "spiked/rng.hpp"
#include "spiked/spectral.hpp"

namespace spiked {

namespace prior {
/// Uniform on the unit sphere (a normalized Gaussian vector).
struct Spherical {};
/// Entries +-1/sqrt(dim).
struct IidRademacher {};
/// Entries x/sqrt(dim), x drawn from a unit-variance scalar sampler.
struct IidCustom {
    std::function<double(Rng&)> sampler;
    std::string label = "custom";
};
/// A fixed, user-supplied spike (normalized to unit length).
struct Fixed {
    Vector values;
};
}  // namespace prior

using PriorKind = std::variant<prior::Spherical, prior::IidRademacher, prior::IidCustom, prior::Fixed>;

enum class ModelKind { Null, Additive, Multiplicative };

struct ModelSpec {
    ModelKind kind = ModelKind::Null;
    Eigen::Index rows = 0;  // M
    Eigen::Index cols = 0;  // N
    double snr = 0.0;       // lambda
    PriorKind prior_u = prior::Spherical{};
    PriorKind prior_v = prior::Spherical{};
    NoiseModel noise = gaussian_noise();
    std::uint64_t seed = 0;

    Ratio ratio() const { return Ratio::of(rows, cols); }
    /// Throws ValidationError unless M <= N, lambda >= 0 and both dimensions are positive.
    void validate() const;
};

struct DataMatrix {
    Matrix values;
    ModelSpec spec;
    Vector planted_u;
    std::optional<Vector> planted_v;
};

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

Vector sample_prior(const PriorKind& kind, Eigen::Index dim, Rng& rng);

/// i.i.d. entries xi/sqrt(N), xi ~ g.
Matrix sample_noise(const NoiseModel& noise, Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// gamma = sqrt(1 + lambda) - 1, so that (I + gamma u u^T)^2 = I + lambda u u^T for unit u.
double gamma_of_lambda(double lambda);

/// Y = sqrt(lambda) u v^T + X. The noise is drawn before the spike, so
/// lambda = 0 reproduces sample_noise bit for bit.
DataMatrix generate_additive(const ModelSpec& spec, Rng& rng);

/// Y = (I + gamma u u^T) X.
DataMatrix generate_multiplicative(const ModelSpec& spec, Rng& rng);

/// Dispatches on spec.kind (Null gives pure noise).
DataMatrix generate(const ModelSpec& spec, Rng& rng);

/// Reads a one-number-per-line spike file and normalizes it.
Vector load_spike(const std::filesystem::path& path);

nlohmann::json to_json(const PriorKind& p);
PriorKind prior_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

}  // namespace spiked
