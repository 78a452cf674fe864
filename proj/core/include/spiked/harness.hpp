#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "spiked/models.hpp"

namespace spiked {

enum class ExperimentKind { ErrorSweep, TransitionSweep, CltCheck, Reconstruction, KdePipeline };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& s);

/// How the transform parameter alpha is chosen.
struct TransformChoice {
    enum class Mode {
        Default,     // 0 for the additive model, sqrt(F_g) for the multiplicative one
        Fixed,       // `value`
        Optimal,     // alpha_g from the true gamma (multiplicative only)
        SqrtFisher,  // sqrt(F_g)
    };
    Mode mode = Mode::Default;
    double value = 0.0;

    /// Resolves alpha for a given model kind, noise and raw SNR.
    double resolve(ModelKind kind, const NoiseModel& noise, double snr) const;
};

nlohmann::json to_json(const TransformChoice& t);
TransformChoice transform_choice_from_json(const nlohmann::json& j);

/// Parameter values swept by an experiment. Which lists are read depends
/// on the experiment kind.
struct Grid {
    std::vector<double> omega;
    std::vector<double> lambda;
    std::vector<Eigen::Index> n;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::ErrorSweep;
    ModelSpec model;
    Grid grid;
    TransformChoice transform;
    int trials = 2000;
    std::uint64_t master_seed = 0;
    std::filesystem::path output_dir = "results";
    std::optional<double> w4;       // overrides the noise model's fourth moment
    std::optional<double> margin;   // detection margin, default 3 M^{-2/3}
    int histogram_bins = 40;
    bool compare_oracle = true;     // KDE pipeline: also run the known-noise transform
    unsigned threads = 0;           // 0: SPIKED_DETECT_THREADS or hardware concurrency

    /// Throws ValidationError when the grid for `kind` is empty or trials < 1.
    void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Hex SHA-256 of the canonical JSON form of the configuration (threads
/// and output directory excluded, since they cannot change results).
std::string config_digest(const ExperimentConfig& cfg);

using Cell = std::variant<double, long long, std::string>;

/// A CSV table plus the manifest needed to reproduce it.
struct ResultTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    nlohmann::json manifest = nlohmann::json::object();
    std::vector<ResultTable> attachments;  // e.g. histograms, written next to the main table

    void add_row(std::vector<Cell> row);
    /// Column index by name; throws ValidationError if absent.
    std::size_t column(const std::string& name) const;
    double number(std::size_t row, const std::string& col) const;
};

/// RFC 4180 CSV with a header line; numbers use 17 significant digits.
void write_csv(std::ostream& out, const ResultTable& t);

/// Writes <name>.csv for the table and each attachment, plus manifest.json.
void write_result(const ResultTable& t, const std::filesystem::path& dir);

/// Worker count: `requested` if nonzero, else SPIKED_DETECT_THREADS, else
/// the hardware concurrency (at least 1).
unsigned resolve_threads(unsigned requested);

/// Calls fn(i) for i in [0, count) on a pool of `threads` workers. The
/// first exception thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

/// Mean, unbiased variance and standard error of the mean.
struct SampleStats {
    double mean = 0.0;
    double variance = 0.0;
    double stderr_mean = 0.0;
    std::size_t count = 0;
};

SampleStats sample_stats(std::span<const double> xs);

/// Kolmogorov-Smirnov distance between the sample and the normal law with
/// the sample's own mean and variance.
double ks_normal_distance(std::span<const double> xs);

/// Equal-width histogram over [lo, hi]; values outside are clamped into
/// the end bins.
struct Histogram {
    std::vector<double> edges;
    std::vector<long long> counts;
};

Histogram histogram(std::span<const double> xs, int bins, double lo, double hi);

ResultTable run_error_sweep(const ExperimentConfig& cfg);
ResultTable run_transition_sweep(const ExperimentConfig& cfg);
ResultTable run_clt_check(const ExperimentConfig& cfg);
ResultTable run_reconstruction(const ExperimentConfig& cfg);
ResultTable run_kde_pipeline(const ExperimentConfig& cfg);

/// Dispatches on cfg.kind and fills the manifest.
ResultTable run_experiment(const ExperimentConfig& cfg);

/// The library version string.
std::string tool_version();

}  // namespace spiked
