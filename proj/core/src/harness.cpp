#include "spiked/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "spiked/errors.hpp"
#include "spiked/matrix_io.hpp"
#include "spiked/transform.hpp"

#ifndef SPIKED_VERSION
#define SPIKED_VERSION "0.0.0"
#endif

namespace spiked {

std::string tool_version() { return SPIKED_VERSION; }

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::ErrorSweep: return "error_sweep";
        case ExperimentKind::TransitionSweep: return "transition_sweep";
        case ExperimentKind::CltCheck: return "clt_check";
        case ExperimentKind::Reconstruction: return "reconstruction";
        case ExperimentKind::KdePipeline: return "kde_pipeline";
    }
    return "error_sweep";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
    if (s == "error_sweep") return ExperimentKind::ErrorSweep;
    if (s == "transition_sweep") return ExperimentKind::TransitionSweep;
    if (s == "clt_check") return ExperimentKind::CltCheck;
    if (s == "reconstruction") return ExperimentKind::Reconstruction;
    if (s == "kde_pipeline") return ExperimentKind::KdePipeline;
    throw ValidationError("unknown experiment \"" + s + "\"");
}

// ---------------------------------------------------------------------------
// Transform choice

double TransformChoice::resolve(ModelKind kind, const NoiseModel& noise, double snr) const {
    switch (mode) {
        case Mode::Fixed: return value;
        case Mode::SqrtFisher: return std::sqrt(noise.fisher());
        case Mode::Optimal:
            if (kind != ModelKind::Multiplicative) return 0.0;
            return alpha_star(gamma_of_lambda(snr), noise.fisher());
        case Mode::Default: break;
    }
    return default_alpha(kind, noise.fisher());
}

nlohmann::json to_json(const TransformChoice& t) {
    switch (t.mode) {
        case TransformChoice::Mode::Fixed: return {{"alpha", t.value}};
        case TransformChoice::Mode::Optimal: return {{"alpha", "optimal"}};
        case TransformChoice::Mode::SqrtFisher: return {{"alpha", "sqrt_fisher"}};
        case TransformChoice::Mode::Default: break;
    }
    return {{"alpha", "default"}};
}

TransformChoice transform_choice_from_json(const nlohmann::json& j) {
    TransformChoice t;
    if (!j.is_object() || !j.contains("alpha")) return t;
    const auto& a = j.at("alpha");
    if (a.is_number()) {
        t.mode = TransformChoice::Mode::Fixed;
        t.value = a.get<double>();
        return t;
    }
    const std::string s = a.get<std::string>();
    if (s == "default") return t;
    if (s == "optimal") t.mode = TransformChoice::Mode::Optimal;
    else if (s == "sqrt_fisher") t.mode = TransformChoice::Mode::SqrtFisher;
    else throw ValidationError("transform alpha must be a number, \"default\", \"optimal\" or \"sqrt_fisher\"");
    return t;
}

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
    if (trials < 1) throw ValidationError("trials must be >= 1");
    if (histogram_bins < 1) throw ValidationError("histogram_bins must be >= 1");
    if (margin && !(*margin >= 0.0)) throw ValidationError("margin must be >= 0");
    switch (kind) {
        case ExperimentKind::ErrorSweep:
        case ExperimentKind::CltCheck:
            if (grid.omega.empty()) throw ValidationError("grid.omega must be nonempty");
            if (model.kind == ModelKind::Null) {
                throw ValidationError("the alternative model must be additive or multiplicative");
            }
            break;
        case ExperimentKind::TransitionSweep:
        case ExperimentKind::KdePipeline:
            if (grid.lambda.empty()) throw ValidationError("grid.lambda must be nonempty");
            break;
        case ExperimentKind::Reconstruction:
            if (grid.n.empty()) throw ValidationError("grid.n must be nonempty");
            for (Eigen::Index n : grid.n) {
                if (n < model.rows) {
                    throw DomainError("reconstruction needs N >= M for every grid point (got N = " +
                                      std::to_string(n) + ", M = " + std::to_string(model.rows) + ")");
                }
            }
            break;
    }
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
    nlohmann::json j{{"experiment", to_string(cfg.kind)},
                     {"model", to_json(cfg.model)},
                     {"transform", to_json(cfg.transform)},
                     {"trials", cfg.trials},
                     {"master_seed", cfg.master_seed},
                     {"output_dir", cfg.output_dir.string()},
                     {"histogram_bins", cfg.histogram_bins},
                     {"compare_oracle", cfg.compare_oracle}};
    nlohmann::json grid = nlohmann::json::object();
    if (!cfg.grid.omega.empty()) grid["omega"] = cfg.grid.omega;
    if (!cfg.grid.lambda.empty()) grid["lambda"] = cfg.grid.lambda;
    if (!cfg.grid.n.empty()) grid["n"] = cfg.grid.n;
    j["grid"] = grid;
    if (cfg.w4) j["w4"] = *cfg.w4;
    if (cfg.margin) j["margin"] = *cfg.margin;
    return j;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("experiment config must be a JSON object");
    try {
        ExperimentConfig cfg;
        cfg.kind = experiment_kind_from_string(j.at("experiment").get<std::string>());
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            cfg.grid.omega = g.value("omega", std::vector<double>{});
            cfg.grid.lambda = g.value("lambda", std::vector<double>{});
            cfg.grid.n = g.value("n", std::vector<Eigen::Index>{});
        }
        nlohmann::json model = j.at("model");
        if (!model.contains("N") && !cfg.grid.n.empty()) {
            model["N"] = *std::max_element(cfg.grid.n.begin(), cfg.grid.n.end());
        }
        cfg.model = model_spec_from_json(model);
        if (j.contains("transform")) cfg.transform = transform_choice_from_json(j.at("transform"));
        cfg.trials = j.value("trials", cfg.trials);
        cfg.master_seed = j.value("master_seed", cfg.master_seed);
        cfg.output_dir = j.value("output_dir", cfg.output_dir.string());
        if (j.contains("w4")) cfg.w4 = j.at("w4").get<double>();
        if (j.contains("margin")) cfg.margin = j.at("margin").get<double>();
        cfg.histogram_bins = j.value("histogram_bins", cfg.histogram_bins);
        cfg.compare_oracle = j.value("compare_oracle", cfg.compare_oracle);
        cfg.threads = j.value("threads", 0u);
        cfg.validate();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("experiment config: ") + e.what());
    }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config file " + path.string() + ": " + e.what());
    }
    return experiment_config_from_json(j);
}

std::string config_digest(const ExperimentConfig& cfg) {
    nlohmann::json j = to_json(cfg);
    j.erase("output_dir");
    const std::string text = j.dump();

    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw NumericalError("SHA-256 digest failed");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    }
    return hex.str();
}

// ---------------------------------------------------------------------------
// Result tables

void ResultTable::add_row(std::vector<Cell> row) {
    if (row.size() != columns.size()) {
        throw ValidationError("row has " + std::to_string(row.size()) + " cells, table " + name +
                              " has " + std::to_string(columns.size()) + " columns");
    }
    rows.push_back(std::move(row));
}

std::size_t ResultTable::column(const std::string& col) const {
    const auto it = std::find(columns.begin(), columns.end(), col);
    if (it == columns.end()) throw ValidationError("table " + name + " has no column " + col);
    return static_cast<std::size_t>(it - columns.begin());
}

double ResultTable::number(std::size_t row, const std::string& col) const {
    const Cell& c = rows.at(row).at(column(col));
    if (const auto* d = std::get_if<double>(&c)) return *d;
    if (const auto* i = std::get_if<long long>(&c)) return static_cast<double>(*i);
    throw ValidationError("column " + col + " is not numeric");
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string cell_text(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    return csv_field(std::get<std::string>(c));
}

}  // namespace

void write_csv(std::ostream& out, const ResultTable& t) {
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        if (i) out << ',';
        out << csv_field(t.columns[i]);
    }
    out << "\r\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << cell_text(row[i]);
        }
        out << "\r\n";
    }
}

void write_result(const ResultTable& t, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write_table = [&](const ResultTable& table) {
        std::ofstream out(dir / (table.name + ".csv"), std::ios::binary);
        if (!out) throw ValidationError("cannot write " + (dir / (table.name + ".csv")).string());
        write_csv(out, table);
    };
    write_table(t);
    for (const auto& a : t.attachments) write_table(a);
    std::ofstream manifest(dir / "manifest.json");
    if (!manifest) throw ValidationError("cannot write " + (dir / "manifest.json").string());
    manifest << t.manifest.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Worker pool

unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("SPIKED_DETECT_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
        throw ValidationError("SPIKED_DETECT_THREADS must be a positive integer");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (!failed.load(std::memory_order_relaxed)) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= count) return;
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                        failed = true;
                    }
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Statistics

SampleStats sample_stats(std::span<const double> xs) {
    SampleStats s;
    s.count = xs.size();
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.variance = ss / static_cast<double>(xs.size() - 1);
        s.stderr_mean = std::sqrt(s.variance / static_cast<double>(xs.size()));
    }
    return s;
}

double ks_normal_distance(std::span<const double> xs) {
    if (xs.size() < 2) throw ValidationError("KS distance needs at least two samples");
    const SampleStats s = sample_stats(xs);
    if (!(s.variance > 0.0)) throw DomainError("KS distance: sample has zero variance");
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    const double sd = std::sqrt(s.variance);
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = 0.5 * std::erfc(-(sorted[i] - s.mean) / (sd * std::numbers::sqrt2));
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

Histogram histogram(std::span<const double> xs, int bins, double lo, double hi) {
    if (bins < 1) throw ValidationError("histogram needs at least one bin");
    if (!(hi > lo)) hi = lo + 1.0;
    Histogram h;
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) h.edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / bins;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    for (double x : xs) {
        int b = static_cast<int>(std::floor((x - lo) / (hi - lo) * bins));
        b = std::clamp(b, 0, bins - 1);
        ++h.counts[static_cast<std::size_t>(b)];
    }
    return h;
}

// ---------------------------------------------------------------------------
// Dispatch

namespace {

std::string utc_timestamp(std::chrono::system_clock::time_point t) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

}  // namespace

ResultTable run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto started = std::chrono::system_clock::now();
    const auto t0 = std::chrono::steady_clock::now();
    ResultTable table;
    switch (cfg.kind) {
        case ExperimentKind::ErrorSweep: table = run_error_sweep(cfg); break;
        case ExperimentKind::TransitionSweep: table = run_transition_sweep(cfg); break;
        case ExperimentKind::CltCheck: table = run_clt_check(cfg); break;
        case ExperimentKind::Reconstruction: table = run_reconstruction(cfg); break;
        case ExperimentKind::KdePipeline: table = run_kde_pipeline(cfg); break;
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::json extra = std::move(table.manifest);
    table.manifest = nlohmann::json{{"config_digest", config_digest(cfg)},
                                    {"master_seed", cfg.master_seed},
                                    {"tool_version", tool_version()},
                                    {"started_at", utc_timestamp(started)},
                                    {"wall_seconds", wall},
                                    {"experiment", to_string(cfg.kind)},
                                    {"config", to_json(cfg)}};
    if (extra.is_object()) {
        for (auto& [k, v] : extra.items()) table.manifest[k] = v;
    }
    return table;
}

}  // namespace spiked
