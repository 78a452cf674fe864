#include "spiked/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spiked/errors.hpp"
#include "spiked/harness.hpp"
#include "spiked/lss.hpp"
#include "spiked/matrix_io.hpp"
#include "spiked/models.hpp"
#include "spiked/transform.hpp"

namespace spiked {

namespace {

namespace fs = std::filesystem;

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_json(const nlohmann::json& j, const std::string& path, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << j.dump(2) << '\n';
        return;
    }
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot write " + path);
    f << j.dump(2) << '\n';
}

// "gaussian", "bimodal", "student_t[:nu]" or a JSON noise-model file.
NoiseModel parse_noise(const std::string& arg) {
    if (arg == "gaussian" || arg == "bimodal") return builtin_noise(arg);
    if (arg.rfind("student_t", 0) == 0) {
        double nu = 5.0;
        if (arg.size() > 9) {
            if (arg[9] != ':') throw ValidationError("expected student_t or student_t:<nu>");
            try {
                nu = std::stod(arg.substr(10));
            } catch (const std::exception&) {
                throw ValidationError("bad degrees of freedom in \"" + arg + "\"");
            }
        }
        return student_t_noise(nu);
    }
    if (fs::exists(arg)) return NoiseModel::from_json(read_json(arg));
    throw ValidationError("noise must be gaussian, bimodal, student_t[:nu] or a model file (got \"" +
                          arg + "\")");
}

std::optional<Ratio> ratio_option(double r) {
    if (r <= 0.0) return std::nullopt;
    return Ratio(r);
}

struct ExperimentArgs {
    std::string config;
    std::string out_dir;
    unsigned threads = 0;
    int trials = 0;
    long long seed = -1;
};

void add_experiment_options(CLI::App* cmd, ExperimentArgs& a) {
    cmd->add_option("--config", a.config, "Experiment configuration (JSON)")->required();
    cmd->add_option("--out-dir", a.out_dir, "Output directory (overrides the config)");
    cmd->add_option("--threads", a.threads, "Worker threads (overrides SPIKED_DETECT_THREADS)");
    cmd->add_option("--trials", a.trials, "Trial count (overrides the config)");
    cmd->add_option("--seed", a.seed, "Master seed (overrides the config)");
}

// Runs an experiment; `allowed` lists the kinds the subcommand accepts, the
// first being the default when the config has no "experiment" field.
void run_experiment_command(const ExperimentArgs& a, const std::vector<ExperimentKind>& allowed,
                            std::ostream& out) {
    nlohmann::json j = read_json(a.config);
    if (!j.contains("experiment")) j["experiment"] = to_string(allowed.front());
    ExperimentConfig cfg = experiment_config_from_json(j);
    if (std::find(allowed.begin(), allowed.end(), cfg.kind) == allowed.end()) {
        throw ValidationError("experiment \"" + to_string(cfg.kind) + "\" is not handled by this subcommand");
    }
    if (!a.out_dir.empty()) cfg.output_dir = a.out_dir;
    if (a.threads > 0) cfg.threads = a.threads;
    if (a.trials > 0) cfg.trials = a.trials;
    if (a.seed >= 0) cfg.master_seed = static_cast<std::uint64_t>(a.seed);
    cfg.threads = resolve_threads(cfg.threads);

    const ResultTable table = run_experiment(cfg);
    write_result(table, cfg.output_dir);
    out << (cfg.output_dir / (table.name + ".csv")).string() << '\n';
    write_csv(out, table);
}

}  // namespace

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Detection and recovery of rank-one spikes in rectangular noise matrices",
                 "spiked-detect"};
    app.set_version_flag("--version", tool_version());
    app.require_subcommand(1);

    // generate
    std::string gen_spec, gen_out, gen_planted;
    long long gen_seed = -1;
    auto* gen = app.add_subcommand("generate", "Sample a data matrix from a model spec");
    gen->add_option("--spec", gen_spec, "Model spec (JSON)")->required();
    gen->add_option("--seed", gen_seed, "Seed (overrides the spec)");
    gen->add_option("--out", gen_out, "Output CSV")->required();
    gen->add_option("--planted", gen_planted, "Also write the planted left spike here");

    // pca
    std::string pca_matrix, pca_out;
    double pca_ratio = 0.0;
    std::optional<double> pca_margin, pca_snr;
    auto* pca = app.add_subcommand("pca", "Detect a spike from the top eigenvalue of Y Y^T");
    pca->add_option("--matrix", pca_matrix, "Data matrix CSV")->required();
    pca->add_option("--ratio", pca_ratio, "Aspect ratio d (default M/N)");
    pca->add_option("--margin", pca_margin, "Margin above the bulk edge (default 3 M^-2/3)");
    pca->add_option("--snr", pca_snr, "Known SNR, for the predicted outlier");
    pca->add_option("--out", pca_out, "Write the JSON verdict here instead of stdout");

    // transform-pca
    std::string tp_matrix, tp_noise = "gaussian", tp_model = "additive", tp_export, tp_out;
    double tp_ratio = 0.0;
    std::optional<double> tp_alpha, tp_hint, tp_margin;
    auto* tp = app.add_subcommand("transform-pca", "Entrywise score transform, then PCA detection");
    tp->add_option("--matrix", tp_matrix, "Data matrix CSV")->required();
    tp->add_option("--noise", tp_noise, "gaussian, bimodal, student_t[:nu] or a noise-model file");
    tp->add_option("--model", tp_model, "additive or multiplicative (selects the default alpha)");
    tp->add_option("--alpha", tp_alpha, "Transform parameter alpha");
    tp->add_option("--snr-hint", tp_hint, "Assumed SNR: selects the optimal alpha and the predicted outlier");
    tp->add_option("--ratio", tp_ratio, "Aspect ratio d (default M/N)");
    tp->add_option("--margin", tp_margin, "Margin above the bulk edge (default 3 M^-2/3)");
    tp->add_option("--export", tp_export, "Write the transformed matrix to this CSV");
    tp->add_option("--out", tp_out, "Write the JSON verdict here instead of stdout");

    // lss-test
    std::string lss_matrix, lss_out;
    double lss_omega = 0.0, lss_ratio = 0.0;
    std::optional<double> lss_w4;
    bool lss_estimate = false;
    auto* lss = app.add_subcommand("lss-test", "Weak-detection test based on a linear spectral statistic");
    lss->add_option("--matrix", lss_matrix, "Data matrix CSV")->required();
    lss->add_option("--omega", lss_omega, "Hypothesized SNR, 0 < omega < sqrt(d)")->required();
    lss->add_option("--ratio", lss_ratio, "Aspect ratio d (default M/N)");
    auto* w4_opt = lss->add_option("--w4", lss_w4, "Noise fourth moment N^2 E[X^4]");
    auto* est_opt = lss->add_flag("--estimate-w4", lss_estimate, "Estimate w4 from the data");
    w4_opt->excludes(est_opt);
    lss->add_option("--out", lss_out, "Write the JSON result here instead of stdout");

    // kde-fit
    std::string kf_matrix, kf_out;
    std::optional<double> kf_bandwidth;
    auto* kf = app.add_subcommand("kde-fit", "Fit a kernel density noise model to matrix entries");
    kf->add_option("--matrix", kf_matrix, "Data matrix CSV")->required();
    kf->add_option("--bandwidth", kf_bandwidth, "Kernel bandwidth (default n^-1/5)");
    kf->add_option("--out", kf_out, "Output model JSON")->required();

    // experiments
    ExperimentArgs sweep_args, clt_args, rec_args, kde_args;
    auto* sweep = app.add_subcommand("sweep", "Error or transition sweep from a config");
    add_experiment_options(sweep, sweep_args);
    auto* clt = app.add_subcommand("clt-check", "Limit-law check of the test statistic");
    add_experiment_options(clt, clt_args);
    auto* rec = app.add_subcommand("reconstruct", "Spike recovery: raw vs transformed PCA");
    add_experiment_options(rec, rec_args);
    auto* kde = app.add_subcommand("kde-run", "Transformed PCA with an estimated noise density");
    add_experiment_options(kde, kde_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitValidation;
    }

    try {
        if (gen->parsed()) {
            ModelSpec spec = model_spec_from_json(read_json(gen_spec));
            if (gen_seed >= 0) spec.seed = static_cast<std::uint64_t>(gen_seed);
            Rng rng(spec.seed);
            const DataMatrix y = generate(spec, rng);
            write_matrix_csv(gen_out, y.values);
            if (!gen_planted.empty()) write_matrix_csv(gen_planted, Matrix(y.planted_u));
        } else if (pca->parsed()) {
            const Matrix y = read_matrix_csv(pca_matrix);
            const Ratio d = ratio_option(pca_ratio).value_or(Ratio::of(y.rows(), y.cols()));
            const PcaVerdict v = pca_detect(y, d, pca_margin.value_or(default_margin(y.rows())), pca_snr);
            write_json(to_json(v), pca_out, out);
        } else if (tp->parsed()) {
            const Matrix y = read_matrix_csv(tp_matrix);
            const Ratio d = ratio_option(tp_ratio).value_or(Ratio::of(y.rows(), y.cols()));
            const ModelKind kind = model_kind_from_string(tp_model);
            TransformSpec spec{0.0, parse_noise(tp_noise)};
            if (tp_alpha) {
                spec.alpha = *tp_alpha;
            } else if (tp_hint && kind == ModelKind::Multiplicative) {
                spec.alpha = alpha_star(gamma_of_lambda(*tp_hint), spec.noise.fisher());
            } else {
                spec.alpha = default_alpha(kind, spec.noise.fisher());
            }
            const TransformResult tr = entrywise_transform(y, spec);
            if (!tp_export.empty()) write_matrix_csv(tp_export, tr.values);
            std::optional<SnrContext> ctx;
            if (tp_hint) ctx = SnrContext{kind, *tp_hint};
            PcaVerdict v = pca_detect(tr.values, d, tp_margin.value_or(default_margin(y.rows())));
            if (ctx) {
                const double eff = transformed_effective_snr(spec, *ctx);
                v.effective_snr = eff;
                v.predicted_outlier = bbp_outlier(eff, d);
            }
            nlohmann::json j = to_json(v);
            j["alpha"] = spec.alpha;
            j["noise"] = spec.noise.name();
            j["fisher"] = spec.noise.fisher();
            j["clamped_entries"] = tr.clamped;
            j["warning"] = tr.warning ? nlohmann::json(*tr.warning) : nlohmann::json();
            if (tr.warning) err << "warning: " << *tr.warning << '\n';
            write_json(j, tp_out, out);
        } else if (lss->parsed()) {
            if (!lss_w4 && !lss_estimate) {
                throw ValidationError("lss-test needs --w4 or --estimate-w4");
            }
            const Matrix y = read_matrix_csv(lss_matrix);
            const LssTestResult r = run_lss_test(y, lss_omega, lss_w4, ratio_option(lss_ratio));
            for (const auto& w : r.warnings) err << "warning: " << w << '\n';
            write_json(to_json(r), lss_out, out);
        } else if (kf->parsed()) {
            const Matrix y = read_matrix_csv(kf_matrix);
            const double root_n = std::sqrt(static_cast<double>(y.cols()));
            std::vector<double> samples(y.data(), y.data() + y.size());
            for (double& s : samples) s *= root_n;
            const NoiseModel model = kde_fit(samples, kf_bandwidth);
            write_json(model.to_json(), kf_out, out);
            out << nlohmann::json{{"fisher", model.fisher()}, {"w4", model.w4()}}.dump() << '\n';
        } else if (sweep->parsed()) {
            run_experiment_command(sweep_args, {ExperimentKind::ErrorSweep, ExperimentKind::TransitionSweep},
                                   out);
        } else if (clt->parsed()) {
            run_experiment_command(clt_args, {ExperimentKind::CltCheck}, out);
        } else if (rec->parsed()) {
            run_experiment_command(rec_args, {ExperimentKind::Reconstruction}, out);
        } else if (kde->parsed()) {
            run_experiment_command(kde_args, {ExperimentKind::KdePipeline}, out);
        }
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<std::string> storage;
    storage.reserve(args.size() + 1);
    storage.emplace_back("spiked-detect");
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    argv.push_back(nullptr);
    return cli_main(static_cast<int>(storage.size()), argv.data(), out, err);
}

}  // namespace spiked
