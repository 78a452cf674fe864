#include <algorithm>
#include <cmath>
#include <limits>

#include "spiked/errors.hpp"
#include "spiked/harness.hpp"
#include "spiked/lss.hpp"
#include "spiked/transform.hpp"

namespace spiked {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Rng trial_rng(const ExperimentConfig& cfg, std::uint64_t point, std::uint64_t hypothesis,
              std::uint64_t trial) {
    return Rng::child(cfg.master_seed, stream_index(point, hypothesis, trial));
}

double detection_margin(const ExperimentConfig& cfg) {
    return cfg.margin.value_or(default_margin(cfg.model.rows));
}

double top_eigenvalue(const Matrix& y) { return gram_eigenvalues(y).front(); }

double fraction(long long k, std::size_t n) {
    return n == 0 ? kNaN : static_cast<double>(k) / static_cast<double>(n);
}

double mean_of(const std::vector<double>& xs) { return sample_stats(xs).mean; }

// Standard error of the sample variance from the fourth central moment,
// so heavy-tailed statistics get a correspondingly wider band.
double variance_stderr(const std::vector<double>& xs, const SampleStats& s) {
    if (xs.size() < 2) return kNaN;
    const double n = static_cast<double>(xs.size());
    double m4 = 0.0;
    for (double x : xs) m4 += std::pow(x - s.mean, 4);
    m4 /= n;
    const double m2 = s.variance * (n - 1.0) / n;
    return std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
}

long long count_above(const std::vector<double>& xs, double level) {
    return std::count_if(xs.begin(), xs.end(), [&](double x) { return x > level; });
}

// ---------------------------------------------------------------------------
// Shared Monte Carlo for the LSS test

struct LssRun {
    double omega = 0.0;
    std::vector<double> h0;  // statistics from unflagged trials
    std::vector<double> h1;
    long long type1 = 0;     // rejections under H0, flagged trials included
    long long type2 = 0;     // acceptances under H1
    long long flagged_h0 = 0;
    long long flagged_h1 = 0;
    std::size_t n0 = 0;
    std::size_t n1 = 0;
};

struct LssSweep {
    std::vector<LssRun> runs;
    double w4 = 0.0;
};

// Null matrices do not depend on omega, so one set of null spectra is shared
// by every grid point. Alternatives use a separate stream per grid point.
LssSweep simulate_lss(const ExperimentConfig& cfg) {
    const unsigned threads = resolve_threads(cfg.threads);
    const Ratio d = cfg.model.ratio();
    LssSweep sweep;
    sweep.w4 = cfg.w4.value_or(cfg.model.noise.w4());

    const std::size_t n0 = static_cast<std::size_t>(cfg.trials) / 2;
    const std::size_t n1 = static_cast<std::size_t>(cfg.trials) - n0;

    ModelSpec null_spec = cfg.model;
    null_spec.kind = ModelKind::Null;
    null_spec.snr = 0.0;
    std::vector<std::vector<double>> null_spectra(n0);
    parallel_for(n0, threads, [&](std::size_t t) {
        Rng rng = trial_rng(cfg, 0, 0, t);
        null_spectra[t] = gram_eigenvalues(generate(null_spec, rng).values);
    });

    for (std::size_t i = 0; i < cfg.grid.omega.size(); ++i) {
        const double omega = cfg.grid.omega[i];
        const TestParams p(omega, d, sweep.w4);
        LssRun run;
        run.omega = omega;
        run.n0 = n0;
        run.n1 = n1;

        std::vector<double> stat0(n0, kNaN);
        for (std::size_t t = 0; t < n0; ++t) {
            try {
                stat0[t] = lss_statistic(std::span<const double>(null_spectra[t]), p);
            } catch (const OutlierEigenvalueError&) {
            }
        }

        ModelSpec alt = cfg.model;
        alt.snr = omega;
        std::vector<double> stat1(n1, kNaN);
        parallel_for(n1, threads, [&](std::size_t t) {
            Rng rng = trial_rng(cfg, i + 1, 1, t);
            const auto eig = gram_eigenvalues(generate(alt, rng).values);
            try {
                stat1[t] = lss_statistic(std::span<const double>(eig), p);
            } catch (const OutlierEigenvalueError&) {
            }
        });

        for (double l : stat0) {
            if (std::isnan(l)) {
                ++run.flagged_h0;
                ++run.type1;
            } else {
                run.h0.push_back(l);
                if (decide(l, p) == Decision::RejectH0) ++run.type1;
            }
        }
        for (double l : stat1) {
            if (std::isnan(l)) {
                ++run.flagged_h1;
            } else {
                run.h1.push_back(l);
                if (decide(l, p) == Decision::AcceptH0) ++run.type2;
            }
        }
        sweep.runs.push_back(std::move(run));
    }
    return sweep;
}

double error_stderr(const LssRun& r) {
    const double p1 = fraction(r.type1, r.n0);
    const double p2 = fraction(r.type2, r.n1);
    double v = 0.0;
    if (r.n0) v += p1 * (1.0 - p1) / static_cast<double>(r.n0);
    if (r.n1) v += p2 * (1.0 - p2) / static_cast<double>(r.n1);
    return std::sqrt(v);
}

nlohmann::json flagged_summary(const LssSweep& sweep) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : sweep.runs) {
        rows.push_back({{"omega", r.omega}, {"h0", r.flagged_h0}, {"h1", r.flagged_h1}});
    }
    return rows;
}

}  // namespace

ResultTable run_error_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    const Ratio d = cfg.model.ratio();
    const LssSweep sweep = simulate_lss(cfg);

    ResultTable t;
    t.name = "error_sweep";
    t.columns = {"omega", "type1", "type2", "err_empirical", "err_theory", "stderr", "trials"};
    for (const auto& r : sweep.runs) {
        const TestParams p(r.omega, d, sweep.w4);
        const double type1 = fraction(r.type1, r.n0);
        const double type2 = fraction(r.type2, r.n1);
        t.add_row({r.omega, type1, type2, type1 + type2, predicted_error(p), error_stderr(r),
                   static_cast<long long>(r.n0 + r.n1)});
    }
    t.manifest = {{"w4", sweep.w4},
                  {"d", d.value()},
                  {"trials_h0", sweep.runs.front().n0},
                  {"trials_h1", sweep.runs.front().n1},
                  {"flagged", flagged_summary(sweep)}};
    return t;
}

ResultTable run_clt_check(const ExperimentConfig& cfg) {
    cfg.validate();
    const Ratio d = cfg.model.ratio();
    const LssSweep sweep = simulate_lss(cfg);

    ResultTable t;
    t.name = "clt_check";
    t.columns = {"omega",      "mean_h0",    "theory_mean_h0", "se_h0",   "var_h0",  "var_se_h0",
                 "mean_h1",    "theory_mean_h1", "se_h1",      "var_h1",  "var_se_h1", "theory_var",
                 "ks_h0",      "ks_h1",      "err_empirical",  "err_theory", "stderr",
                 "flagged_h0", "flagged_h1", "trials"};
    for (const auto& r : sweep.runs) {
        const TestParams p(r.omega, d, sweep.w4);
        const SampleStats s0 = sample_stats(r.h0);
        const SampleStats s1 = sample_stats(r.h1);
        const double ks0 = r.h0.size() > 1 ? ks_normal_distance(r.h0) : kNaN;
        const double ks1 = r.h1.size() > 1 ? ks_normal_distance(r.h1) : kNaN;
        const double err = fraction(r.type1, r.n0) + fraction(r.type2, r.n1);
        t.add_row({r.omega, s0.mean, limiting_mean(0.0, p), s0.stderr_mean, s0.variance,
                   variance_stderr(r.h0, s0), s1.mean, limiting_mean(r.omega, p), s1.stderr_mean,
                   s1.variance, variance_stderr(r.h1, s1), limiting_variance(p), ks0,
                   ks1, err, predicted_error(p), error_stderr(r), r.flagged_h0, r.flagged_h1,
                   static_cast<long long>(r.n0 + r.n1)});
    }
    t.manifest = {{"w4", sweep.w4}, {"d", d.value()}, {"flagged", flagged_summary(sweep)}};
    return t;
}

ResultTable run_transition_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    const unsigned threads = resolve_threads(cfg.threads);
    const Ratio d = cfg.model.ratio();
    const double edge = mp_edges(d).upper;
    const double level = edge + detection_margin(cfg);
    const std::size_t trials = static_cast<std::size_t>(cfg.trials);

    ResultTable t;
    t.name = "transition_sweep";
    t.columns = {"lambda",        "alpha",          "effective_snr",    "raw_mean",
                 "raw_theory",    "raw_stderr",     "raw_detect_rate",  "transformed_mean",
                 "transformed_theory", "transformed_stderr", "transformed_detect_rate", "trials"};
    ResultTable hist;
    hist.name = "histogram";
    hist.columns = {"lambda", "series", "bin_left", "bin_right", "count"};
    long long clamped = 0;

    for (std::size_t i = 0; i < cfg.grid.lambda.size(); ++i) {
        const double lambda = cfg.grid.lambda[i];
        ModelSpec spec = cfg.model;
        spec.snr = lambda;
        const TransformSpec ts{cfg.transform.resolve(spec.kind, spec.noise, lambda), spec.noise};
        const double eff = spec.kind == ModelKind::Null
                               ? 0.0
                               : transformed_effective_snr(ts, SnrContext{spec.kind, lambda});

        std::vector<double> raw(trials), transformed(trials);
        std::vector<long long> clamps(trials, 0);
        parallel_for(trials, threads, [&](std::size_t k) {
            Rng rng = trial_rng(cfg, i, 0, k);
            const DataMatrix y = generate(spec, rng);
            raw[k] = top_eigenvalue(y.values);
            const TransformResult tr = entrywise_transform(y.values, ts);
            clamps[k] = static_cast<long long>(tr.clamped);
            transformed[k] = top_eigenvalue(tr.values);
        });
        for (long long c : clamps) clamped += c;

        const SampleStats sr = sample_stats(raw);
        const SampleStats st = sample_stats(transformed);
        t.add_row({lambda, ts.alpha, eff, sr.mean, bbp_outlier(lambda, d), sr.stderr_mean,
                   fraction(count_above(raw, level), trials), st.mean, bbp_outlier(eff, d),
                   st.stderr_mean, fraction(count_above(transformed, level), trials),
                   static_cast<long long>(trials)});

        for (const auto& [series, xs] : {std::pair{"raw", &raw}, std::pair{"transformed", &transformed}}) {
            const auto [lo, hi] = std::minmax_element(xs->begin(), xs->end());
            const Histogram h = histogram(*xs, cfg.histogram_bins, *lo, *hi);
            for (std::size_t b = 0; b < h.counts.size(); ++b) {
                hist.add_row({lambda, std::string(series), h.edges[b], h.edges[b + 1], h.counts[b]});
            }
        }
    }
    t.attachments.push_back(std::move(hist));
    t.manifest = {{"d", d.value()},
                  {"edge", edge},
                  {"detection_threshold", level},
                  {"clamped_entries", clamped}};
    return t;
}

ResultTable run_reconstruction(const ExperimentConfig& cfg) {
    cfg.validate();
    const unsigned threads = resolve_threads(cfg.threads);
    const std::size_t trials = static_cast<std::size_t>(cfg.trials);

    ResultTable t;
    t.name = "reconstruction";
    t.columns = {"n",        "d",                  "method",        "effective_snr",
                 "overlap_mean", "overlap_theory", "overlap_stderr", "overlap_sq_mean",
                 "overlap_sq_theory", "transformed_wins", "trials"};

    for (std::size_t i = 0; i < cfg.grid.n.size(); ++i) {
        ModelSpec spec = cfg.model;
        spec.cols = cfg.grid.n[i];
        const Ratio d = spec.ratio();
        const TransformSpec ts{cfg.transform.resolve(spec.kind, spec.noise, spec.snr), spec.noise};
        const double eff = spec.kind == ModelKind::Null
                               ? 0.0
                               : transformed_effective_snr(ts, SnrContext{spec.kind, spec.snr});

        std::vector<double> raw(trials), transformed(trials);
        parallel_for(trials, threads, [&](std::size_t k) {
            Rng rng = trial_rng(cfg, i, 0, k);
            const DataMatrix y = generate(spec, rng);
            raw[k] = std::abs(top_singular_pair(y.values).left.dot(y.planted_u));
            const TransformResult tr = entrywise_transform(y.values, ts);
            transformed[k] = std::abs(top_singular_pair(tr.values).left.dot(y.planted_u));
        });
        long long wins = 0;
        for (std::size_t k = 0; k < trials; ++k) wins += transformed[k] >= raw[k] ? 1 : 0;
        const double win_rate = fraction(wins, trials);

        auto emit = [&](const char* method, const std::vector<double>& xs, double snr) {
            std::vector<double> sq(xs.size());
            std::transform(xs.begin(), xs.end(), sq.begin(), [](double x) { return x * x; });
            const SampleStats s = sample_stats(xs);
            const double limit = overlap_limit(snr, d);
            t.add_row({static_cast<long long>(spec.cols), d.value(), std::string(method), snr, s.mean,
                       std::sqrt(limit), s.stderr_mean, mean_of(sq), limit, win_rate,
                       static_cast<long long>(trials)});
        };
        emit("raw", raw, spec.snr);
        emit("transformed", transformed, eff);
    }
    return t;
}

ResultTable run_kde_pipeline(const ExperimentConfig& cfg) {
    cfg.validate();
    const unsigned threads = resolve_threads(cfg.threads);
    const Ratio d = cfg.model.ratio();
    const double edge = mp_edges(d).upper;
    const double level = edge + detection_margin(cfg);
    const std::size_t trials = static_cast<std::size_t>(cfg.trials);

    ResultTable t;
    t.name = "kde_pipeline";
    t.columns = {"lambda",          "raw_mean",        "raw_theory",        "raw_detect_rate",
                 "kde_mean",        "kde_stderr",      "kde_detect_rate",   "kde_fisher_mean",
                 "oracle_mean",     "oracle_theory",   "oracle_detect_rate", "threshold",
                 "flagged",         "trials"};
    long long clamped = 0;
    nlohmann::json failures = nlohmann::json::array();

    for (std::size_t i = 0; i < cfg.grid.lambda.size(); ++i) {
        const double lambda = cfg.grid.lambda[i];
        ModelSpec spec = cfg.model;
        spec.snr = lambda;
        const TransformSpec oracle{cfg.transform.resolve(spec.kind, spec.noise, lambda), spec.noise};
        const double oracle_eff = spec.kind == ModelKind::Null
                                      ? 0.0
                                      : transformed_effective_snr(oracle, SnrContext{spec.kind, lambda});

        std::vector<double> raw(trials), kde(trials, kNaN), fisher(trials, kNaN), orc(trials, kNaN);
        std::vector<long long> clamps(trials, 0);
        std::vector<std::string> errors(trials);
        parallel_for(trials, threads, [&](std::size_t k) {
            Rng rng = trial_rng(cfg, i, 0, k);
            const DataMatrix y = generate(spec, rng);
            raw[k] = top_eigenvalue(y.values);
            if (cfg.compare_oracle) orc[k] = top_eigenvalue(entrywise_transform(y.values, oracle).values);
            try {
                const double root_n = std::sqrt(static_cast<double>(y.values.cols()));
                std::vector<double> samples(y.values.data(), y.values.data() + y.values.size());
                for (double& s : samples) s *= root_n;
                const NoiseModel fitted = kde_fit(samples);
                const TransformSpec ts{cfg.transform.resolve(spec.kind, fitted, lambda), fitted};
                const TransformResult tr = entrywise_transform(y.values, ts);
                clamps[k] = static_cast<long long>(tr.clamped);
                kde[k] = top_eigenvalue(tr.values);
                fisher[k] = fitted.fisher();
            } catch (const Error& e) {
                errors[k] = e.what();
            }
        });

        std::vector<double> kde_ok, fisher_ok, orc_ok;
        long long flagged = 0;
        for (std::size_t k = 0; k < trials; ++k) {
            clamped += clamps[k];
            if (!errors[k].empty()) {
                ++flagged;
                failures.push_back({{"lambda", lambda}, {"trial", k}, {"error", errors[k]}});
                continue;
            }
            kde_ok.push_back(kde[k]);
            fisher_ok.push_back(fisher[k]);
        }
        if (cfg.compare_oracle) orc_ok = orc;

        const SampleStats sk = sample_stats(kde_ok);
        t.add_row({lambda, mean_of(raw), bbp_outlier(lambda, d), fraction(count_above(raw, level), trials),
                   kde_ok.empty() ? kNaN : sk.mean, sk.stderr_mean,
                   fraction(count_above(kde_ok, level), trials), kde_ok.empty() ? kNaN : mean_of(fisher_ok),
                   orc_ok.empty() ? kNaN : mean_of(orc_ok), bbp_outlier(oracle_eff, d),
                   orc_ok.empty() ? kNaN : fraction(count_above(orc_ok, level), trials), level, flagged,
                   static_cast<long long>(trials)});
    }
    t.manifest = {{"d", d.value()},
                  {"edge", edge},
                  {"detection_threshold", level},
                  {"clamped_entries", clamped},
                  {"failures", failures}};
    return t;
}

}  // namespace spiked
