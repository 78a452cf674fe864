#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "kde_state.hpp"
#include "spiked/errors.hpp"

namespace spiked {

namespace {

constexpr double kTailDensity = 1e-12;
// Kernel support in bandwidths; exp(-32) is below double resolution of the sum.
constexpr double kKernelReach = 8.0;
constexpr double kStepsPerBandwidth = 10.0;
constexpr std::size_t kMinSamples = 1000;

struct Cell {
    std::size_t index;
    double t;
};

Cell locate(const KdeGrid& g, double x) {
    const double pos = (x - g.x0) / g.step;
    const auto last = g.density.size() - 1;
    if (pos <= 0.0) return {0, 0.0};
    if (pos >= static_cast<double>(last)) return {last - 1, 1.0};
    const auto i = static_cast<std::size_t>(pos);
    return {i, pos - static_cast<double>(i)};
}

double hermite(double p0, double m0, double p1, double m1, double h, double t) {
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * p0 + (t3 - 2 * t2 + t) * h * m0 + (-2 * t3 + 3 * t2) * p1 +
           (t3 - t2) * h * m1;
}

bool inside(const KdeGrid& g, double x) {
    const double hi = g.x0 + g.step * static_cast<double>(g.density.size() - 1);
    return x >= g.x0 && x <= hi;
}

}  // namespace

NoiseModel::KdeState::KdeState(KdeGrid g) : grid(std::move(g)) {
    const std::size_t n = grid.density.size();
    if (n < 4 || grid.derivative.size() != n || grid.second_derivative.size() != n ||
        !(grid.step > 0.0)) {
        throw ValidationError("kde grid is malformed");
    }
    // Reliable region: the largest |x| such that every node in [0, |x|] has g >= 1e-12.
    const double origin = -grid.x0 / grid.step;
    auto centre = static_cast<std::size_t>(std::lround(origin));
    if (centre >= n) throw ValidationError("kde grid does not contain the origin");
    std::size_t hi = centre;
    while (hi + 1 < n && grid.density[hi + 1] >= kTailDensity) ++hi;
    std::size_t lo = centre;
    while (lo > 0 && grid.density[lo - 1] >= kTailDensity) --lo;
    const double right = grid.x0 + grid.step * static_cast<double>(hi);
    const double left = -(grid.x0 + grid.step * static_cast<double>(lo));
    reliable_radius = std::min(right, left);
    if (!(reliable_radius > 2.0 * grid.step)) {
        throw NumericalError("kde grid has no region with density above 1e-12");
    }

    edge_score_ = raw_score(reliable_radius);
    edge_slope_ = (edge_score_ - raw_score(reliable_radius - grid.step)) / grid.step;

    cdf_.assign(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        cdf_[i] = cdf_[i - 1] + 0.5 * grid.step * (grid.density[i - 1] + grid.density[i]);
    }
    const double total = cdf_.back();
    for (auto& c : cdf_) c /= total;
}

double NoiseModel::KdeState::density(double x) const {
    if (!inside(grid, x)) return 0.0;
    const auto [i, t] = locate(grid, x);
    return std::max(0.0, hermite(grid.density[i], grid.derivative[i], grid.density[i + 1],
                                 grid.derivative[i + 1], grid.step, t));
}

double NoiseModel::KdeState::derivative(double x) const {
    if (!inside(grid, x)) return 0.0;
    const auto [i, t] = locate(grid, x);
    return hermite(grid.derivative[i], grid.second_derivative[i], grid.derivative[i + 1],
                   grid.second_derivative[i + 1], grid.step, t);
}

double NoiseModel::KdeState::raw_score(double x) const { return -derivative(x) / density(x); }

double NoiseModel::KdeState::score(double x) const {
    const double ax = std::abs(x);
    if (ax <= reliable_radius) return raw_score(x);
    const double tail = edge_score_ + edge_slope_ * (ax - reliable_radius);
    return x < 0 ? -tail : tail;
}

double NoiseModel::KdeState::score_derivative(double x) const {
    if (std::abs(x) > reliable_radius) return edge_slope_;
    const double g = density(x);
    const double gp = derivative(x);
    const auto [i, t] = locate(grid, x);
    const double gpp = (1.0 - t) * grid.second_derivative[i] + t * grid.second_derivative[i + 1];
    return (gp * gp - gpp * g) / (g * g);
}

double NoiseModel::KdeState::sample(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.begin()) return grid.x0;
    if (it == cdf_.end()) return grid.x0 + grid.step * static_cast<double>(cdf_.size() - 1);
    const auto i = static_cast<std::size_t>(it - cdf_.begin()) - 1;
    const double span = cdf_[i + 1] - cdf_[i];
    const double frac = span > 0.0 ? (u - cdf_[i]) / span : 0.5;
    return grid.x0 + grid.step * (static_cast<double>(i) + frac);
}

double NoiseModel::KdeState::fisher() const {
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.density.size(); ++i) {
        const double x = grid.x0 + grid.step * static_cast<double>(i);
        if (std::abs(x) > reliable_radius) continue;
        const double g = grid.density[i];
        sum += grid.derivative[i] * grid.derivative[i] / g;
    }
    return sum * grid.step;
}

double NoiseModel::KdeState::moment(int k) const {
    return expect([k](double x) { return std::pow(x, k); });
}

double NoiseModel::KdeState::expect(const std::function<double(double)>& f) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.density.size(); ++i) {
        const double x = grid.x0 + grid.step * static_cast<double>(i);
        if (std::abs(x) > reliable_radius) continue;
        sum += f(x) * grid.density[i];
    }
    return sum * grid.step;
}

NoiseModel kde_fit(std::span<const double> samples, std::optional<double> bandwidth) {
    const std::size_t n = samples.size();
    if (n < kMinSamples) {
        throw ValidationError("kde_fit needs at least " + std::to_string(kMinSamples) +
                              " samples, got " + std::to_string(n));
    }
    double delta = bandwidth.value_or(std::pow(static_cast<double>(n), -0.2));
    if (!(delta > 0.0) || !std::isfinite(delta)) {
        throw ValidationError("kde bandwidth must be positive");
    }

    double second = 0.0;
    double extent = 0.0;
    for (double s : samples) {
        if (!std::isfinite(s)) throw ValidationError("kde_fit: non-finite sample");
        second += s * s;
        extent = std::max(extent, std::abs(s));
    }
    second /= static_cast<double>(n);
    // The symmetrized estimate has variance E[s^2] + delta^2; rescale to unit variance.
    const double scale = 1.0 / std::sqrt(second + delta * delta);
    delta *= scale;
    extent *= scale;

    KdeGrid grid;
    grid.bandwidth = delta;
    grid.sample_count = n;
    grid.step = delta / kStepsPerBandwidth;
    const auto half = static_cast<std::size_t>(std::ceil((extent + kKernelReach * delta) / grid.step));
    const std::size_t nodes = 2 * half + 1;
    grid.x0 = -static_cast<double>(half) * grid.step;

    // Linear binning of s and -s, each with weight 1/(2n).
    std::vector<double> bins(nodes, 0.0);
    const double w = 0.5 / static_cast<double>(n);
    auto deposit = [&](double x) {
        const double pos = (x - grid.x0) / grid.step;
        const auto i = static_cast<std::size_t>(pos);
        const double t = pos - static_cast<double>(i);
        bins[i] += w * (1.0 - t);
        if (i + 1 < nodes) bins[i + 1] += w * t;
    };
    for (double s : samples) {
        deposit(s * scale);
        deposit(-s * scale);
    }

    const auto reach = static_cast<std::ptrdiff_t>(std::ceil(kKernelReach * kStepsPerBandwidth));
    std::vector<double> k0(static_cast<std::size_t>(2 * reach + 1));
    std::vector<double> k1(k0.size());
    std::vector<double> k2(k0.size());
    const double norm = 1.0 / (delta * std::sqrt(2.0 * std::numbers::pi));
    for (std::ptrdiff_t j = -reach; j <= reach; ++j) {
        const double u = static_cast<double>(j) * grid.step / delta;
        const double phi = norm * std::exp(-0.5 * u * u);
        const auto idx = static_cast<std::size_t>(j + reach);
        // Kernel K((x - s)/delta)/delta and its x-derivatives, at x - s = j * step.
        k0[idx] = phi;
        k1[idx] = -u / delta * phi;
        k2[idx] = (u * u - 1.0) / (delta * delta) * phi;
    }

    grid.density.assign(nodes, 0.0);
    grid.derivative.assign(nodes, 0.0);
    grid.second_derivative.assign(nodes, 0.0);
    const auto count = static_cast<std::ptrdiff_t>(nodes);
    for (std::ptrdiff_t src = 0; src < count; ++src) {
        const double weight = bins[static_cast<std::size_t>(src)];
        if (weight == 0.0) continue;
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, src - reach);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(count - 1, src + reach);
        for (std::ptrdiff_t dst = lo; dst <= hi; ++dst) {
            const auto idx = static_cast<std::size_t>(dst - src + reach);
            const auto d = static_cast<std::size_t>(dst);
            grid.density[d] += weight * k0[idx];
            grid.derivative[d] += weight * k1[idx];
            grid.second_derivative[d] += weight * k2[idx];
        }
    }
    return kde_from_grid(std::move(grid));
}

}  // namespace spiked
