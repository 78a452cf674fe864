#pragma once

#include <vector>

#include "spiked/noise.hpp"

namespace spiked {

struct NoiseModel::KdeState {
    explicit KdeState(KdeGrid g);

    double density(double x) const;
    double derivative(double x) const;
    double score(double x) const;
    double score_derivative(double x) const;
    double sample(Rng& rng) const;

    // Trapezoid sums over the nodes of the reliable region; node values are
    // exact kernel sums, so these avoid integrating the piecewise interpolant.
    double fisher() const;
    double moment(int k) const;
    double expect(const std::function<double(double)>& f) const;

    KdeGrid grid;
    double reliable_radius = 0.0;

private:
    double raw_score(double x) const;

    std::vector<double> cdf_;
    double edge_score_ = 0.0;
    double edge_slope_ = 0.0;
};

}  // namespace spiked
