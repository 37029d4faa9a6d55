#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "rmfc/common.hpp"
#include "rmfc/space.hpp"
#include "rmfc/transport.hpp"

namespace rmfc {

/// Probability vector over a FiniteSpace. Immutable after construction.
class Dist {
public:
    /// Empty placeholder (null space); every operation requires a real one.
    Dist() = default;

    Dist(SpacePtr space, std::vector<double> weights)
        : space_(std::move(space)), w_(std::move(weights)) {
        if (!space_) throw ValidationError("Dist: null space");
        if (static_cast<int>(w_.size()) != space_->size())
            throw DimensionError("Dist: weight count does not match space size");
        double s = 0.0;
        for (double x : w_) {
            if (!(x >= 0.0)) throw ValidationError("Dist: negative weight");
            s += x;
        }
        if (std::abs(s - 1.0) > kMassTol)
            throw ValidationError("Dist: mass " + fmt_double(s) + " not within 1e-12 of 1");
    }

    static Dist dirac(SpacePtr space, int index) {
        std::vector<double> w(static_cast<std::size_t>(space->size()), 0.0);
        w[static_cast<std::size_t>(index)] = 1.0;
        return Dist(std::move(space), std::move(w));
    }

    static Dist uniform(SpacePtr space) {
        const int n = space->size();
        std::vector<double> w(static_cast<std::size_t>(n), 1.0 / n);
        return Dist(std::move(space), std::move(w));
    }

    const SpacePtr& space() const { return space_; }
    const std::vector<double>& weights() const { return w_; }
    double operator[](int i) const { return w_[static_cast<std::size_t>(i)]; }
    int size() const { return static_cast<int>(w_.size()); }

    /// First moment of the coordinates.
    double mean_coord() const {
        double m = 0.0;
        for (int i = 0; i < size(); ++i) m += w_[static_cast<std::size_t>(i)] * space_->coord(i);
        return m;
    }

    bool same_space(const Dist& other) const { return space_->same_as(*other.space_); }

private:
    SpacePtr space_;
    std::vector<double> w_;
};

inline double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

inline double linf_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
    return s;
}

/// Exact 1-Wasserstein distance with an explicit pairwise cost table.
inline double w1_finite(const Dist& mu, const Dist& nu, const std::vector<double>& metric) {
    if (!mu.same_space(nu)) throw DimensionError("w1_finite: distributions on different spaces");
    const std::size_t n = static_cast<std::size_t>(mu.size());
    if (metric.size() != n * n) throw DimensionError("w1_finite: metric table shape mismatch");
    return transport_cost(mu.weights(), nu.weights(), metric);
}

/// Exact 1-Wasserstein distance under the space's own metric.
inline double w1_finite(const Dist& mu, const Dist& nu) {
    if (!mu.same_space(nu)) throw DimensionError("w1_finite: distributions on different spaces");
    return transport_cost(mu.weights(), nu.weights(), mu.space()->metric());
}

}  // namespace rmfc
