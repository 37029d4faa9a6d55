#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "rmfc/dist.hpp"

namespace rmfc {

enum class ProjectionNorm { W1, L1 };

namespace detail {
struct CountsHash {
    std::size_t operator()(const std::vector<int>& v) const {
        std::uint64_t h = 1469598103934665603ull;
        for (int x : v) {
            h ^= static_cast<std::uint64_t>(x) + 0x9e3779b97f4a7c15ull;
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }
};
}  // namespace detail

/// All probability vectors on a FiniteSpace with weights in {0, 1/k, ..., 1},
/// enumerated in ascending lexicographic order of the integer count vectors.
/// That order is the canonical index used for every tie-break in the toolkit.
class SimplexGrid {
public:
    SimplexGrid(SpacePtr space, int resolution) : space_(std::move(space)), k_(resolution) {
        if (k_ < 1) throw ValidationError("SimplexGrid: resolution must be >= 1");
        const int n = space_->size();
        const std::uint64_t expect = binomial_u64(static_cast<std::uint64_t>(k_ + n - 1),
                                                  static_cast<std::uint64_t>(n - 1));
        if (expect > (1ull << 31))
            throw ValidationError("SimplexGrid: grid would have " + std::to_string(expect) +
                                  " points; reduce resolution");
        std::vector<int> cur(static_cast<std::size_t>(n), 0);
        enumerate(cur, 0, k_);
        if (counts_.size() != expect) throw std::logic_error("SimplexGrid: enumeration mismatch");
        index_.reserve(counts_.size() * 2);
        for (std::size_t i = 0; i < counts_.size(); ++i) index_.emplace(counts_[i], static_cast<int>(i));
        if (space_->line_metric()) {
            build_line_cache();
            line_identity_ = true;
            for (int i = 0; i < space_->size(); ++i)
                if (space_->line_order()[static_cast<std::size_t>(i)] != i) line_identity_ = false;
        }
    }

    const SpacePtr& space() const { return space_; }
    int resolution() const { return k_; }
    int size() const { return static_cast<int>(counts_.size()); }
    const std::vector<int>& counts(int i) const { return counts_[static_cast<std::size_t>(i)]; }

    const std::vector<double>& point_weights(int i) const { return weights_[static_cast<std::size_t>(i)]; }

    Dist point(int i) const { return Dist(space_, weights_[static_cast<std::size_t>(i)]); }

    /// Index of the grid point with these integer counts, or -1.
    int find(const std::vector<int>& counts) const {
        auto it = index_.find(counts);
        return it == index_.end() ? -1 : it->second;
    }

    /// Nearest grid point under the chosen norm; ties go to the lowest index.
    int project(const Dist& mu, ProjectionNorm norm = ProjectionNorm::W1) const {
        if (!mu.space()->same_as(*space_)) throw DimensionError("project: space mismatch");
        return project(mu.weights(), norm);
    }

    int project(const std::vector<double>& w, ProjectionNorm norm = ProjectionNorm::W1) const {
        // Closed-form W1 projection on a line: round each cumulative mass to the
        // nearest multiple of 1/k. Each |F_mu - F_nu| term is minimized
        // independently and rounding preserves monotonicity, so the rounded
        // cumulative sequence is a grid point attaining the global minimum.
        // Exact halves round down, which selects the lexicographically smallest
        // count vector, i.e. the lowest canonical index.
        if (norm == ProjectionNorm::W1 && line_identity_) {
            thread_local std::vector<int> counts;
            counts.resize(w.size());
            double cum = 0.0;
            int prev = 0;
            for (std::size_t t = 0; t + 1 < w.size(); ++t) {
                cum += w[t];
                int r = static_cast<int>(std::ceil(cum * k_ - 0.5));
                r = std::max(prev, std::min(r, k_));
                counts[t] = r - prev;
                prev = r;
            }
            counts[w.size() - 1] = k_ - prev;
            const int idx = find(counts);
            if (idx >= 0) return idx;
        }
        // Exact-lattice fast path: a point whose weights are (near-)multiples of
        // 1/k is its own unique nearest neighbour.
        thread_local std::vector<int> quant;
        thread_local std::vector<double> cum_w;
        {
            quant.resize(w.size());
            int total = 0;
            bool lattice = true;
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double scaled = w[i] * k_;
                const double r = std::round(scaled);
                if (std::abs(scaled - r) > 1e-9) {
                    lattice = false;
                    break;
                }
                quant[i] = static_cast<int>(r);
                total += quant[i];
            }
            if (lattice && total == k_) {
                const int idx = find(quant);
                if (idx >= 0) return idx;
            }
        }
        double best = std::numeric_limits<double>::infinity();
        int best_idx = -1;
        if (norm == ProjectionNorm::L1) {
            for (int i = 0; i < size(); ++i) {
                const double d = l1_distance(w, weights_[static_cast<std::size_t>(i)]);
                if (d < best) {
                    best = d;
                    best_idx = i;
                }
            }
        } else if (space_->line_metric()) {
            const auto& order = space_->line_order();
            const auto& coords = space_->coords();
            const std::size_t n = w.size();
            cum_w.resize(n > 0 ? n - 1 : 0);
            double cum = 0.0;
            for (std::size_t t = 0; t + 1 < n; ++t) {
                cum += w[static_cast<std::size_t>(order[t])];
                cum_w[t] = cum;
            }
            for (int i = 0; i < size(); ++i) {
                const auto& gcum = line_cum_[static_cast<std::size_t>(i)];
                double d = 0.0;
                for (std::size_t t = 0; t + 1 < n; ++t)
                    d += std::abs(cum_w[t] - gcum[t]) *
                         (coords[static_cast<std::size_t>(order[t + 1])] - coords[static_cast<std::size_t>(order[t])]);
                if (d < best) {
                    best = d;
                    best_idx = i;
                }
            }
        } else {
            for (int i = 0; i < size(); ++i) {
                const double d = transport_cost(w, weights_[static_cast<std::size_t>(i)], space_->metric());
                if (d < best) {
                    best = d;
                    best_idx = i;
                }
            }
        }
        if (best_idx < 0) throw ValidationError("project: empty grid");
        return best_idx;
    }

    /// Largest distance from any vertex of the simplex to the grid (covering
    /// radius proxy used in error reports): (1 - 1/k) * max gap for line metrics.
    double mesh_w1() const {
        double worst = 0.0;
        for (int i = 0; i < space_->size(); ++i) {
            Dist d = Dist::dirac(space_, i);
            const int j = project(d, ProjectionNorm::W1);
            worst = std::max(worst, w1_finite(d, point(j)));
        }
        return worst;
    }

private:
    void enumerate(std::vector<int>& cur, int pos, int left) {
        const int n = space_->size();
        if (pos == n - 1) {
            cur[static_cast<std::size_t>(pos)] = left;
            counts_.push_back(cur);
            std::vector<double> w(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = static_cast<double>(cur[static_cast<std::size_t>(i)]) / k_;
            weights_.push_back(std::move(w));
            return;
        }
        for (int c = 0; c <= left; ++c) {
            cur[static_cast<std::size_t>(pos)] = c;
            enumerate(cur, pos + 1, left - c);
        }
    }

    void build_line_cache() {
        const auto& order = space_->line_order();
        const std::size_t n = static_cast<std::size_t>(space_->size());
        line_cum_.resize(weights_.size());
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            auto& cum = line_cum_[i];
            cum.resize(n > 0 ? n - 1 : 0);
            double c = 0.0;
            for (std::size_t t = 0; t + 1 < n; ++t) {
                c += weights_[i][static_cast<std::size_t>(order[t])];
                cum[t] = c;
            }
        }
    }

    SpacePtr space_;
    int k_;
    std::vector<std::vector<int>> counts_;
    std::vector<std::vector<double>> weights_;
    std::unordered_map<std::vector<int>, int, detail::CountsHash> index_;
    std::vector<std::vector<double>> line_cum_;
    bool line_identity_ = false;
};

using GridPtr = std::shared_ptr<const SimplexGrid>;

inline GridPtr build_simplex_grid(SpacePtr space, int k) {
    return std::make_shared<const SimplexGrid>(std::move(space), k);
}

inline int project_to_grid(const Dist& mu, const SimplexGrid& grid,
                           ProjectionNorm norm = ProjectionNorm::W1) {
    return grid.project(mu, norm);
}

}  // namespace rmfc
