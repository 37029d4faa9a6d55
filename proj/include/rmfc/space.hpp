#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "rmfc/common.hpp"

namespace rmfc {

/// Finite labeled metric space. Immutable after construction; shared across
/// threads via shared_ptr.
class FiniteSpace {
public:
    /// General constructor with an explicit pairwise distance table (row-major n x n).
    FiniteSpace(std::vector<std::string> labels, std::vector<double> coords,
                std::vector<double> metric)
        : labels_(std::move(labels)), coords_(std::move(coords)), metric_(std::move(metric)) {
        validate();
        detect_line_metric();
    }

    /// Space on the real line: metric(i,j) = |coords[i] - coords[j]|.
    static std::shared_ptr<const FiniteSpace> line(std::vector<std::string> labels,
                                                   std::vector<double> coords) {
        const std::size_t n = coords.size();
        std::vector<double> m(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) m[i * n + j] = std::abs(coords[i] - coords[j]);
        return std::make_shared<const FiniteSpace>(std::move(labels), std::move(coords),
                                                   std::move(m));
    }

    /// Integer range {lo, lo+1, ..., hi} with labels equal to the values.
    static std::shared_ptr<const FiniteSpace> int_range(int lo, int hi) {
        std::vector<std::string> labels;
        std::vector<double> coords;
        for (int v = lo; v <= hi; ++v) {
            labels.push_back(std::to_string(v));
            coords.push_back(static_cast<double>(v));
        }
        return line(std::move(labels), std::move(coords));
    }

    static std::shared_ptr<const FiniteSpace> from_values(const std::vector<double>& values) {
        std::vector<std::string> labels;
        for (double v : values) labels.push_back(fmt_double(v));
        return line(std::move(labels), values);
    }

    int size() const { return static_cast<int>(labels_.size()); }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::vector<double>& coords() const { return coords_; }
    double coord(int i) const { return coords_[static_cast<std::size_t>(i)]; }
    double dist(int i, int j) const { return metric_[static_cast<std::size_t>(i) * labels_.size() + j]; }
    const std::vector<double>& metric() const { return metric_; }

    /// True when the metric equals |coord(i) - coord(j)| on every pair, which
    /// licenses the O(n) cumulative-mass form of W1.
    bool line_metric() const { return line_metric_; }
    /// Point indices sorted by coordinate (only meaningful when line_metric()).
    const std::vector<int>& line_order() const { return line_order_; }

    int index_of(const std::string& label) const {
        for (int i = 0; i < size(); ++i)
            if (labels_[static_cast<std::size_t>(i)] == label) return i;
        throw ValidationError("unknown label '" + label + "'");
    }

    double diameter() const {
        double d = 0.0;
        for (double m : metric_) d = std::max(d, m);
        return d;
    }

    bool same_as(const FiniteSpace& other) const {
        return this == &other ||
               (labels_ == other.labels_ && coords_ == other.coords_ && metric_ == other.metric_);
    }

private:
    void validate() {
        const std::size_t n = labels_.size();
        if (n == 0) throw ValidationError("FiniteSpace: empty label set");
        if (coords_.size() != n) throw ValidationError("FiniteSpace: coords size mismatch");
        if (metric_.size() != n * n) throw ValidationError("FiniteSpace: metric size mismatch");
        std::unordered_set<std::string> seen(labels_.begin(), labels_.end());
        if (seen.size() != n) throw ValidationError("FiniteSpace: duplicate labels");
        for (std::size_t i = 0; i < n; ++i) {
            if (metric_[i * n + i] != 0.0)
                throw ValidationError("FiniteSpace: metric diagonal must be exactly zero");
            for (std::size_t j = 0; j < n; ++j) {
                const double d = metric_[i * n + j];
                if (!(d >= 0.0)) throw ValidationError("FiniteSpace: negative metric entry");
                if (i != j && d == 0.0)
                    throw ValidationError("FiniteSpace: off-diagonal zero distance");
                if (metric_[j * n + i] != d)
                    throw ValidationError("FiniteSpace: metric not symmetric");
            }
        }
        const double scale = *std::max_element(metric_.begin(), metric_.end());
        const double slack = 1e-9 * std::max(1.0, scale);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = 0; k < n; ++k)
                    if (metric_[i * n + j] > metric_[i * n + k] + metric_[k * n + j] + slack)
                        throw ValidationError("FiniteSpace: triangle inequality violated");
    }

    void detect_line_metric() {
        const std::size_t n = labels_.size();
        line_metric_ = true;
        for (std::size_t i = 0; i < n && line_metric_; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (metric_[i * n + j] != std::abs(coords_[i] - coords_[j])) {
                    line_metric_ = false;
                    break;
                }
        if (line_metric_) {
            line_order_.resize(n);
            std::iota(line_order_.begin(), line_order_.end(), 0);
            std::stable_sort(line_order_.begin(), line_order_.end(),
                             [&](int a, int b) { return coords_[static_cast<std::size_t>(a)] < coords_[static_cast<std::size_t>(b)]; });
        }
    }

    std::vector<std::string> labels_;
    std::vector<double> coords_;
    std::vector<double> metric_;
    bool line_metric_ = false;
    std::vector<int> line_order_;
};

using SpacePtr = std::shared_ptr<const FiniteSpace>;

}  // namespace rmfc
