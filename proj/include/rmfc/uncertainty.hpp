#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "rmfc/dist.hpp"
#include "rmfc/rng.hpp"

namespace rmfc {

/// One perturbation step: subtract the coordinate mean from the raw draw, add
/// to v_ref, clip at zero, renormalize. Returns nullopt if the clipped vector
/// has no mass (cannot happen for mean-zero perturbations of a probability
/// vector, but guarded anyway).
inline std::optional<std::vector<double>> apply_perturbation(const std::vector<double>& v_ref,
                                                             const std::vector<double>& raw) {
    if (raw.size() != v_ref.size()) throw DimensionError("apply_perturbation: size mismatch");
    double mean = 0.0;
    for (double x : raw) mean += x;
    mean /= static_cast<double>(raw.size());
    std::vector<double> v(v_ref.size());
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = std::max(0.0, v_ref[i] + (raw[i] - mean));
        s += v[i];
    }
    if (!(s > 0.0)) return std::nullopt;
    for (double& x : v) x /= s;
    return v;
}

/// {v_ref} plus `count` i.i.d. mean-zero uniform perturbations of it, clipped
/// and renormalized; deduplicated so the delta=0 reduction to the singleton is
/// exact. Pure function of (v_ref, delta, count, seed).
inline std::vector<Dist> make_perturbed_uncertainty_set(const Dist& v_ref, double delta, int count,
                                                        std::uint64_t seed) {
    if (count < 1) throw ValidationError("make_perturbed_uncertainty_set: count must be >= 1");
    if (!(delta >= 0.0)) throw ValidationError("make_perturbed_uncertainty_set: delta must be >= 0");
    CounterRng rng(seed);
    const int n = v_ref.size();
    std::vector<Dist> out;
    out.push_back(v_ref);
    auto near_duplicate = [&](const std::vector<double>& w) {
        for (const Dist& d : out)
            if (linf_distance(d.weights(), w) <= 1e-12) return true;
        return false;
    };
    for (int i = 0; i < count; ++i) {
        std::optional<std::vector<double>> v;
        for (int attempt = 0; attempt < 64 && !v; ++attempt) {
            std::vector<double> raw(static_cast<std::size_t>(n));
            for (int c = 0; c < n; ++c)
                raw[static_cast<std::size_t>(c)] =
                    rng.uniform(-delta, delta,
                                {static_cast<std::uint64_t>(RngChannel::perturbation),
                                 static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(attempt),
                                 static_cast<std::uint64_t>(c)});
            v = apply_perturbation(v_ref.weights(), raw);
        }
        if (!v)
            throw ValidationError("make_perturbed_uncertainty_set: clipped draw had no mass");
        if (!near_duplicate(*v)) out.emplace_back(v_ref.space(), std::move(*v));
    }
    return out;
}

}  // namespace rmfc
