#pragma once

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmfc {

/// Invalid input data: bad distributions, malformed models, out-of-range targets.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Shape or space mismatch between operands.
class DimensionError : public ValidationError {
public:
    explicit DimensionError(const std::string& what) : ValidationError(what) {}
};

/// Iterative scheme failed to reach tolerance; carries the residual history.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<double> residuals)
        : std::runtime_error(what), residual_history(std::move(residuals)) {}
    std::vector<double> residual_history;
};

/// Artifact/config incompatibility (stale hash, wrong magic, version skew).
class ArtifactError : public std::runtime_error {
public:
    explicit ArtifactError(const std::string& what) : std::runtime_error(what) {}
};

// Normalization tolerance applied when constructing probability vectors.
inline constexpr double kMassTol = 1e-12;

inline std::uint64_t binomial_u64(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    if (k > n - k) k = n - k;
    unsigned __int128 r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;  // C(n-k+i, i), exact at every step
        if (r > UINT64_MAX) throw std::overflow_error("binomial_u64 overflow");
    }
    return static_cast<std::uint64_t>(r);
}

/// Shortest decimal string that round-trips the double exactly.
inline std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

/// Explicit renormalization helper; the only place mass is rescaled.
inline std::vector<double> renorm(std::vector<double> w) {
    double s = sum(w);
    if (!(s > 0.0)) throw ValidationError("renorm: total mass is not positive");
    for (double& x : w) x /= s;
    return w;
}

}  // namespace rmfc
