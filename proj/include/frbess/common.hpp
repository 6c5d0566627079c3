// Shared constants, error types and small numeric helpers used across the
// library. Everything here is deliberately header-only.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace frbess {

// Physical constants. Fixed, not configurable.
inline constexpr double kFaraday = 96487.0;  // C/mol
inline constexpr double kGasConst = 8.314;   // J/(mol K)

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// --- error taxonomy -------------------------------------------------------

// Newton failed to converge: the requested operating point is outside the
// validity region of the cell model.
struct NonConvergence : std::runtime_error {
    explicit NonConvergence(const std::string& what) : std::runtime_error(what) {}
};

// A surface concentration left (0, c_max); the commanded power is too
// aggressive for the current state.
struct SaturatedSurface : std::runtime_error {
    explicit SaturatedSurface(const std::string& what) : std::runtime_error(what) {}
};

// An hour-long simulation failed at `step`; consumed by the harness repair
// scheme which retries the hour with a reduced commitment.
struct InfeasibleHour : std::runtime_error {
    int step;
    InfeasibleHour(int step_, const std::string& what)
        : std::runtime_error(what), step(step_) {}
};

// The LF-MPC linear program has no feasible point.
struct MpcInfeasible : std::runtime_error {
    explicit MpcInfeasible(const std::string& what) : std::runtime_error(what) {}
};

struct InsufficientData : std::runtime_error {
    explicit InsufficientData(const std::string& what) : std::runtime_error(what) {}
};

// --- seeding helpers -------------------------------------------------------

// splitmix64; used to derive independent sub-seeds from (seed, tag) pairs so
// per-hour / per-policy randomness does not depend on call order.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t split_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 1469598103934665603ULL; // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return split_seed(seed, h);
}

// --- small numeric helpers -------------------------------------------------

inline double clamp(double x, double lo, double hi) {
    return x < lo ? lo : (x > hi ? hi : x);
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Population variance (1/n).
inline double var_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

}  // namespace frbess
