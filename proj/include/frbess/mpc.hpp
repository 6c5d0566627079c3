#pragma once

// Hour-ahead dispatch planner on the low-fidelity reservoir model.
//
// The planner sees the battery as a lossless energy reservoir E driven by
// the regulation signal and a constant baseline purchase.  For a horizon of
// N hours at S steps per hour it builds one LP:
//
//   vars   E_0..E_NS, P_0..P_{NS-1}, F_h, O_h, L_h        (2*N*S + 1 + 3N)
//   rows   E_{s+1} = E_s + P_s / S                         (dynamics)
//          P_s     = alpha_s * F_h + O_h - L_h             (coupling)
//   box    E_0 pinned at the measured state, E_NS pinned at the terminal
//          target, interior E inside the operating band, |P| <= power_mw,
//          F,O,L in [0, power_mw]
//   max    sum_h  pi_f_h * F_h - pi_e_h * O_h - sell_penalty * L_h
//
// With the defaults (N=1, S=1800) that is 3604 variables and 3600 equality
// rows.  F is the regulation capacity sold for the hour, O the baseline
// energy bought, L energy shed; only the net d = O - L enters the dynamics,
// so after the solve the pair is re-projected onto O*L = 0.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <frbess/common.hpp>
#include <frbess/lp.hpp>

namespace frbess {

struct MpcConfig {
    int steps_per_hour = 1800;
    double energy_mwh = 1.0;    // nameplate reservoir size
    double power_mw = 10.0;     // symmetric converter limit
    double band_lo = 0.1;       // operating band, fractions of usable capacity
    double band_hi = 0.9;
    double terminal = 0.5;      // end-of-horizon target fraction
    double sell_penalty = 1e-6; // keeps the O/L split unique

    double usable(double cf) const { return (1.0 - cf) * energy_mwh; }
};

struct HourForecast {
    double pi_f = 0.0; // $/MW-h regulation capacity price
    double pi_e = 0.0; // $/MWh energy price
    std::vector<double> alpha; // predicted signal, one entry per step
};

struct Commitment {
    double f = 0.0;
    double o = 0.0;
    double l = 0.0;
    double dispatch() const { return o - l; }
};

struct MpcPlan {
    std::vector<Commitment> hours;
    double objective = 0.0;
    bool fallback = false; // LP failed, plan is the recentering default
};

inline LpProblem build_lf_mpc(const MpcConfig& cfg, double e0, double cf0,
                              const std::vector<HourForecast>& fc) {
    const int n = static_cast<int>(fc.size());
    if (n == 0) throw std::invalid_argument("build_lf_mpc: empty horizon");
    const int sp = cfg.steps_per_hour;
    for (const auto& h : fc)
        if (static_cast<int>(h.alpha.size()) != sp)
            throw std::invalid_argument("build_lf_mpc: alpha length != steps_per_hour");
    const int ns = n * sp;
    const double cap = cfg.usable(cf0);
    const double lo = cfg.band_lo * cap;
    const double hi = cfg.band_hi * cap;
    const double et = cfg.terminal * cap;

    LpProblem p;
    const int ie = 0;           // E_0..E_ns
    const int ip = ns + 1;      // P_0..P_{ns-1}
    const int iff = ip + ns;    // F_h
    const int io = iff + n;     // O_h
    const int il = io + n;      // L_h

    p.add_var(e0, e0);
    for (int s = 1; s < ns; ++s) p.add_var(lo, hi);
    p.add_var(et, et);
    for (int s = 0; s < ns; ++s) p.add_var(-cfg.power_mw, cfg.power_mw);
    for (int h = 0; h < n; ++h) p.add_var(0.0, cfg.power_mw, fc[h].pi_f);
    for (int h = 0; h < n; ++h) p.add_var(0.0, cfg.power_mw, -fc[h].pi_e);
    for (int h = 0; h < n; ++h) p.add_var(0.0, cfg.power_mw, -cfg.sell_penalty);

    const double dt = 1.0 / sp;
    for (int s = 0; s < ns; ++s)
        p.add_eq({{ie + s + 1, 1.0}, {ie + s, -1.0}, {ip + s, -dt}}, 0.0);
    for (int s = 0; s < ns; ++s) {
        const int h = s / sp;
        const double a = fc[h].alpha[s % sp];
        p.add_eq({{ip + s, 1.0}, {iff + h, -a}, {io + h, -1.0}, {il + h, 1.0}}, 0.0);
    }
    p.validate();
    return p;
}

// Plan used when the LP has no solution (state outside the band, terminal
// unreachable): sell no capacity and walk the reservoir back to the target.
inline MpcPlan recentering_plan(const MpcConfig& cfg, double e0, double cf0, int n) {
    MpcPlan plan;
    plan.fallback = true;
    double e = e0;
    const double target = cfg.terminal * cfg.usable(cf0);
    for (int h = 0; h < n; ++h) {
        const double d = clamp(target - e, -cfg.power_mw, cfg.power_mw);
        plan.hours.push_back({0.0, std::max(d, 0.0), std::max(-d, 0.0)});
        e += d;
    }
    return plan;
}

inline MpcPlan solve_lf_mpc(const MpcConfig& cfg, double e0, double cf0,
                            const std::vector<HourForecast>& fc,
                            bool allow_fallback = true) {
    const int n = static_cast<int>(fc.size());
    const LpProblem p = build_lf_mpc(cfg, e0, cf0, fc);
    const LpSolution sol = solve_lp(p);
    if (sol.status != LpStatus::Optimal) {
        if (!allow_fallback)
            throw MpcInfeasible("lf-mpc LP " + std::string(to_string(sol.status)));
        return recentering_plan(cfg, e0, cf0, n);
    }
    const int ns = n * cfg.steps_per_hour;
    const int iff = 2 * ns + 1;
    MpcPlan plan;
    plan.objective = sol.obj;
    for (int h = 0; h < n; ++h) {
        const double f = sol.z[iff + h];
        const double d = sol.z[iff + n + h] - sol.z[iff + 2 * n + h];
        plan.hours.push_back({f, std::max(d, 0.0), std::max(-d, 0.0)});
    }
    return plan;
}

inline Commitment lf_mpc_policy(const MpcConfig& cfg, double e0, double cf0,
                                const std::vector<HourForecast>& fc) {
    return solve_lf_mpc(cfg, e0, cf0, fc).hours.front();
}

// Reservoir trajectory over one hour under a fixed commitment; e[0] = e0,
// step count taken from the signal length.
inline std::vector<double> lf_simulate(const Commitment& c, double e0,
                                       const std::vector<double>& alpha) {
    const double dt = 1.0 / static_cast<double>(alpha.size());
    std::vector<double> e(alpha.size() + 1);
    e[0] = e0;
    for (std::size_t s = 0; s < alpha.size(); ++s)
        e[s + 1] = e[s] + dt * (c.f * alpha[s] + c.o - c.l);
    return e;
}

// Index of the first trajectory point outside [lo, hi], ignoring e[0]
// (the initial state is not controllable); -1 when clean.
inline int first_band_violation(const std::vector<double>& e, double lo, double hi,
                                double eps = 1e-9) {
    for (std::size_t s = 1; s < e.size(); ++s)
        if (e[s] < lo - eps || e[s] > hi + eps) return static_cast<int>(s);
    return -1;
}

// Feasible baseline interval for a fixed capacity f under a realized signal:
// intersection over steps of the band and converter constraints, all linear
// in d.  Empty intersection -> nullopt.
inline std::optional<std::pair<double, double>>
dispatch_interval(const MpcConfig& cfg, double e0, double cf0, double f,
                  const std::vector<double>& alpha) {
    const double cap = cfg.usable(cf0);
    const double lo = cfg.band_lo * cap;
    const double hi = cfg.band_hi * cap;
    const double dt = 1.0 / static_cast<double>(alpha.size());
    double dlo = -cfg.power_mw, dhi = cfg.power_mw;
    double acc = 0.0;
    for (std::size_t s = 0; s < alpha.size(); ++s) {
        acc += alpha[s];
        const double denom = dt * static_cast<double>(s + 1);
        const double base = e0 + dt * f * acc;
        dlo = std::max(dlo, (lo - base) / denom);
        dhi = std::min(dhi, (hi - base) / denom);
        dlo = std::max(dlo, -cfg.power_mw - f * alpha[s]);
        dhi = std::min(dhi, cfg.power_mw - f * alpha[s]);
    }
    if (dlo > dhi) {
        if (dlo - dhi > 1e-9) return std::nullopt;
        dlo = dhi = 0.5 * (dlo + dhi);
    }
    return std::make_pair(dlo, dhi);
}

// Repairs a commitment against the signal actually received.  Lexicographic:
// keep as much capacity as possible, then move the baseline as little as
// possible.  The feasible capacity set is an interval [0, f_max] (the gap
// between the pointwise max of lower bounds and min of upper bounds is
// concave in f, and f = 0 is feasible whenever e0 sits inside the band), so
// bisection on f is exact.  nullopt means even a zero commitment cannot get
// the trajectory back inside the band within the hour.
inline std::optional<Commitment>
steer_commitment(const MpcConfig& cfg, double e0, double cf0, const Commitment& c,
                 const std::vector<double>& alpha) {
    auto iv = dispatch_interval(cfg, e0, cf0, c.f, alpha);
    double f = c.f;
    if (!iv) {
        if (!dispatch_interval(cfg, e0, cf0, 0.0, alpha)) return std::nullopt;
        double good = 0.0, bad = c.f;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (good + bad);
            if (dispatch_interval(cfg, e0, cf0, mid, alpha)) good = mid;
            else bad = mid;
        }
        f = good;
        iv = dispatch_interval(cfg, e0, cf0, f, alpha);
    }
    const double d = clamp(c.dispatch(), iv->first, iv->second);
    return Commitment{f, std::max(d, 0.0), std::max(-d, 0.0)};
}

} // namespace frbess
