#pragma once

// Closed-loop evaluation: a policy proposes an hourly commitment, the
// commitment is checked and repaired against the signal the plant actually
// receives, and the high-fidelity cell simulation advances the state.
//
// Repair ladder, in order:
//   1. steer_commitment against the realized signal (baseline shift, then
//      capacity shed, both on the reservoir model);
//   2. if the cell still cannot deliver the hour, shed capacity in fixed
//      bites and re-steer after each bite;
//   3. halve the baseline, and finally rest the pack for the hour (zero
//      power is always deliverable).
//
// Revenue counts the capacity actually carried, cost the energy actually
// bought; both are what the repaired commitment executed, not what the
// policy asked for.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <frbess/cell_model.hpp>
#include <frbess/csv.hpp>
#include <frbess/market.hpp>
#include <frbess/mpc.hpp>
#include <frbess/neural.hpp>

namespace frbess {

struct EnvConfig {
    CellParams cell;
    MpcConfig mpc;
    double pi_cf = 12000.0;      // $ per unit of capacity fade
    double dev_weight = 5.0;     // quadratic pull toward the recentering target
    double eol_cf = 0.2;
    double repair_step_mw = 0.5;
};

// x = [mean(alpha_fc), var(alpha_fc), pi_f, pi_e, E, Cf]
inline std::vector<double> policy_features(const std::vector<double>& alpha_fc, double pi_f,
                                           double pi_e, double e_mwh, double cf) {
    return {mean_of(alpha_fc), var_of(alpha_fc), pi_f, pi_e, e_mwh, cf};
}

inline double stage_reward(double pi_f, double pi_e, const Commitment& c, double dcf,
                           double e_ratio_after, double cf_after, double pi_cf,
                           double dev_weight) {
    const double dev = e_ratio_after - 0.5 * (1.0 - cf_after);
    return pi_f * c.f - pi_e * c.o - pi_cf * dcf - dev_weight * dev * dev;
}

struct StepOutcome {
    Commitment executed;
    SpState state;
    double reward = 0.0, revenue = 0.0, cost = 0.0;
    int repairs = 0;
    bool steered = false;
    bool rested = false;
};

inline StepOutcome step_hour(const EnvConfig& env, const SpState& before, double pi_f,
                             double pi_e, const std::vector<double>& alpha_real,
                             const Commitment& want) {
    const double e0 = stored_energy_mwh(env.cell, before);
    const double dt = 3600.0 / static_cast<double>(alpha_real.size());

    auto attempt = [&](const Commitment& c) -> std::optional<HourResult> {
        std::vector<double> p_mw(alpha_real.size());
        for (std::size_t s = 0; s < alpha_real.size(); ++s)
            p_mw[s] = c.f * alpha_real[s] + c.o - c.l;
        try {
            return simulate_hour(env.cell, before, p_mw, dt);
        } catch (const InfeasibleHour&) {
            return std::nullopt;
        }
    };

    StepOutcome out;
    Commitment c = want;
    if (auto s = steer_commitment(env.mpc, e0, before.cf, c, alpha_real)) {
        out.steered = s->f != c.f || s->o != c.o || s->l != c.l;
        c = *s;
    } else {
        // Cannot re-enter the band this hour: stop bidding and walk back.
        const double d =
            clamp(env.mpc.terminal * env.mpc.usable(before.cf) - e0, -env.mpc.power_mw,
                  env.mpc.power_mw);
        c = Commitment{0.0, std::max(d, 0.0), std::max(-d, 0.0)};
        out.steered = true;
    }

    std::optional<HourResult> sim = attempt(c);
    int guard = static_cast<int>(std::ceil(want.f / env.repair_step_mw)) + 1;
    while (!sim && c.f > 0.0 && guard-- > 0) {
        Commitment next{std::max(0.0, c.f - env.repair_step_mw), c.o, c.l};
        if (auto s = steer_commitment(env.mpc, e0, before.cf, next, alpha_real)) next = *s;
        c = next;
        ++out.repairs;
        sim = attempt(c);
    }
    for (int k = 0; !sim && k < 3; ++k) {
        c = Commitment{0.0, 0.5 * c.o, 0.5 * c.l};
        ++out.repairs;
        sim = attempt(c);
    }
    if (!sim) {
        c = Commitment{};
        ++out.repairs;
        out.rested = true;
        sim = attempt(c);
    }
    if (!sim) throw InfeasibleHour(0, "rest hour failed; cell state is unphysical");

    out.executed = c;
    out.state = sim->state;
    out.revenue = pi_f * c.f;
    out.cost = pi_e * c.o;
    const double e_ratio = stored_energy_mwh(env.cell, out.state) / env.cell.pack.energy_mwh;
    out.reward = stage_reward(pi_f, pi_e, c, out.state.cf - before.cf, e_ratio, out.state.cf,
                              env.pi_cf, env.dev_weight);
    return out;
}

// One (state, action, reward, next state) tuple; the action is the executed
// (f, d) pair so the tuple stays consistent with the realized dynamics.
struct Transition {
    std::vector<double> x;  // 6 features
    std::vector<double> a;  // {f, d}
    double r = 0.0;
    std::vector<double> xn; // features at the next decision point
    bool done = false;      // end of battery life, not end of episode
};

// --- policies under test -----------------------------------------------------

struct FrPolicy {
    enum class Kind { Zero, LfMpc, SlNet, RlNet };
    Kind kind = Kind::Zero;
    PolicyNet net; // SlNet / RlNet only

    static FrPolicy zero() { return {}; }
    static FrPolicy lf_mpc() { return {Kind::LfMpc, {}}; }
    static FrPolicy sl(PolicyNet n) { return {Kind::SlNet, std::move(n)}; }
    static FrPolicy rl(PolicyNet n) { return {Kind::RlNet, std::move(n)}; }

    const char* name() const {
        switch (kind) {
            case Kind::Zero: return "zero";
            case Kind::LfMpc: return "lfmpc";
            case Kind::SlNet: return "sl";
            default: return "rl";
        }
    }
};

inline Commitment action_to_commitment(const std::vector<double>& a) {
    return Commitment{std::max(0.0, a.at(0)), std::max(a.at(1), 0.0), std::max(-a.at(1), 0.0)};
}

inline Commitment decide(const FrPolicy& pol, const EnvConfig& env, const SpState& st,
                         double pi_f, double pi_e, const std::vector<double>& alpha_fc) {
    switch (pol.kind) {
        case FrPolicy::Kind::Zero: return {};
        case FrPolicy::Kind::LfMpc: {
            const double e = stored_energy_mwh(env.cell, st);
            return solve_lf_mpc(env.mpc, e, st.cf, {HourForecast{pi_f, pi_e, alpha_fc}})
                .hours.front();
        }
        default: {
            const double e = stored_energy_mwh(env.cell, st);
            return action_to_commitment(pol.net.act(policy_features(alpha_fc, pi_f, pi_e, e, st.cf)));
        }
    }
}

// --- closed-loop evaluation ----------------------------------------------------

struct HourLog {
    long hour = 0;
    Commitment c;
    double pi_f = 0.0, pi_e = 0.0, e_mwh = 0.0, cf = 0.0, reward = 0.0;
};

struct EvalResult {
    std::string policy;
    long lifetime_h = 0;
    double revenue = 0.0, cost = 0.0, profit = 0.0;
    double cum_fr_band_mw = 0.0; // sum of executed capacity
    double purchased_mwh = 0.0;  // sum of executed baseline buys
    double final_cf = 0.0;
    bool reached_eol = false;
    std::vector<HourLog> trace;
};

struct EvalOptions {
    long max_hours = 2000000;
    std::uint64_t seed = 1;
    double soc0 = 0.5;
    bool keep_trace = true;
};

// Scenario randomness depends only on (seed, hour), never on the policy, so
// different policies at the same seed face identical prices and signals.
inline EvalResult evaluate_policy(const EnvConfig& env, const FrPolicy& pol,
                                  const PriceModels& prices, const SignalPool& pool,
                                  const EvalOptions& opt) {
    std::mt19937_64 rng_pe(split_seed(opt.seed, "eval-energy-price"));
    std::mt19937_64 rng_pf(split_seed(opt.seed, "eval-fr-price"));
    std::mt19937_64 rng_fc(split_seed(opt.seed, "eval-alpha-forecast"));
    std::mt19937_64 rng_re(split_seed(opt.seed, "eval-alpha-realized"));

    SpState st = initial_state(env.cell, opt.soc0);
    EvalResult r;
    r.policy = pol.name();
    std::vector<double> pe, pf;
    for (long hour = 0; hour < opt.max_hours; ++hour) {
        const int how = static_cast<int>(hour % kHoursPerWeek);
        if (how == 0) {
            pe = prices.energy.sample_week(rng_pe);
            pf = prices.fr.sample_week(rng_pf);
        }
        const std::vector<double>& alpha_fc = pool.sample(rng_fc);
        const std::vector<double>& alpha_real = pool.sample(rng_re);
        const Commitment want = decide(pol, env, st, pf[how], pe[how], alpha_fc);
        const StepOutcome o = step_hour(env, st, pf[how], pe[how], alpha_real, want);
        st = o.state;
        r.revenue += o.revenue;
        r.cost += o.cost;
        r.cum_fr_band_mw += o.executed.f;
        r.purchased_mwh += o.executed.o;
        ++r.lifetime_h;
        if (opt.keep_trace)
            r.trace.push_back({hour, o.executed, pf[how], pe[how],
                               stored_energy_mwh(env.cell, st), st.cf, o.reward});
        if (st.cf >= env.eol_cf) {
            r.reached_eol = true;
            break;
        }
    }
    r.final_cf = st.cf;
    r.profit = r.revenue - r.cost;
    return r;
}

inline void write_eval_summary(const std::string& path, const std::vector<EvalResult>& rs) {
    csv::Writer w(path);
    w.raw_line("policy,lifetime_h,revenue,cost,profit,cum_fr_band_mw,purchased_mwh");
    for (const auto& r : rs)
        w.row(r.policy, r.lifetime_h, r.revenue, r.cost, r.profit, r.cum_fr_band_mw,
              r.purchased_mwh);
    w.close();
}

inline void write_eval_trace(const std::string& path, const EvalResult& r) {
    csv::Writer w(path);
    w.raw_line("hour,F,O,L,pi_f,pi_e,E,Cf,reward");
    for (const auto& h : r.trace)
        w.row(h.hour, h.c.f, h.c.o, h.c.l, h.pi_f, h.pi_e, h.e_mwh, h.cf, h.reward);
    w.close();
}

// Two-column series for plotting tools.
inline void write_series(const std::string& path, const std::string& header,
                         const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("write_series: length mismatch");
    csv::Writer w(path);
    w.raw_line(header);
    for (std::size_t i = 0; i < xs.size(); ++i) w.row(xs[i], ys[i]);
    w.close();
}

} // namespace frbess
