#pragma once

// Distillation of the dispatch planner into the small policy network, plus
// critic pretraining on the same demonstrations.
//
// Demonstrations are closed-loop: the planner commits, the repaired
// commitment runs on the high-fidelity cell, and the recorded action is the
// executed (f, d) pair.  The battery ages across hours; at end of life it is
// replaced and a new episode starts, so the dataset covers the whole fade
// range instead of a pristine cell only.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <frbess/harness.hpp>

namespace frbess {

struct DemoSet {
    std::vector<std::vector<Transition>> episodes;

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& e : episodes) n += e.size();
        return n;
    }

    std::vector<const Transition*> flat() const {
        std::vector<const Transition*> out;
        out.reserve(size());
        for (const auto& e : episodes)
            for (const auto& t : e) out.push_back(&t);
        return out;
    }

    void save(const std::string& path) const {
        csv::Writer w(path);
        w.raw_line(
            "episode,step,mean_a,var_a,pi_f,pi_e,e,cf,f,d,r,mean_an,var_an,pi_fn,pi_en,en,cfn,"
            "done");
        for (std::size_t e = 0; e < episodes.size(); ++e)
            for (std::size_t s = 0; s < episodes[e].size(); ++s) {
                const Transition& t = episodes[e][s];
                w.row(e, s, t.x[0], t.x[1], t.x[2], t.x[3], t.x[4], t.x[5], t.a[0], t.a[1], t.r,
                      t.xn[0], t.xn[1], t.xn[2], t.xn[3], t.xn[4], t.xn[5], t.done ? 1 : 0);
            }
        w.close();
    }

    static DemoSet load(const std::string& path) {
        DemoSet d;
        const auto rows = csv::read_rows(
            path,
            "episode,step,mean_a,var_a,pi_f,pi_e,e,cf,f,d,r,mean_an,var_an,pi_fn,pi_en,en,cfn,"
            "done");
        for (const auto& r : rows) {
            if (r.size() != 18) throw std::runtime_error("demo csv: bad row width");
            const std::size_t e = static_cast<std::size_t>(csv::parse_double(r[0]));
            if (e >= d.episodes.size()) d.episodes.resize(e + 1);
            Transition t;
            t.x = {csv::parse_double(r[2]), csv::parse_double(r[3]), csv::parse_double(r[4]),
                   csv::parse_double(r[5]), csv::parse_double(r[6]), csv::parse_double(r[7])};
            t.a = {csv::parse_double(r[8]), csv::parse_double(r[9])};
            t.r = csv::parse_double(r[10]);
            t.xn = {csv::parse_double(r[11]), csv::parse_double(r[12]), csv::parse_double(r[13]),
                    csv::parse_double(r[14]), csv::parse_double(r[15]), csv::parse_double(r[16])};
            t.done = csv::parse_double(r[17]) != 0.0;
            d.episodes[e].push_back(std::move(t));
        }
        return d;
    }
};

// Rolls the planner through `hours` decision points.  Scenario streams are
// the same shape as in evaluation but under different tags, so training and
// evaluation never share randomness for a given seed.
inline DemoSet generate_demonstrations(const EnvConfig& env, const PriceModels& prices,
                                       const SignalPool& pool, long hours, std::uint64_t seed,
                                       double soc0 = 0.5) {
    std::mt19937_64 rng_pe(split_seed(seed, "demo-energy-price"));
    std::mt19937_64 rng_pf(split_seed(seed, "demo-fr-price"));
    std::mt19937_64 rng_fc(split_seed(seed, "demo-alpha-forecast"));
    std::mt19937_64 rng_re(split_seed(seed, "demo-alpha-realized"));

    DemoSet d;
    d.episodes.emplace_back();
    SpState st = initial_state(env.cell, soc0);
    std::vector<double> pe, pf;
    Transition pending;
    bool have_pending = false;
    for (long hour = 0; hour < hours; ++hour) {
        const int how = static_cast<int>(hour % kHoursPerWeek);
        if (how == 0) {
            pe = prices.energy.sample_week(rng_pe);
            pf = prices.fr.sample_week(rng_pf);
        }
        const std::vector<double>& alpha_fc = pool.sample(rng_fc);
        const std::vector<double>& alpha_real = pool.sample(rng_re);
        const double e = stored_energy_mwh(env.cell, st);
        const std::vector<double> x = policy_features(alpha_fc, pf[how], pe[how], e, st.cf);
        if (have_pending) {
            pending.xn = x;
            d.episodes.back().push_back(pending);
        }

        const Commitment want =
            solve_lf_mpc(env.mpc, e, st.cf, {HourForecast{pf[how], pe[how], alpha_fc}})
                .hours.front();
        const StepOutcome o = step_hour(env, st, pf[how], pe[how], alpha_real, want);
        st = o.state;

        pending = Transition{x, {o.executed.f, o.executed.dispatch()}, o.reward, {}, false};
        have_pending = true;
        if (st.cf >= env.eol_cf) {
            // Battery replaced: close the episode with a terminal tuple.
            st = initial_state(env.cell, soc0);
            pending.done = true;
            pending.xn = policy_features(alpha_fc, pf[how], pe[how],
                                         stored_energy_mwh(env.cell, st), st.cf);
            d.episodes.back().push_back(pending);
            have_pending = false;
            d.episodes.emplace_back();
        }
    }
    // The final hour's tuple has no successor features yet; it is dropped
    // rather than faked, since a horizon cut is not a terminal state.
    if (d.episodes.back().empty()) d.episodes.pop_back();
    return d;
}

// --- policy distillation --------------------------------------------------------

struct SlConfig {
    int epochs = 150;
    int batch = 64;
    double lr = 1e-3;
    double holdout = 0.1;
    std::uint64_t seed = 0;
};

struct SlLogRow {
    int epoch = 0;
    double train_mae = 0.0, holdout_mae = 0.0;
};

struct SlResult {
    PolicyNet policy;
    std::vector<SlLogRow> log;
    int best_epoch = -1;
    double best_holdout = kInf;
};

inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_indices(std::size_t n, double holdout_frac, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t nh = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                                        static_cast<double>(n) * holdout_frac)));
    if (nh >= n) throw InsufficientData("holdout split leaves no training rows");
    std::vector<std::size_t> hold(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(nh));
    std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(nh), idx.end());
    return {std::move(train), std::move(hold)};
}

namespace detail {

// MAE of box(net(scale(x))) against the executed action, with the gradient
// chained through the output box; accumulates parameter grads when asked.
inline double policy_loss(const PolicyNet& pol, const Transition& t,
                          std::vector<double>* grad_acc) {
    MlpWorkspace ws;
    pol.net.forward(pol.in.apply(t.x), ws);
    const std::vector<double> y = pol.box.apply(ws.a.back());
    std::vector<double> dy;
    const double loss = mae(y, t.a, grad_acc ? &dy : nullptr);
    if (grad_acc) {
        for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= pol.box.deriv(i);
        const MlpGrads g = pol.net.backward(ws, dy);
        for (std::size_t i = 0; i < g.w.size(); ++i) (*grad_acc)[i] += g.w[i];
    }
    return loss;
}

inline double mean_policy_loss(const PolicyNet& pol, const std::vector<const Transition*>& ts,
                               const std::vector<std::size_t>& idx) {
    double s = 0.0;
    for (std::size_t i : idx) s += policy_loss(pol, *ts[i], nullptr);
    return s / static_cast<double>(idx.size());
}

} // namespace detail

inline SlResult train_policy_sl(const DemoSet& demos, const EnvConfig& env, const SlConfig& cfg) {
    const auto ts = demos.flat();
    if (ts.size() < 10) throw InsufficientData("need at least 10 demonstration tuples");

    std::vector<std::vector<double>> xs;
    xs.reserve(ts.size());
    for (const Transition* t : ts) xs.push_back(t->x);
    const Scaler scaler = Scaler::fit(xs);
    const double pm = env.mpc.power_mw;
    const BoxMap box{{0.0, -pm}, {pm, pm}};

    std::mt19937_64 rng(split_seed(cfg.seed, "sl-train"));
    SlResult res;
    res.policy = PolicyNet::make(scaler, box, rng);
    auto [train, hold] = split_indices(ts.size(), cfg.holdout, rng);

    Adam opt;
    opt.lr = cfg.lr;
    std::vector<double> best_w = res.policy.net.w;
    std::vector<double> grad(res.policy.net.w.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(train.begin(), train.end(), rng);
        double train_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t stop = std::min(train.size(), start + static_cast<std::size_t>(cfg.batch));
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t k = start; k < stop; ++k)
                batch_loss += detail::policy_loss(res.policy, *ts[train[k]], &grad);
            const double inv = 1.0 / static_cast<double>(stop - start);
            for (double& g : grad) g *= inv;
            opt.step(res.policy.net.w, grad);
            train_loss += batch_loss;
            seen += stop - start;
        }
        const double holdout_mae = detail::mean_policy_loss(res.policy, ts, hold);
        res.log.push_back({epoch, train_loss / static_cast<double>(seen), holdout_mae});
        if (holdout_mae < res.best_holdout) {
            res.best_holdout = holdout_mae;
            res.best_epoch = epoch;
            best_w = res.policy.net.w;
        }
    }
    res.policy.net.w = std::move(best_w);
    return res;
}

inline void write_sl_log(const std::string& path, const std::vector<SlLogRow>& log) {
    csv::Writer w(path);
    w.raw_line("epoch,train_mae,holdout_mae");
    for (const auto& r : log) w.row(r.epoch, r.train_mae, r.holdout_mae);
    w.close();
}

// --- critic pretraining -----------------------------------------------------------

struct QslConfig {
    int sweeps = 30;
    int batch = 64;
    double lr = 1e-3;
    double gamma = 0.9;
    std::uint64_t seed = 0;
};

// Fitted value iteration on the fixed demonstration set: each sweep freezes
// a target copy, rebuilds y = r + gamma * Q'(x', mu(x')) (y = r at terminal
// tuples), and runs one regression pass.
inline CriticNet train_q_sl(const DemoSet& demos, const PolicyNet& policy, const QslConfig& cfg) {
    const auto ts = demos.flat();
    if (ts.size() < 10) throw InsufficientData("need at least 10 demonstration tuples");

    const std::size_t na = policy.box.lo.size();
    Scaler action_scaler{std::vector<double>(na), std::vector<double>(na)};
    for (std::size_t i = 0; i < na; ++i) {
        action_scaler.shift[i] = 0.5 * (policy.box.lo[i] + policy.box.hi[i]);
        action_scaler.scale[i] = 0.5 * (policy.box.hi[i] - policy.box.lo[i]);
    }
    if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0))
        throw std::invalid_argument("critic pretraining needs gamma in [0, 1)");
    // Output scale: a crude bound on the discounted return magnitude, so the
    // raw network regresses an O(1) quantity.
    double mean_bound = 0.0;
    for (const Transition* t : ts)
        mean_bound += t->done ? std::abs(t->r) : std::abs(t->r) / (1.0 - cfg.gamma);
    mean_bound /= static_cast<double>(ts.size());
    const double kappa = std::max(1.0, mean_bound);

    std::mt19937_64 rng(split_seed(cfg.seed, "qsl-train"));
    CriticNet critic = CriticNet::make(concat_scaler(policy.in, action_scaler), rng, kappa);

    std::vector<std::vector<double>> next_a(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) next_a[i] = policy.act(ts[i]->xn);

    Adam opt;
    opt.lr = cfg.lr;
    std::vector<std::size_t> order(ts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> grad(critic.net.w.size());
    for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
        const CriticNet target = critic;
        std::vector<double> y(ts.size());
        for (std::size_t i = 0; i < ts.size(); ++i)
            y[i] = ts[i]->done ? ts[i]->r
                               : ts[i]->r + cfg.gamma * target.value(ts[i]->xn, next_a[i]);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t k = start; k < stop; ++k) {
                const Transition& t = *ts[order[k]];
                std::vector<double> xa = t.x;
                xa.insert(xa.end(), t.a.begin(), t.a.end());
                MlpWorkspace ws;
                critic.net.forward(critic.in.apply(xa), ws);
                const double e = ws.a.back()[0] - y[order[k]] / kappa;
                const MlpGrads g = critic.net.backward(ws, {e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0)});
                for (std::size_t i = 0; i < g.w.size(); ++i) grad[i] += g.w[i];
            }
            const double inv = 1.0 / static_cast<double>(stop - start);
            for (double& g : grad) g *= inv;
            opt.step(critic.net.w, grad);
        }
    }
    return critic;
}

} // namespace frbess
