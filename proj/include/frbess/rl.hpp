#pragma once

// Deterministic policy gradient fine-tuning on top of the distilled actor
// and pretrained critic.  The networks, replay buffer, and update rule are
// dimension-generic; the battery enters only through run_episode.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <frbess/harness.hpp>

namespace frbess {

// Fixed-capacity FIFO with uniform sampling without replacement.
class ReplayMemory {
  public:
    explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ == 0) throw std::invalid_argument("replay capacity must be positive");
    }

    void push(Transition t) {
        if (buf_.size() < capacity_) {
            buf_.push_back(std::move(t));
        } else {
            buf_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    std::size_t size() const { return buf_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const { return buf_[i]; }

    std::vector<const Transition*> sample(std::size_t n, std::mt19937_64& rng) const {
        if (n > buf_.size()) throw InsufficientData("replay holds fewer tuples than the batch");
        // Partial Fisher-Yates over an index array: first n entries are a
        // uniform draw without replacement.
        std::vector<std::size_t> idx(buf_.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::vector<const Transition*> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
            std::swap(idx[i], idx[pick(rng)]);
            out.push_back(&buf_[idx[i]]);
        }
        return out;
    }

  private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> buf_;
};

inline void soft_update(std::vector<double>& target, const std::vector<double>& online,
                        double tau) {
    if (target.size() != online.size())
        throw std::invalid_argument("soft_update: size mismatch");
    for (std::size_t i = 0; i < target.size(); ++i)
        target[i] = tau * online[i] + (1.0 - tau) * target[i];
}

struct DpgConfig {
    int episodes = 60;
    int episode_hours = 168;
    int updates_per_episode = 672;
    int batch = 160;
    std::size_t replay_capacity = 1680;
    double gamma = 0.9;
    double tau = 0.01;
    double noise_sigma = 0.05;
    double actor_lr = 1e-4;
    double critic_lr = 1e-3;
    std::uint64_t seed = 0;
};

struct DpgAgents {
    PolicyNet actor;
    CriticNet critic;
    PolicyNet actor_target;
    CriticNet critic_target;
    Adam opt_actor;
    Adam opt_critic;

    static DpgAgents from(PolicyNet actor, CriticNet critic, const DpgConfig& cfg) {
        DpgAgents ag{std::move(actor), std::move(critic), {}, {}, {}, {}};
        ag.actor_target = ag.actor;
        ag.critic_target = ag.critic;
        ag.opt_actor.lr = cfg.actor_lr;
        ag.opt_critic.lr = cfg.critic_lr;
        return ag;
    }
};

struct DpgUpdateStats {
    double critic_loss = 0.0;
    double actor_objective = 0.0;
};

// One DPG step on a sampled batch: MAE critic regression against the frozen
// targets, then actor ascent on the critic value of its own action, then a
// soft target refresh.
inline DpgUpdateStats dpg_update(DpgAgents& ag, const std::vector<const Transition*>& batch,
                                 double gamma, double tau) {
    if (batch.empty()) throw std::invalid_argument("dpg_update: empty batch");
    const double inv = 1.0 / static_cast<double>(batch.size());
    const double kappa = ag.critic.out_scale;
    DpgUpdateStats stats;

    std::vector<double> gc(ag.critic.net.w.size(), 0.0);
    for (const Transition* t : batch) {
        double y = t->r;
        if (!t->done)
            y += gamma * ag.critic_target.value(t->xn, ag.actor_target.act(t->xn));
        std::vector<double> xa = t->x;
        xa.insert(xa.end(), t->a.begin(), t->a.end());
        MlpWorkspace ws;
        ag.critic.net.forward(ag.critic.in.apply(xa), ws);
        const double e = ws.a.back()[0] - y / kappa;
        stats.critic_loss += std::abs(e) * kappa * inv;
        const MlpGrads g = ag.critic.net.backward(ws, {e > 0.0 ? inv : (e < 0.0 ? -inv : 0.0)});
        for (std::size_t i = 0; i < gc.size(); ++i) gc[i] += g.w[i];
    }
    ag.opt_critic.step(ag.critic.net.w, gc);

    const std::size_t nx = ag.actor.in.shift.size();
    const std::size_t na = ag.actor.box.lo.size();
    std::vector<double> ga(ag.actor.net.w.size(), 0.0);
    for (const Transition* t : batch) {
        MlpWorkspace wsa;
        ag.actor.net.forward(ag.actor.in.apply(t->x), wsa);
        const std::vector<double> a = ag.actor.box.apply(wsa.a.back());
        std::vector<double> xa = t->x;
        xa.insert(xa.end(), a.begin(), a.end());
        MlpWorkspace wsq;
        ag.critic.net.forward(ag.critic.in.apply(xa), wsq);
        stats.actor_objective += kappa * wsq.a.back()[0] * inv;
        const MlpGrads gq = ag.critic.net.backward(wsq, {1.0});
        // dQ/da undoes the critic input scaling of the action block and the
        // output scale, then the box affine map carries it back to the
        // actor's tanh output.
        std::vector<double> dt(na);
        for (std::size_t i = 0; i < na; ++i)
            dt[i] = -inv * kappa * gq.x[nx + i] / ag.critic.in.scale[nx + i] *
                    ag.actor.box.deriv(i);
        const MlpGrads g = ag.actor.net.backward(wsa, dt);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g.w[i];
    }
    ag.opt_actor.step(ag.actor.net.w, ga);

    soft_update(ag.actor_target.net.w, ag.actor.net.w, tau);
    soft_update(ag.critic_target.net.w, ag.critic.net.w, tau);
    return stats;
}

struct EpisodeResult {
    double ret = 0.0;
    int eol_restarts = 0;
};

// One training rollout: the noisy actor commits for episode_hours hours, the
// executed commitments become replay tuples, and the battery persists across
// episodes (replaced only at end of life).  `pending` carries the last tuple
// across the episode boundary so its successor features are exactly the next
// decision's features; an episode cut is not a terminal state.
inline EpisodeResult run_episode(const EnvConfig& env, const PolicyNet& actor, double sigma,
                                 const PriceModels& prices, const SignalPool& pool, SpState& st,
                                 long& hour, ReplayMemory& replay, std::vector<double>& pe,
                                 std::vector<double>& pf, Transition& pending, bool& have_pending,
                                 int episode_hours, std::mt19937_64& rng, double soc0 = 0.5) {
    EpisodeResult res;
    for (int k = 0; k < episode_hours; ++k, ++hour) {
        const int how = static_cast<int>(hour % kHoursPerWeek);
        if (how == 0 || pe.empty()) {
            pe = prices.energy.sample_week(rng);
            pf = prices.fr.sample_week(rng);
        }
        const std::vector<double>& alpha_fc = pool.sample(rng);
        const std::vector<double>& alpha_real = pool.sample(rng);
        const double e = stored_energy_mwh(env.cell, st);
        const std::vector<double> x = policy_features(alpha_fc, pf[how], pe[how], e, st.cf);
        if (have_pending) {
            pending.xn = x;
            replay.push(pending);
        }

        const Commitment want = action_to_commitment(actor.act_noisy(x, sigma, rng));
        const StepOutcome o = step_hour(env, st, pf[how], pe[how], alpha_real, want);
        st = o.state;
        res.ret += o.reward;

        pending = Transition{x, {o.executed.f, o.executed.dispatch()}, o.reward, {}, false};
        have_pending = true;
        if (st.cf >= env.eol_cf) {
            st = initial_state(env.cell, soc0);
            ++res.eol_restarts;
            pending.done = true;
            pending.xn = policy_features(alpha_fc, pf[how], pe[how],
                                         stored_energy_mwh(env.cell, st), st.cf);
            replay.push(pending);
            have_pending = false;
        }
    }
    return res;
}

struct RlLogRow {
    int episode = 0;
    double ret = 0.0;
    double cf_end = 0.0;
    double critic_loss = 0.0;
    double actor_objective = 0.0;
};

struct RlResult {
    PolicyNet policy;
    CriticNet critic;
    std::vector<RlLogRow> log;
};

inline RlResult train_rl(const EnvConfig& env, const PriceModels& prices, const SignalPool& pool,
                         PolicyNet actor, CriticNet critic, const DpgConfig& cfg) {
    DpgAgents ag = DpgAgents::from(std::move(actor), std::move(critic), cfg);
    ReplayMemory replay(cfg.replay_capacity);
    std::mt19937_64 rng_ep(split_seed(cfg.seed, "rl-episode"));
    std::mt19937_64 rng_up(split_seed(cfg.seed, "rl-update"));

    RlResult res;
    SpState st = initial_state(env.cell, 0.5);
    long hour = 0;
    std::vector<double> pe, pf;
    Transition pending;
    bool have_pending = false;
    for (int ep = 0; ep < cfg.episodes; ++ep) {
        const EpisodeResult er =
            run_episode(env, ag.actor, cfg.noise_sigma, prices, pool, st, hour, replay, pe, pf,
                        pending, have_pending, cfg.episode_hours, rng_ep);
        RlLogRow row{ep, er.ret, st.cf, 0.0, 0.0};
        if (replay.size() >= static_cast<std::size_t>(cfg.batch)) {
            for (int u = 0; u < cfg.updates_per_episode; ++u) {
                const auto batch = replay.sample(static_cast<std::size_t>(cfg.batch), rng_up);
                const DpgUpdateStats s = dpg_update(ag, batch, cfg.gamma, cfg.tau);
                row.critic_loss += s.critic_loss / cfg.updates_per_episode;
                row.actor_objective += s.actor_objective / cfg.updates_per_episode;
            }
        }
        res.log.push_back(row);
    }
    res.policy = std::move(ag.actor);
    res.critic = std::move(ag.critic);
    return res;
}

inline void write_rl_log(const std::string& path, const std::vector<RlLogRow>& log) {
    csv::Writer w(path);
    w.raw_line("episode,return,Cf,critic-loss,actor-objective");
    for (const auto& r : log) w.row(r.episode, r.ret, r.cf_end, r.critic_loss, r.actor_objective);
    w.close();
}

} // namespace frbess
