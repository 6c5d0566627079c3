// Command line front end for the dispatch pipeline: synthesize or ingest
// market history, fit the price and signal models, generate demonstrations,
// distill and fine-tune the policy, and evaluate policies closed loop.
//
// Every command that writes results also writes a manifest (inputs, outputs,
// seed, config fingerprint) so a run can be reproduced exactly.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <frbess/config.hpp>

namespace fs = std::filesystem;
using namespace frbess;

namespace {

std::string parent_dir(const std::string& path) {
    const auto p = fs::path(path).parent_path();
    return p.empty() ? std::string(".") : p.string();
}

// Critic output scale from a demonstration set, shared by train-sl and
// train-rl --from-scratch.
double critic_scale(const std::vector<const Transition*>& ts, double gamma) {
    double s = 0.0;
    for (const Transition* t : ts)
        s += t->done ? std::abs(t->r) : std::abs(t->r) / (1.0 - gamma);
    return std::max(1.0, s / static_cast<double>(ts.size()));
}

Scaler feature_scaler(const std::vector<const Transition*>& ts) {
    std::vector<std::vector<double>> xs;
    xs.reserve(ts.size());
    for (const Transition* t : ts) xs.push_back(t->x);
    return Scaler::fit(xs);
}

BoxMap action_box(const EnvConfig& env) {
    const double pm = env.mpc.power_mw;
    return BoxMap{{0.0, -pm}, {pm, pm}};
}

struct GenSynthArgs {
    std::string out;
    int weeks = 12;
    int steps_per_hour = 1800;
    std::uint64_t seed = 0;
};

int run_gen_synth(const GenSynthArgs& a) {
    const HistoricalDataset d = synthesize_market(a.weeks, a.steps_per_hour, a.seed);
    fs::create_directories(a.out);
    d.save(a.out);
    Manifest m;
    m.command = "gen-synth";
    m.seed = a.seed;
    m.files = {{"energy_prices", a.out + "/energy.csv"},
               {"fr_prices", a.out + "/fr_price.csv"},
               {"signals", a.out + "/signals.csv"}};
    m.save(a.out + "/gen-synth.manifest.json");
    std::printf("wrote %d weeks of synthetic history to %s\n", a.weeks, a.out.c_str());
    return 0;
}

struct FitUqArgs {
    std::string data, out;
};

int run_fit_uq(const FitUqArgs& a) {
    const HistoricalDataset d = HistoricalDataset::load(a.data);
    const PriceModels models = fit_price_models(d);
    models.save(a.out);
    Manifest m;
    m.command = "fit-uq";
    m.files = {{"data", a.data}, {"models", a.out}};
    m.save(parent_dir(a.out) + "/fit-uq.manifest.json");
    std::printf("fitted price models on %d weeks -> %s\n", static_cast<int>(d.weeks()),
                a.out.c_str());
    return 0;
}

struct GenDemosArgs {
    std::string config, data, uq, out;
    long hours = 0; // 0 = take from config
    std::uint64_t seed = 0;
};

int run_gen_demos(const GenDemosArgs& a) {
    const RunConfig cfg = RunConfig::load(a.config);
    const EnvConfig env = cfg.make_train_env(parent_dir(a.config));
    const HistoricalDataset d = HistoricalDataset::load(a.data);
    const PriceModels prices = PriceModels::load(a.uq);
    const SignalPool pool = SignalPool::from(d);

    const long hours = a.hours > 0 ? a.hours : cfg.demo_hours;
    const DemoSet demos = generate_demonstrations(env, prices, pool, hours, a.seed, cfg.soc0);
    demos.save(a.out);

    Manifest m;
    m.command = "gen-demos";
    m.seed = a.seed;
    m.config_fingerprint = cfg.fingerprint_hex();
    m.files = {{"config", a.config}, {"data", a.data}, {"models", a.uq}, {"demos", a.out}};
    m.save(parent_dir(a.out) + "/gen-demos.manifest.json");
    std::printf("planner rolled %ld hours -> %zu tuples in %zu episodes -> %s\n", hours,
                demos.size(), demos.episodes.size(), a.out.c_str());
    return 0;
}

struct TrainSlArgs {
    std::string config, demos, out_policy, out_critic, log;
    std::uint64_t seed = 0;
};

int run_train_sl(const TrainSlArgs& a) {
    const RunConfig cfg = RunConfig::load(a.config);
    const EnvConfig env = cfg.make_train_env(parent_dir(a.config));
    const DemoSet demos = DemoSet::load(a.demos);

    SlConfig sl = cfg.sl;
    sl.seed = a.seed;
    const SlResult res = train_policy_sl(demos, env, sl);
    res.policy.save(a.out_policy);
    if (!a.log.empty()) write_sl_log(a.log, res.log);

    QslConfig qsl = cfg.qsl;
    qsl.seed = a.seed;
    const CriticNet critic = train_q_sl(demos, res.policy, qsl);
    critic.save(a.out_critic);

    Manifest m;
    m.command = "train-sl";
    m.seed = a.seed;
    m.config_fingerprint = cfg.fingerprint_hex();
    m.files = {{"config", a.config},
               {"demos", a.demos},
               {"policy", a.out_policy},
               {"critic", a.out_critic}};
    if (!a.log.empty()) m.files.emplace_back("log", a.log);
    m.save(parent_dir(a.out_policy) + "/train-sl.manifest.json");
    std::printf("distilled %zu tuples: holdout mae %.4f at epoch %d -> %s\n", demos.size(),
                res.best_holdout, res.best_epoch, a.out_policy.c_str());
    return 0;
}

struct TrainRlArgs {
    std::string config, data, uq, policy, critic, demos, out_policy, out_critic, log;
    bool from_scratch = false;
    std::uint64_t seed = 0;
};

int run_train_rl(const TrainRlArgs& a) {
    const RunConfig cfg = RunConfig::load(a.config);
    const EnvConfig env = cfg.make_train_env(parent_dir(a.config));
    const HistoricalDataset d = HistoricalDataset::load(a.data);
    const PriceModels prices = PriceModels::load(a.uq);
    const SignalPool pool = SignalPool::from(d);

    PolicyNet actor;
    CriticNet critic;
    if (a.from_scratch) {
        if (a.demos.empty())
            throw std::invalid_argument(
                "--from-scratch needs --demos to fit the feature scaler");
        const DemoSet demos = DemoSet::load(a.demos);
        const auto ts = demos.flat();
        if (ts.size() < 10) throw InsufficientData("need at least 10 demonstration tuples");
        std::mt19937_64 rng_a(split_seed(a.seed, "rl-init-actor"));
        std::mt19937_64 rng_c(split_seed(a.seed, "rl-init-critic"));
        const Scaler in = feature_scaler(ts);
        const BoxMap box = action_box(env);
        actor = PolicyNet::make(in, box, rng_a);
        Scaler ab{std::vector<double>(2), std::vector<double>(2)};
        for (std::size_t i = 0; i < 2; ++i) {
            ab.shift[i] = 0.5 * (box.lo[i] + box.hi[i]);
            ab.scale[i] = 0.5 * (box.hi[i] - box.lo[i]);
        }
        critic = CriticNet::make(concat_scaler(in, ab), rng_c,
                                 critic_scale(ts, cfg.rl.gamma));
    } else {
        actor = PolicyNet::load(a.policy);
        critic = CriticNet::load(a.critic);
    }

    DpgConfig rl = cfg.rl;
    rl.seed = a.seed;
    const RlResult res = train_rl(env, prices, pool, std::move(actor), std::move(critic), rl);
    res.policy.save(a.out_policy);
    if (!a.out_critic.empty()) res.critic.save(a.out_critic);
    if (!a.log.empty()) write_rl_log(a.log, res.log);

    Manifest m;
    m.command = "train-rl";
    m.seed = a.seed;
    m.config_fingerprint = cfg.fingerprint_hex();
    m.files = {{"config", a.config}, {"data", a.data}, {"models", a.uq}};
    if (a.from_scratch)
        m.files.emplace_back("demos", a.demos);
    else {
        m.files.emplace_back("policy_in", a.policy);
        m.files.emplace_back("critic_in", a.critic);
    }
    m.files.emplace_back("policy", a.out_policy);
    if (!a.out_critic.empty()) m.files.emplace_back("critic", a.out_critic);
    if (!a.log.empty()) m.files.emplace_back("log", a.log);
    m.save(parent_dir(a.out_policy) + "/train-rl.manifest.json");

    const double last_ret = res.log.empty() ? 0.0 : res.log.back().ret;
    std::printf("fine-tuned over %d episodes (last return %.1f) -> %s\n", rl.episodes, last_ret,
                a.out_policy.c_str());
    return 0;
}

struct EvaluateArgs {
    std::string config, data, uq, out;
    std::string policies = "zero,lfmpc";
    std::string sl_policy, rl_policy;
    int scenarios = 1;
    std::uint64_t seed = 0;
};

int run_evaluate(const EvaluateArgs& a) {
    const RunConfig cfg = RunConfig::load(a.config);
    const EnvConfig env = cfg.make_env(parent_dir(a.config));
    const HistoricalDataset d = HistoricalDataset::load(a.data);
    const PriceModels prices = PriceModels::load(a.uq);
    const SignalPool pool = SignalPool::from(d);

    std::vector<FrPolicy> pols;
    for (const auto& name : csv::split_line(a.policies)) {
        if (name == "zero")
            pols.push_back(FrPolicy::zero());
        else if (name == "lfmpc")
            pols.push_back(FrPolicy::lf_mpc());
        else if (name == "sl") {
            if (a.sl_policy.empty()) throw std::invalid_argument("policy 'sl' needs --sl-policy");
            pols.push_back(FrPolicy::sl(PolicyNet::load(a.sl_policy)));
        } else if (name == "rl") {
            if (a.rl_policy.empty()) throw std::invalid_argument("policy 'rl' needs --rl-policy");
            pols.push_back(FrPolicy::rl(PolicyNet::load(a.rl_policy)));
        } else {
            throw std::invalid_argument("unknown policy '" + name + "'");
        }
    }
    if (pols.empty()) throw std::invalid_argument("no policies selected");

    fs::create_directories(a.out);
    std::vector<EvalResult> rows;
    Manifest m;
    m.command = "evaluate";
    m.seed = a.seed;
    m.config_fingerprint = cfg.fingerprint_hex();
    m.files = {{"config", a.config}, {"data", a.data}, {"models", a.uq}};
    for (const FrPolicy& pol : pols) {
        for (int sc = 0; sc < a.scenarios; ++sc) {
            EvalOptions opt;
            opt.max_hours = cfg.eval_max_hours;
            opt.soc0 = cfg.soc0;
            opt.seed = a.seed + static_cast<std::uint64_t>(sc);
            opt.keep_trace = sc == 0;
            const EvalResult r = evaluate_policy(env, pol, prices, pool, opt);
            if (sc == 0) {
                const std::string tp = a.out + "/trace_" + r.policy + ".csv";
                write_eval_trace(tp, r);
                m.files.emplace_back("trace_" + r.policy, tp);
            }
            std::printf("%-5s scenario %d: %ld h, revenue %.0f, cost %.0f, profit %.0f%s\n",
                        r.policy.c_str(), sc, r.lifetime_h, r.revenue, r.cost, r.profit,
                        r.reached_eol ? "" : " (horizon cut)");
            rows.push_back(r);
        }
    }
    write_eval_summary(a.out + "/summary.csv", rows);
    m.files.emplace_back("summary", a.out + "/summary.csv");
    m.save(a.out + "/evaluate.manifest.json");
    return 0;
}

struct ReportArgs {
    std::string eval, out;
};

int run_report(const ReportArgs& a) {
    const auto rows = csv::read_rows(a.eval + "/summary.csv",
                                     "policy,lifetime_h,revenue,cost,profit,cum_fr_band_mw,purchased_mwh");
    fs::create_directories(a.out);

    // Group scenario rows per policy and reduce to medians.
    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> life, profit;
    for (const auto& r : rows) {
        if (life.find(r[0]) == life.end()) order.push_back(r[0]);
        life[r[0]].push_back(csv::parse_double(r[1]));
        profit[r[0]].push_back(csv::parse_double(r[4]));
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    {
        csv::Writer w(a.out + "/medians.csv");
        w.raw_line("policy,median_lifetime_h,median_profit");
        for (const auto& p : order) w.row(p, median(life[p]), median(profit[p]));
        w.close();
    }

    Manifest m;
    m.command = "report";
    m.files = {{"summary", a.eval + "/summary.csv"}, {"medians", a.out + "/medians.csv"}};

    // Per-policy fade and cumulative profit series from the stored traces.
    for (const auto& p : order) {
        const std::string tp = a.eval + "/trace_" + p + ".csv";
        if (!fs::exists(tp)) continue;
        const auto t = csv::read_rows(tp, "hour,F,O,L,pi_f,pi_e,E,Cf,reward");
        std::vector<double> hour, cf, cum;
        double acc = 0.0;
        for (const auto& r : t) {
            hour.push_back(csv::parse_double(r[0]));
            cf.push_back(csv::parse_double(r[7]));
            acc += csv::parse_double(r[4]) * csv::parse_double(r[1]) -
                   csv::parse_double(r[5]) * csv::parse_double(r[2]);
            cum.push_back(acc);
        }
        write_series(a.out + "/fade_" + p + ".csv", "hour,Cf", hour, cf);
        write_series(a.out + "/profit_" + p + ".csv", "hour,cum_profit", hour, cum);
        m.files.emplace_back("fade_" + p, a.out + "/fade_" + p + ".csv");
        m.files.emplace_back("profit_" + p, a.out + "/profit_" + p + ".csv");
    }
    m.save(a.out + "/report.manifest.json");
    std::printf("report for %zu policies -> %s\n", order.size(), a.out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"learning-based dispatch for a grid battery in the regulation market"};
    app.require_subcommand(1);

    GenSynthArgs gs;
    auto* c_gs = app.add_subcommand("gen-synth", "synthesize market history");
    c_gs->add_option("--out", gs.out, "output directory")->required();
    c_gs->add_option("--weeks", gs.weeks, "number of whole weeks")->required();
    c_gs->add_option("--steps-per-hour", gs.steps_per_hour, "signal samples per hour");
    c_gs->add_option("--seed", gs.seed, "generator seed")->required();

    FitUqArgs fu;
    auto* c_fu = app.add_subcommand("fit-uq", "fit price and signal models on history");
    c_fu->add_option("--data", fu.data, "history directory")->required();
    c_fu->add_option("--out", fu.out, "model file to write")->required();

    GenDemosArgs gd;
    auto* c_gd = app.add_subcommand("gen-demos", "roll the planner to record demonstrations");
    c_gd->add_option("--config", gd.config, "run config")->required();
    c_gd->add_option("--data", gd.data, "history directory")->required();
    c_gd->add_option("--uq", gd.uq, "fitted model file")->required();
    c_gd->add_option("--out", gd.out, "demo csv to write")->required();
    c_gd->add_option("--hours", gd.hours, "override demo hours");
    c_gd->add_option("--seed", gd.seed, "scenario seed")->required();

    TrainSlArgs ts;
    auto* c_ts = app.add_subcommand("train-sl", "distill the planner into a policy network");
    c_ts->add_option("--config", ts.config, "run config")->required();
    c_ts->add_option("--demos", ts.demos, "demo csv")->required();
    c_ts->add_option("--out-policy", ts.out_policy, "policy file to write")->required();
    c_ts->add_option("--out-critic", ts.out_critic, "critic file to write")->required();
    c_ts->add_option("--log", ts.log, "training log csv");
    c_ts->add_option("--seed", ts.seed, "training seed")->required();

    TrainRlArgs tr;
    auto* c_tr = app.add_subcommand("train-rl", "fine-tune the policy against the plant");
    c_tr->add_option("--config", tr.config, "run config")->required();
    c_tr->add_option("--data", tr.data, "history directory")->required();
    c_tr->add_option("--uq", tr.uq, "fitted model file")->required();
    c_tr->add_option("--policy", tr.policy, "starting policy file");
    c_tr->add_option("--critic", tr.critic, "starting critic file");
    c_tr->add_option("--demos", tr.demos, "demo csv (for --from-scratch)");
    c_tr->add_flag("--from-scratch", tr.from_scratch, "random initial networks");
    c_tr->add_option("--out-policy", tr.out_policy, "policy file to write")->required();
    c_tr->add_option("--out-critic", tr.out_critic, "critic file to write");
    c_tr->add_option("--log", tr.log, "training log csv");
    c_tr->add_option("--seed", tr.seed, "training seed")->required();

    EvaluateArgs ev;
    auto* c_ev = app.add_subcommand("evaluate", "closed-loop policy evaluation");
    c_ev->add_option("--config", ev.config, "run config")->required();
    c_ev->add_option("--data", ev.data, "history directory")->required();
    c_ev->add_option("--uq", ev.uq, "fitted model file")->required();
    c_ev->add_option("--out", ev.out, "output directory")->required();
    c_ev->add_option("--policies", ev.policies, "comma list: zero,lfmpc,sl,rl");
    c_ev->add_option("--sl-policy", ev.sl_policy, "distilled policy file");
    c_ev->add_option("--rl-policy", ev.rl_policy, "fine-tuned policy file");
    c_ev->add_option("--scenarios", ev.scenarios, "scenario count per policy");
    c_ev->add_option("--seed", ev.seed, "base scenario seed")->required();

    ReportArgs rp;
    auto* c_rp = app.add_subcommand("report", "reduce evaluation outputs to plot series");
    c_rp->add_option("--eval", rp.eval, "evaluation output directory")->required();
    c_rp->add_option("--out", rp.out, "report directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_gs) return run_gen_synth(gs);
        if (*c_fu) return run_fit_uq(fu);
        if (*c_gd) return run_gen_demos(gd);
        if (*c_ts) return run_train_sl(ts);
        if (*c_tr) return run_train_rl(tr);
        if (*c_ev) return run_evaluate(ev);
        if (*c_rp) return run_report(rp);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
