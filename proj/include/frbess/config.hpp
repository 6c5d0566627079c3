#pragma once

// Run configuration shared by the command line tools.  One JSON file fixes
// the plant, the market interface, and every training knob, so a result can
// be reproduced from the config plus the seeds recorded in the manifests.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <frbess/harness.hpp>
#include <frbess/rl.hpp>
#include <frbess/sl.hpp>

namespace frbess {

struct RunConfig {
    std::string cell_file = "data/cell.json";

    // Aging acceleration multiplies the side-reaction exchange current.
    // Training may run on a gentler acceleration than evaluation; the fade
    // price is scaled up in proportion so the fade term keeps the same
    // weight in the reward.
    double aging_acceleration = 1.0;
    double train_aging_acceleration = 1.0;
    double train_pi_cf = 12000.0;

    double pi_cf = 12000.0;
    double dev_weight = 5.0;
    double eol_cf = 0.2;
    double repair_step_mw = 0.5;

    int steps_per_hour = 1800;
    double band_lo = 0.1;
    double band_hi = 0.9;
    double terminal = 0.5;
    double sell_penalty = 1e-6;

    long demo_hours = 2000;
    SlConfig sl;
    QslConfig qsl;
    DpgConfig rl;

    long eval_max_hours = 2000000;
    double soc0 = 0.5;

    void validate() const {
        auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
        if (cell_file.empty()) fail("cell_file is empty");
        if (!(aging_acceleration > 0.0)) fail("aging_acceleration must be positive");
        if (!(train_aging_acceleration > 0.0)) fail("train_aging_acceleration must be positive");
        if (!(pi_cf >= 0.0) || !(train_pi_cf >= 0.0)) fail("fade price must be nonnegative");
        if (!(dev_weight >= 0.0)) fail("dev_weight must be nonnegative");
        if (!(eol_cf > 0.0 && eol_cf < 1.0)) fail("eol_cf must lie in (0, 1)");
        if (!(repair_step_mw > 0.0)) fail("repair_step_mw must be positive");
        if (steps_per_hour < 1) fail("steps_per_hour must be at least 1");
        if (!(band_lo >= 0.0 && band_lo < band_hi && band_hi <= 1.0))
            fail("band must satisfy 0 <= band_lo < band_hi <= 1");
        if (!(terminal >= band_lo && terminal <= band_hi))
            fail("terminal target must lie inside the band");
        if (!(sell_penalty >= 0.0)) fail("sell_penalty must be nonnegative");
        if (demo_hours < 1) fail("demo_hours must be at least 1");
        if (sl.epochs < 1 || sl.batch < 1) fail("sl epochs and batch must be at least 1");
        if (!(sl.lr > 0.0)) fail("sl lr must be positive");
        if (!(sl.holdout > 0.0 && sl.holdout < 1.0)) fail("sl holdout must lie in (0, 1)");
        if (qsl.sweeps < 1 || qsl.batch < 1) fail("qsl sweeps and batch must be at least 1");
        if (!(qsl.lr > 0.0)) fail("qsl lr must be positive");
        if (!(qsl.gamma >= 0.0 && qsl.gamma < 1.0)) fail("qsl gamma must lie in [0, 1)");
        if (rl.episodes < 1 || rl.episode_hours < 1) fail("rl episodes and episode_hours must be at least 1");
        if (rl.updates_per_episode < 0) fail("rl updates_per_episode must be nonnegative");
        if (rl.batch < 1) fail("rl batch must be at least 1");
        if (rl.replay_capacity < static_cast<std::size_t>(rl.batch))
            fail("rl replay_capacity must hold at least one batch");
        if (!(rl.gamma >= 0.0 && rl.gamma < 1.0)) fail("rl gamma must lie in [0, 1)");
        if (!(rl.tau > 0.0 && rl.tau <= 1.0)) fail("rl tau must lie in (0, 1]");
        if (!(rl.noise_sigma >= 0.0)) fail("rl noise_sigma must be nonnegative");
        if (!(rl.actor_lr > 0.0) || !(rl.critic_lr > 0.0)) fail("rl learning rates must be positive");
        if (eval_max_hours < 1) fail("eval_max_hours must be at least 1");
        if (!(soc0 > 0.0 && soc0 < 1.0)) fail("soc0 must lie in (0, 1)");
    }

    nlohmann::json to_json() const {
        return {{"cell_file", cell_file},
                {"aging_acceleration", aging_acceleration},
                {"train_aging_acceleration", train_aging_acceleration},
                {"env",
                 {{"pi_cf", pi_cf},
                  {"train_pi_cf", train_pi_cf},
                  {"dev_weight", dev_weight},
                  {"eol_cf", eol_cf},
                  {"repair_step_mw", repair_step_mw}}},
                {"mpc",
                 {{"steps_per_hour", steps_per_hour},
                  {"band_lo", band_lo},
                  {"band_hi", band_hi},
                  {"terminal", terminal},
                  {"sell_penalty", sell_penalty}}},
                {"demos", {{"hours", demo_hours}}},
                {"sl",
                 {{"epochs", sl.epochs},
                  {"batch", sl.batch},
                  {"lr", sl.lr},
                  {"holdout", sl.holdout}}},
                {"qsl",
                 {{"sweeps", qsl.sweeps},
                  {"batch", qsl.batch},
                  {"lr", qsl.lr},
                  {"gamma", qsl.gamma}}},
                {"rl",
                 {{"episodes", rl.episodes},
                  {"episode_hours", rl.episode_hours},
                  {"updates_per_episode", rl.updates_per_episode},
                  {"batch", rl.batch},
                  {"replay_capacity", rl.replay_capacity},
                  {"gamma", rl.gamma},
                  {"tau", rl.tau},
                  {"noise_sigma", rl.noise_sigma},
                  {"actor_lr", rl.actor_lr},
                  {"critic_lr", rl.critic_lr}}},
                {"eval", {{"max_hours", eval_max_hours}, {"soc0", soc0}}}};
    }

    static RunConfig from_json(const nlohmann::json& j) {
        RunConfig c;
        c.cell_file = j.at("cell_file").get<std::string>();
        c.aging_acceleration = j.at("aging_acceleration").get<double>();
        c.train_aging_acceleration =
            j.value("train_aging_acceleration", c.aging_acceleration);
        const auto& e = j.at("env");
        c.pi_cf = e.at("pi_cf").get<double>();
        c.train_pi_cf = e.value("train_pi_cf", c.pi_cf);
        c.dev_weight = e.at("dev_weight").get<double>();
        c.eol_cf = e.at("eol_cf").get<double>();
        c.repair_step_mw = e.at("repair_step_mw").get<double>();
        const auto& m = j.at("mpc");
        c.steps_per_hour = m.at("steps_per_hour").get<int>();
        c.band_lo = m.at("band_lo").get<double>();
        c.band_hi = m.at("band_hi").get<double>();
        c.terminal = m.at("terminal").get<double>();
        c.sell_penalty = m.at("sell_penalty").get<double>();
        c.demo_hours = j.at("demos").at("hours").get<long>();
        const auto& s = j.at("sl");
        c.sl.epochs = s.at("epochs").get<int>();
        c.sl.batch = s.at("batch").get<int>();
        c.sl.lr = s.at("lr").get<double>();
        c.sl.holdout = s.at("holdout").get<double>();
        const auto& q = j.at("qsl");
        c.qsl.sweeps = q.at("sweeps").get<int>();
        c.qsl.batch = q.at("batch").get<int>();
        c.qsl.lr = q.at("lr").get<double>();
        c.qsl.gamma = q.at("gamma").get<double>();
        const auto& r = j.at("rl");
        c.rl.episodes = r.at("episodes").get<int>();
        c.rl.episode_hours = r.at("episode_hours").get<int>();
        c.rl.updates_per_episode = r.at("updates_per_episode").get<int>();
        c.rl.batch = r.at("batch").get<int>();
        c.rl.replay_capacity = r.at("replay_capacity").get<std::size_t>();
        c.rl.gamma = r.at("gamma").get<double>();
        c.rl.tau = r.at("tau").get<double>();
        c.rl.noise_sigma = r.at("noise_sigma").get<double>();
        c.rl.actor_lr = r.at("actor_lr").get<double>();
        c.rl.critic_lr = r.at("critic_lr").get<double>();
        const auto& v = j.at("eval");
        c.eval_max_hours = v.at("max_hours").get<long>();
        c.soc0 = v.at("soc0").get<double>();
        c.validate();
        return c;
    }

    static RunConfig load(const std::string& path) { return from_json(load_json(path)); }
    void save(const std::string& path) const { save_json(to_json(), path); }

    // FNV-1a over the canonical dump (nlohmann keeps keys sorted), so two
    // configs fingerprint equal exactly when their JSON forms match.
    std::uint64_t fingerprint() const {
        const std::string s = to_json().dump();
        std::uint64_t h = 1469598103934665603ULL;
        for (char ch : s) {
            h ^= static_cast<unsigned char>(ch);
            h *= 1099511628211ULL;
        }
        return h;
    }

    std::string fingerprint_hex() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(fingerprint()));
        return buf;
    }

  private:
    EnvConfig assemble(const std::string& base_dir, double accel, double fade_price) const {
        std::filesystem::path p(cell_file);
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        EnvConfig env;
        env.cell = CellParams::load(p.string());
        env.cell.sd.i0 *= accel;
        env.mpc.steps_per_hour = steps_per_hour;
        env.mpc.energy_mwh = env.cell.pack.energy_mwh;
        env.mpc.power_mw = env.cell.pack.power_mw_max;
        env.mpc.band_lo = band_lo;
        env.mpc.band_hi = band_hi;
        env.mpc.terminal = terminal;
        env.mpc.sell_penalty = sell_penalty;
        env.pi_cf = fade_price;
        env.dev_weight = dev_weight;
        env.eol_cf = eol_cf;
        env.repair_step_mw = repair_step_mw;
        return env;
    }

  public:
    // cell_file resolves relative to base_dir (normally the config's parent).
    EnvConfig make_env(const std::string& base_dir) const {
        return assemble(base_dir, aging_acceleration, pi_cf);
    }
    EnvConfig make_train_env(const std::string& base_dir) const {
        return assemble(base_dir, train_aging_acceleration, train_pi_cf);
    }
};

// Every tool writes one of these next to its outputs.  No timestamps, no
// host details: rerunning a command with the same inputs and seed must
// produce a byte-identical manifest.
struct Manifest {
    std::string command;
    std::uint64_t seed = 0;
    std::string config_fingerprint; // empty when the tool takes no config
    std::vector<std::pair<std::string, std::string>> files;

    void save(const std::string& path) const {
        nlohmann::json j;
        j["command"] = command;
        j["seed"] = seed;
        if (!config_fingerprint.empty()) j["config_fingerprint"] = config_fingerprint;
        for (const auto& [role, file] : files) j["files"][role] = file;
        save_json(j, path);
    }
};

} // namespace frbess
