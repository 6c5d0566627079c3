#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "frbess/config.hpp"

using namespace frbess;

namespace {

std::string tmp_dir(const char* leaf) {
    auto d = std::filesystem::temp_directory_path() / leaf;
    std::filesystem::create_directories(d);
    return d.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_SUITE_BEGIN("config");

TEST_CASE("defaults validate and round trip") {
    RunConfig c;
    c.validate();
    const auto dir = tmp_dir("frbess_config");
    c.save(dir + "/run.json");
    const RunConfig r = RunConfig::load(dir + "/run.json");
    CHECK(r.to_json() == c.to_json());
    CHECK(r.fingerprint() == c.fingerprint());
    CHECK(r.fingerprint_hex().size() == 16);

    // Saving twice produces byte-identical files.
    c.save(dir + "/run2.json");
    CHECK(slurp(dir + "/run.json") == slurp(dir + "/run2.json"));
}

TEST_CASE("validation rejects malformed settings") {
    auto expect_reject = [](auto&& mutate) {
        RunConfig c;
        mutate(c);
        CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    };
    expect_reject([](RunConfig& c) { c.aging_acceleration = 0.0; });
    expect_reject([](RunConfig& c) { c.band_lo = 0.9; c.band_hi = 0.1; });
    expect_reject([](RunConfig& c) { c.terminal = 0.95; });
    expect_reject([](RunConfig& c) { c.eol_cf = 0.0; });
    expect_reject([](RunConfig& c) { c.repair_step_mw = -1.0; });
    expect_reject([](RunConfig& c) { c.steps_per_hour = 0; });
    expect_reject([](RunConfig& c) { c.sl.holdout = 1.0; });
    expect_reject([](RunConfig& c) { c.qsl.gamma = 1.0; });
    expect_reject([](RunConfig& c) { c.rl.tau = 0.0; });
    expect_reject([](RunConfig& c) { c.rl.replay_capacity = 8; });
    expect_reject([](RunConfig& c) { c.soc0 = 0.0; });
    expect_reject([](RunConfig& c) { c.cell_file.clear(); });
}

TEST_CASE("fingerprint tracks content") {
    RunConfig a, b;
    CHECK(a.fingerprint() == b.fingerprint());
    b.pi_cf += 1.0;
    CHECK(a.fingerprint() != b.fingerprint());
    RunConfig c;
    c.rl.noise_sigma = 0.051;
    CHECK(a.fingerprint() != c.fingerprint());
}

TEST_CASE("environment assembly applies the acceleration") {
    RunConfig c;
    c.cell_file = "data/cell.json";
    c.aging_acceleration = 20.0;
    c.train_aging_acceleration = 4.0;
    c.train_pi_cf = 60000.0;
    c.band_lo = 0.15;

    const CellParams base = CellParams::load(std::string(FRBESS_SOURCE_DIR) + "/data/cell.json");
    const EnvConfig ev = c.make_env(FRBESS_SOURCE_DIR);
    CHECK(ev.cell.sd.i0 == doctest::Approx(20.0 * base.sd.i0).epsilon(1e-14));
    CHECK(ev.pi_cf == 12000.0);
    CHECK(ev.mpc.band_lo == 0.15);
    CHECK(ev.mpc.energy_mwh == base.pack.energy_mwh);
    CHECK(ev.mpc.power_mw == base.pack.power_mw_max);

    const EnvConfig tr = c.make_train_env(FRBESS_SOURCE_DIR);
    CHECK(tr.cell.sd.i0 == doctest::Approx(4.0 * base.sd.i0).epsilon(1e-14));
    CHECK(tr.pi_cf == 60000.0);

    c.cell_file = "missing/cell.json";
    CHECK_THROWS(c.make_env(FRBESS_SOURCE_DIR));
}

TEST_CASE("shipped configs parse and validate") {
    const std::string root = FRBESS_SOURCE_DIR;
    const RunConfig realtime = RunConfig::load(root + "/configs/realtime.json");
    CHECK(realtime.aging_acceleration == 1.0);
    CHECK(realtime.rl.updates_per_episode == 672);
    CHECK_NOTHROW((void)realtime.make_env(root + "/configs"));

    const RunConfig acc = RunConfig::load(root + "/configs/accelerated.json");
    CHECK(acc.aging_acceleration == 20.0);
    CHECK(acc.train_aging_acceleration == 4.0);
    // Fade is cheaper per hour in the slowed training plant, so the training
    // fade price is raised above the evaluation price to keep aging visible
    // in the reward; the exact value is tuned, not derived.
    CHECK(acc.train_pi_cf > acc.pi_cf);
    CHECK(acc.fingerprint() != realtime.fingerprint());
}

TEST_CASE("manifest is deterministic and timestamp free") {
    const auto dir = tmp_dir("frbess_manifest");
    Manifest m;
    m.command = "train-rl";
    m.seed = 99;
    m.config_fingerprint = "00ff00ff00ff00ff";
    m.files = {{"config", "configs/accelerated.json"}, {"policy_out", "rl_policy.json"}};
    m.save(dir + "/m1.json");
    m.save(dir + "/m2.json");
    CHECK(slurp(dir + "/m1.json") == slurp(dir + "/m2.json"));

    const auto j = load_json(dir + "/m1.json");
    CHECK(j.at("command") == "train-rl");
    CHECK(j.at("seed") == 99);
    CHECK(j.at("files").at("policy_out") == "rl_policy.json");
    for (const auto& [key, val] : j.items()) {
        CHECK(key.find("time") == std::string::npos);
        CHECK(key.find("date") == std::string::npos);
    }
}

TEST_CASE("malformed config files raise") {
    const auto dir = tmp_dir("frbess_config_bad");
    {
        std::ofstream out(dir + "/bad.json");
        out << "{\"cell_file\": \"x\"}";
    }
    CHECK_THROWS((void)RunConfig::load(dir + "/bad.json"));
    CHECK_THROWS((void)RunConfig::load(dir + "/absent.json"));
    {
        std::ofstream out(dir + "/worse.json");
        out << "not json at all";
    }
    CHECK_THROWS((void)RunConfig::load(dir + "/worse.json"));
}

TEST_SUITE_END();
