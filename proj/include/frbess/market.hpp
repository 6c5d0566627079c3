#pragma once

// Market data, fitted price models, and the regulation-signal pool.
//
// History is hourly and starts at hour-of-week 0, so week w occupies rows
// [168w, 168w+168).  Energy prices are modelled as one 168-dimensional
// Gaussian per week (empirical mean and covariance, eigenvalue-clamped to
// stay PSD, samples truncated at zero).  Regulation capacity prices are
// modelled per hour-of-week as a lognormal whose location is the log of the
// sample mean and whose scale is the standard deviation of the log prices.
// The regulation signal has no parametric model: forecasts and realizations
// are uniform draws from the pool of historical hour-long traces.

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <frbess/common.hpp>
#include <frbess/csv.hpp>

namespace frbess {

inline constexpr int kHoursPerWeek = 168;

struct HistoricalDataset {
    std::vector<double> energy_price;          // $/MWh
    std::vector<double> fr_price;              // $/MW-h
    std::vector<std::vector<double>> signals;  // hour-long traces in [-1,1]

    int weeks() const {
        const std::size_t n = std::min(energy_price.size(), fr_price.size());
        return static_cast<int>(n / kHoursPerWeek);
    }

    void save(const std::string& dir) const {
        std::filesystem::create_directories(dir);
        {
            csv::Writer w(dir + "/energy.csv");
            w.raw_line("timestamp,price_mwh");
            for (std::size_t t = 0; t < energy_price.size(); ++t) w.row(t, energy_price[t]);
            w.close();
        }
        {
            csv::Writer w(dir + "/fr_price.csv");
            w.raw_line("timestamp,price_mw");
            for (std::size_t t = 0; t < fr_price.size(); ++t) w.row(t, fr_price[t]);
            w.close();
        }
        {
            csv::Writer w(dir + "/signals.csv");
            w.raw_line("timestamp,step,alpha");
            for (std::size_t t = 0; t < signals.size(); ++t)
                for (std::size_t s = 0; s < signals[t].size(); ++s)
                    w.row(t, s, signals[t][s]);
            w.close();
        }
    }

    static HistoricalDataset load(const std::string& dir) {
        HistoricalDataset d;
        for (const auto& r : csv::read_rows(dir + "/energy.csv", "timestamp,price_mwh"))
            d.energy_price.push_back(csv::parse_double(r.at(1)));
        for (const auto& r : csv::read_rows(dir + "/fr_price.csv", "timestamp,price_mw"))
            d.fr_price.push_back(csv::parse_double(r.at(1)));

        // signals.csv dwarfs the price files; stream it instead of read_rows.
        std::ifstream in(dir + "/signals.csv", std::ios::binary);
        if (!in) throw std::runtime_error("cannot open for reading: " + dir + "/signals.csv");
        std::string line;
        std::getline(in, line);
        if (line != "timestamp,step,alpha")
            throw std::runtime_error("signals.csv: unexpected header '" + line + "'");
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto cells = csv::split_line(line);
            if (cells.size() != 3) throw std::runtime_error("signals.csv: bad row '" + line + "'");
            const std::size_t t = static_cast<std::size_t>(csv::parse_double(cells[0]));
            if (t >= d.signals.size()) d.signals.resize(t + 1);
            d.signals[t].push_back(csv::parse_double(cells[2]));
        }
        return d;
    }
};

// --- energy prices: weekly multivariate Gaussian ----------------------------

struct EnergyPriceModel {
    Eigen::VectorXd mean;   // 168
    Eigen::MatrixXd cov;    // PSD after finalize()
    Eigen::MatrixXd factor; // V sqrt(max(lambda,0)), the sampling map

    // Clamps negative eigenvalues (sampling noise, serialization round-off)
    // and rebuilds cov and the sampling factor from the clamped spectrum.
    void finalize() {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
        cov = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
        factor = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
    }

    std::vector<double> sample_week(std::mt19937_64& rng) const {
        std::normal_distribution<double> n01(0.0, 1.0);
        Eigen::VectorXd xi(mean.size());
        for (int i = 0; i < xi.size(); ++i) xi[i] = n01(rng);
        Eigen::VectorXd x = mean + factor * xi;
        std::vector<double> out(static_cast<std::size_t>(x.size()));
        for (int i = 0; i < x.size(); ++i) out[i] = std::max(0.0, x[i]);
        return out;
    }
};

// --- regulation capacity prices: per-hour-of-week lognormal -----------------

struct FrPriceModel {
    std::vector<double> mu;    // 168, log of the sample mean
    std::vector<double> sigma; // 168, std of log prices

    double sample(int hour_of_week, std::mt19937_64& rng) const {
        std::normal_distribution<double> n01(0.0, 1.0);
        return std::exp(mu[hour_of_week] + sigma[hour_of_week] * n01(rng));
    }

    std::vector<double> sample_week(std::mt19937_64& rng) const {
        std::vector<double> out(kHoursPerWeek);
        for (int h = 0; h < kHoursPerWeek; ++h) out[h] = sample(h, rng);
        return out;
    }
};

struct PriceModels {
    EnergyPriceModel energy;
    FrPriceModel fr;

    void save(const std::string& path) const {
        nlohmann::json j;
        j["energy"]["mean"] =
            std::vector<double>(energy.mean.data(), energy.mean.data() + energy.mean.size());
        auto matrix_out = [](const Eigen::MatrixXd& a) {
            std::vector<std::vector<double>> c(static_cast<std::size_t>(a.rows()));
            for (int i = 0; i < a.rows(); ++i) {
                c[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(a.cols()));
                for (int k = 0; k < a.cols(); ++k) c[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = a(i, k);
            }
            return c;
        };
        j["energy"]["cov"] = matrix_out(energy.cov);
        // The sampling map is stored too: re-deriving it from the rebuilt
        // covariance would not be bitwise identical to the fitted one.
        j["energy"]["factor"] = matrix_out(energy.factor);
        j["fr"]["mu"] = fr.mu;
        j["fr"]["sigma"] = fr.sigma;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for writing: " + path);
        out << j.dump(1) << '\n';
        if (!out) throw std::runtime_error("write failed: " + path);
    }

    static PriceModels load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open for reading: " + path);
        nlohmann::json j;
        in >> j;
        PriceModels m;
        const auto mean = j.at("energy").at("mean").get<std::vector<double>>();
        m.energy.mean.resize(static_cast<int>(mean.size()));
        for (std::size_t i = 0; i < mean.size(); ++i) m.energy.mean[static_cast<int>(i)] = mean[i];
        auto matrix_in = [&](const char* key, Eigen::MatrixXd& a) {
            const auto c = j.at("energy").at(key).get<std::vector<std::vector<double>>>();
            a.resize(static_cast<int>(c.size()), c.empty() ? 0 : static_cast<int>(c[0].size()));
            for (std::size_t i = 0; i < c.size(); ++i)
                for (std::size_t k = 0; k < c[i].size(); ++k)
                    a(static_cast<int>(i), static_cast<int>(k)) = c[i][k];
        };
        matrix_in("cov", m.energy.cov);
        matrix_in("factor", m.energy.factor);
        m.fr.mu = j.at("fr").at("mu").get<std::vector<double>>();
        m.fr.sigma = j.at("fr").at("sigma").get<std::vector<double>>();
        return m;
    }
};

inline PriceModels fit_price_models(const HistoricalDataset& d) {
    const int w = d.weeks();
    if (w < 8)
        throw InsufficientData("price fit needs >= 8 complete weeks, got " + std::to_string(w));

    PriceModels m;
    Eigen::MatrixXd x(w, kHoursPerWeek);
    for (int i = 0; i < w; ++i)
        for (int h = 0; h < kHoursPerWeek; ++h)
            x(i, h) = d.energy_price[static_cast<std::size_t>(i) * kHoursPerWeek + h];
    m.energy.mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - m.energy.mean.transpose();
    m.energy.cov = centered.transpose() * centered / static_cast<double>(w);
    m.energy.finalize();

    m.fr.mu.resize(kHoursPerWeek);
    m.fr.sigma.resize(kHoursPerWeek);
    for (int h = 0; h < kHoursPerWeek; ++h) {
        double sum = 0.0;
        std::vector<double> logs(static_cast<std::size_t>(w));
        for (int i = 0; i < w; ++i) {
            const double p =
                std::max(1e-6, d.fr_price[static_cast<std::size_t>(i) * kHoursPerWeek + h]);
            sum += p;
            logs[static_cast<std::size_t>(i)] = std::log(p);
        }
        m.fr.mu[h] = std::log(sum / w);
        m.fr.sigma[h] = std::sqrt(var_of(logs));
    }
    return m;
}

// --- regulation signal: pool resampling --------------------------------------

struct SignalPool {
    std::vector<std::vector<double>> traces;

    static SignalPool from(const HistoricalDataset& d) {
        if (d.signals.empty()) throw InsufficientData("signal pool is empty");
        return SignalPool{d.signals};
    }

    const std::vector<double>& sample(std::mt19937_64& rng) const {
        std::uniform_int_distribution<std::size_t> pick(0, traces.size() - 1);
        return traces[pick(rng)];
    }
};

// --- synthetic history --------------------------------------------------------

// Daily and weekly harmonics over an AR(1) residual; the regulation signal
// is the slow AR(1) drift observed on real traces.  Shapes are arbitrary but
// strong enough that the fitted models must reproduce them.
inline HistoricalDataset synthesize_market(int weeks, int steps_per_hour, std::uint64_t seed) {
    if (weeks < 1 || steps_per_hour < 1)
        throw std::invalid_argument("synthesize_market: weeks and steps_per_hour must be >= 1");
    HistoricalDataset d;
    const int hours = weeks * kHoursPerWeek;
    const double two_pi = 2.0 * 3.14159265358979323846;

    std::mt19937_64 rng_e(split_seed(seed, "synth-energy"));
    std::normal_distribution<double> n01(0.0, 1.0);
    double ar = 0.0;
    for (int t = 0; t < hours; ++t) {
        const int hd = t % 24;
        const int dow = (t / 24) % 7;
        ar = 0.8 * ar + 2.5 * n01(rng_e);
        double p = 35.0 + 11.0 * std::sin(two_pi * (hd - 8.5) / 24.0) +
                   4.5 * std::sin(2.0 * two_pi * (hd - 1.0) / 24.0) + (dow >= 5 ? -5.0 : 0.0) + ar;
        d.energy_price.push_back(std::max(1.0, p));
    }

    std::mt19937_64 rng_f(split_seed(seed, "synth-fr"));
    for (int t = 0; t < hours; ++t) {
        const int hd = t % 24;
        const int dow = (t / 24) % 7;
        const double mu =
            std::log(11.0) + 0.45 * std::sin(two_pi * (hd - 16.0) / 24.0) + (dow >= 5 ? -0.15 : 0.0);
        d.fr_price.push_back(std::exp(mu + 0.3 * n01(rng_f)));
    }

    std::mt19937_64 rng_s(split_seed(seed, "synth-signal"));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    d.signals.resize(static_cast<std::size_t>(hours));
    for (auto& trace : d.signals) {
        trace.resize(static_cast<std::size_t>(steps_per_hour));
        double x = 0.0;
        for (double& a : trace) {
            x = 0.97 * x + 0.03 * u(rng_s);
            a = clamp(x, -1.0, 1.0);
        }
    }
    return d;
}

} // namespace frbess
