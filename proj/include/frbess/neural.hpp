#pragma once

// Small dense networks with explicit gradients.  Parameters live in one flat
// vector (per layer: row-major weight block, then bias) so optimizers and
// serialization never see the layer structure.  Everything here is checked
// against central finite differences in the test suite.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <frbess/common.hpp>

namespace frbess {

enum class Act { Relu, Tanh, Identity };

inline const char* to_string(Act a) {
    switch (a) {
        case Act::Relu: return "relu";
        case Act::Tanh: return "tanh";
        default: return "identity";
    }
}

inline Act act_from_string(const std::string& s) {
    if (s == "relu") return Act::Relu;
    if (s == "tanh") return Act::Tanh;
    if (s == "identity") return Act::Identity;
    throw std::invalid_argument("unknown activation: " + s);
}

inline double act_eval(Act a, double z) {
    switch (a) {
        case Act::Relu: return z > 0.0 ? z : 0.0;
        case Act::Tanh: return std::tanh(z);
        default: return z;
    }
}

// Derivative in terms of the pre-activation.
inline double act_deriv(Act a, double z) {
    switch (a) {
        case Act::Relu: return z > 0.0 ? 1.0 : 0.0;
        case Act::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        default: return 1.0;
    }
}

struct MlpWorkspace {
    std::vector<std::vector<double>> a; // a[0] = input, a[l] = activations
    std::vector<std::vector<double>> z; // z[l-1] = pre-activations of layer l
};

struct MlpGrads {
    std::vector<double> w; // dL/dparams
    std::vector<double> x; // dL/dinput
};

struct Mlp {
    std::vector<int> widths;
    std::vector<Act> acts; // one per layer, acts.size() == widths.size() - 1
    std::vector<double> w;

    int layers() const { return static_cast<int>(acts.size()); }

    int n_params() const {
        int n = 0;
        for (int l = 0; l < layers(); ++l) n += widths[l] * widths[l + 1] + widths[l + 1];
        return n;
    }

    int w_off(int l) const {
        int n = 0;
        for (int k = 0; k < l; ++k) n += widths[k] * widths[k + 1] + widths[k + 1];
        return n;
    }
    int b_off(int l) const { return w_off(l) + widths[l] * widths[l + 1]; }

    // He-uniform before relu, Xavier-uniform otherwise, zero biases.
    static Mlp make(std::vector<int> widths, std::vector<Act> acts, std::mt19937_64& rng) {
        if (widths.size() < 2 || acts.size() != widths.size() - 1)
            throw std::invalid_argument("mlp: widths/acts mismatch");
        Mlp m;
        m.widths = std::move(widths);
        m.acts = std::move(acts);
        m.w.assign(static_cast<std::size_t>(m.n_params()), 0.0);
        for (int l = 0; l < m.layers(); ++l) {
            const int fan_in = m.widths[l], fan_out = m.widths[l + 1];
            const double limit = m.acts[l] == Act::Relu
                                     ? std::sqrt(6.0 / fan_in)
                                     : std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> u(-limit, limit);
            for (int k = 0; k < fan_in * fan_out; ++k) m.w[static_cast<std::size_t>(m.w_off(l) + k)] = u(rng);
        }
        return m;
    }

    const std::vector<double>& forward(const std::vector<double>& x, MlpWorkspace& ws) const {
        if (static_cast<int>(x.size()) != widths[0])
            throw std::invalid_argument("mlp: bad input size");
        ws.a.assign(static_cast<std::size_t>(layers() + 1), {});
        ws.z.assign(static_cast<std::size_t>(layers()), {});
        ws.a[0] = x;
        for (int l = 0; l < layers(); ++l) {
            const int nin = widths[l], nout = widths[l + 1];
            auto& z = ws.z[static_cast<std::size_t>(l)];
            z.assign(static_cast<std::size_t>(nout), 0.0);
            const double* wl = w.data() + w_off(l);
            const double* bl = w.data() + b_off(l);
            const auto& in = ws.a[static_cast<std::size_t>(l)];
            for (int i = 0; i < nout; ++i) {
                double s = bl[i];
                const double* row = wl + static_cast<std::ptrdiff_t>(i) * nin;
                for (int k = 0; k < nin; ++k) s += row[k] * in[static_cast<std::size_t>(k)];
                z[static_cast<std::size_t>(i)] = s;
            }
            auto& out = ws.a[static_cast<std::size_t>(l + 1)];
            out.resize(static_cast<std::size_t>(nout));
            for (int i = 0; i < nout; ++i)
                out[static_cast<std::size_t>(i)] = act_eval(acts[static_cast<std::size_t>(l)], z[static_cast<std::size_t>(i)]);
        }
        return ws.a.back();
    }

    std::vector<double> forward(const std::vector<double>& x) const {
        MlpWorkspace ws;
        return forward(x, ws);
    }

    // Exploration variant: Gaussian noise on the last hidden pre-activation.
    std::vector<double> forward_noisy(const std::vector<double>& x, double sigma,
                                      std::mt19937_64& rng) const {
        MlpWorkspace ws;
        forward(x, ws);
        if (layers() < 2 || sigma == 0.0) {
            if (sigma != 0.0) throw std::invalid_argument("mlp: no hidden layer for noise");
            return ws.a.back();
        }
        std::normal_distribution<double> n01(0.0, 1.0);
        const int lh = layers() - 2;
        auto z = ws.z[static_cast<std::size_t>(lh)];
        for (double& v : z) v += sigma * n01(rng);
        std::vector<double> h(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) h[i] = act_eval(acts[static_cast<std::size_t>(lh)], z[i]);
        const int l = layers() - 1;
        const int nin = widths[l], nout = widths[l + 1];
        const double* wl = w.data() + w_off(l);
        const double* bl = w.data() + b_off(l);
        std::vector<double> out(static_cast<std::size_t>(nout));
        for (int i = 0; i < nout; ++i) {
            double s = bl[i];
            const double* row = wl + static_cast<std::ptrdiff_t>(i) * nin;
            for (int k = 0; k < nin; ++k) s += row[k] * h[static_cast<std::size_t>(k)];
            out[static_cast<std::size_t>(i)] = act_eval(acts[static_cast<std::size_t>(l)], s);
        }
        return out;
    }

    // dy is dL/d(output); returns dL/dparams and dL/dinput.
    MlpGrads backward(const MlpWorkspace& ws, std::vector<double> dy) const {
        MlpGrads g;
        g.w.assign(w.size(), 0.0);
        for (int l = layers() - 1; l >= 0; --l) {
            const int nin = widths[l], nout = widths[l + 1];
            const auto& z = ws.z[static_cast<std::size_t>(l)];
            const auto& in = ws.a[static_cast<std::size_t>(l)];
            for (int i = 0; i < nout; ++i)
                dy[static_cast<std::size_t>(i)] *= act_deriv(acts[static_cast<std::size_t>(l)], z[static_cast<std::size_t>(i)]);
            double* gw = g.w.data() + w_off(l);
            double* gb = g.w.data() + b_off(l);
            for (int i = 0; i < nout; ++i) {
                const double d = dy[static_cast<std::size_t>(i)];
                gb[i] = d;
                double* row = gw + static_cast<std::ptrdiff_t>(i) * nin;
                for (int k = 0; k < nin; ++k) row[k] = d * in[static_cast<std::size_t>(k)];
            }
            std::vector<double> dx(static_cast<std::size_t>(nin), 0.0);
            const double* wl = w.data() + w_off(l);
            for (int i = 0; i < nout; ++i) {
                const double d = dy[static_cast<std::size_t>(i)];
                const double* row = wl + static_cast<std::ptrdiff_t>(i) * nin;
                for (int k = 0; k < nin; ++k) dx[static_cast<std::size_t>(k)] += d * row[k];
            }
            dy = std::move(dx);
        }
        g.x = std::move(dy);
        return g;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["widths"] = widths;
        std::vector<std::string> a;
        for (Act x : acts) a.emplace_back(to_string(x));
        j["acts"] = a;
        j["w"] = w;
        return j;
    }

    static Mlp from_json(const nlohmann::json& j) {
        Mlp m;
        m.widths = j.at("widths").get<std::vector<int>>();
        for (const auto& s : j.at("acts").get<std::vector<std::string>>())
            m.acts.push_back(act_from_string(s));
        m.w = j.at("w").get<std::vector<double>>();
        if (m.widths.size() < 2 || m.acts.size() != m.widths.size() - 1 ||
            static_cast<int>(m.w.size()) != m.n_params())
            throw std::invalid_argument("mlp: corrupt serialization");
        return m;
    }
};

// Mean absolute error over output dimensions; fills dL/dy when asked.
inline double mae(const std::vector<double>& y, const std::vector<double>& t,
                  std::vector<double>* dy = nullptr) {
    if (y.size() != t.size()) throw std::invalid_argument("mae: size mismatch");
    const double n = static_cast<double>(y.size());
    double loss = 0.0;
    if (dy) dy->assign(y.size(), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = y[i] - t[i];
        loss += std::abs(e) / n;
        if (dy) (*dy)[i] = (e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0)) / n;
    }
    return loss;
}

// --- Adam ---------------------------------------------------------------------

struct Adam {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<double> m, v;
    long t = 0;

    void step(std::vector<double>& w, const std::vector<double>& g) {
        if (m.empty()) {
            m.assign(w.size(), 0.0);
            v.assign(w.size(), 0.0);
        }
        if (g.size() != w.size() || m.size() != w.size())
            throw std::invalid_argument("adam: size mismatch");
        ++t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

// --- input/output affine maps ---------------------------------------------------

struct Scaler {
    std::vector<double> shift, scale;

    static Scaler identity(int n) {
        return Scaler{std::vector<double>(static_cast<std::size_t>(n), 0.0),
                      std::vector<double>(static_cast<std::size_t>(n), 1.0)};
    }

    // Per-feature standardization; degenerate features keep scale 1.
    static Scaler fit(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) throw std::invalid_argument("scaler: no rows");
        const std::size_t n = rows[0].size();
        Scaler s{std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)};
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> col(rows.size());
            for (std::size_t r = 0; r < rows.size(); ++r) col[r] = rows[r].at(i);
            s.shift[i] = mean_of(col);
            const double sd = std::sqrt(var_of(col));
            s.scale[i] = sd > 1e-12 ? sd : 1.0;
        }
        return s;
    }

    std::vector<double> apply(const std::vector<double>& x) const {
        std::vector<double> y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - shift[i]) / scale[i];
        return y;
    }

    nlohmann::json to_json() const { return {{"shift", shift}, {"scale", scale}}; }
    static Scaler from_json(const nlohmann::json& j) {
        return Scaler{j.at("shift").get<std::vector<double>>(),
                      j.at("scale").get<std::vector<double>>()};
    }
};

// Maps tanh outputs in (-1,1) onto an action box.
struct BoxMap {
    std::vector<double> lo, hi;

    std::vector<double> apply(const std::vector<double>& t) const {
        std::vector<double> y(t.size());
        for (std::size_t i = 0; i < t.size(); ++i)
            y[i] = lo[i] + 0.5 * (t[i] + 1.0) * (hi[i] - lo[i]);
        return y;
    }

    double deriv(std::size_t i) const { return 0.5 * (hi[i] - lo[i]); }

    // Inverse with clipping away from the saturated ends, for distillation
    // targets in pre-box space.
    std::vector<double> invert(const std::vector<double>& y, double margin = 1e-6) const {
        std::vector<double> t(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double u = 2.0 * (y[i] - lo[i]) / (hi[i] - lo[i]) - 1.0;
            t[i] = clamp(u, -1.0 + margin, 1.0 - margin);
        }
        return t;
    }

    nlohmann::json to_json() const { return {{"lo", lo}, {"hi", hi}}; }
    static BoxMap from_json(const nlohmann::json& j) {
        return BoxMap{j.at("lo").get<std::vector<double>>(),
                      j.at("hi").get<std::vector<double>>()};
    }
};

inline void save_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(1) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

// --- assembled actor and critic -------------------------------------------------

inline Scaler concat_scaler(const Scaler& a, const Scaler& b) {
    Scaler s = a;
    s.shift.insert(s.shift.end(), b.shift.begin(), b.shift.end());
    s.scale.insert(s.scale.end(), b.scale.begin(), b.scale.end());
    return s;
}

struct PolicyNet {
    Scaler in;
    Mlp net; // n_in -> 30 relu -> 15 relu -> n_act tanh
    BoxMap box;

    static PolicyNet make(const Scaler& in, const BoxMap& box, std::mt19937_64& rng) {
        PolicyNet p;
        p.in = in;
        p.box = box;
        p.net = Mlp::make({static_cast<int>(in.shift.size()), 30, 15, static_cast<int>(box.lo.size())},
                          {Act::Relu, Act::Relu, Act::Tanh}, rng);
        return p;
    }

    std::vector<double> act(const std::vector<double>& x) const {
        return box.apply(net.forward(in.apply(x)));
    }

    std::vector<double> act_noisy(const std::vector<double>& x, double sigma,
                                  std::mt19937_64& rng) const {
        return box.apply(net.forward_noisy(in.apply(x), sigma, rng));
    }

    nlohmann::json to_json() const {
        return {{"scaler", in.to_json()}, {"net", net.to_json()}, {"box", box.to_json()}};
    }
    static PolicyNet from_json(const nlohmann::json& j) {
        PolicyNet p;
        p.in = Scaler::from_json(j.at("scaler"));
        p.net = Mlp::from_json(j.at("net"));
        p.box = BoxMap::from_json(j.at("box"));
        return p;
    }
    void save(const std::string& path) const { save_json(to_json(), path); }
    static PolicyNet load(const std::string& path) { return from_json(load_json(path)); }
};

struct CriticNet {
    Scaler in;              // over the concatenated (features, action) vector
    Mlp net;                // n_in -> 30 relu -> 15 relu -> 1 identity
    double out_scale = 1.0; // value() = out_scale * net output

    // The network itself regresses value / out_scale.  With a sign-based
    // loss each optimizer step moves the output by about one learning rate,
    // so the raw target has to be kept near unit magnitude or training would
    // crawl on dollar-scale returns.
    static CriticNet make(const Scaler& in, std::mt19937_64& rng, double out_scale = 1.0) {
        CriticNet c;
        c.in = in;
        c.net = Mlp::make({static_cast<int>(in.shift.size()), 30, 15, 1},
                          {Act::Relu, Act::Relu, Act::Identity}, rng);
        c.out_scale = out_scale;
        return c;
    }

    double value(const std::vector<double>& x, const std::vector<double>& a) const {
        std::vector<double> xa = x;
        xa.insert(xa.end(), a.begin(), a.end());
        return out_scale * net.forward(in.apply(xa))[0];
    }

    nlohmann::json to_json() const {
        return {{"scaler", in.to_json()}, {"net", net.to_json()}, {"out_scale", out_scale}};
    }
    static CriticNet from_json(const nlohmann::json& j) {
        CriticNet c;
        c.in = Scaler::from_json(j.at("scaler"));
        c.net = Mlp::from_json(j.at("net"));
        c.out_scale = j.at("out_scale").get<double>();
        if (!(c.out_scale > 0.0)) throw std::invalid_argument("critic: out_scale must be positive");
        return c;
    }
    void save(const std::string& path) const { save_json(to_json(), path); }
    static CriticNet load(const std::string& path) { return from_json(load_json(path)); }
};

} // namespace frbess
