// Single-particle cell model with an SEI side reaction on the anode.
//
// State: volume-averaged solid concentrations of both electrodes, SEI film
// thickness, and cumulative capacity fade. Given a power command the three
// algebraic unknowns (applied current, electrode potentials) are found by a
// damped Newton iteration on the Butler-Volmer / power residuals; the state
// then advances by one explicit Euler step.
//
// Sign conventions: I_app > 0 charges the cell. The side-reaction current
// density J_sd is never positive, and its magnitude grows exponentially as
// the anode potential drops (i.e. while charging), so charging ages the cell
// fastest. Lithium consumed by the side reaction leaves the anode balance,
// which is what the fade fraction tracks.
#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "frbess/common.hpp"
#include "frbess/csv.hpp"
#include "frbess/table.hpp"

namespace frbess {

struct ElectrodeParams {
    double radius = 0.0;     // particle radius [m]
    double area = 0.0;       // total electroactive surface area [m^2]
    double diffusivity = 0.0;// solid-phase diffusivity [m^2/s]
    double rate_k = 0.0;     // reaction rate constant
    double c_max = 0.0;      // max solid concentration [mol/m^3]
    Table1D ocp;             // open-circuit potential vs stoichiometry [V]
};

struct SideReactionParams {
    double i0 = 0.0;      // exchange current density [A/m^2]; 0 disables aging
    double u_ref = 0.0;   // reference potential of the side reaction [V]
    double r_sei = 0.0;   // native film resistance [ohm m^2]
    double molar_mass = 0.0;  // of the deposited product [kg/mol]
    double density = 0.0;     // [kg/m^3]
    double conductivity = 0.0;// film conductivity [S/m]
};

struct PackParams {
    double cell_count = 1.0;  // identical cells aggregated to grid scale
    double energy_mwh = 1.0;  // nameplate energy at full state of charge
    double power_mw_max = 1.0;
};

struct CellParams {
    ElectrodeParams pos, neg;
    double c_e = 1000.0;  // electrolyte concentration [mol/m^3]
    double temperature = 298.15;
    SideReactionParams sd;
    PackParams pack;
    double capacity_c = 1.0;  // coulombic basis for the fade fraction [C]
    double theta_p_at_soc0 = 0.95, theta_p_per_soc = -0.9;

    double x_v() const { return 0.5 * kFaraday / (kGasConst * temperature); }
    double k_e() const { return kFaraday / (kGasConst * temperature); }

    // Reads the human-readable parameter file; OCP table paths resolve
    // relative to the file's directory.
    static CellParams load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open cell params: " + path);
        nlohmann::json j;
        in >> j;
        const auto dir = std::filesystem::path(path).parent_path();
        auto electrode = [&](const nlohmann::json& e) {
            ElectrodeParams p;
            p.radius = e.at("particle_radius_m").get<double>();
            p.area = e.at("surface_area_m2").get<double>();
            p.diffusivity = e.at("diffusivity_m2_s").get<double>();
            p.rate_k = e.at("rate_constant").get<double>();
            p.c_max = e.at("c_max_mol_m3").get<double>();
            p.ocp = Table1D::load((dir / e.at("ocp_table").get<std::string>()).string());
            return p;
        };
        CellParams c;
        c.pos = electrode(j.at("cathode"));
        c.neg = electrode(j.at("anode"));
        c.c_e = j.at("electrolyte_c_mol_m3").get<double>();
        c.temperature = j.at("temperature_K").get<double>();
        const auto& s = j.at("side_reaction");
        c.sd.i0 = s.at("exchange_current_A_m2").get<double>();
        c.sd.u_ref = s.at("U_ref_V").get<double>();
        c.sd.r_sei = s.at("R_sei_ohm_m2").get<double>();
        c.sd.molar_mass = s.at("molar_mass_kg_mol").get<double>();
        c.sd.density = s.at("density_kg_m3").get<double>();
        c.sd.conductivity = s.at("film_conductivity_S_m").get<double>();
        const auto& pk = j.at("pack");
        c.pack.cell_count = pk.at("cell_count").get<double>();
        c.pack.energy_mwh = pk.at("energy_mwh").get<double>();
        c.pack.power_mw_max = pk.at("power_mw_max").get<double>();
        c.capacity_c = j.at("capacity_C").get<double>();
        const auto& st = j.at("stoichiometry");
        c.theta_p_at_soc0 = st.at("theta_p_at_soc0").get<double>();
        c.theta_p_per_soc = st.at("theta_p_per_soc").get<double>();
        return c;
    }
};

struct SpState {
    double c_p_avg = 0.0;  // [mol/m^3]
    double c_n_avg = 0.0;
    double delta_f = 0.0;  // SEI film thickness [m]
    double cf = 0.0;       // capacity fade fraction in [0, 1)
};

inline double soc_of(const CellParams& p, const SpState& s) {
    return s.c_n_avg / p.neg.c_max;
}

inline double stored_energy_mwh(const CellParams& p, const SpState& s) {
    return soc_of(p, s) * p.pack.energy_mwh;
}

inline SpState initial_state(const CellParams& p, double soc) {
    SpState s;
    s.c_n_avg = soc * p.neg.c_max;
    s.c_p_avg = (p.theta_p_at_soc0 + p.theta_p_per_soc * soc) * p.pos.c_max;
    return s;
}

// Unknowns of the implicit per-step system.
struct SpUnknowns {
    double i_app = 0.0;  // [A], > 0 charging
    double phi_p = 0.0;  // [V]
    double phi_n = 0.0;
};

// Everything downstream of (state, unknowns). `valid` is false when a
// surface concentration leaves (0, c_max) and the point is unusable.
struct SpEval {
    double j_p = 0.0, c_ps = 0.0, i0_p = 0.0, u_p = 0.0, eta_p = 0.0;
    double j_n = 0.0, c_ns = 0.0, i0_n = 0.0, u_n = 0.0, eta_n = 0.0;
    double j_sd = 0.0, eta_sd = 0.0, r_f = 0.0;
    bool valid = false;
};

inline SpEval sp_eval(const CellParams& p, const SpState& st, const SpUnknowns& u) {
    SpEval e;
    const double ke = p.k_e();
    e.r_f = p.sd.r_sei + st.delta_f / p.sd.conductivity;

    e.j_p = u.i_app / p.pos.area;
    e.c_ps = st.c_p_avg - e.j_p * p.pos.radius / (5.0 * p.pos.diffusivity * kFaraday);

    e.eta_sd = u.phi_n - p.sd.u_ref + e.r_f * u.i_app / p.neg.area;
    e.j_sd = (p.sd.i0 > 0.0) ? -p.sd.i0 * std::exp(-ke * e.eta_sd) : 0.0;
    e.j_n = -u.i_app / p.neg.area - e.j_sd;
    e.c_ns = st.c_n_avg - e.j_n * p.neg.radius / (5.0 * p.neg.diffusivity * kFaraday);

    const double margin_p = 1e-9 * p.pos.c_max, margin_n = 1e-9 * p.neg.c_max;
    if (e.c_ps < margin_p || e.c_ps > p.pos.c_max - margin_p || e.c_ns < margin_n ||
        e.c_ns > p.neg.c_max - margin_n || !std::isfinite(e.j_sd))
        return e;  // valid stays false

    e.i0_p = kFaraday * p.pos.rate_k * std::sqrt((p.pos.c_max - e.c_ps) * e.c_ps * p.c_e);
    e.i0_n = kFaraday * p.neg.rate_k * std::sqrt((p.neg.c_max - e.c_ns) * e.c_ns * p.c_e);
    e.u_p = p.pos.ocp(e.c_ps / p.pos.c_max);
    e.u_n = p.neg.ocp(e.c_ns / p.neg.c_max);
    e.eta_p = u.phi_p - e.u_p;
    e.eta_n = u.phi_n - e.u_n + e.r_f * u.i_app / p.neg.area;
    e.valid = true;
    return e;
}

// Residuals of the implicit system at (state, unknowns) for a cell power
// target [W]: anode Butler-Volmer, cathode Butler-Volmer, power balance.
inline std::array<double, 3> sp_residuals(const CellParams& p, const SpState& st,
                                          const SpUnknowns& u, double power_w) {
    const SpEval e = sp_eval(p, st, u);
    if (!e.valid)
        return {std::numeric_limits<double>::quiet_NaN(),
                std::numeric_limits<double>::quiet_NaN(),
                std::numeric_limits<double>::quiet_NaN()};
    const double xv = p.x_v();
    return {2.0 * e.i0_n * std::sinh(xv * e.eta_n) - e.j_n,
            2.0 * e.i0_p * std::sinh(xv * e.eta_p) - e.j_p,
            u.i_app * (u.phi_p - u.phi_n) - power_w};
}

namespace detail {

// Partial derivatives of every intermediate quantity with respect to the
// unknowns; shared by the public Jacobian and the conditioned solver system.
struct SpChain {
    SpEval e;
    double dcps_di = 0.0, di0p_dcps = 0.0, dup_dcps = 0.0;
    double djn_di = 0.0, djn_dn = 0.0, dcns_di = 0.0, dcns_dn = 0.0;
    double di0n_dcns = 0.0, dun_dcns = 0.0, detan_di = 0.0, detan_dn = 0.0;
};

inline SpChain sp_chain(const CellParams& p, const SpState& st, const SpUnknowns& u) {
    SpChain c;
    c.e = sp_eval(p, st, u);
    if (!c.e.valid) return c;
    const SpEval& e = c.e;
    const double ke = p.k_e();

    c.dcps_di = -p.pos.radius / (5.0 * p.pos.diffusivity * kFaraday * p.pos.area);
    c.di0p_dcps = kFaraday * p.pos.rate_k * std::sqrt(p.c_e) * (p.pos.c_max - 2.0 * e.c_ps) /
                  (2.0 * std::sqrt((p.pos.c_max - e.c_ps) * e.c_ps));
    c.dup_dcps = p.pos.ocp.deriv(e.c_ps / p.pos.c_max) / p.pos.c_max;

    const double djsd_di = -ke * e.j_sd * (e.r_f / p.neg.area);
    const double djsd_dn = -ke * e.j_sd;
    c.djn_di = -1.0 / p.neg.area - djsd_di;
    c.djn_dn = -djsd_dn;
    const double kn = -p.neg.radius / (5.0 * p.neg.diffusivity * kFaraday);
    c.dcns_di = kn * c.djn_di;
    c.dcns_dn = kn * c.djn_dn;
    c.di0n_dcns = kFaraday * p.neg.rate_k * std::sqrt(p.c_e) * (p.neg.c_max - 2.0 * e.c_ns) /
                  (2.0 * std::sqrt((p.neg.c_max - e.c_ns) * e.c_ns));
    c.dun_dcns = p.neg.ocp.deriv(e.c_ns / p.neg.c_max) / p.neg.c_max;
    c.detan_di = e.r_f / p.neg.area - c.dun_dcns * c.dcns_di;
    c.detan_dn = 1.0 - c.dun_dcns * c.dcns_dn;
    return c;
}

}  // namespace detail

// Analytic Jacobian of sp_residuals with respect to (i_app, phi_p, phi_n).
inline Eigen::Matrix3d sp_jacobian(const CellParams& p, const SpState& st, const SpUnknowns& u) {
    const detail::SpChain c = detail::sp_chain(p, st, u);
    const SpEval& e = c.e;
    const double xv = p.x_v();
    Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
    if (!e.valid) return J;

    // anode row: g_n = 2 i0_n sinh(xv eta_n) - j_n, side reaction inside j_n
    const double sh_n = std::sinh(xv * e.eta_n), ch_n = std::cosh(xv * e.eta_n);
    J(0, 0) = 2.0 * sh_n * c.di0n_dcns * c.dcns_di + 2.0 * e.i0_n * xv * ch_n * c.detan_di -
              c.djn_di;
    J(0, 2) = 2.0 * sh_n * c.di0n_dcns * c.dcns_dn + 2.0 * e.i0_n * xv * ch_n * c.detan_dn -
              c.djn_dn;

    // cathode row: g_p = 2 i0_p sinh(xv eta_p) - j_p
    const double sh_p = std::sinh(xv * e.eta_p), ch_p = std::cosh(xv * e.eta_p);
    J(1, 0) = 2.0 * sh_p * c.di0p_dcps * c.dcps_di +
              2.0 * e.i0_p * xv * ch_p * (-c.dup_dcps * c.dcps_di) - 1.0 / p.pos.area;
    J(1, 1) = 2.0 * e.i0_p * xv * ch_p;

    // power row: g_pow = i_app (phi_p - phi_n) - P
    J(2, 0) = u.phi_p - u.phi_n;
    J(2, 1) = u.i_app;
    J(2, 2) = -u.i_app;
    return J;
}

namespace detail {

// The Newton iteration runs on an algebraically equivalent form of the
// system: xv*eta - asinh(j / 2 i0) instead of 2 i0 sinh(xv eta) - j. Both
// share the same roots, but the asinh form has log-scale curvature, which
// removes the violent overshoot of raw Butler-Volmer residuals at high
// overpotential. Termination is still checked on the public residuals.
struct CondSystem {
    Eigen::Vector3d h = Eigen::Vector3d::Zero();
    Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
    bool valid = false;
};

inline CondSystem sp_conditioned(const CellParams& p, const SpState& st, const SpUnknowns& u,
                                 double power_w) {
    CondSystem s;
    const SpChain c = sp_chain(p, st, u);
    const SpEval& e = c.e;
    if (!e.valid) return s;
    const double xv = p.x_v();
    const double p_scale = std::max(1.0, std::abs(power_w));

    const double w_n = e.j_n / (2.0 * e.i0_n);
    const double w_p = e.j_p / (2.0 * e.i0_p);
    s.h[0] = xv * e.eta_n - std::asinh(w_n);
    s.h[1] = xv * e.eta_p - std::asinh(w_p);
    s.h[2] = (u.i_app * (u.phi_p - u.phi_n) - power_w) / p_scale;

    // d asinh(w)/dx = (j'/(2 i0) - w i0'/i0) / sqrt(1 + w^2)
    const double den_n = std::sqrt(1.0 + w_n * w_n);
    const double dwn_di = c.djn_di / (2.0 * e.i0_n) - w_n * (c.di0n_dcns * c.dcns_di) / e.i0_n;
    const double dwn_dn = c.djn_dn / (2.0 * e.i0_n) - w_n * (c.di0n_dcns * c.dcns_dn) / e.i0_n;
    s.J(0, 0) = xv * c.detan_di - dwn_di / den_n;
    s.J(0, 2) = xv * c.detan_dn - dwn_dn / den_n;

    const double den_p = std::sqrt(1.0 + w_p * w_p);
    const double dwp_di =
        (1.0 / p.pos.area) / (2.0 * e.i0_p) - w_p * (c.di0p_dcps * c.dcps_di) / e.i0_p;
    s.J(1, 0) = xv * (-c.dup_dcps * c.dcps_di) - dwp_di / den_p;
    s.J(1, 1) = xv;

    s.J(2, 0) = (u.phi_p - u.phi_n) / p_scale;
    s.J(2, 1) = u.i_app / p_scale;
    s.J(2, 2) = -u.i_app / p_scale;
    s.valid = true;
    return s;
}

}  // namespace detail

// Converged operating point for one step.
struct AlgebraicSolution {
    SpUnknowns u;
    double v = 0.0;       // terminal voltage [V]
    double power_w = 0.0; // realized cell power [W]
    double j_p = 0.0, j_n = 0.0, j_sd = 0.0;
    double eta_p = 0.0, eta_n = 0.0, r_f = 0.0;
    int newton_iters = 0;
};

namespace detail {

inline std::array<double, 3> residual_scales(const SpEval& e, double power_w) {
    return {std::max(1.0, std::abs(e.j_n) + 2.0 * e.i0_n),
            std::max(1.0, std::abs(e.j_p) + 2.0 * e.i0_p), std::max(1.0, std::abs(power_w))};
}

inline double scaled_norm(const std::array<double, 3>& g, const std::array<double, 3>& s) {
    double m = 0.0;
    for (int i = 0; i < 3; ++i) m = std::max(m, std::abs(g[i]) / s[i]);
    return m;
}

inline SpUnknowns cold_start(const CellParams& p, const SpState& st, double power_w) {
    SpUnknowns u;
    const double theta_p = st.c_p_avg / p.pos.c_max, theta_n = st.c_n_avg / p.neg.c_max;
    const double up = p.pos.ocp(theta_p), un = p.neg.ocp(theta_n);
    const double v_oc = std::max(up - un, 0.5);
    u.i_app = power_w / v_oc;
    const double i0p = kFaraday * p.pos.rate_k *
                       std::sqrt(std::max((p.pos.c_max - st.c_p_avg) * st.c_p_avg, 1e-12) * p.c_e);
    const double i0n = kFaraday * p.neg.rate_k *
                       std::sqrt(std::max((p.neg.c_max - st.c_n_avg) * st.c_n_avg, 1e-12) * p.c_e);
    const double xv = p.x_v();
    u.phi_p = up + std::asinh(u.i_app / p.pos.area / (2.0 * i0p)) / xv;
    u.phi_n = un + std::asinh(-u.i_app / p.neg.area / (2.0 * i0n)) / xv;
    return u;
}

}  // namespace detail

// Damped Newton solve of the implicit system for a commanded cell power [W].
// Scaled residual tolerance 1e-11, at most 50 iterations, at most 8 step
// halvings per iteration. A warm start from the previous step's solution
// typically converges in 2-4 iterations.
inline AlgebraicSolution solve_algebraic(const CellParams& p, const SpState& st, double power_w,
                                         const AlgebraicSolution* warm = nullptr) {
    constexpr double tol = 1e-11;
    SpUnknowns u = warm ? warm->u : detail::cold_start(p, st, power_w);
    bool restarted = warm == nullptr;
    int iters = 0;

    auto fail = [&](const SpEval& e, const char* msg) {
        if (!e.valid) throw SaturatedSurface("cell cannot reach the commanded power");
        const double m_p = std::min(e.c_ps, p.pos.c_max - e.c_ps) / p.pos.c_max;
        const double m_n = std::min(e.c_ns, p.neg.c_max - e.c_ns) / p.neg.c_max;
        if (m_p < 5e-3 || m_n < 5e-3) throw SaturatedSurface("surface concentration saturated");
        throw NonConvergence(msg);
    };

    detail::CondSystem sys = detail::sp_conditioned(p, st, u, power_w);
    if (!sys.valid) {
        restarted = true;
        u = detail::cold_start(p, st, power_w);
        sys = detail::sp_conditioned(p, st, u, power_w);
        if (!sys.valid) throw SaturatedSurface("cell cannot reach the commanded power");
    }
    double merit = sys.h.cwiseAbs().maxCoeff();

    auto converged = [&]() {
        const SpEval e = sp_eval(p, st, u);
        const auto g = sp_residuals(p, st, u, power_w);
        return detail::scaled_norm(g, detail::residual_scales(e, power_w)) <= tol;
    };

    while (!converged()) {
        if (++iters > 50) {
            if (!restarted) {
                restarted = true;
                u = detail::cold_start(p, st, power_w);
                sys = detail::sp_conditioned(p, st, u, power_w);
                if (!sys.valid) throw SaturatedSurface("cell cannot reach the commanded power");
                merit = sys.h.cwiseAbs().maxCoeff();
                iters = 0;
                continue;
            }
            fail(sp_eval(p, st, u), "newton stalled on the cell power system");
        }

        const Eigen::Vector3d dx_raw = sys.J.fullPivLu().solve(-sys.h);
        if (!dx_raw.allFinite()) throw NonConvergence("singular jacobian in cell solve");
        // clip so iterates stay within the model's sane region even when the
        // jacobian degenerates near surface depletion
        Eigen::Vector3d dx = dx_raw;
        const double di_max = std::max(5.0, 0.5 * std::abs(u.i_app) + 1.0);
        double clip = 1.0;
        clip = std::min(clip, di_max / std::max(di_max, std::abs(dx[0])));
        clip = std::min(clip, 0.3 / std::max(0.3, std::abs(dx[1])));
        clip = std::min(clip, 0.3 / std::max(0.3, std::abs(dx[2])));
        dx *= clip;

        double lambda = 1.0;
        bool accepted = false;
        for (int h = 0; h <= 8; ++h) {
            const SpUnknowns trial{u.i_app + lambda * dx[0], u.phi_p + lambda * dx[1],
                                   u.phi_n + lambda * dx[2]};
            const detail::CondSystem ts = detail::sp_conditioned(p, st, trial, power_w);
            if (ts.valid) {
                const double tm = ts.h.cwiseAbs().maxCoeff();
                if (tm < (1.0 - 1e-4 * lambda) * merit || tm < 1e-14) {
                    u = trial;
                    sys = ts;
                    merit = tm;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if (!accepted) {
            if (!restarted) {
                restarted = true;
                u = detail::cold_start(p, st, power_w);
                sys = detail::sp_conditioned(p, st, u, power_w);
                if (!sys.valid) throw SaturatedSurface("cell cannot reach the commanded power");
                merit = sys.h.cwiseAbs().maxCoeff();
                continue;
            }
            fail(sp_eval(p, st, u), "line search failed in cell solve");
        }
    }

    const SpEval e = sp_eval(p, st, u);
    AlgebraicSolution out;
    out.u = u;
    out.v = u.phi_p - u.phi_n;
    out.power_w = u.i_app * out.v;
    out.j_p = e.j_p;
    out.j_n = e.j_n;
    out.j_sd = e.j_sd;
    out.eta_p = e.eta_p;
    out.eta_n = e.eta_n;
    out.r_f = e.r_f;
    out.newton_iters = iters;
    return out;
}

// Explicit Euler update of the averaged state from a converged operating
// point held for dt seconds.
inline SpState euler_step(const CellParams& p, const SpState& st, const AlgebraicSolution& sol,
                          double dt) {
    SpState nx = st;
    nx.c_p_avg = st.c_p_avg - 3.0 * sol.j_p * dt / (p.pos.radius * kFaraday);
    nx.c_n_avg = st.c_n_avg - 3.0 * sol.j_n * dt / (p.neg.radius * kFaraday);
    nx.delta_f = st.delta_f - sol.j_sd * p.sd.molar_mass * dt / (p.sd.density * kFaraday);
    nx.cf = st.cf + std::abs(sol.j_sd) * p.neg.area * dt / p.capacity_c;
    return nx;
}

// Step-by-step record of one simulated hour. E and Cf are end-of-step values.
struct HourTrace {
    std::vector<int> step;
    std::vector<double> p_mw, i_app, v, e_mwh, cf;

    void write_csv(const std::string& path) const {
        csv::Writer w(path);
        w.raw_line("step,P,I_app,V,E,Cf");
        for (std::size_t i = 0; i < step.size(); ++i)
            w.row(step[i], p_mw[i], i_app[i], v[i], e_mwh[i], cf[i]);
        w.close();
    }
};

struct HourResult {
    SpState state;
    HourTrace trace;
};

// Simulates one hour at pack power p_mw[s] per step (MW, > 0 charging).
// Throws InfeasibleHour carrying the failing step when the cell cannot
// deliver a commanded power.
inline HourResult simulate_hour(const CellParams& p, const SpState& start,
                                const std::vector<double>& p_mw, double dt) {
    HourResult r;
    r.state = start;
    const int steps = static_cast<int>(p_mw.size());
    r.trace.step.reserve(steps);
    AlgebraicSolution prev;
    bool have_prev = false;
    for (int s = 0; s < steps; ++s) {
        const double cell_w = p_mw[s] * 1e6 / p.pack.cell_count;
        AlgebraicSolution sol;
        try {
            sol = solve_algebraic(p, r.state, cell_w, have_prev ? &prev : nullptr);
        } catch (const SaturatedSurface& ex) {
            throw InfeasibleHour(s, ex.what());
        } catch (const NonConvergence& ex) {
            throw InfeasibleHour(s, ex.what());
        }
        r.state = euler_step(p, r.state, sol, dt);
        if (r.state.c_n_avg <= 0.0 || r.state.c_n_avg >= p.neg.c_max ||
            r.state.c_p_avg <= 0.0 || r.state.c_p_avg >= p.pos.c_max)
            throw InfeasibleHour(s, "average concentration left its physical range");
        r.trace.step.push_back(s);
        r.trace.p_mw.push_back(p_mw[s]);
        r.trace.i_app.push_back(sol.u.i_app);
        r.trace.v.push_back(sol.v);
        r.trace.e_mwh.push_back(stored_energy_mwh(p, r.state));
        r.trace.cf.push_back(r.state.cf);
        prev = sol;
        have_prev = true;
    }
    return r;
}

}  // namespace frbess
