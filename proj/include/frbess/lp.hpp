// Self-contained linear-program solver: bounded-variable revised simplex
// with a singleton-column crash basis, product-form basis updates on top of
// a sparse LU factorization, and a composite (bound-infeasibility) phase 1.
// Sized for the LF-MPC problems: a few thousand equality rows with <= 4
// nonzeros each, plus a handful of dense market columns.
#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "frbess/common.hpp"

namespace frbess {

enum class LpStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

inline const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::Optimal: return "Optimal";
        case LpStatus::Infeasible: return "Infeasible";
        case LpStatus::Unbounded: return "Unbounded";
        default: return "NumericalFailure";
    }
}

// maximize c.z  s.t.  A_eq z = b_eq,  A_ub z <= b_ub,  lb <= z <= ub.
// Rows are stored sparse; the dense builder below mirrors the usual
// (c, A_eq, b_eq, A_ub, b_ub, lb, ub) description for small problems.
struct LpProblem {
    struct Row {
        std::vector<std::pair<int, double>> coef;
        double rhs = 0.0;
        bool is_eq = false;
    };

    std::vector<double> c, lb, ub;
    std::vector<Row> rows;

    int n_vars() const { return static_cast<int>(c.size()); }

    int add_var(double lo, double hi, double obj = 0.0) {
        c.push_back(obj);
        lb.push_back(lo);
        ub.push_back(hi);
        return n_vars() - 1;
    }

    void add_eq(std::vector<std::pair<int, double>> coef, double rhs) {
        rows.push_back(Row{std::move(coef), rhs, true});
    }

    void add_ub(std::vector<std::pair<int, double>> coef, double rhs) {
        rows.push_back(Row{std::move(coef), rhs, false});
    }

    using Dense = std::vector<std::vector<double>>;

    static LpProblem from_dense(const std::vector<double>& c, const Dense& A_eq,
                                const std::vector<double>& b_eq, const Dense& A_ub,
                                const std::vector<double>& b_ub, const std::vector<double>& lb,
                                const std::vector<double>& ub) {
        LpProblem p;
        p.c = c;
        p.lb = lb;
        p.ub = ub;
        auto add_rows = [&](const Dense& A, const std::vector<double>& b, bool eq) {
            for (std::size_t i = 0; i < A.size(); ++i) {
                std::vector<std::pair<int, double>> coef;
                for (std::size_t j = 0; j < A[i].size(); ++j)
                    if (A[i][j] != 0.0) coef.emplace_back(static_cast<int>(j), A[i][j]);
                if (eq)
                    p.add_eq(std::move(coef), b[i]);
                else
                    p.add_ub(std::move(coef), b[i]);
            }
        };
        add_rows(A_eq, b_eq, true);
        add_rows(A_ub, b_ub, false);
        return p;
    }

    void validate() const {
        const int n = n_vars();
        if (static_cast<int>(lb.size()) != n || static_cast<int>(ub.size()) != n)
            throw std::invalid_argument("lp: bound arrays must match objective length");
        for (int j = 0; j < n; ++j) {
            if (!(lb[j] <= ub[j])) throw std::invalid_argument("lp: lb > ub");
            if (!std::isfinite(c[j])) throw std::invalid_argument("lp: non-finite objective");
        }
        for (const auto& r : rows) {
            if (!std::isfinite(r.rhs)) throw std::invalid_argument("lp: non-finite rhs");
            for (auto [j, v] : r.coef) {
                if (j < 0 || j >= n) throw std::invalid_argument("lp: column index out of range");
                if (!std::isfinite(v)) throw std::invalid_argument("lp: non-finite coefficient");
            }
        }
    }

    // Sectioned text dump (MPS-like) for external cross-checks.
    void dump(std::ostream& os, const std::string& name = "LP") const {
        os << "NAME " << name << "\n";
        os << "OBJSENSE MAX\nCOLUMNS " << n_vars() << "\nROWS " << rows.size() << "\n";
        os << "OBJ";
        for (int j = 0; j < n_vars(); ++j)
            if (c[j] != 0.0) os << " x" << j << ":" << c[j];
        os << "\n";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            os << "R" << i << (rows[i].is_eq ? " E " : " L ") << rows[i].rhs << " :";
            for (auto [j, v] : rows[i].coef) os << " x" << j << ":" << v;
            os << "\n";
        }
        os << "BOUNDS\n";
        for (int j = 0; j < n_vars(); ++j) os << "x" << j << " " << lb[j] << " " << ub[j] << "\n";
        os << "ENDATA\n";
    }
};

struct LpSolution {
    LpStatus status = LpStatus::NumericalFailure;
    std::vector<double> z;  // optimizer in the original variable space
    double obj = 0.0;       // c . z
    int iterations = 0;
};

namespace detail {

class SimplexSolver {
  public:
    explicit SimplexSolver(const LpProblem& p) { build(p); }

    LpSolution run() {
        LpSolution out;
        crash_basis();
        if (!refactorize()) {
            out.status = LpStatus::NumericalFailure;
            return out;
        }

        LpStatus st = iterate(/*phase1=*/true);
        if (st == LpStatus::Optimal && infeasibility() > feas_tol_)
            st = LpStatus::Infeasible;
        if (st == LpStatus::Optimal) st = iterate(/*phase1=*/false);

        out.status = st;
        out.iterations = iters_;
        if (st == LpStatus::Optimal) {
            out.z.resize(n_struct_);
            for (int j = 0; j < n_struct_; ++j) out.z[j] = x_[j] * colscale_[j];
            out.obj = 0.0;
            for (int j = 0; j < n_struct_; ++j) out.obj += c_orig_[j] * out.z[j];
        }
        return out;
    }

  private:
    enum class St : std::uint8_t { Basic, AtLower, AtUpper, Free };

    // -- problem in scaled standard form: A x = b, l <= x <= u, min cost.x --
    int nrow_ = 0, ncol_ = 0, n_struct_ = 0;
    std::vector<std::vector<int>> col_rows_;
    std::vector<std::vector<double>> col_vals_;
    std::vector<double> lo_, hi_, cost_, b_, colscale_;
    std::vector<double> c_orig_;

    std::vector<St> state_;
    std::vector<int> basis_;      // row -> column
    std::vector<int> basic_pos_;  // column -> row or -1
    std::vector<double> x_;       // all columns; basic entries tracked in place

    Eigen::SparseMatrix<double> bmat_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
    struct Eta {
        int r;
        Eigen::VectorXd d;
    };
    std::vector<Eta> etas_;

    int iters_ = 0;
    int degen_streak_ = 0;
    static constexpr double feas_tol_ = 1e-9;
    static constexpr double opt_tol_ = 1e-9;
    static constexpr double pivot_tol_ = 1e-9;
    static constexpr int refactor_every_ = 60;

    void build(const LpProblem& p) {
        p.validate();
        n_struct_ = p.n_vars();
        nrow_ = static_cast<int>(p.rows.size());
        c_orig_ = p.c;

        int n_slack = 0;
        for (const auto& r : p.rows)
            if (!r.is_eq) ++n_slack;
        ncol_ = n_struct_ + n_slack;

        col_rows_.assign(ncol_, {});
        col_vals_.assign(ncol_, {});
        lo_.assign(ncol_, 0.0);
        hi_.assign(ncol_, kInf);
        cost_.assign(ncol_, 0.0);
        b_.assign(nrow_, 0.0);
        colscale_.assign(ncol_, 1.0);

        for (int j = 0; j < n_struct_; ++j) {
            lo_[j] = p.lb[j];
            hi_[j] = p.ub[j];
            cost_[j] = -p.c[j];  // maximize -> minimize
        }

        std::vector<double> rowscale(nrow_, 1.0);
        for (int i = 0; i < nrow_; ++i) {
            double mx = 0.0;
            for (auto [j, v] : p.rows[i].coef) mx = std::max(mx, std::abs(v));
            rowscale[i] = (mx > 0.0) ? 1.0 / clamp(mx, 1e-8, 1e8) : 1.0;
            b_[i] = p.rows[i].rhs * rowscale[i];
        }

        int slack = n_struct_;
        for (int i = 0; i < nrow_; ++i) {
            for (auto [j, v] : p.rows[i].coef) {
                col_rows_[j].push_back(i);
                col_vals_[j].push_back(v * rowscale[i]);
            }
            if (!p.rows[i].is_eq) {
                col_rows_[slack].push_back(i);
                col_vals_[slack].push_back(rowscale[i]);
                ++slack;
            }
        }

        for (int j = 0; j < n_struct_; ++j) {
            double mx = 0.0;
            for (double v : col_vals_[j]) mx = std::max(mx, std::abs(v));
            if (mx > 0.0) {
                const double s = 1.0 / clamp(mx, 1e-8, 1e8);
                colscale_[j] = s;
                for (double& v : col_vals_[j]) v *= s;
                if (std::isfinite(lo_[j])) lo_[j] /= s;
                if (std::isfinite(hi_[j])) hi_[j] /= s;
                cost_[j] *= s;
            }
        }

        state_.assign(ncol_, St::AtLower);
        x_.assign(ncol_, 0.0);
        for (int j = 0; j < ncol_; ++j) {
            if (std::isfinite(lo_[j])) {
                state_[j] = St::AtLower;
                x_[j] = lo_[j];
            } else if (std::isfinite(hi_[j])) {
                state_[j] = St::AtUpper;
                x_[j] = hi_[j];
            } else {
                state_[j] = St::Free;
                x_[j] = 0.0;
            }
        }
        basic_pos_.assign(ncol_, -1);
        basis_.assign(nrow_, -1);
    }

    bool is_fixed(int j) const { return lo_[j] == hi_[j]; }

    // Permuted-triangular crash: repeatedly assign a column that is a
    // singleton over the still-uncovered rows. Rows left uncovered receive a
    // fixed artificial column whose bound violation phase 1 drives out.
    void crash_basis() {
        std::vector<int> live(ncol_, 0);
        std::vector<std::vector<int>> row_cols(nrow_);
        for (int j = 0; j < ncol_; ++j) {
            live[j] = static_cast<int>(col_rows_[j].size());
            for (int i : col_rows_[j]) row_cols[i].push_back(j);
        }
        std::vector<char> row_covered(nrow_, 0);
        std::vector<char> col_used(ncol_, 0);

        bool progress = true;
        while (progress) {
            progress = false;
            // fixed columns are least preferred: they cannot move off their
            // bound, so making them basic invites degenerate pivots
            for (int pass = 0; pass < 2 && !progress; ++pass) {
                for (int j = 0; j < ncol_ && !progress; ++j) {
                    if (col_used[j] || live[j] != 1) continue;
                    if ((pass == 0) == is_fixed(j)) continue;
                    int row = -1;
                    double piv = 0.0;
                    for (std::size_t k = 0; k < col_rows_[j].size(); ++k) {
                        if (!row_covered[col_rows_[j][k]]) {
                            row = col_rows_[j][k];
                            piv = col_vals_[j][k];
                        }
                    }
                    if (row < 0 || std::abs(piv) < 1e-8) continue;
                    basis_[row] = j;
                    col_used[j] = 1;
                    row_covered[row] = 1;
                    for (int jj : row_cols[row]) --live[jj];
                    progress = true;
                }
            }
        }

        for (int i = 0; i < nrow_; ++i) {
            if (row_covered[i]) continue;
            col_rows_.push_back({i});
            col_vals_.push_back({1.0});
            lo_.push_back(0.0);
            hi_.push_back(0.0);
            cost_.push_back(0.0);
            colscale_.push_back(1.0);
            state_.push_back(St::AtLower);
            x_.push_back(0.0);
            basic_pos_.push_back(-1);
            basis_[i] = ncol_;
            ++ncol_;
        }

        for (int i = 0; i < nrow_; ++i) {
            state_[basis_[i]] = St::Basic;
            basic_pos_[basis_[i]] = i;
        }
    }

    bool refactorize() {
        etas_.clear();
        if (nrow_ == 0) return true;
        std::vector<Eigen::Triplet<double>> trips;
        for (int i = 0; i < nrow_; ++i) {
            const int j = basis_[i];
            for (std::size_t k = 0; k < col_rows_[j].size(); ++k)
                trips.emplace_back(col_rows_[j][k], i, col_vals_[j][k]);
        }
        bmat_.resize(nrow_, nrow_);
        bmat_.setFromTriplets(trips.begin(), trips.end());
        lu_.compute(bmat_);
        if (lu_.info() != Eigen::Success) return false;
        recompute_basics();
        return true;
    }

    void recompute_basics() {
        if (nrow_ == 0) return;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nrow_);
        for (int i = 0; i < nrow_; ++i) rhs[i] = b_[i];
        for (int j = 0; j < ncol_; ++j) {
            if (state_[j] == St::Basic || x_[j] == 0.0) continue;
            for (std::size_t k = 0; k < col_rows_[j].size(); ++k)
                rhs[col_rows_[j][k]] -= col_vals_[j][k] * x_[j];
        }
        Eigen::VectorXd xb = lu_.solve(rhs);
        for (const auto& e : etas_) {
            const double t = xb[e.r] / e.d[e.r];
            xb -= t * e.d;
            xb[e.r] = t;
        }
        for (int i = 0; i < nrow_; ++i) x_[basis_[i]] = xb[i];
    }

    Eigen::VectorXd ftran(int j) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(nrow_);
        if (nrow_ == 0) return a;
        for (std::size_t k = 0; k < col_rows_[j].size(); ++k) a[col_rows_[j][k]] = col_vals_[j][k];
        Eigen::VectorXd v = lu_.solve(a);
        for (const auto& e : etas_) {
            const double t = v[e.r] / e.d[e.r];
            v -= t * e.d;
            v[e.r] = t;
        }
        return v;
    }

    Eigen::VectorXd btran(const Eigen::VectorXd& c) {
        if (nrow_ == 0) return c;
        Eigen::VectorXd y = c;
        for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
            const double s = it->d.dot(y);
            y[it->r] = (y[it->r] - (s - it->d[it->r] * y[it->r])) / it->d[it->r];
        }
        return lu_.adjoint().solve(y);
    }

    double infeasibility() const {
        double f = 0.0;
        for (int i = 0; i < nrow_; ++i) {
            const double v = x_[basis_[i]];
            const int j = basis_[i];
            if (v < lo_[j]) f += lo_[j] - v;
            if (v > hi_[j]) f += v - hi_[j];
        }
        return f;
    }

    // Phase-1 cost of basic columns: -1 below lb, +1 above ub.
    Eigen::VectorXd phase_cost(bool phase1) const {
        Eigen::VectorXd cb(nrow_);
        for (int i = 0; i < nrow_; ++i) {
            const int j = basis_[i];
            if (phase1) {
                cb[i] = (x_[j] < lo_[j] - feas_tol_) ? -1.0 : (x_[j] > hi_[j] + feas_tol_ ? 1.0 : 0.0);
            } else {
                cb[i] = cost_[j];
            }
        }
        return cb;
    }

    LpStatus iterate(bool phase1) {
        const int max_iters = 2000 + 60 * (nrow_ + ncol_);
        int since_refactor = 0;

        while (true) {
            if (iters_++ > max_iters) return LpStatus::NumericalFailure;
            if (phase1 && infeasibility() <= feas_tol_ * (1.0 + nrow_ * 1e-3)) return LpStatus::Optimal;

            const Eigen::VectorXd y = btran(phase_cost(phase1));

            // pricing: reduced cost of nonbasic columns
            const bool bland = degen_streak_ > 40;
            int enter = -1, dir = 0;
            double best = opt_tol_;
            for (int j = 0; j < ncol_; ++j) {
                if (state_[j] == St::Basic || is_fixed(j)) continue;
                double rc = phase1 ? 0.0 : cost_[j];
                for (std::size_t k = 0; k < col_rows_[j].size(); ++k)
                    rc -= y[col_rows_[j][k]] * col_vals_[j][k];
                int d = 0;
                if ((state_[j] == St::AtLower || state_[j] == St::Free) && rc < -opt_tol_) d = +1;
                else if ((state_[j] == St::AtUpper || state_[j] == St::Free) && rc > opt_tol_) d = -1;
                if (d == 0) continue;
                if (bland) {
                    enter = j;
                    dir = d;
                    break;
                }
                if (std::abs(rc) > best) {
                    best = std::abs(rc);
                    enter = j;
                    dir = d;
                }
            }
            if (enter < 0) {
                if (phase1) return LpStatus::Optimal;  // phase-1 optimum; caller checks residual
                return LpStatus::Optimal;
            }

            const Eigen::VectorXd d = ftran(enter);

            // ratio test; in phase 1 an infeasible basic may stop at the
            // violated bound (short-step rule)
            double limit = kInf;
            int leave_row = -1;
            double leave_to = 0.0;
            if (std::isfinite(lo_[enter]) && std::isfinite(hi_[enter]))
                limit = hi_[enter] - lo_[enter];  // bound flip
            for (int i = 0; i < nrow_; ++i) {
                const double rate = -dir * d[i];
                if (std::abs(rate) < pivot_tol_) continue;
                const int j = basis_[i];
                double step = kInf, target = 0.0;
                if (rate > 0.0) {  // basic value increasing
                    if (x_[j] < lo_[j] - feas_tol_) {
                        // below range: next breakpoint is the lower bound
                        step = (lo_[j] - x_[j]) / rate;
                        target = lo_[j];
                    } else if (x_[j] <= hi_[j] + feas_tol_) {
                        if (std::isfinite(hi_[j])) {
                            step = (hi_[j] - x_[j]) / rate;
                            target = hi_[j];
                        }
                    }  // already above range and moving away: no breakpoint
                } else {  // decreasing
                    if (x_[j] > hi_[j] + feas_tol_) {
                        step = (x_[j] - hi_[j]) / -rate;
                        target = hi_[j];
                    } else if (x_[j] >= lo_[j] - feas_tol_) {
                        if (std::isfinite(lo_[j])) {
                            step = (x_[j] - lo_[j]) / -rate;
                            target = lo_[j];
                        }
                    }
                }
                if (step < -1e-12) step = 0.0;
                if (step < limit - 1e-12 ||
                    (step < limit + 1e-12 && leave_row >= 0 &&
                     std::abs(d[i]) > std::abs(d[leave_row]))) {
                    limit = std::max(step, 0.0);
                    leave_row = i;
                    leave_to = target;
                }
            }

            if (!std::isfinite(limit)) {
                return phase1 ? LpStatus::NumericalFailure : LpStatus::Unbounded;
            }

            degen_streak_ = (limit <= 1e-11) ? degen_streak_ + 1 : 0;

            // apply the step
            if (leave_row < 0) {
                // bound flip of the entering column
                for (int i = 0; i < nrow_; ++i) x_[basis_[i]] -= dir * limit * d[i];
                x_[enter] += dir * limit;
                state_[enter] = (dir > 0) ? St::AtUpper : St::AtLower;
                continue;
            }

            if (std::abs(d[leave_row]) < pivot_tol_) {
                if (!etas_.empty()) {
                    if (!refactorize()) return LpStatus::NumericalFailure;
                    continue;  // retry with a fresh factorization
                }
                return LpStatus::NumericalFailure;
            }

            for (int i = 0; i < nrow_; ++i) x_[basis_[i]] -= dir * limit * d[i];
            x_[enter] += dir * limit;

            const int leave_col = basis_[leave_row];
            x_[leave_col] = leave_to;
            state_[leave_col] = (leave_to == lo_[leave_col]) ? St::AtLower : St::AtUpper;
            basic_pos_[leave_col] = -1;
            basis_[leave_row] = enter;
            basic_pos_[enter] = leave_row;
            state_[enter] = St::Basic;

            etas_.push_back(Eta{leave_row, d});
            if (++since_refactor >= refactor_every_) {
                since_refactor = 0;
                if (!refactorize()) return LpStatus::NumericalFailure;
            }
        }
    }
};

}  // namespace detail

// Deterministic given identical input: Dantzig pricing with lowest-index tie
// breaks, switching to Bland's rule after a degenerate streak.
inline LpSolution solve_lp(const LpProblem& p) {
    detail::SimplexSolver solver(p);
    return solver.run();
}

}  // namespace frbess
