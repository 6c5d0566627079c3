// Tabulated 1-D curve with linear interpolation, used for the open-circuit
// potential curves U_n(theta), U_p(theta) on [0, 1].
#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace frbess {

class Table1D {
  public:
    Table1D() = default;

    Table1D(std::vector<double> xs, std::vector<double> ys)
        : xs_(std::move(xs)), ys_(std::move(ys)) {
        if (xs_.size() != ys_.size() || xs_.size() < 2)
            throw std::invalid_argument("Table1D needs >= 2 aligned points");
        for (std::size_t i = 1; i < xs_.size(); ++i)
            if (!(xs_[i] > xs_[i - 1]))
                throw std::invalid_argument("Table1D abscissae must be strictly increasing");
    }

    // Builds a table by sampling f uniformly on [lo, hi].
    template <typename F>
    static Table1D sample(F&& f, double lo, double hi, int n_points) {
        std::vector<double> xs(n_points), ys(n_points);
        for (int i = 0; i < n_points; ++i) {
            xs[i] = lo + (hi - lo) * i / (n_points - 1);
            ys[i] = f(xs[i]);
        }
        return Table1D(std::move(xs), std::move(ys));
    }

    // Two-column whitespace-separated text file (x y); '#' starts a comment.
    static Table1D load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open table: " + path);
        std::vector<double> xs, ys;
        std::string line;
        while (std::getline(in, line)) {
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::istringstream ss(line);
            double x, y;
            if (ss >> x >> y) {
                xs.push_back(x);
                ys.push_back(y);
            }
        }
        return Table1D(std::move(xs), std::move(ys));
    }

    // Linear interpolation; outside the abscissa range the edge segment is
    // extended so the derivative stays consistent for Newton solvers.
    double operator()(double x) const {
        const std::size_t i = segment(x);
        const double t = (x - xs_[i]) / (xs_[i + 1] - xs_[i]);
        return ys_[i] + t * (ys_[i + 1] - ys_[i]);
    }

    // Piecewise-constant derivative of the interpolant.
    double deriv(double x) const {
        const std::size_t i = segment(x);
        return (ys_[i + 1] - ys_[i]) / (xs_[i + 1] - xs_[i]);
    }

    double x_min() const { return xs_.front(); }
    double x_max() const { return xs_.back(); }
    bool empty() const { return xs_.empty(); }

  private:
    std::size_t segment(double x) const {
        if (x <= xs_.front()) return 0;
        if (x >= xs_.back()) return xs_.size() - 2;
        auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
        return static_cast<std::size_t>(it - xs_.begin()) - 1;
    }

    std::vector<double> xs_, ys_;
};

}  // namespace frbess
