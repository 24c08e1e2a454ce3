#pragma once
// Trace-distance (BLP) non-Markovianity: maximal accumulated backflow of distinguishability.
#include <numbers>

#include "propagate.hpp"

namespace heomcp {

struct BlpOptions {
    int n_theta = 12;
    int n_phi = 24;
    bool refine = true;
    double n_char = 20;          // initial horizon in characteristic times
    int min_steps = 4000;
    double points_per_rate = 400;  // dt <= 1 / (points_per_rate * spectral radius of l)
    double plateau_tol = 1e-4;   // backflow gained over the last 10% of the window
    int max_extensions = 6;      // horizon doubles at most this often
};

struct BlpResult {
    double N = 0;
    Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();  // pair +-direction on the Bloch sphere
    double horizon = 0;
    bool converged = false;
    std::vector<double> t, Nt;   // accumulated backflow of the best pair
};

// 3x3 Bloch block of the system map on a uniform grid
struct BlochSeries {
    std::vector<double> t;
    std::vector<Eigen::Matrix3d> M;
};

inline BlochSeries bloch_series(const ReducedSystem& r, double t_end, int steps) {
    if (!(t_end > 0) || steps < 1) throw std::invalid_argument("bloch_series: need t_end > 0 and steps >= 1");
    BlochSeries s;
    const double dt = t_end / steps;
    const MatX step = (r.l * dt).exp();
    VecX lam = r.lambda0;
    for (int k = 0; k <= steps; ++k) {
        s.t.push_back(k * dt);
        s.M.push_back(eval(r.system_transfer, lam).block<3, 3>(1, 1));
        lam = step * lam;
    }
    return s;
}

// D(t) for the antipodal pure pair +-n is |M(t) n|
inline std::vector<double> trace_distance(const BlochSeries& s, const Eigen::Vector3d& n) {
    std::vector<double> d(s.M.size());
    for (size_t k = 0; k < d.size(); ++k) d[k] = (s.M[k] * n).norm();
    return d;
}

inline double backflow(const std::vector<double>& D) {
    double b = 0;
    for (size_t k = 1; k < D.size(); ++k) b += std::max(0.0, D[k] - D[k - 1]);
    return b;
}

inline Eigen::Vector3d sphere_point(double theta, double phi) {
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

// best pair on the angle grid, then a shrinking compass search in (theta, phi)
inline std::pair<double, Eigen::Vector3d> best_pair(const BlochSeries& s, const BlpOptions& o) {
    const double pi = std::numbers::pi;
    auto f = [&](double th, double ph) { return backflow(trace_distance(s, sphere_point(th, ph))); };
    double bt = 0, bp = 0, best = -1;
    for (int i = 0; i < o.n_theta; ++i)
        for (int j = 0; j < o.n_phi; ++j) {
            double th = (i + 0.5) * pi / o.n_theta, ph = 2 * pi * j / o.n_phi;
            double v = f(th, ph);
            if (v > best) best = v, bt = th, bp = ph;
        }
    // the poles are not on the grid
    for (double th : {0.0, pi}) {
        double v = f(th, 0);
        if (v > best) best = v, bt = th, bp = 0;
    }
    if (o.refine) {
        double h = pi / o.n_theta;
        while (h > 1e-6) {
            bool moved = false;
            for (auto [dt, dp] : {std::pair{h, 0.0}, {-h, 0.0}, {0.0, h}, {0.0, -h}}) {
                double v = f(bt + dt, bp + dp);
                if (v > best + 1e-15) {
                    best = v, bt += dt, bp += dp;
                    moved = true;
                    break;
                }
            }
            if (!moved) h /= 2;
        }
    }
    return {best, sphere_point(bt, bp)};
}

inline BlpResult blp_measure(const HeomModel& m, std::optional<double> horizon = std::nullopt, const BlpOptions& o = {}) {
    if (horizon && !(*horizon > 0)) throw std::invalid_argument("blp_measure: horizon must be positive");
    ReducedSystem r = reduced_system(m);
    BlpResult res;
    double T = horizon ? *horizon : o.n_char / slowest_decay_rate(r.l);
    const int ext = horizon ? 0 : o.max_extensions;
    Eigen::EigenSolver<MatX> es(r.l, false);
    const double rho = std::max(1e-12, es.eigenvalues().cwiseAbs().maxCoeff());
    for (int round = 0; round <= ext; ++round) {
        int steps = std::max(o.min_steps, static_cast<int>(std::ceil(T * o.points_per_rate * rho)));
        auto s = bloch_series(r, T, steps);
        auto [N, n] = best_pair(s, o);
        auto D = trace_distance(s, n);
        res.N = N;
        res.direction = n;
        res.horizon = T;
        res.t = s.t;
        res.Nt.assign(D.size(), 0.0);
        for (size_t k = 1; k < D.size(); ++k) res.Nt[k] = res.Nt[k - 1] + std::max(0.0, D[k] - D[k - 1]);
        size_t k90 = static_cast<size_t>(0.9 * (D.size() - 1));
        res.converged = res.Nt.back() - res.Nt[k90] < o.plateau_tol;
        if (horizon || res.converged) break;
        T *= 2;
    }
    return res;
}

inline void write_blp_csv(std::ostream& os, const BlpResult& r) {
    os << "t,N\n";
    os.precision(12);
    for (size_t k = 0; k < r.t.size(); ++k) os << r.t[k] << ',' << r.Nt[k] << '\n';
}

}  // namespace heomcp
