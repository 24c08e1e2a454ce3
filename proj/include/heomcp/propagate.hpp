#pragma once
// Time evolution, chi(t) trajectories, t_p detection and short-time eigenvalue branches.
#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "models.hpp"

namespace heomcp {

struct Trajectory {
    std::vector<double> t;
    std::vector<VecX> lambda;
    std::vector<Mat4c> chi;
    std::vector<Eigen::Vector4d> eig;          // ascending
    std::vector<std::array<double, 5>> e;      // e_0..e_4
    // enough to re-evaluate chi at arbitrary t
    MatX l;
    VecX lambda0;
    PolyMat4 system_transfer;
};

inline void check_finite(const MatX& M, const char* what) {
    if (!M.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

struct ChiSample {
    Mat4c chi;
    Eigen::Vector4d eig;
    std::array<double, 5> e;
};

inline ChiSample chi_sample(const Mat4& T) {
    ChiSample s;
    s.chi = chi_of_transfer(T);
    Eigen::SelfAdjointEigenSolver<Mat4c> es(s.chi, Eigen::EigenvaluesOnly);
    s.eig = es.eigenvalues();
    auto ev = elementary_symmetric_all(s.chi);
    for (int k = 0; k < 5; ++k) s.e[k] = ev[k];
    return s;
}

inline VecX lambda_at(const MatX& l, const VecX& lambda0, double t) { return (l * t).exp() * lambda0; }

inline Trajectory propagate(const ReducedSystem& r, double t_end, double dt) {
    if (!(dt > 0) || !(t_end >= 0)) throw std::invalid_argument("propagate: need dt > 0 and t_end >= 0");
    check_finite(r.l, "propagate");
    Trajectory tr;
    tr.l = r.l;
    tr.lambda0 = r.lambda0;
    tr.system_transfer = r.system_transfer;
    const long n = std::lround(std::floor(t_end / dt + 1e-9));
    // exp(l t_k) from scratch at every point: no accumulation, dt-insensitive
    for (long k = 0; k <= n; ++k) {
        double t = k * dt;
        VecX lam = lambda_at(r.l, r.lambda0, t);
        auto s = chi_sample(eval(r.system_transfer, lam));
        tr.t.push_back(t);
        tr.lambda.push_back(lam);
        tr.chi.push_back(s.chi);
        tr.eig.push_back(s.eig);
        tr.e.push_back(s.e);
    }
    return tr;
}

// full extended map; returns stacked (4n x 4) maps
inline std::vector<MatX> propagate_extended(const HeomModel& m, const std::vector<double>& times) {
    check_finite(m.generator, "propagate_extended");
    std::vector<MatX> out;
    out.reserve(times.size());
    for (double t : times) out.push_back((m.generator * t).exp() * m.initial);
    return out;
}

inline std::vector<double> time_grid(double t_end, double dt) {
    std::vector<double> g;
    const long n = std::lround(std::floor(t_end / dt + 1e-9));
    for (long k = 0; k <= n; ++k) g.push_back(k * dt);
    return g;
}

// slowest nonzero decay rate of l; modes with |Re| below tol count as neutral
inline double slowest_decay_rate(const MatX& l, double tol = 1e-9) {
    Eigen::EigenSolver<MatX> es(l);
    double scale = std::max(1.0, l.cwiseAbs().maxCoeff());
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        double re = es.eigenvalues()(i).real();
        if (re < -tol * scale) best = std::min(best, -re);
    }
    if (!std::isfinite(best)) {
        // purely oscillatory or static: fall back to the fastest frequency, or unit time
        double w = 0;
        for (int i = 0; i < es.eigenvalues().size(); ++i) w = std::max(w, std::abs(es.eigenvalues()(i).imag()));
        return w > 0 ? w : 1.0;
    }
    return best;
}

struct Horizon {
    double t_end, dt;
};
inline Horizon default_horizon(const ReducedSystem& r, double n_char = 20.0, int n_steps = 2000) {
    double T = n_char / slowest_decay_rate(r.l);
    return {T, T / n_steps};
}

// maximal eps-rank of chi over the trajectory
inline int detect_h(const Trajectory& tr, double eps = 1e-10) {
    int h = 0;
    for (auto& ev : tr.eig) {
        int r = 0;
        for (int i = 0; i < 4; ++i)
            if (std::abs(ev(i)) > eps) ++r;
        h = std::max(h, r);
    }
    return h;
}

// h-th largest eigenvalue: the smallest one that is not identically zero
inline double nontrivial_min_eig(const Eigen::Vector4d& ev_ascending, int h) { return ev_ascending(4 - h); }

inline std::optional<double> detect_tp(const Trajectory& tr, double eps_pos, int h, int K = 10) {
    if (h < 2 || tr.t.size() < 2) return std::nullopt;
    const size_t n = tr.t.size();
    auto ok = [&](size_t i) { return nontrivial_min_eig(tr.eig[i], h) >= eps_pos; };
    for (size_t k = 1; k + K <= n; ++k) {
        bool run = true;
        for (size_t j = k; j < k + K && run; ++j) run = ok(j);
        if (!run) continue;
        double lo = tr.t[k - 1], hi = tr.t[k];
        if (ok(k - 1) && k - 1 > 0) return tr.t[k - 1];
        const double dt = tr.t[1] - tr.t[0];
        while (hi - lo > dt / 100) {
            double mid = (lo + hi) / 2;
            auto s = chi_sample(eval(tr.system_transfer, lambda_at(tr.l, tr.lambda0, mid)));
            (nontrivial_min_eig(s.eig, h) >= eps_pos ? hi : lo) = mid;
        }
        return hi;
    }
    return std::nullopt;
}

inline void write_trajectory_csv(const Trajectory& tr, std::ostream& os) {
    const int d = tr.lambda.empty() ? 0 : static_cast<int>(tr.lambda[0].size());
    os << "t";
    for (int i = 1; i <= d; ++i) os << ",lambda" << i;
    os << ",eig1,eig2,eig3,eig4,e1,e2,e3,e4\n";
    os.precision(17);
    for (size_t k = 0; k < tr.t.size(); ++k) {
        os << tr.t[k];
        for (int i = 0; i < d; ++i) os << ',' << tr.lambda[k](i);
        for (int i = 0; i < 4; ++i) os << ',' << tr.eig[k](i);
        for (int i = 1; i <= 4; ++i) os << ',' << tr.e[k][i];
        os << '\n';
    }
}

// ---------------------------------------------------------------- short-time analysis

using mpf = boost::multiprecision::cpp_bin_float_50;

struct Branch {
    double exponent;     // eigenvalue ~ coefficient * t^exponent
    double coefficient;
    std::string sign;    // positive | negative | zero
};

struct ShortTimeResult {
    std::vector<Branch> branches;   // non-trivial branches (eigenvalue 0 at t = 0)
    int trivial = 0;                // branches vanishing identically
    bool conclusive = true;
    bool all_positive() const {
        if (!conclusive || branches.empty()) return false;
        for (auto& b : branches)
            if (b.sign != "positive") return false;
        return true;
    }
};

namespace st_detail {
using MpMat = Eigen::Matrix<mpf, Eigen::Dynamic, Eigen::Dynamic>;
using Series = std::vector<mpf>;  // coefficients of t^0..t^N

inline Series mul(const Series& a, const Series& b) {
    const size_t N = a.size();
    Series c(N, mpf(0));
    for (size_t i = 0; i < N; ++i)
        if (a[i] != 0)
            for (size_t j = 0; i + j < N; ++j) c[i + j] += a[i] * b[j];
    return c;
}
}  // namespace st_detail

// Eigenvalue branches of chi(t) near t = 0 from the Newton polygon of its characteristic polynomial.
// order bounds the eigenvalue exponent that is resolved.
inline ShortTimeResult short_time_analysis(const HeomModel& m, int order = 6) {
    using namespace st_detail;
    if (order < 1 || order > 6) throw std::invalid_argument("short_time_analysis: order must be in 1..6");
    const int N = 4 * order + 4;  // series length in t
    const int dim = static_cast<int>(m.generator.rows());
    MpMat L(dim, dim), X(dim, 4);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) L(i, j) = mpf(m.generator(i, j));
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < 4; ++j) X(i, j) = mpf(m.initial(i, j));
    // chi as real 8x8 embedding [[Re,-Im],[Im,Re]], series in t
    const auto& B = chi_basis_matrix();
    const auto Binv = B.inverse().eval();
    // entries are multiples of 1/4; snap them so the series carries no rounding noise
    std::vector<std::vector<mpf>> BinvRe(16, std::vector<mpf>(16)), BinvIm = BinvRe;
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) {
            BinvRe[i][j] = mpf(std::round(Binv(i, j).real() * 16)) / 16;
            BinvIm[i][j] = mpf(std::round(Binv(i, j).imag() * 16)) / 16;
        }
    std::vector<MpMat> E(N);
    mpf fact = 1;
    for (int n = 0; n < N; ++n) {
        if (n > 0) {
            X = L * X;
            fact *= n;
        }
        // chi_vec = Binv * vec(T), vec column-major with T_jk as in chi_of_transfer
        std::vector<mpf> tv(16);
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k) tv[4 * j + k] = X(j, k) / fact;
        MpMat En = MpMat::Zero(8, 8);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                mpf re = 0, im = 0;
                int row = 4 * a + b;
                for (int q = 0; q < 16; ++q) {
                    re += BinvRe[row][q] * tv[q];
                    im += BinvIm[row][q] * tv[q];
                }
                En(a, b) = re;
                En(a + 4, b + 4) = re;
                En(a, b + 4) = -im;
                En(a + 4, b) = im;
            }
        E[n] = En;
    }
    // power traces p_k(t) = tr(chi^k) = tr(E^k)/2
    std::vector<Series> p(5, Series(N, mpf(0)));
    std::vector<MpMat> P = E;  // series of E^1
    for (int k = 1; k <= 4; ++k) {
        if (k > 1) {
            std::vector<MpMat> Q(N, MpMat::Zero(8, 8));
            for (int i = 0; i < N; ++i)
                for (int j = 0; i + j < N; ++j) Q[i + j] += P[i] * E[j];
            P = Q;
        }
        for (int n = 0; n < N; ++n) p[k][n] = P[n].trace() / 2;
    }
    std::vector<Series> e(5, Series(N, mpf(0)));
    e[0][0] = 1;
    for (int k = 1; k <= 4; ++k) {
        for (int i = 1; i <= k; ++i) {
            Series term = mul(e[k - i], p[i]);
            for (int n = 0; n < N; ++n) e[k][n] += ((i % 2) ? 1 : -1) * term[n];
        }
        for (int n = 0; n < N; ++n) e[k][n] /= k;
    }
    // char poly a_j(t): x^4 - e1 x^3 + e2 x^2 - e3 x + e4
    std::vector<Series> a(5);
    for (int j = 0; j <= 4; ++j) {
        a[j] = e[4 - j];
        if ((4 - j) % 2)
            for (auto& c : a[j]) c = -c;
    }
    // The inputs are doubles, so cancellations that are exact in the model leave ~1e-16 relative noise.
    // Coefficient n of the t-series is compared with the natural size s^n/n! of that order.
    mpf scale = 0;
    for (auto& s : a) scale = std::max(scale, abs(s[0]));
    double lnorm = 0;
    for (int i = 0; i < dim; ++i) lnorm = std::max(lnorm, m.generator.row(i).cwiseAbs().sum());
    const mpf srate = std::max(1.0, lnorm);
    std::vector<mpf> zero_tol(N);
    mpf mag = std::max(mpf(1), scale) * mpf("1e-13");
    for (int n = 0; n < N; ++n) {
        zero_tol[n] = mag;
        mag = mag * srate / (n + 1);
    }
    auto val = [&](int j) -> int {
        for (int n = 0; n < N; ++n)
            if (abs(a[j][n]) > zero_tol[n]) return n;
        return -1;
    };
    ShortTimeResult res;
    // branches at x(0)=0 are governed by j = 0..j1 where j1 is the first coefficient nonzero at t=0
    int j1 = 0;
    while (j1 <= 4 && val(j1) != 0) ++j1;
    int mstrip = 0;
    while (mstrip < j1 && val(mstrip) < 0) ++mstrip;
    res.trivial = mstrip;
    if (j1 > 4) {
        res.conclusive = false;
        return res;
    }
    // lower convex hull of (j, v_j), j = mstrip..j1
    std::vector<std::pair<int, int>> pts;
    for (int j = mstrip; j <= j1; ++j) {
        int v = val(j);
        if (v >= 0) pts.push_back({j, v});
    }
    if (pts.empty() || pts.back().first != j1) {
        res.conclusive = false;
        return res;
    }
    std::vector<std::pair<int, int>> hull;
    for (auto& q : pts) {
        while (hull.size() >= 2) {
            auto [x1, y1] = hull[hull.size() - 2];
            auto [x2, y2] = hull.back();
            // remove middle point if it lies on or above the segment
            if ((double)(y2 - y1) * (q.first - x1) >= (double)(q.second - y1) * (x2 - x1)) hull.pop_back();
            else break;
        }
        hull.push_back(q);
    }
    // series truncation: any point whose valuation might exceed N is unresolved
    for (size_t s = 0; s + 1 < hull.size(); ++s) {
        auto [x0, y0] = hull[s];
        auto [x1, y1] = hull[s + 1];
        double slope = double(y0 - y1) / (x1 - x0);
        if (slope > order + 1e-12) {
            res.conclusive = false;
            continue;
        }
        // edge polynomial sum_{j on edge} a_j[v_j] y^(j-x0)
        int len = x1 - x0;
        Eigen::VectorXd cf = Eigen::VectorXd::Zero(len + 1);
        for (int j = x0; j <= x1; ++j) {
            int v = val(j);
            if (v < 0) continue;
            // on the edge iff v == y0 - slope*(j-x0)
            double on = y0 - slope * (j - x0);
            if (std::abs(v - on) < 1e-12) cf(j - x0) = static_cast<double>(a[j][v]);
        }
        // roots via companion matrix of cf(len) y^len + ... + cf(0)
        MatX C = MatX::Zero(len, len);
        for (int i = 0; i < len; ++i) C(0, i) = -cf(len - 1 - i) / cf(len);
        for (int i = 1; i < len; ++i) C(i, i - 1) = 1;
        Eigen::EigenSolver<MatX> es(C);
        for (int i = 0; i < len; ++i) {
            auto y = es.eigenvalues()(i);
            Branch b;
            b.exponent = slope;
            b.coefficient = y.real();
            double mag = std::abs(y);
            if (std::abs(y.imag()) > 1e-8 * std::max(1.0, mag)) res.conclusive = false;
            b.sign = y.real() > 1e-14 * std::max(1.0, mag) ? "positive" : (y.real() < 0 ? "negative" : "zero");
            res.branches.push_back(b);
        }
    }
    std::sort(res.branches.begin(), res.branches.end(), [](const Branch& x, const Branch& y) {
        return x.exponent != y.exponent ? x.exponent < y.exponent : x.coefficient < y.coefficient;
    });
    return res;
}

}  // namespace heomcp
