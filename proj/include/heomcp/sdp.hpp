#pragma once
// Small dense SDP solver: min c'x  s.t.  F0 + sum_i x_i F_i >= 0 (block diagonal), A x = b.
// Primal-dual path following with the HKM direction and Mehrotra correction.
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

namespace heomcp {

struct SdpProblem {
    int p = 0;                                    // number of decision variables
    Eigen::VectorXd c;                            // objective
    std::vector<Eigen::MatrixXd> F0;              // per block
    std::vector<std::vector<Eigen::MatrixXd>> F;  // F[i][blk]
    Eigen::MatrixXd A;                            // q x p
    Eigen::VectorXd b;

    SdpProblem() = default;
    SdpProblem(int nvars, const std::vector<int>& block_sizes) : p(nvars), c(Eigen::VectorXd::Zero(nvars)) {
        for (int s : block_sizes) F0.push_back(Eigen::MatrixXd::Zero(s, s));
        F.assign(nvars, {});
        for (auto& Fi : F)
            for (int s : block_sizes) Fi.push_back(Eigen::MatrixXd::Zero(s, s));
        A.resize(0, nvars);
        b.resize(0);
    }
    int nblocks() const { return static_cast<int>(F0.size()); }
};

struct SdpOptions {
    double tol_gap = 1e-10;
    double tol_feas = 1e-10;
    double tol_psd = 1e-9;
    double tol_eq = 1e-10;
    int max_iter = 150;
    double step_frac = 0.95;
};

enum class SdpStatus { optimal, infeasible, numerical_failure };
inline std::string to_string(SdpStatus s) {
    switch (s) {
        case SdpStatus::optimal: return "optimal";
        case SdpStatus::infeasible: return "infeasible";
        default: return "numerical_failure";
    }
}

struct SdpSolution {
    Eigen::VectorXd x;
    double objective = std::numeric_limits<double>::quiet_NaN();
    SdpStatus status = SdpStatus::numerical_failure;
    double min_block_eig = 0;     // of F(x), re-verified
    double eq_residual = 0;       // ||Ax-b||_inf
    double dual_gap = 0;
    int iterations = 0;
};

// symmetric eigenvalue check
inline std::pair<bool, double> check_psd(const Eigen::MatrixXd& M, double tol) {
    if (M.rows() != M.cols()) throw std::invalid_argument("check_psd: matrix not square");
    double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff())) throw std::invalid_argument("check_psd: matrix not symmetric");
    if (M.rows() == 0) return {true, 0.0};
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((M + M.transpose()) / 2, Eigen::EigenvaluesOnly);
    double mn = es.eigenvalues().minCoeff();
    return {mn >= -tol, mn};
}

inline std::vector<Eigen::MatrixXd> sdp_eval(const SdpProblem& pr, const Eigen::VectorXd& x) {
    std::vector<Eigen::MatrixXd> out = pr.F0;
    for (int i = 0; i < pr.p; ++i)
        if (x(i) != 0.0)
            for (int k = 0; k < pr.nblocks(); ++k) out[k] += x(i) * pr.F[i][k];
    return out;
}

namespace sdp_detail {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Blocks = std::vector<Mat>;

inline double inner(const Blocks& a, const Blocks& b) {
    double s = 0;
    for (size_t k = 0; k < a.size(); ++k) s += a[k].cwiseProduct(b[k]).sum();
    return s;
}
inline Blocks axpy(const Blocks& a, double s, const Blocks& b) {
    Blocks r = a;
    for (size_t k = 0; k < a.size(); ++k) r[k] += s * b[k];
    return r;
}
inline Blocks sym(Blocks a) {
    for (auto& m : a) m = ((m + m.transpose()) / 2).eval();
    return a;
}
inline bool chol_ok(const Mat& M) {
    if (M.rows() == 0) return true;
    Eigen::LLT<Mat> l(M);
    return l.info() == Eigen::Success;
}
// largest alpha in (0,1] with X + alpha dX > 0, scaled by frac
inline double max_step(const Blocks& X, const Blocks& dX, double frac) {
    double amax = 1.0 / frac;
    for (size_t k = 0; k < X.size(); ++k) {
        if (X[k].rows() == 0) continue;
        Eigen::LLT<Mat> l(X[k]);
        Mat Li = l.matrixL().solve(Mat::Identity(X[k].rows(), X[k].rows()));
        Mat W = Li * dX[k] * Li.transpose();
        Eigen::SelfAdjointEigenSolver<Mat> es((W + W.transpose()) / 2, Eigen::EigenvaluesOnly);
        double mn = es.eigenvalues().minCoeff();
        if (mn < 0) amax = std::min(amax, -1.0 / mn);
    }
    return std::min(1.0, frac * amax);
}

// standard form: min <C,X> s.t. <A_i,X> = b_i, X>=0 ; dual max b'y s.t. C - sum y_i A_i = S >= 0
struct Std {
    Blocks C;
    std::vector<Blocks> Ai;
    Vec b;
};

struct StdResult {
    Vec y;
    Blocks X, S;
    bool converged = false;
    bool diverged = false;
    bool stalled = false;
    int iters = 0;
    double gap = 0;
};

inline StdResult solve_std(const Std& P, const SdpOptions& o) {
    const int m = static_cast<int>(P.Ai.size());
    const int nb = static_cast<int>(P.C.size());
    int n = 0;
    for (auto& c : P.C) n += static_cast<int>(c.rows());
    double scale = 1.0;
    for (auto& c : P.C) scale = std::max(scale, c.cwiseAbs().maxCoeff());
    for (auto& a : P.Ai)
        for (auto& blk : a) scale = std::max(scale, blk.cwiseAbs().maxCoeff());
    double bnorm = P.b.size() ? P.b.cwiseAbs().maxCoeff() : 0.0;
    double init = std::max({10.0, std::sqrt(double(n)) * std::max(1.0, bnorm), scale});

    StdResult r;
    r.X.resize(nb);
    r.S.resize(nb);
    for (int k = 0; k < nb; ++k) {
        int s = static_cast<int>(P.C[k].rows());
        r.X[k] = init * Mat::Identity(s, s);
        r.S[k] = init * Mat::Identity(s, s);
    }
    r.y = Vec::Zero(m);
    auto Aop = [&](const Blocks& X) {
        Vec v(m);
        for (int i = 0; i < m; ++i) v(i) = inner(P.Ai[i], X);
        return v;
    };
    auto ATop = [&](const Vec& y) {
        Blocks B(nb);
        for (int k = 0; k < nb; ++k) B[k] = Mat::Zero(P.C[k].rows(), P.C[k].cols());
        for (int i = 0; i < m; ++i)
            if (y(i) != 0.0)
                for (int k = 0; k < nb; ++k) B[k] += y(i) * P.Ai[i][k];
        return B;
    };
    const double cnorm = std::max(1.0, std::sqrt(inner(P.C, P.C)));
    const double bn = std::max(1.0, P.b.norm());

    for (int it = 0; it < o.max_iter; ++it) {
        r.iters = it + 1;
        Vec rp = P.b - Aop(r.X);
        Blocks ATy = ATop(r.y);
        Blocks Rd(nb);
        for (int k = 0; k < nb; ++k) Rd[k] = P.C[k] - r.S[k] - ATy[k];
        double mu = inner(r.X, r.S) / n;
        double pobj = inner(P.C, r.X), dobj = P.b.dot(r.y);
        double pinf = rp.norm() / bn, dinf = std::sqrt(inner(Rd, Rd)) / cnorm;
        r.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
        if (std::getenv("HEOMCP_SDP_TRACE"))
            std::fprintf(stderr, "it %d mu %.3e pinf %.3e dinf %.3e gap %.3e pobj %.6e dobj %.6e\n", it, mu, pinf, dinf, r.gap, pobj, dobj);
        if (pinf < o.tol_feas && dinf < o.tol_feas && r.gap < o.tol_gap) {
            r.converged = true;
            break;
        }
        if (!std::isfinite(mu) || r.y.cwiseAbs().maxCoeff() > 1e14 || mu > 1e25) {
            r.diverged = true;
            break;
        }
        // Schur complement M_ij = <A_i, X A_j S^-1>
        Blocks Sinv(nb);
        for (int k = 0; k < nb; ++k) Sinv[k] = r.S[k].llt().solve(Mat::Identity(r.S[k].rows(), r.S[k].rows()));
        std::vector<Blocks> W(m, Blocks(nb));
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < nb; ++k) W[j][k] = r.X[k] * P.Ai[j][k] * Sinv[k];
        Mat M(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = i; j < m; ++j) {
                double v = 0.5 * (inner(P.Ai[i], W[j]) + inner(P.Ai[j], W[i]));
                M(i, j) = M(j, i) = v;
            }
        Eigen::LDLT<Mat> Mf(M);
        Blocks XRdSi(nb);
        for (int k = 0; k < nb; ++k) XRdSi[k] = r.X[k] * Rd[k] * Sinv[k];

        auto direction = [&](double sigma, const Blocks* corr) {
            // G = sigma mu S^-1 - X - X Rd S^-1 - corr
            Blocks G(nb);
            for (int k = 0; k < nb; ++k) {
                G[k] = sigma * mu * Sinv[k] - r.X[k] - XRdSi[k];
                if (corr) G[k] -= (*corr)[k];
            }
            Vec rhs(m);
            for (int i = 0; i < m; ++i) rhs(i) = rp(i) - inner(P.Ai[i], G);
            Vec dy = Mf.solve(rhs);
            Blocks dS = Rd;
            Blocks ATdy = ATop(dy);
            for (int k = 0; k < nb; ++k) dS[k] -= ATdy[k];
            Blocks dX(nb);
            for (int k = 0; k < nb; ++k) dX[k] = G[k] + r.X[k] * ATdy[k] * Sinv[k];
            dX = sym(dX);
            return std::make_tuple(dy, dX, dS);
        };
        auto [dya, dXa, dSa] = direction(0.0, nullptr);
        double ap = max_step(r.X, dXa, 1.0), ad = max_step(r.S, dSa, 1.0);
        double mu_aff = inner(axpy(r.X, ap, dXa), axpy(r.S, ad, dSa)) / n;
        double sigma = std::pow(std::max(0.0, mu_aff / mu), 3);
        sigma = std::min(1.0, std::max(sigma, 1e-6));
        Blocks corr(nb);
        for (int k = 0; k < nb; ++k) corr[k] = dXa[k] * dSa[k] * Sinv[k];
        auto [dy, dX, dS] = direction(sigma, &corr);
        double sp = max_step(r.X, dX, o.step_frac), sd = max_step(r.S, dS, o.step_frac);
        Blocks Xn = sym(axpy(r.X, sp, dX)), Sn = sym(axpy(r.S, sd, dS));
        bool pd = true;
        for (int k = 0; k < nb && pd; ++k) pd = chol_ok(Xn[k]) && chol_ok(Sn[k]);
        if (!pd) {
            // keep the last strictly interior iterate
            if (std::getenv("HEOMCP_SDP_TRACE")) std::fprintf(stderr, "lost definiteness, stopping at iteration %d\n", it);
            r.stalled = true;
            break;
        }
        r.X = std::move(Xn);
        r.S = std::move(Sn);
        r.y += sd * dy;
        if (std::max(sp, sd) < 1e-10) {
            r.stalled = true;
            break;
        }
    }
    return r;
}

}  // namespace sdp_detail

inline SdpSolution solve(const SdpProblem& pr, const SdpOptions& o = {}) {
    using namespace sdp_detail;
    SdpSolution sol;
    const int p = pr.p;
    // eliminate equalities: x = x0 + N z
    Vec x0 = Vec::Zero(p);
    Mat N = Mat::Identity(p, p);
    if (pr.A.rows() > 0) {
        Eigen::JacobiSVD<Mat> svd(pr.A, Eigen::ComputeFullU | Eigen::ComputeFullV);
        double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
        int rank = 0;
        for (int i = 0; i < svd.singularValues().size(); ++i)
            if (svd.singularValues()(i) > 1e-12 * std::max(1.0, smax)) ++rank;
        x0 = svd.solve(pr.b);
        if ((pr.A * x0 - pr.b).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, pr.b.cwiseAbs().maxCoeff())) {
            sol.status = SdpStatus::infeasible;
            return sol;
        }
        N = svd.matrixV().rightCols(p - rank);
    }
    const int m = static_cast<int>(N.cols());
    Std S;
    Blocks F0x = sdp_eval(pr, x0);
    S.C = F0x;  // C - sum y_i A_i with A_i = -sum_j N_ji F_j
    S.Ai.assign(m, Blocks(pr.nblocks()));
    for (int i = 0; i < m; ++i)
        for (int k = 0; k < pr.nblocks(); ++k) {
            Mat acc = Mat::Zero(pr.F0[k].rows(), pr.F0[k].cols());
            for (int j = 0; j < p; ++j)
                if (N(j, i) != 0.0) acc -= N(j, i) * pr.F[j][k];
            S.Ai[i][k] = acc;
        }
    S.b = -(N.transpose() * pr.c);
    auto r = solve_std(S, o);
    sol.iterations = r.iters;
    sol.dual_gap = r.gap;
    sol.x = x0 + N * r.y;
    sol.objective = pr.c.dot(sol.x);
    auto blocks = sdp_eval(pr, sol.x);
    double mn = std::numeric_limits<double>::infinity();
    double scale = 1.0;
    for (auto& B : blocks) {
        if (B.rows() == 0) continue;
        mn = std::min(mn, check_psd((B + B.transpose()) / 2, o.tol_psd).second);
        scale = std::max(scale, B.cwiseAbs().maxCoeff());
    }
    sol.min_block_eig = mn;
    sol.eq_residual = pr.A.rows() ? (pr.A * sol.x - pr.b).cwiseAbs().maxCoeff() : 0.0;
    bool verified = mn >= -o.tol_psd * scale && sol.eq_residual <= o.tol_eq * std::max(1.0, pr.b.size() ? pr.b.cwiseAbs().maxCoeff() : 1.0);
    if (r.converged && verified) sol.status = SdpStatus::optimal;
    else if (r.diverged) sol.status = SdpStatus::infeasible;
    else sol.status = verified ? SdpStatus::optimal : SdpStatus::numerical_failure;
    if (!r.converged && sol.status == SdpStatus::optimal && r.gap > 1e-6) sol.status = SdpStatus::numerical_failure;
    return sol;
}

// ---------------------------------------------------------------- JSON dump/load

inline nlohmann::json sdp_to_json(const SdpProblem& pr) {
    auto mat = [](const Eigen::MatrixXd& M) {
        std::vector<double> v;
        for (int i = 0; i < M.rows(); ++i)
            for (int j = 0; j < M.cols(); ++j) v.push_back(M(i, j));
        return nlohmann::json{{"rows", M.rows()}, {"cols", M.cols()}, {"data", v}};
    };
    nlohmann::json j;
    j["p"] = pr.p;
    j["c"] = std::vector<double>(pr.c.data(), pr.c.data() + pr.c.size());
    j["F0"] = nlohmann::json::array();
    for (auto& B : pr.F0) j["F0"].push_back(mat(B));
    j["F"] = nlohmann::json::array();
    for (auto& Fi : pr.F) {
        nlohmann::json a = nlohmann::json::array();
        for (auto& B : Fi) a.push_back(mat(B));
        j["F"].push_back(a);
    }
    j["A"] = mat(pr.A);
    j["b"] = std::vector<double>(pr.b.data(), pr.b.data() + pr.b.size());
    return j;
}

inline SdpProblem sdp_from_json(const nlohmann::json& j) {
    auto mat = [](const nlohmann::json& m) {
        int r = m.at("rows"), c = m.at("cols");
        auto d = m.at("data").get<std::vector<double>>();
        if (static_cast<int>(d.size()) != r * c) throw std::invalid_argument("matrix data size mismatch");
        Eigen::MatrixXd M(r, c);
        for (int i = 0; i < r; ++i)
            for (int k = 0; k < c; ++k) M(i, k) = d[i * c + k];
        return M;
    };
    SdpProblem pr;
    pr.p = j.at("p");
    auto c = j.at("c").get<std::vector<double>>();
    pr.c = Eigen::Map<Eigen::VectorXd>(c.data(), c.size());
    for (auto& B : j.at("F0")) pr.F0.push_back(mat(B));
    for (auto& Fi : j.at("F")) {
        std::vector<Eigen::MatrixXd> v;
        for (auto& B : Fi) v.push_back(mat(B));
        pr.F.push_back(v);
    }
    pr.A = mat(j.at("A"));
    auto b = j.at("b").get<std::vector<double>>();
    pr.b = Eigen::Map<Eigen::VectorXd>(b.data(), b.size());
    if (static_cast<int>(pr.F.size()) != pr.p) throw std::invalid_argument("F count != p");
    return pr;
}

}  // namespace heomcp
