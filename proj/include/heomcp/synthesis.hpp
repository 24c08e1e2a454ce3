#pragma once
// HEOM synthesis from a targeted system map by derivative matching, level by level.
#include <complex>

#include "propagate.hpp"

namespace heomcp {

// ---------------------------------------------------------------- exponential polynomials

// sum_i C_i t^p_i exp(s_i t) with 4x4 complex coefficients; the represented map is real
struct ExpPolyMat {
    struct Term {
        cplx s;
        int p;
        Mat4c C;
    };
    std::vector<Term> terms;

    void add(cplx s, int p, const Mat4c& C) {
        for (auto& t : terms)
            if (t.p == p && std::abs(t.s - s) <= 1e-12 * std::max(1.0, std::abs(s))) {
                t.C += C;
                return;
            }
        terms.push_back({s, p, C});
    }
    ExpPolyMat& operator+=(const ExpPolyMat& o) {
        for (auto& t : o.terms) add(t.s, t.p, t.C);
        return *this;
    }
    ExpPolyMat derivative() const {
        ExpPolyMat d;
        for (auto& t : terms) {
            d.add(t.s, t.p, t.s * t.C);
            if (t.p > 0) d.add(t.s, t.p - 1, double(t.p) * t.C);
        }
        return d;
    }
    ExpPolyMat left(const Mat4& M) const {
        ExpPolyMat r;
        for (auto& t : terms) r.add(t.s, t.p, M.cast<cplx>() * t.C);
        return r;
    }
    ExpPolyMat scaled(double a) const {
        ExpPolyMat r = *this;
        for (auto& t : r.terms) t.C *= a;
        return r;
    }
    Mat4 at(double tt) const {
        Mat4c v = Mat4c::Zero();
        for (auto& t : terms) v += t.C * (std::pow(tt, t.p) * std::exp(t.s * tt));
        return v.real();
    }
    // d^v/dt^v at t = 0
    Mat4 deriv0(int v) const {
        Mat4c acc = Mat4c::Zero();
        for (auto& t : terms) {
            if (v < t.p) continue;
            double f = 1;
            for (int i = v - t.p + 1; i <= v; ++i) f *= i;  // v!/(v-p)!
            acc += t.C * (f * std::pow(t.s, v - t.p));
        }
        return acc.real();
    }
    // largest |s| among the modes: balances derivative orders
    double spectral_scale() const {
        double r = 0;
        for (auto& t : terms)
            if (t.C.cwiseAbs().maxCoeff() > 0) r = std::max(r, std::abs(t.s));
        return std::max(r, 1e-300);
    }
    double coeff_norm() const {
        double n = 0;
        for (auto& t : terms) n = std::max(n, t.C.cwiseAbs().maxCoeff());
        return n;
    }
};

// scalar building block c t^p e^{st}
struct ScalarMode {
    cplx c;
    int p;
    cplx s;
};
using ScalarExpPoly = std::vector<ScalarMode>;

inline ScalarExpPoly operator*(const ScalarExpPoly& a, const ScalarExpPoly& b) {
    ScalarExpPoly r;
    for (auto& x : a)
        for (auto& y : b) r.push_back({x.c * y.c, x.p + y.p, x.s + y.s});
    return r;
}

inline void add_scalar(ExpPolyMat& M, const ScalarExpPoly& f, int row, int col, double sign = 1) {
    for (auto& m : f) {
        Mat4c C = Mat4c::Zero();
        C(row, col) = sign * m.c;
        M.add(m.s, m.p, C);
    }
}

// ---------------------------------------------------------------- targets

struct TargetDynamics {
    std::string name;
    double omega = 1;     // coupling of consecutive levels, L_{i,i+1} = omega * identity
    double rate = 1;      // characteristic rate (inverse characteristic time)
    ExpPolyMat T;         // Pauli transfer of Lambda_1(t)
    Params params;
};

// dephasing-type map: populations kept, coherences multiplied by f
inline ExpPolyMat coherence_map(const ScalarExpPoly& f) {
    ExpPolyMat T;
    Mat4c E = Mat4c::Zero();
    E(0, 0) = E(3, 3) = 1;
    T.add(0.0, 0, E);
    add_scalar(T, f, 1, 1);
    add_scalar(T, f, 2, 2);
    return T;
}

// f = e^{-gt} cos(wt)
inline TargetDynamics target_reviving(double gamma, double omega) {
    const cplx I(0, 1);
    ScalarExpPoly f{{0.5, 0, -gamma + I * omega}, {0.5, 0, -gamma - I * omega}};
    return {"reviving", omega, std::max(gamma, 1e-300), coherence_map(f), {{"gamma", gamma}, {"omega", omega}}};
}

// f = e^{-gt}(1 + 2a[cos(wt) - 1])
inline TargetDynamics target_generalized(double gamma, double omega, double alpha) {
    const cplx I(0, 1);
    ScalarExpPoly f{{1 - 2 * alpha, 0, -gamma}, {alpha, 0, -gamma + I * omega}, {alpha, 0, -gamma - I * omega}};
    return {"generalized", omega, std::max(gamma, 1e-300), coherence_map(f),
            {{"gamma", gamma}, {"omega", omega}, {"alpha", alpha}}};
}

// resonant damped Jaynes-Cummings: coherence f, excited population |f|^2, levels coupled by zeta
inline TargetDynamics target_jaynes_cummings(double gamma, double zeta) {
    ScalarExpPoly f;
    cplx a = std::sqrt(cplx(zeta * zeta - 2 * gamma * zeta));
    if (std::abs(a) > 1e-8 * std::max(1.0, std::abs(zeta))) {
        f = {{0.5 * (1.0 + zeta / a), 0, (-zeta + a) / 2.0}, {0.5 * (1.0 - zeta / a), 0, (-zeta - a) / 2.0}};
    } else {
        f = {{1.0, 0, -zeta / 2}, {zeta / 2, 1, -zeta / 2}};  // critical damping
    }
    ScalarExpPoly f2 = f * f;
    ExpPolyMat T;
    Mat4c E = Mat4c::Zero();
    E(0, 0) = 1;
    E(3, 0) = -1;
    T.add(0.0, 0, E);
    add_scalar(T, f, 1, 1);
    add_scalar(T, f, 2, 2);
    add_scalar(T, f2, 3, 3);
    add_scalar(T, f2, 3, 0);
    double rate = std::max(1e-300, std::abs(((-zeta + a) / 2.0).real()));
    return {"jaynes_cummings", zeta, rate, T, {{"gamma", gamma}, {"zeta", zeta}}};
}

inline std::vector<std::string> target_names() { return {"reviving", "generalized", "jaynes_cummings"}; }

inline TargetDynamics build_target(const std::string& name, const Params& p) {
    if (name == "reviving") return target_reviving(param(p, "gamma"), param(p, "omega"));
    if (name == "generalized") return target_generalized(param(p, "gamma"), param(p, "omega"), param(p, "alpha"));
    if (name == "jaynes_cummings") return target_jaynes_cummings(param(p, "gamma"), param(p, "zeta"));
    throw std::invalid_argument("unknown synthesis target: " + name);
}

// ---------------------------------------------------------------- level solve

// orthonormal basis of Hermitian 4x4 matrices (Frobenius)
inline const std::vector<Mat4c>& hermitian_basis() {
    static const std::vector<Mat4c> B = [] {
        std::vector<Mat4c> b;
        const double r = 1 / std::sqrt(2.0);
        for (int a = 0; a < 4; ++a) {
            Mat4c E = Mat4c::Zero();
            E(a, a) = 1;
            b.push_back(E);
        }
        for (int a = 0; a < 4; ++a)
            for (int c = a + 1; c < 4; ++c) {
                Mat4c E = Mat4c::Zero();
                E(a, c) = E(c, a) = r;
                b.push_back(E);
                Mat4c F = Mat4c::Zero();
                F(a, c) = cplx(0, r);
                F(c, a) = cplx(0, -r);
                b.push_back(F);
            }
        return b;
    }();
    return B;
}

struct LevelSolution {
    std::vector<Mat4> L;        // L_{k,1..k} as transfer matrices
    std::vector<Mat4c> chi;     // their sandwich coefficients
    int matched_order = -1;     // derivative orders 0..matched_order of rho~_{k+1} vanish
    double residual = 0;        // of the required conditions v = 0..k-1
    ExpPolyMat next;            // rho_{k+1}(t) as a map of the initial state
};

struct LevelOptions {
    int max_order = 12;         // highest derivative order tried for the tie-break
    double consistency_tol = 1e-10;
};

namespace syn_detail {
// rows: vec of sum_j L_kj R_j^(v)(0) - R_k^(v+1)(0), scaled by rate^-v, v = 0..V
inline void build_system(const std::vector<ExpPolyMat>& R, int V, double rate, MatX& A, VecX& b) {
    const int k = static_cast<int>(R.size());
    const auto& H = hermitian_basis();
    A = MatX::Zero(16 * (V + 1), 16 * k);
    b = VecX::Zero(16 * (V + 1));
    for (int v = 0; v <= V; ++v) {
        double sc = std::pow(rate, -v);
        Mat4 rhs = R[k - 1].deriv0(v + 1) * sc;
        for (int a = 0; a < 4; ++a)
            for (int c = 0; c < 4; ++c) b(16 * v + 4 * a + c) = rhs(a, c);
        for (int j = 0; j < k; ++j) {
            Mat4 Rv = R[j].deriv0(v) * sc;
            for (int m = 0; m < 16; ++m) {
                Mat4 col = transfer_of_chi(H[m]) * Rv;
                for (int a = 0; a < 4; ++a)
                    for (int c = 0; c < 4; ++c) A(16 * v + 4 * a + c, 16 * j + m) = col(a, c);
            }
        }
    }
}
}  // namespace syn_detail

// L_k1..L_kk from the trajectories R_1..R_k (maps of the initial state); conditions
// d^v/dt^v rho~_{k+1}(0) = 0 for v = 0..k-1 are required, higher orders are matched
// while they stay consistent, and the remaining freedom goes to the least Frobenius norm of chi
inline LevelSolution solve_generator_level(const std::vector<ExpPolyMat>& R, double omega, const LevelOptions& o = {}) {
    using namespace syn_detail;
    const int k = static_cast<int>(R.size());
    if (k < 1) throw std::invalid_argument("solve_generator_level: need at least one prior trajectory");
    LevelSolution sol;
    VecX x;
    double sc = 1e-300;
    for (auto& r : R) sc = std::max(sc, r.spectral_scale());
    sc = std::max(sc, std::abs(omega));
    for (int V = std::max(o.max_order, k - 1); V >= k - 1; --V) {
        MatX A;
        VecX b;
        build_system(R, V, sc, A, b);
        VecX y = A.completeOrthogonalDecomposition().solve(b);
        double res = (A * y - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
        if (res <= o.consistency_tol || V == k - 1) {
            x = y;
            sol.matched_order = res <= o.consistency_tol ? V : -1;
            break;
        }
    }
    // residual of the required conditions
    {
        MatX A;
        VecX b;
        build_system(R, k - 1, sc, A, b);
        sol.residual = (A * x - b).cwiseAbs().maxCoeff();
    }
    if (sol.matched_order < 0)
        throw std::runtime_error("synthesis failure at level " + std::to_string(k) + ": derivative conditions inconsistent");
    const auto& H = hermitian_basis();
    for (int j = 0; j < k; ++j) {
        Mat4c chi = Mat4c::Zero();
        for (int m = 0; m < 16; ++m) chi += x(16 * j + m) * H[m];
        sol.chi.push_back(chi);
        sol.L.push_back(transfer_of_chi(chi));
    }
    sol.next = R[k - 1].derivative();
    for (int j = 0; j < k; ++j) sol.next += R[j].left(-sol.L[j]);
    sol.next = sol.next.scaled(1 / omega);
    return sol;
}

// ---------------------------------------------------------------- full synthesis

struct SynthesisResult {
    HeomModel model;
    int depth = 0;
    bool terminated = false;
    std::vector<std::vector<Mat4>> L;   // L[k][j], j <= k (lower triangle)
    std::vector<std::vector<Mat4c>> chi;
    std::vector<double> residuals;      // per level
    std::vector<int> matched_orders;
    double omega = 1;
};

// zero on a grid of 200 points over 10 characteristic times and in derivatives 0..6 at t = 0
inline bool vanishes(const ExpPolyMat& R, double rate, double tol = 1e-10) {
    const double T = 10 / rate;
    for (int i = 0; i < 200; ++i)
        if (R.at(T * i / 199).cwiseAbs().maxCoeff() > tol) return false;
    for (int v = 0; v <= 6; ++v)
        if (R.deriv0(v).cwiseAbs().maxCoeff() > tol * std::pow(std::max(1.0, rate), v)) return false;
    return true;
}

inline Terms terms_of_chi(const Mat4c& chi, double tol = 1e-14) {
    Terms ts;
    const auto& s = pauli();
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            if (std::abs(chi(a, b)) > tol) ts.push_back({chi(a, b), s[a], s[b]});
    return ts;
}

inline HeomModel model_of_levels(const std::string& name, const std::vector<std::vector<Mat4c>>& chi, double omega,
                                 Params params) {
    const int n = static_cast<int>(chi.size());
    std::vector<BlockTerms> blocks;
    for (int k = 0; k < n; ++k) {
        for (int j = 0; j <= k; ++j) {
            Terms ts = terms_of_chi(chi[k][j]);
            if (!ts.empty()) blocks.push_back({k, j, ts});
        }
        if (k + 1 < n) blocks.push_back({k, k + 1, omega * identity_map()});
    }
    params["omega_link"] = omega;
    return model_from_blocks(name, n, blocks, params);
}

inline SynthesisResult synthesize_heom(const TargetDynamics& target, int max_depth = 6, const LevelOptions& o = {}) {
    if (max_depth < 1) throw std::invalid_argument("synthesize_heom: max_depth must be >= 1");
    if (target.omega == 0) throw std::invalid_argument("synthesize_heom: omega must be nonzero");
    if ((target.T.deriv0(0) - Mat4::Identity()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("synthesize_heom: target must start at the identity map");
    SynthesisResult res;
    res.omega = target.omega;
    std::vector<ExpPolyMat> R{target.T};
    for (int k = 1; k <= max_depth; ++k) {
        auto lv = solve_generator_level(R, target.omega, o);
        res.L.push_back(lv.L);
        res.chi.push_back(lv.chi);
        res.residuals.push_back(lv.residual);
        res.matched_orders.push_back(lv.matched_order);
        res.depth = k;
        if (vanishes(lv.next, target.rate)) {
            res.terminated = true;
            break;
        }
        R.push_back(lv.next);
    }
    res.model = model_of_levels("synthesized_" + target.name, res.chi, target.omega, target.params);
    return res;
}

// residual of the level conditions v = 0..k-1 for given (e.g. reference) blocks L[k][j]
inline std::vector<double> constraint_residuals(const TargetDynamics& target, const std::vector<std::vector<Mat4>>& L) {
    std::vector<ExpPolyMat> R{target.T};
    std::vector<double> out;
    const double sc = std::max(target.T.spectral_scale(), std::abs(target.omega));
    for (size_t k = 1; k <= L.size(); ++k) {
        double worst = 0;
        for (int v = 0; v < static_cast<int>(k); ++v) {
            Mat4 r = R[k - 1].deriv0(v + 1);
            for (size_t j = 0; j < k; ++j) r -= L[k - 1][j] * R[j].deriv0(v);
            worst = std::max(worst, r.cwiseAbs().maxCoeff() * std::pow(sc, -v));
        }
        out.push_back(worst);
        ExpPolyMat next = R[k - 1].derivative();
        for (size_t j = 0; j < k; ++j) next += R[j].left(-L[k - 1][j]);
        R.push_back(next.scaled(1 / target.omega));
    }
    return out;
}

// lower-triangle blocks of a built-in model, as transfer matrices
inline std::vector<std::vector<Mat4>> lower_blocks(const HeomModel& m) {
    std::vector<std::vector<Mat4>> L(m.n_levels);
    for (int k = 0; k < m.n_levels; ++k)
        for (int j = 0; j <= k; ++j) L[k].push_back(m.generator.block<4, 4>(4 * k, 4 * j));
    return L;
}

// the known hand-built HEOM for each preset
inline HeomModel reference_model(const TargetDynamics& t) {
    if (t.name == "reviving") {
        double g = param(t.params, "gamma");
        return reviving_2level(g, g, t.omega, 0.5);
    }
    if (t.name == "generalized") {
        double a = param(t.params, "alpha");
        return reviving_3level(param(t.params, "gamma"), t.omega, a, 1 - 2 * a);
    }
    if (t.name == "jaynes_cummings") return jaynes_cummings(param(t.params, "gamma"), param(t.params, "zeta"));
    throw std::invalid_argument("no reference model for target " + t.name);
}

// max over the grid of |system block of exp(Lt) - target(t)| (Frobenius, Pauli transfer)
inline double verify_synthesis(const HeomModel& m, const TargetDynamics& target, double n_char = 10, int points = 200) {
    std::vector<double> times;
    for (int i = 0; i < points; ++i) times.push_back(n_char / target.rate * i / (points - 1));
    auto maps = propagate_extended(m, times);
    double worst = 0;
    for (size_t i = 0; i < times.size(); ++i)
        worst = std::max(worst, (Mat4(maps[i].topRows(4)) - target.T.at(times[i])).norm());
    return worst;
}

inline nlohmann::json synthesis_to_json(const SynthesisResult& r) {
    nlohmann::json j;
    j["depth"] = r.depth;
    j["terminated"] = r.terminated;
    j["residuals"] = r.residuals;
    j["matched_orders"] = r.matched_orders;
    j["model"] = model_to_json(r.model);
    return j;
}

}  // namespace heomcp
