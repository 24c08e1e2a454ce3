#pragma once
// Quadratic forms for positivity targets: direct fits, and the nonlinear lift to monomial coordinates.
#include <deque>
#include <random>
#include <set>

#include "propagate.hpp"

namespace heomcp {

struct QuadraticForm {
    MatX s;              // value(lambda) = lambda0' s lambda0 - lambda' s lambda
    double residual = 0; // max abs fit residual, relative to the target scale
};

inline double quadratic_value(const MatX& s, const VecX& lambda0, const VecX& lambda) {
    return lambda0.dot(s * lambda0) - lambda.dot(s * lambda);
}

struct NotQuadratic : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Least-squares fit of s on reachable samples plus trajectories from perturbed starts.
inline QuadraticForm fit_quadratic_form(const ReducedSystem& r, const Poly& target, double tol = 1e-9, unsigned seed = 7) {
    const int d = static_cast<int>(r.l.rows());
    const int nu = d * (d + 1) / 2;
    std::vector<VecX> pts;
    auto hz = default_horizon(r, 20.0, 200);
    std::mt19937 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.1);
    const int want = std::max(10 * d * d, 2 * nu);
    for (int traj = 0; static_cast<int>(pts.size()) < want; ++traj) {
        VecX x0 = r.lambda0;
        if (traj > 0)
            for (int i = 0; i < d; ++i) x0(i) += nd(rng);
        for (int k = 0; k <= 40; ++k) pts.push_back(lambda_at(r.l, x0, hz.t_end * k / 40.0));
    }
    MatX A(pts.size(), nu);
    VecX y(pts.size());
    for (size_t p = 0; p < pts.size(); ++p) {
        int c = 0;
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j, ++c) {
                double f = (i == j) ? 1.0 : 2.0;
                A(p, c) = f * (r.lambda0(i) * r.lambda0(j) - pts[p](i) * pts[p](j));
            }
        y(p) = target(pts[p]);
    }
    // minimum-norm least squares: directions that never vary on the samples stay zero
    VecX sol = A.completeOrthogonalDecomposition().solve(y);
    QuadraticForm q;
    q.s = MatX::Zero(d, d);
    int c = 0;
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j, ++c) q.s(i, j) = q.s(j, i) = sol(c);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (std::abs(q.s(i, j)) < 1e-12 * std::max(1.0, q.s.cwiseAbs().maxCoeff())) q.s(i, j) = 0;
    double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
    q.residual = (A * sol - y).cwiseAbs().maxCoeff() / scale;
    if (q.residual > tol)
        throw NotQuadratic("target is not quadratic on the reachable set (residual " + std::to_string(q.residual) +
                           "); use lift_polynomial");
    return q;
}

// ---------------------------------------------------------------- lift

enum class LiftSign { upper, lower };  // upper: Xi1 = P - c ; lower: Xi1 = c - P

struct LiftedSystem {
    int nvars = 0;
    Poly P;
    double c = 0;
    LiftSign sign = LiftSign::upper;
    std::vector<Monomial> basis;   // monomial coordinates m(lambda)
    MatX T;                        // Xi = T m(lambda); first row encodes +-(P - c)
    MatX Lm;                       // d/dt m = Lm m
    MatX L;                        // d/dt Xi = L Xi
    VecX xi0;
    MatX S;                        // diag(1, 0, ..., 0)
    int dim() const { return static_cast<int>(basis.size()); }
};

inline double monomial_value(const Monomial& m, const VecX& x) {
    double v = 1;
    for (size_t i = 0; i < m.size(); ++i)
        for (int k = 0; k < m[i]; ++k) v *= x(static_cast<int>(i));
    return v;
}

inline VecX monomials_at(const LiftedSystem& ls, const VecX& lambda) {
    VecX v(ls.dim());
    for (int i = 0; i < ls.dim(); ++i) v(i) = monomial_value(ls.basis[i], lambda);
    return v;
}
inline VecX xi_of(const LiftedSystem& ls, const VecX& lambda) { return ls.T * monomials_at(ls, lambda); }

struct NoAsymptote : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// lim_{t->inf} lambda(t): projection onto the kernel of l; requires every other mode to decay
inline VecX asymptote(const MatX& l, const VecX& lambda0, double tol = 1e-9) {
    Eigen::EigenSolver<MatX> es(l);
    const double scale = std::max(1.0, l.cwiseAbs().maxCoeff());
    const int d = static_cast<int>(l.rows());
    Eigen::VectorXcd keep(d);
    for (int i = 0; i < d; ++i) {
        auto ev = es.eigenvalues()(i);
        if (ev.real() > tol * scale) throw NoAsymptote("no finite asymptote: growing mode");
        bool zero = std::abs(ev) <= tol * scale;
        if (!zero && ev.real() > -tol * scale) throw NoAsymptote("no finite asymptote: undamped oscillation");
        keep(i) = zero ? 1.0 : 0.0;
    }
    Eigen::MatrixXcd V = es.eigenvectors();
    Eigen::VectorXcd coeffs = V.partialPivLu().solve(lambda0.cast<cplx>());
    return (V * keep.asDiagonal() * coeffs).real();
}

inline LiftedSystem lift_polynomial(const ReducedSystem& r, const Poly& P, LiftSign sign = LiftSign::upper,
                                    std::optional<double> c_override = std::nullopt, int full_degree = 0) {
    const int n = static_cast<int>(r.l.rows());
    LiftedSystem ls;
    ls.nvars = n;
    ls.P = P;
    ls.sign = sign;
    ls.c = c_override ? *c_override : P(asymptote(r.l, r.lambda0));
    Poly target = P - ls.c;
    if (sign == LiftSign::lower) target = -1.0 * target;
    target = target.pruned(1e-14);
    const double tiny = 1e-14 * std::max(1.0, r.l.cwiseAbs().maxCoeff());
    // closure of the support under the flow (reachable monomials only)
    std::set<Monomial> seen;
    std::deque<Monomial> queue;
    for (auto& [m, cf] : target.terms()) {
        if (seen.insert(m).second) queue.push_back(m);
    }
    // optional enrichment: every monomial up to full_degree (the span is flow invariant)
    if (full_degree > 0) {
        std::vector<Monomial> layer{Monomial(n, 0)};
        for (int d = 0; d <= full_degree; ++d) {
            std::vector<Monomial> next;
            for (auto& m : layer) {
                if (seen.insert(m).second) queue.push_back(m);
                for (int i = 0; i < n; ++i) {
                    Monomial up = m;
                    ++up[i];
                    next.push_back(up);
                }
            }
            std::sort(next.begin(), next.end());
            next.erase(std::unique(next.begin(), next.end()), next.end());
            layer = next;
        }
    }
    std::map<Monomial, Poly> derivs;
    while (!queue.empty()) {
        Monomial m = queue.front();
        queue.pop_front();
        Poly mono(n);
        mono.add_term(m, 1.0);
        Poly dm = mono.flow_derivative(r.l);
        Poly kept(n);
        for (auto& [mm, cc] : dm.terms())
            if (std::abs(cc) > tiny) {
                kept.add_term(mm, cc);
                if (seen.insert(mm).second) queue.push_back(mm);
            }
        derivs[m] = kept;
    }
    ls.basis.assign(seen.begin(), seen.end());
    const int D = ls.dim();
    std::map<Monomial, int> idx;
    for (int i = 0; i < D; ++i) idx[ls.basis[i]] = i;
    ls.Lm = MatX::Zero(D, D);
    for (int i = 0; i < D; ++i)
        for (auto& [mm, cc] : derivs[ls.basis[i]].terms()) ls.Lm(i, idx.at(mm)) += cc;
    // T: first row = coefficients of the target, remaining rows = unit rows with the pivot removed
    VecX coef = VecX::Zero(D);
    for (auto& [m, cf] : target.terms()) coef(idx.at(m)) = cf;
    if (coef.cwiseAbs().maxCoeff() == 0.0) throw std::invalid_argument("lift_polynomial: P - c vanishes identically");
    int pivot;
    coef.cwiseAbs().maxCoeff(&pivot);
    ls.T = MatX::Zero(D, D);
    ls.T.row(0) = coef.transpose();
    for (int i = 0, row = 1; i < D; ++i)
        if (i != pivot) ls.T(row++, i) = 1.0;
    ls.L = ls.T * ls.Lm * ls.T.inverse();
    ls.xi0 = xi_of(ls, r.lambda0);
    ls.S = MatX::Zero(D, D);
    ls.S(0, 0) = 1.0;
    return ls;
}

// G = Xi(0)' S Xi(0) - xi' S xi ; equals c^2 - xi1^2 when P(0) = 0
inline double eval_G(const LiftedSystem& ls, const VecX& xi) {
    if (xi.size() != ls.dim()) throw std::invalid_argument("eval_G: dimension mismatch");
    return ls.xi0.dot(ls.S * ls.xi0) - xi.dot(ls.S * xi);
}

inline nlohmann::json lifted_to_json(const LiftedSystem& ls) {
    nlohmann::json j;
    j["c"] = ls.c;
    j["sign"] = ls.sign == LiftSign::upper ? "upper" : "lower";
    j["basis"] = ls.basis;
    std::vector<std::vector<double>> L(ls.dim(), std::vector<double>(ls.dim())), T = L;
    for (int i = 0; i < ls.dim(); ++i)
        for (int k = 0; k < ls.dim(); ++k) {
            L[i][k] = ls.L(i, k);
            T[i][k] = ls.T(i, k);
        }
    j["L"] = L;
    j["T"] = T;
    j["xi0"] = std::vector<double>(ls.xi0.data(), ls.xi0.data() + ls.dim());
    return j;
}

}  // namespace heomcp
