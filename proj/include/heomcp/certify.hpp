#pragma once
// Certificates R for complete positivity: monotone quadratic forms found by SDP, with independent re-verification.
#include "lifting.hpp"
#include "sdp.hpp"

namespace heomcp {

struct CertifyOptions {
    double tol_v = 1e-9;
    double tol_psd = 1e-9;
    double tol_eq = 1e-10;
    double verify_rel = 1e-8;   // re-verification slack, relative to ||Q|| and ||R||
    double eps_pos = 1e-8;      // strictness margin for chi(t_p)
    double trace_cap = 0;       // 0: automatic
    int cap_retries = 2;
    double n_char = 20;         // horizon of the trajectory soundness check, in characteristic times
    SdpOptions sdp;
};

struct Certificate {
    std::string status = "uncertified";
    std::string label;
    MatX R, S;
    double v_m = std::numeric_limits<double>::quiet_NaN();
    VecX anchor;
    double min_eig_negQ = std::numeric_limits<double>::quiet_NaN();
    double min_eig_RminusS = std::numeric_limits<double>::quiet_NaN();
    double normalization_residual = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> delta_min;
    std::optional<VecX> omega;
    std::optional<double> floor_margin;  // <Omega,R Omega> - <Xi0,R Xi0>
    std::string note;
    std::vector<Certificate> parts;      // per factor
    nlohmann::json extra = nlohmann::json::object();
    bool ok() const { return status == "certified" || status == "certified_after_tp" || status == "floor_certified"; }
};

inline MatX monotone_Q(const MatX& l, const MatX& R) { return l.transpose() * R + R * l; }

inline double sym_min_eig(const MatX& M) {
    if (M.rows() == 0) return 0;
    Eigen::SelfAdjointEigenSolver<MatX> es((M + M.transpose()) / 2, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

struct Verification {
    bool ok = false;
    double min_eig_negQ, min_eig_RminusS, normalization_residual;
};

// independent of the solver: plain eigenvalue checks
inline Verification verify_certificate(const MatX& l, const MatX& S, const VecX& anchor, const MatX& R, double rel = 1e-8) {
    Verification v;
    MatX Q = monotone_Q(l, R);
    v.min_eig_negQ = sym_min_eig(-Q);
    v.min_eig_RminusS = sym_min_eig(R - S);
    v.normalization_residual = std::abs(anchor.dot((R - S) * anchor));
    double qn = std::max(1e-300, Q.norm()), rn = std::max(1.0, R.norm());
    double an = std::max(1.0, anchor.squaredNorm() * rn);
    v.ok = v.min_eig_negQ >= -rel * qn && v.min_eig_RminusS >= -rel * rn && v.normalization_residual <= rel * an;
    return v;
}

// ---------------------------------------------------------------- kernel constraints

struct LinearConstraint {
    MatX C;      // <C, R> = rhs (Frobenius)
    double rhs;
};

inline std::vector<LinearConstraint> kernel_constraints(const MatX& S, const VecX& anchor) {
    Eigen::SelfAdjointEigenSolver<MatX> es(S);
    const double scale = std::max(1e-300, es.eigenvalues().cwiseAbs().maxCoeff());
    int rank = 0;
    for (int i = 0; i < S.rows(); ++i)
        if (std::abs(es.eigenvalues()(i)) > 1e-12 * scale) ++rank;
    if (rank != 1) throw std::invalid_argument("kernel_constraints: S must have rank one; use the general constraint R - S >= 0");
    if (std::abs(anchor.dot(S * anchor)) <= 1e-14 * scale * anchor.squaredNorm())
        throw std::invalid_argument("kernel_constraints: anchor lies in the kernel of S");
    std::vector<LinearConstraint> out;
    for (int i = 0; i < S.rows(); ++i) {
        if (std::abs(es.eigenvalues()(i)) > 1e-12 * scale) continue;
        VecX K = es.eigenvectors().col(i);
        MatX C = (anchor * K.transpose() + K * anchor.transpose()) / 2;
        out.push_back({C, 0.0});
    }
    out.push_back({anchor * anchor.transpose(), anchor.dot(S * anchor)});
    return out;
}

// orthonormal basis of the complement of v
inline MatX complement_basis(const VecX& v) {
    const int D = static_cast<int>(v.size());
    Eigen::HouseholderQR<MatX> qr(v.normalized());
    MatX Qf = qr.householderQ() * MatX::Identity(D, D);
    return Qf.rightCols(D - 1);
}

// ---------------------------------------------------------------- core SDP

// min v s.t. vI - Q(R) >= 0, R = S + N M N', M >= 0, tr M <= cap
// With `endpoint` set, v is pinned to 0 and <endpoint,R endpoint> is minimised instead, which picks
// a certificate whose form actually drops along the trajectory when one exists.
inline Certificate solve_monotone_sdp(const MatX& l, const MatX& S, const VecX& anchor, const CertifyOptions& o = {},
                                      const std::optional<VecX>& endpoint = std::nullopt) {
    const int D = static_cast<int>(l.rows());
    if (S.rows() != D || anchor.size() != D) throw std::invalid_argument("certify: dimension mismatch");
    Certificate cert;
    cert.S = S;
    cert.anchor = anchor;
    const MatX N = complement_basis(anchor);
    const int m = D - 1;
    std::vector<std::pair<int, int>> idx;
    for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) idx.push_back({i, j});
    const int nM = static_cast<int>(idx.size());
    double cap = o.trace_cap > 0 ? o.trace_cap : 1e4 * std::max(1.0, S.norm()) * D;
    const MatX Q0 = monotone_Q(l, S);
    for (int attempt = 0; attempt <= o.cap_retries; ++attempt) {
        const bool pinned = endpoint.has_value();
        SdpProblem pr(nM + (pinned ? 0 : 1), {D, m, 1});
        pr.F0[0] = -Q0;
        if (!pinned) {
            pr.c(nM) = 1.0;
            pr.F[nM][0] = MatX::Identity(D, D);
        }
        pr.F0[2](0, 0) = cap;
        for (int k = 0; k < nM; ++k) {
            auto [i, j] = idx[k];
            MatX E = MatX::Zero(m, m);
            E(i, j) = E(j, i) = 1.0;
            MatX B = N * E * N.transpose();
            pr.F[k][0] = -monotone_Q(l, B);
            pr.F[k][1] = E;
            pr.F[k][2](0, 0) = -E.trace();
            if (pinned) pr.c(k) = endpoint->dot(B * *endpoint);
        }
        auto sol = solve(pr, o.sdp);
        MatX M = MatX::Zero(m, m);
        for (int k = 0; k < nM; ++k) {
            auto [i, j] = idx[k];
            M(i, j) = M(j, i) = sol.x.size() ? sol.x(k) : 0.0;
        }
        cert.R = S + N * M * N.transpose();
        cert.v_m = !sol.x.size() ? std::numeric_limits<double>::infinity()
                   : pinned         ? sym_min_eig(-monotone_Q(l, cert.R)) * -1.0
                                    : sol.x(nM);
        auto ver = verify_certificate(l, S, anchor, cert.R, o.verify_rel);
        cert.min_eig_negQ = ver.min_eig_negQ;
        cert.min_eig_RminusS = ver.min_eig_RminusS;
        cert.normalization_residual = ver.normalization_residual;
        cert.extra["sdp_status"] = to_string(sol.status);
        cert.extra["sdp_iterations"] = sol.iterations;
        cert.extra["trace_cap"] = cap;
        // solver status is advisory; the re-verified matrix decides
        bool good = cert.v_m <= o.tol_v && ver.ok;
        cert.status = good ? "certified" : "uncertified";
        if (good) return cert;
        bool at_cap = M.trace() > 0.99 * cap;
        if (!at_cap) break;
        cap *= 100;
    }
    return cert;
}

// F(t) = <x(t),R x(t)> with x' = l x is non-increasing once Q <= 0. F is analytic, so it is either
// constant or strictly below F(0) for every t > 0. Leading derivatives at 0 decide most cases; a
// sampled drop settles the rest.
inline bool strictly_decreasing_at(const MatX& l, const MatX& R, const VecX& x0, int max_order = 6) {
    MatX Qk = monotone_Q(l, R);
    double lscale = std::max(1.0, l.norm());
    for (int k = 1; k <= max_order; ++k) {
        double d = x0.dot(Qk * x0);
        double tol = 1e-12 * std::max(1.0, R.norm()) * std::pow(lscale, k) * std::max(1.0, x0.squaredNorm());
        if (d < -tol) return true;
        if (d > tol) return false;
        Qk = monotone_Q(l, Qk);
    }
    const double f0 = x0.dot(R * x0);
    const double tol = 1e-9 * std::max(1.0, R.norm()) * std::max(1.0, x0.squaredNorm());
    for (double t = 1e-2 / lscale; t <= 1e3 / lscale; t *= 2) {
        VecX x = (l * t).exp() * x0;
        if (x.dot(R * x) < f0 - tol) return true;
    }
    return false;
}

// ---------------------------------------------------------------- model level

inline ReducedSystem reduced_with_h(const HeomModel& m) {
    ReducedSystem r = reduced_system(m);
    if (!r.builtin) {
        auto hz = default_horizon(r);
        auto tr = propagate(r, hz.t_end, hz.dt);
        r.h = std::max(1, detect_h(tr));
        finish_reduced(r);
        r.factors = {{r.eh, 1, true, "e_h"}};
    }
    return r;
}

// certificate for one factor, quadratic in lambda or lifted; anchor_lambda selects zero or t_p
inline Certificate certify_factor(const ReducedSystem& r, size_t k, const VecX& anchor_lambda, const CertifyOptions& o) {
    const auto& f = r.factors[k];
    Certificate c;
    if (k < r.s_forms.size() && r.s_forms[k].size() > 0) {
        c = solve_monotone_sdp(r.l, r.s_forms[k], anchor_lambda, o);
        c.extra["coordinates"] = "lambda";
    } else {
        LiftedSystem ls;
        try {
            ls = lift_polynomial(r, f.P);
        } catch (const NoAsymptote& e) {
            c.note = e.what();
            c.label = f.label;
            return c;
        }
        VecX xi = xi_of(ls, anchor_lambda);
        double pa = f.P(anchor_lambda);
        if (!(ls.c > 0) || pa < -1e-12 * std::max(1.0, ls.c) || pa > 2 * ls.c) {
            c.note = "anchor value of the factor outside [0, 2c]";
            c.label = f.label;
            c.extra["c"] = ls.c;
            return c;
        }
        c = solve_monotone_sdp(ls.L, ls.S, xi, o);
        c.extra["coordinates"] = "lifted";
        c.extra["lift"] = lifted_to_json(ls);
        c.extra["c"] = ls.c;
    }
    c.label = f.label;
    return c;
}

inline double min_over_trajectory_eh(const ReducedSystem& r, double n_char) {
    auto hz = default_horizon(r, n_char);
    auto tr = propagate(r, hz.t_end, hz.dt);
    double mn = std::numeric_limits<double>::infinity();
    for (auto& e : tr.e) mn = std::min(mn, e[r.h]);
    return mn;
}

// all t >= 0, anchored at lambda(0)
inline Certificate certify_model(const HeomModel& m, const CertifyOptions& o = {}) {
    Certificate out;
    ReducedSystem r = reduced_with_h(m);
    auto st = short_time_analysis(m);
    out.extra["short_time_gate"] = st.all_positive();
    out.anchor = r.lambda0;
    bool all = st.all_positive();
    if (!all) {
        out.note = "short-time positivity gate failed";
        return out;
    }
    for (size_t k = 0; k < r.factors.size(); ++k) {
        if (!r.factors[k].certify) continue;
        Certificate c = certify_factor(r, k, r.lambda0, o);
        if (c.ok()) {
            const bool lifted = c.extra.value("coordinates", "") == "lifted";
            MatX L = r.l;
            VecX x0 = r.lambda0;
            bool interior = false;
            if (lifted) {
                LiftedSystem ls = lift_polynomial(r, r.factors[k].P);
                L = ls.L;
                x0 = ls.xi0;
                // strict decrease matters only when the factor starts on the boundary of (0, 2c)
                double p0 = r.factors[k].P(r.lambda0);
                interior = std::min(p0, 2 * ls.c - p0) > 1e-9 * std::max(1.0, ls.c);
            }
            if (!interior && !strictly_decreasing_at(L, c.R, x0)) {
                // ask for a certificate whose form drops by one characteristic time
                VecX xe = (L / slowest_decay_rate(L)).exp() * x0;
                Certificate c2 = solve_monotone_sdp(L, c.S, x0, o, xe);
                if (c2.ok() && strictly_decreasing_at(L, c2.R, x0)) {
                    c2.label = c.label;
                    c2.extra["coordinates"] = c.extra["coordinates"];
                    if (c.extra.contains("lift")) c2.extra["lift"] = c.extra["lift"];
                    if (c.extra.contains("c")) c2.extra["c"] = c.extra["c"];
                    c = c2;
                } else {
                    c.status = "uncertified";
                    c.note = "monotone form is constant along the trajectory";
                }
            }
        }
        all = all && c.ok();
        out.parts.push_back(c);
    }
    if (all) {
        double mn = min_over_trajectory_eh(r, o.n_char);
        out.extra["min_eh_trajectory"] = mn;
        if (mn < -1e-8) {
            all = false;
            out.note = "trajectory check found e_h < 0 (solver inconsistency)";
        }
    }
    if (!out.parts.empty()) {
        out.R = out.parts[0].R;
        out.S = out.parts[0].S;
        out.v_m = out.parts[0].v_m;
        out.min_eig_negQ = out.parts[0].min_eig_negQ;
        out.min_eig_RminusS = out.parts[0].min_eig_RminusS;
        out.normalization_residual = out.parts[0].normalization_residual;
        for (auto& p : out.parts) out.v_m = std::max(out.v_m, p.v_m);
    }
    out.status = all ? "certified" : "uncertified";
    return out;
}

// anchored at a time t_p after which chi is strictly positive
inline Certificate certify_after_tp(const HeomModel& m, const CertifyOptions& o = {}, std::optional<double> tp_override = std::nullopt) {
    Certificate out;
    ReducedSystem r = reduced_with_h(m);
    auto hz = default_horizon(r);
    auto tr = propagate(r, hz.t_end, hz.dt);
    std::optional<double> tp = tp_override ? tp_override : detect_tp(tr, o.eps_pos, r.h);
    if (!tp) {
        out.note = "no t_p found on the scan horizon";
        return out;
    }
    VecX lp = lambda_at(r.l, r.lambda0, *tp);
    auto s = chi_sample(eval(r.system_transfer, lp));
    double mn = nontrivial_min_eig(s.eig, r.h);
    out.extra["t_p"] = *tp;
    out.extra["min_eig_chi_tp"] = mn;
    out.anchor = lp;
    if (mn < o.eps_pos) {
        out.note = "chi(t_p) not strictly positive";
        return out;
    }
    bool all = true;
    std::vector<size_t> done;
    for (size_t k = 0; k < r.factors.size(); ++k) {
        if (!r.factors[k].certify) continue;
        // factors that coincide with an earlier one along the trajectory need no separate certificate
        bool dup = false;
        for (size_t j : done) {
            double diff = 0, sc = 1;
            for (size_t i = 0; i < tr.lambda.size(); i += 7) {
                double a = r.factors[k].P(tr.lambda[i]), b = r.factors[j].P(tr.lambda[i]);
                diff = std::max(diff, std::abs(a - b));
                sc = std::max(sc, std::abs(a));
            }
            if (diff <= 1e-9 * sc) dup = true;
        }
        if (dup) continue;
        Certificate c = certify_factor(r, k, lp, o);
        all = all && c.ok();
        out.parts.push_back(c);
        done.push_back(k);
    }
    if (!out.parts.empty()) {
        out.R = out.parts[0].R;
        out.S = out.parts[0].S;
        out.v_m = out.parts[0].v_m;
        out.min_eig_negQ = out.parts[0].min_eig_negQ;
        out.min_eig_RminusS = out.parts[0].min_eig_RminusS;
        out.normalization_residual = out.parts[0].normalization_residual;
    }
    out.status = all && !out.parts.empty() ? "certified_after_tp" : "uncertified";
    return out;
}

// ---------------------------------------------------------------- analytic certificates

struct ParameterCondition {
    std::string name;
    bool value;
};

struct AnalyticCertificate {
    bool available = false;
    std::vector<ParameterCondition> conditions;
    bool holds = false;          // closed-form conditions
    MatX R;                      // closed form, lambda coordinates (empty if none is known)
    std::optional<Verification> verification;
};

inline bool cond_2a_g1g2(double alpha, double g1, double g2) { return 2 * alpha + g1 * g2 >= 0; }
inline bool cond_2aw2_g1g2(double alpha, double omega, double g1, double g2) { return 2 * alpha * omega * omega + g1 * g2 >= 0; }

// boundaries are inclusive; the slack absorbs rounding in -2at-1
inline bool three_level_region_a(double at, double bt) { return at >= -0.5 && at < 0 && -2 * at - 1 <= bt + 1e-12; }
inline bool three_level_region_b(double at, double bt) { return at > 0 && -1 <= bt; }

inline AnalyticCertificate analytic_certificate(const HeomModel& m) {
    AnalyticCertificate a;
    const auto& p = m.params;
    if (p.empty()) return a;
    auto finish = [&](const ReducedSystem& r, const MatX& s) {
        if (a.R.size()) a.verification = verify_certificate(r.l, s, r.lambda0, a.R);
    };
    if (m.name == "jaynes_cummings") {
        double g = param(p, "gamma"), z = param(p, "zeta");
        a.available = true;
        a.conditions = {{"gamma>=0", g >= 0}, {"zeta>=0", z >= 0}, {"gamma*zeta>0", g * z > 0}};
        a.holds = g >= 0 && z >= 0 && g * z > 0;
        if (g != 0) {
            a.R = MatX::Zero(2, 2);
            a.R(0, 0) = 0.25;
            a.R(1, 1) = 0.25 * 2 * z / g;
        }
        auto r = reduced_system(m);
        finish(r, r.s_forms[0]);
    } else if (m.name == "reviving_2level") {
        double g1 = param(p, "gamma1"), g2 = param(p, "gamma2"), w = param(p, "omega"), al = param(p, "alpha");
        a.available = true;
        auto r = reduced_system(m);
        if (m.init_variant == "stationary") {
            double eta = 2 * al * w * w + g1 * g2;
            a.conditions = {{"gamma1+gamma2>=0", g1 + g2 >= 0}, {"2*alpha*omega^2+gamma1*gamma2>0", eta > 0}};
            a.holds = g1 + g2 >= 0 && eta > 0;
            if (eta != 0) {
                a.R = MatX(2, 2);
                a.R << g1 * g1 + eta, -w * g1, -w * g1, w * w;
                a.R /= 4 * eta;
            }
        } else {
            a.conditions = {{"gamma1>=0", g1 >= 0},
                            {"gamma2>=0", g2 >= 0},
                            {"2*alpha+gamma1*gamma2>=0", cond_2a_g1g2(al, g1, g2)},
                            {"2*alpha*omega^2+gamma1*gamma2>=0", cond_2aw2_g1g2(al, w, g1, g2)}};
            // the dimensionally consistent form decides
            a.holds = g1 >= 0 && g2 >= 0 && cond_2aw2_g1g2(al, w, g1, g2);
            if (al != 0) {
                a.R = MatX::Zero(2, 2);
                a.R(0, 0) = 0.25;
                a.R(1, 1) = 0.25 * (al * w * w + g1 * g2) / (2 * al * al * w * w);
            }
        }
        finish(r, r.s_forms[0]);
    } else if (m.name == "reviving_3level") {
        double g = param(p, "gamma"), w = param(p, "omega"), al = param(p, "alpha"), be = param(p, "beta");
        double at = al * w * w / (g * g), bt = be * w * w / (g * g);
        a.available = true;
        bool ra = three_level_region_a(at, bt), rb = three_level_region_b(at, bt);
        a.conditions = {{"region_a: -1/2<=at<0 and bt>=-2at-1", ra}, {"region_b: at>0 and bt>=-1", rb},
                        {"at*bt!=0", at * bt != 0}};
        a.holds = (ra || rb) && at * bt != 0;
        if (at * bt != 0) {
            // diag(1, a, b)/4 in scaled coordinates lambda_i (omega/gamma)^(i-1)
            double aa = 1 / std::abs(2 * at), bb = 1 / std::abs(2 * at * bt);
            Eigen::Vector3d sc(1, w / g, (w / g) * (w / g));
            a.R = (0.25 * Eigen::Vector3d(1, aa, bb)).cwiseProduct(sc.cwiseProduct(sc)).asDiagonal();
        }
        auto r = reduced_system(m);
        finish(r, r.s_forms[0]);
    } else if (m.name == "bath") {
        double gpl = param(p, "gamma_plus"), gmi = param(p, "gamma_minus"), w = param(p, "omega"), xi = param(p, "xi");
        double gp = (gpl + gmi) / 2;
        a.available = true;
        a.conditions = {{"-2*gamma_p^2<=omega*xi (P1)", -2 * gp * gp <= w * xi}};
        a.holds = -2 * gp * gp <= w * xi;
    }
    return a;
}

// ---------------------------------------------------------------- eigenvalue floor

struct FloorOptions {
    CertifyOptions cert;
    std::optional<double> c_override;
};

// Relaxed form of the Omega conditions: R - S >= 0, Q <= 0 and <Xi0,R Xi0> < c^2.
// Any such R yields Omega (the minimiser of <Xi,R Xi> on Xi1 = -c) and a rescaled R'
// satisfying <Omega,(R'-S)Omega> = 0 and <Xi0,R' Xi0> < <Omega,R' Omega>.
inline Certificate floor_factor(const LiftedSystem& ls, const CertifyOptions& o) {
    const int D = ls.dim();
    Certificate c;
    c.S = ls.S;
    c.anchor = ls.xi0;
    std::vector<std::pair<int, int>> idx;
    for (int i = 0; i < D; ++i)
        for (int j = i; j < D; ++j) idx.push_back({i, j});
    const int p = static_cast<int>(idx.size());
    SdpProblem pr(p, {D, D});
    pr.F0[0] = -ls.S;
    for (int k = 0; k < p; ++k) {
        auto [i, j] = idx[k];
        MatX E = MatX::Zero(D, D);
        E(i, j) = E(j, i) = 1.0;
        pr.F[k][0] = E;
        pr.F[k][1] = -monotone_Q(ls.L, E);
        pr.c(k) = (i == j ? 1.0 : 2.0) * ls.xi0(i) * ls.xi0(j);
    }
    auto sol = solve(pr, o.sdp);
    MatX R = MatX::Zero(D, D);
    for (int k = 0; k < p; ++k) {
        auto [i, j] = idx[k];
        R(i, j) = R(j, i) = sol.x(k);
    }
    const double c2 = ls.c * ls.c;
    c.extra["sdp_status"] = to_string(sol.status);
    c.extra["relaxed_ratio"] = ls.xi0.dot(R * ls.xi0) / c2;
    c.extra["c"] = ls.c;
    // tangent point on Xi1 = -c
    MatX R22 = R.bottomRightCorner(D - 1, D - 1);
    VecX R21 = R.col(0).tail(D - 1);
    VecX y = R22.completeOrthogonalDecomposition().solve(R21) * ls.c;
    VecX om(D);
    om(0) = -ls.c;
    om.tail(D - 1) = y;
    double sigma = om.dot(R * om) / c2;  // Schur complement, >= 1 when R >= S
    if (sigma > 0) R /= sigma;
    c.R = R;
    c.omega = om;
    auto ver = verify_certificate(ls.L, ls.S, om, R, o.verify_rel);
    c.min_eig_negQ = ver.min_eig_negQ;
    c.min_eig_RminusS = ver.min_eig_RminusS;
    c.normalization_residual = ver.normalization_residual;
    double margin = om.dot(R * om) - ls.xi0.dot(R * ls.xi0);
    c.floor_margin = margin;
    c.v_m = -margin;
    bool good = ls.c > 0 && ver.ok && margin > 1e-9 * c2;
    c.status = good ? "floor_certified" : "floor_unproven";
    return c;
}

inline Certificate bound_eigenvalue_floor(const HeomModel& m, double delta_min, const FloorOptions& fo = {}) {
    if (!(delta_min > 0)) throw std::invalid_argument("bound_eigenvalue_floor: delta_min must be positive");
    Certificate out;
    out.delta_min = delta_min;
    // CP from zero already bounds every eigenvalue by 0 > -delta
    Certificate z = certify_model(m, fo.cert);
    if (z.ok()) {
        out.status = "floor_certified";
        out.note = "certified completely positive; the floor holds trivially";
        out.parts.push_back(z);
        return out;
    }
    ReducedSystem r = reduced_with_h(m);
    auto factors = eh_factorization(m, delta_min);
    if (!r.builtin) {
        auto e = elementary_symmetric_polys(r.system_transfer, delta_min);
        factors = {e[4]};
    }
    bool all = true;
    int k = 0;
    for (auto& P : factors) {
        Certificate c;
        try {
            auto ls = lift_polynomial(r, P, LiftSign::upper, fo.c_override);
            c = floor_factor(ls, fo.cert);
        } catch (const NoAsymptote& e) {
            c.status = "floor_unproven";
            c.note = e.what();
        }
        c.label = "P'" + std::to_string(++k);
        c.delta_min = delta_min;
        all = all && c.status == "floor_certified";
        out.parts.push_back(c);
    }
    out.status = all ? "floor_certified" : "floor_unproven";
    if (!out.parts.empty() && out.parts[0].omega) out.omega = out.parts[0].omega;
    return out;
}

// ---------------------------------------------------------------- three-level region map

// "analytic" | "numeric" | "violating" | "undecided"
struct RegionPoint {
    double alpha_tilde, beta_tilde;
    bool analytic, numeric, violating;
    double min_eig;
    std::string label() const {
        if (analytic) return "analytic";
        if (numeric) return "numeric";
        if (violating) return "violating";
        return "undecided";
    }
};

inline RegionPoint classify_three_level(double at, double bt, const CertifyOptions& o = {}) {
    RegionPoint pt{at, bt, false, false, false, 0};
    auto m = reviving_3level(1.0, 1.0, at, bt);
    auto a = analytic_certificate(m);
    bool gate = short_time_analysis(m).all_positive();
    pt.analytic = gate && a.holds && a.verification && a.verification->ok;
    auto r = reduced_system(m);
    auto c = solve_monotone_sdp(r.l, r.s_forms[0], r.lambda0, o);
    pt.numeric = gate && c.ok() && strictly_decreasing_at(r.l, c.R, r.lambda0);
    auto hz = default_horizon(r, 20.0, 2000);
    auto tr = propagate(r, hz.t_end, hz.dt);
    double mn = std::numeric_limits<double>::infinity();
    for (auto& ev : tr.eig) mn = std::min(mn, ev(0));
    pt.min_eig = mn;
    pt.violating = mn < -1e-8;
    return pt;
}

// ---------------------------------------------------------------- JSON

inline nlohmann::json mat_json(const MatX& M) {
    std::vector<std::vector<double>> v(M.rows(), std::vector<double>(M.cols()));
    for (int i = 0; i < M.rows(); ++i)
        for (int j = 0; j < M.cols(); ++j) v[i][j] = M(i, j);
    return v;
}
inline nlohmann::json vec_json(const VecX& x) { return std::vector<double>(x.data(), x.data() + x.size()); }
inline nlohmann::json num_json(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

inline nlohmann::json certificate_to_json(const Certificate& c) {
    nlohmann::json j;
    j["status"] = c.status;
    if (!c.label.empty()) j["label"] = c.label;
    if (c.R.size()) j["R"] = mat_json(c.R);
    j["v_m"] = num_json(c.v_m);
    if (c.anchor.size()) j["anchor"] = vec_json(c.anchor);
    j["margins"] = {{"min_eig_negQ", num_json(c.min_eig_negQ)},
                    {"min_eig_R_minus_S", num_json(c.min_eig_RminusS)},
                    {"normalization_residual", num_json(c.normalization_residual)}};
    if (c.delta_min) j["delta_min"] = *c.delta_min;
    if (c.omega) j["omega"] = vec_json(*c.omega);
    if (c.floor_margin) j["floor_margin"] = *c.floor_margin;
    if (!c.note.empty()) j["note"] = c.note;
    for (auto& [k, v] : c.extra.items()) j[k] = v;
    if (!c.parts.empty()) {
        j["factors"] = nlohmann::json::array();
        for (auto& p : c.parts) j["factors"].push_back(certificate_to_json(p));
    }
    return j;
}

inline nlohmann::json analytic_to_json(const AnalyticCertificate& a) {
    nlohmann::json j;
    j["available"] = a.available;
    j["holds"] = a.holds;
    j["conditions"] = nlohmann::json::array();
    for (auto& c : a.conditions) j["conditions"].push_back({{"name", c.name}, {"value", c.value}});
    if (a.R.size()) j["R"] = mat_json(a.R);
    if (a.verification) j["verified"] = a.verification->ok;
    return j;
}

}  // namespace heomcp
