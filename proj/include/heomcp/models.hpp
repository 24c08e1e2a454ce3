#pragma once
// HEOM model builders, reduced coordinates and e_h factorizations.
#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "chi_poly.hpp"

namespace heomcp {

using Params = std::map<std::string, double>;

struct BlockTerms {
    int i = 0, j = 0;  // zero-based level indices
    Terms terms;
};

struct HeomModel {
    std::string name;
    int n_levels = 1;
    Params params;
    std::vector<BlockTerms> blocks;
    MatX generator;  // 4n x 4n
    MatX initial;    // 4n x 4, stacked Lambda_i(0)
    std::string init_variant = "zero";
};

inline double param(const Params& p, const std::string& k) {
    auto it = p.find(k);
    if (it == p.end()) throw std::invalid_argument("missing parameter: " + k);
    return it->second;
}
inline double param_or(const Params& p, const std::string& k, double d) {
    auto it = p.find(k);
    return it == p.end() ? d : it->second;
}

inline MatX default_initial(int n) {
    MatX I = MatX::Zero(4 * n, 4);
    I.topRows(4).setIdentity();
    return I;
}

inline HeomModel model_from_blocks(std::string name, int n, std::vector<BlockTerms> blocks, Params params = {}) {
    HeomModel m;
    m.name = std::move(name);
    m.n_levels = n;
    m.params = std::move(params);
    std::vector<std::vector<Mat4>> grid(n, std::vector<Mat4>(n, Mat4::Zero()));
    for (auto& b : blocks) {
        if (b.i < 0 || b.j < 0 || b.i >= n || b.j >= n) throw std::invalid_argument("block index out of range");
        grid[b.i][b.j] += transfer_of_sandwich_sum(b.terms);
    }
    m.blocks = std::move(blocks);
    m.generator = assemble_extended_generator(grid);
    m.initial = default_initial(n);
    return m;
}

namespace detail {
inline const Mat2c& sx() { return pauli()[1]; }
inline const Mat2c& sy() { return pauli()[2]; }
inline const Mat2c& sz() { return pauli()[3]; }
inline Terms Dz() { return sandwich(sz(), sz()) + (-1.0) * identity_map(); }
inline Terms zz() { return sandwich(sz(), sz()); }
}  // namespace detail

inline HeomModel jaynes_cummings(double gamma, double zeta) {
    using namespace detail;
    std::vector<BlockTerms> b;
    b.push_back({0, 1, zeta * identity_map()});
    b.push_back({1, 0, gamma * dissipator(sigma_minus())});
    b.push_back({1, 1, zeta * (sandwich(sx(), sx()) + sandwich(sy(), sy()) + sandwich(sz(), sz()))});
    b.push_back({1, 2, zeta * identity_map()});
    b.push_back({2, 1, (gamma / 2) * (sandwich(sx(), sx()) + sandwich(sy(), sy()))});
    b.push_back({2, 2, -2 * zeta * sandwich(sz().adjoint(), sz().adjoint())});
    return model_from_blocks("jaynes_cummings", 3, b, {{"gamma", gamma}, {"zeta", zeta}});
}

// init: "zero" (rho_2(0)=0) or "stationary" (rho_2(0) = -L11 rho_1(0)/omega)
inline HeomModel reviving_2level(double g1, double g2, double omega, double alpha, const std::string& init = "zero") {
    using namespace detail;
    std::vector<BlockTerms> b;
    b.push_back({0, 0, (g1 / 2) * Dz()});
    b.push_back({0, 1, omega * identity_map()});
    b.push_back({1, 0, (alpha * omega) * Dz()});
    b.push_back({1, 1, g2 * zz()});
    auto m = model_from_blocks("reviving_2level", 2, b, {{"gamma1", g1}, {"gamma2", g2}, {"omega", omega}, {"alpha", alpha}});
    m.init_variant = init;
    if (init == "stationary") {
        m.initial.block<4, 4>(4, 0) = -transfer_of_sandwich_sum((g1 / 2) * Dz()) / omega;
    } else if (init != "zero") {
        throw std::invalid_argument("unknown initial condition: " + init);
    }
    return m;
}

inline HeomModel reviving_3level(double gamma, double omega, double alpha, double beta) {
    using namespace detail;
    std::vector<BlockTerms> b;
    b.push_back({0, 0, (gamma / 2) * Dz()});
    b.push_back({0, 1, omega * identity_map()});
    b.push_back({1, 0, (alpha * omega) * Dz()});
    b.push_back({1, 1, gamma * zz()});
    b.push_back({1, 2, omega * identity_map()});
    b.push_back({2, 1, (beta * omega) * sandwich(sz(), sz().adjoint())});
    b.push_back({2, 2, gamma * sandwich(sz(), sz().adjoint())});
    return model_from_blocks("reviving_3level", 3, b, {{"gamma", gamma}, {"omega", omega}, {"alpha", alpha}, {"beta", beta}});
}

// finite-temperature bath; coefficients chosen so that the reduced generator is the known closed-form 4x4 l
inline HeomModel bath(double gplus, double gminus, double omega, double xi) {
    using namespace detail;
    double gp = (gplus + gminus) / 2;
    Terms B = gplus * dissipator(sigma_plus()) + gminus * dissipator(sigma_minus());
    std::vector<BlockTerms> b;
    b.push_back({0, 0, B});
    b.push_back({0, 1, omega * identity_map()});
    b.push_back({1, 0, (xi / gp) * B});
    b.push_back({1, 1, (gp / 2) * (dissipator(sx()) + dissipator(sy()))});
    return model_from_blocks("bath", 2, b, {{"gamma_plus", gplus}, {"gamma_minus", gminus}, {"omega", omega}, {"xi", xi}});
}

inline HeomModel spin_boson(double omega, double gamma, double Delta, double beta) {
    using namespace detail;
    const cplx I(0, 1);
    std::vector<BlockTerms> b;
    b.push_back({0, 0, (-I * omega / 2.0) * commutator(sz())});
    b.push_back({0, 1, (-I * Delta) * commutator(sx())});
    b.push_back({1, 0, (-I * Delta) * commutator(sx()) + (-Delta * beta * gamma / 2) * anticommutator(sx())});
    b.push_back({1, 1, (-I * omega / 2.0) * commutator(sz()) + (-gamma) * identity_map()});
    return model_from_blocks("spin_boson", 2, b, {{"omega", omega}, {"gamma", gamma}, {"Delta", Delta}, {"beta", beta}});
}

// pure dephasing Lindblad model (one level), Markovian reference
inline HeomModel dephasing(double gamma) {
    return model_from_blocks("dephasing", 1, {{0, 0, (gamma / 2) * detail::Dz()}}, {{"gamma", gamma}});
}

inline std::vector<std::string> model_names() {
    return {"jaynes_cummings", "reviving_2level", "reviving_3level", "bath", "spin_boson", "dephasing"};
}

inline HeomModel build_model(const std::string& name, const Params& p) {
    if (name == "jaynes_cummings") return jaynes_cummings(param(p, "gamma"), param(p, "zeta"));
    if (name == "reviving_2level") {
        int variant = static_cast<int>(param_or(p, "stationary_init", 0.0));
        return reviving_2level(param(p, "gamma1"), param(p, "gamma2"), param(p, "omega"), param(p, "alpha"),
                               variant ? "stationary" : "zero");
    }
    if (name == "reviving_3level")
        return reviving_3level(param(p, "gamma"), param(p, "omega"), param(p, "alpha"), param(p, "beta"));
    if (name == "bath") return bath(param(p, "gamma_plus"), param(p, "gamma_minus"), param(p, "omega"), param(p, "xi"));
    if (name == "spin_boson")
        return spin_boson(param_or(p, "omega", 1.0), param(p, "gamma"), param(p, "Delta"), param(p, "beta"));
    if (name == "dephasing") return dephasing(param(p, "gamma"));
    throw std::invalid_argument("unknown model: " + name);
}

// ---------------------------------------------------------------- JSON models

namespace detail {
inline cplx cplx_of(const nlohmann::json& j) {
    if (j.is_number()) return cplx(j.get<double>(), 0.0);
    if (j.is_array() && j.size() == 2) return cplx(j[0].get<double>(), j[1].get<double>());
    throw std::invalid_argument("complex number must be [re, im]");
}
inline Mat2c op_of(const nlohmann::json& term, const std::string& key) {
    const auto& v = term.at(key);
    if (v.is_array()) {
        Mat2c m;
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) m(r, c) = cplx_of(v.at(r).at(c));
        return m;
    }
    std::string s = v.get<std::string>();
    if (s == "id") return Mat2c::Identity();
    if (s == "sx") return pauli()[1];
    if (s == "sy") return pauli()[2];
    if (s == "sz") return pauli()[3];
    if (s == "sp") return sigma_plus();
    if (s == "sm") return sigma_minus();
    if (s == "matrix") return op_of(term, key + "_matrix");
    throw std::invalid_argument("unknown operator name: " + s);
}
inline nlohmann::json json_of_op(const Mat2c& m) {
    nlohmann::json a = nlohmann::json::array();
    for (int r = 0; r < 2; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < 2; ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
        a.push_back(row);
    }
    return a;
}
}  // namespace detail

inline HeomModel model_from_json(const nlohmann::json& j) {
    int n = j.at("levels").get<int>();
    if (n < 1) throw std::invalid_argument("levels must be >= 1");
    std::vector<BlockTerms> blocks;
    for (const auto& b : j.at("blocks")) {
        BlockTerms bt;
        bt.i = b.at("i").get<int>() - 1;
        bt.j = b.at("j").get<int>() - 1;
        for (const auto& t : b.at("terms"))
            bt.terms.push_back(SandwichTerm{detail::cplx_of(t.at("coeff")), detail::op_of(t, "left"), detail::op_of(t, "right")});
        blocks.push_back(bt);
    }
    auto m = model_from_blocks(j.value("name", std::string("user")), n, blocks);
    if (j.contains("initial")) {
        for (const auto& ov : j.at("initial")) {
            int lv = ov.at("level").get<int>() - 1;
            if (lv < 0 || lv >= n) throw std::invalid_argument("initial override level out of range");
            Mat4 T;
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c) T(r, c) = ov.at("transfer").at(r).at(c).get<double>();
            m.initial.block<4, 4>(4 * lv, 0) = T;
        }
        m.init_variant = "custom";
    }
    // a saved builtin keeps its closed-form reduction, but only if the blocks still match it
    if (j.contains("params") && j.at("params").is_object()) {
        Params p = j.at("params").get<Params>();
        auto names = model_names();
        if (std::find(names.begin(), names.end(), m.name) != names.end()) {
            try {
                HeomModel b = build_model(m.name, p);
                double tol = 1e-12 * std::max(1.0, b.generator.cwiseAbs().maxCoeff());
                if (b.generator.rows() == m.generator.rows() && (b.generator - m.generator).cwiseAbs().maxCoeff() <= tol &&
                    (b.initial - m.initial).cwiseAbs().maxCoeff() <= tol)
                    return b;
            } catch (const std::invalid_argument&) {
            }
        }
    }
    return m;
}

inline nlohmann::json model_to_json(const HeomModel& m) {
    nlohmann::json j;
    j["name"] = m.name;
    j["levels"] = m.n_levels;
    if (!m.params.empty()) j["params"] = m.params;
    j["blocks"] = nlohmann::json::array();
    for (const auto& b : m.blocks) {
        nlohmann::json jb;
        jb["i"] = b.i + 1;
        jb["j"] = b.j + 1;
        jb["terms"] = nlohmann::json::array();
        for (const auto& t : b.terms)
            jb["terms"].push_back({{"coeff", {t.c.real(), t.c.imag()}},
                                   {"left", detail::json_of_op(t.A)},
                                   {"right", detail::json_of_op(t.B)}});
        j["blocks"].push_back(jb);
    }
    if (m.init_variant != "zero") {
        j["initial"] = nlohmann::json::array();
        for (int lv = 1; lv < m.n_levels; ++lv) {
            nlohmann::json T = nlohmann::json::array();
            for (int r = 0; r < 4; ++r) {
                nlohmann::json row = nlohmann::json::array();
                for (int c = 0; c < 4; ++c) row.push_back(m.initial(4 * lv + r, c));
                T.push_back(row);
            }
            j["initial"].push_back({{"level", lv + 1}, {"transfer", T}});
        }
    }
    return j;
}

// ---------------------------------------------------------------- reduced systems

struct Factor {
    Poly P;
    int multiplicity = 1;
    bool certify = true;  // false: strictly positive by construction, no certificate needed
    std::string label;
};

struct ReducedSystem {
    MatX l;
    VecX lambda0;
    PolyMat4 system_transfer;                       // Lambda_1 as a polynomial matrix in lambda
    std::function<VecX(const MatX&)> coords_of;     // stacked extended map -> lambda
    int h = 4;
    Poly eh;                                         // e_h(chi(lambda))
    double prefactor = 1.0;                          // e_h = prefactor * prod P_k^{m_k}
    std::vector<Factor> factors;
    std::vector<MatX> s_forms;                       // quadratic forms per factor, empty when a lift is needed
    bool builtin = false;
};

inline PolyMat4 zero_polymat(int nv) {
    PolyMat4 P;
    for (auto& r : P)
        for (auto& p : r) p = Poly(nv);
    return P;
}

inline int krylov_cap_default() { return 64; }

// orthonormal basis of span{L^k Lambda(0)} in vec coordinates (column-major stacking of 4n x 4)
inline ReducedSystem krylov_reduce(const HeomModel& m, double rank_tol = 1e-10, int cap = krylov_cap_default()) {
    const int N = 4 * m.n_levels;
    const int D = 4 * N;
    auto apply = [&](const VecX& x) {
        VecX y(D);
        for (int c = 0; c < 4; ++c) y.segment(c * N, N) = m.generator * x.segment(c * N, N);
        return y;
    };
    VecX x0(D);
    for (int c = 0; c < 4; ++c) x0.segment(c * N, N) = m.initial.col(c);
    double scale = std::max(1.0, m.generator.cwiseAbs().maxCoeff());
    std::vector<VecX> basis;
    VecX v = x0;
    for (int it = 0; it <= D; ++it) {
        double nv0 = v.norm();
        for (int pass = 0; pass < 2; ++pass)
            for (auto& q : basis) v -= q.dot(v) * q;
        double nv = v.norm();
        if (nv <= rank_tol * std::max(nv0, 1e-300) || nv <= rank_tol) break;
        basis.push_back(v / nv);
        v = apply(basis.back()) / scale;
    }
    const int d = static_cast<int>(basis.size());
    if (d > cap) throw std::runtime_error("reduction dimension exceeds cap; use the full generator");
    MatX V(D, d);
    for (int i = 0; i < d; ++i) V.col(i) = basis[i];
    ReducedSystem r;
    MatX AV(D, d);
    for (int i = 0; i < d; ++i) AV.col(i) = apply(V.col(i));
    r.l = V.transpose() * AV;
    r.lambda0 = V.transpose() * x0;
    r.system_transfer = zero_polymat(d);
    for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k) {
            Poly p(d);
            for (int i = 0; i < d; ++i) {
                double w = V(k * N + j, i);
                if (std::abs(w) > 1e-14) p += Poly::var(d, i, w);
            }
            r.system_transfer[j][k] = p;
        }
    r.coords_of = [V, N](const MatX& Lam) {
        VecX x(4 * N);
        for (int c = 0; c < 4; ++c) x.segment(c * N, N) = Lam.col(c);
        return VecX(V.transpose() * x);
    };
    return r;
}

namespace detail {
inline Poly v(int n, int i, double c = 1.0) { return Poly::var(n, i, c); }
inline Poly k(int n, double c) { return Poly::constant(n, c); }
inline MatX mat(std::initializer_list<std::initializer_list<double>> rows) {
    MatX M(rows.size(), rows.begin()->size());
    int i = 0;
    for (auto& r : rows) {
        int j = 0;
        for (double x : r) M(i, j++) = x;
        ++i;
    }
    return M;
}
}  // namespace detail

// e_h polynomial of the reduced system after the factors are set
inline void finish_reduced(ReducedSystem& r) {
    auto e = elementary_symmetric_polys(r.system_transfer);
    r.eh = e[r.h];
}

inline ReducedSystem reduced_system(const HeomModel& m) {
    using namespace detail;
    ReducedSystem r;
    r.builtin = true;
    const auto& p = m.params;
    const std::string kind = p.empty() ? std::string("user") : m.name;
    if (kind == "jaynes_cummings") {
        double g = param(p, "gamma"), z = param(p, "zeta");
        r.l = mat({{0, z}, {-g / 2, -z}});
        r.lambda0 = VecX::Zero(2);
        r.lambda0(0) = 1;
        auto T = zero_polymat(2);
        T[0][0] = k(2, 1);
        T[1][1] = v(2, 0);
        T[2][2] = v(2, 0);
        Poly l1sq = v(2, 0) * v(2, 0);
        T[3][3] = l1sq;
        T[3][0] = l1sq - 1.0;
        r.system_transfer = T;
        r.coords_of = [](const MatX& L) {
            VecX x(2);
            x << L(1, 1), L(5, 1);
            return x;
        };
        r.h = 2;
        // e_2 = (1 - l1^2)/4 * (1 + l1^2)
        r.prefactor = 1.0;
        r.factors.push_back({(k(2, 1) - l1sq) * 0.25, 1, true, "(1-l1^2)/4"});
        r.factors.push_back({k(2, 1) + l1sq, 1, false, "1+l1^2"});
        MatX s = MatX::Zero(2, 2);
        s(0, 0) = 0.25;
        r.s_forms = {s, MatX()};
    } else if (kind == "reviving_2level" || kind == "reviving_3level") {
        bool three = m.name == "reviving_3level";
        int d = three ? 3 : 2;
        double w = param(p, "omega"), al = param(p, "alpha");
        if (three) {
            double g = param(p, "gamma"), be = param(p, "beta");
            r.l = mat({{-g, w, 0}, {-2 * al * w, -g, w}, {0, -be * w, -g}});
        } else {
            r.l = mat({{-param(p, "gamma1"), w}, {-2 * al * w, -param(p, "gamma2")}});
        }
        r.lambda0 = VecX::Zero(d);
        r.lambda0(0) = 1;
        if (!three && m.init_variant == "stationary") r.lambda0(1) = param(p, "gamma1") / w;
        auto T = zero_polymat(d);
        T[0][0] = k(d, 1);
        T[3][3] = k(d, 1);
        T[1][1] = v(d, 0);
        T[2][2] = v(d, 0);
        r.system_transfer = T;
        r.coords_of = [d](const MatX& L) {
            VecX x(d);
            for (int i = 0; i < d; ++i) x(i) = L(4 * i + 1, 1);
            return x;
        };
        r.h = 2;
        r.factors.push_back({(k(d, 1) - v(d, 0) * v(d, 0)) * 0.25, 1, true, "(1-l1^2)/4"});
        MatX s = MatX::Zero(d, d);
        s(0, 0) = 0.25;
        r.s_forms = {s};
    } else if (kind == "bath") {
        double gpl = param(p, "gamma_plus"), gmi = param(p, "gamma_minus"), w = param(p, "omega"), xi = param(p, "xi");
        double gp = (gpl + gmi) / 2, gm = (gpl - gmi) / 2;
        if (gm == 0.0) throw std::invalid_argument("bath reduction needs gamma_plus != gamma_minus");
        r.l = -mat({{2 * gp, -w, 0, 0}, {2 * xi, 2 * gp, 0, 0}, {0, 0, gp, -w}, {0, 0, xi, gp}});
        r.lambda0 = VecX::Zero(4);
        r.lambda0 << -gm / gp, 0, 1, 0;
        auto T = zero_polymat(4);
        T[0][0] = k(4, 1);
        T[1][1] = v(4, 2);
        T[2][2] = v(4, 2);
        T[3][3] = v(4, 0, -gp / gm);
        T[3][0] = v(4, 0) + gm / gp;
        r.system_transfer = T;
        r.coords_of = [gm, gp](const MatX& L) {
            VecX x(4);
            x << -gm / gp * L(3, 3), -gm / gp * L(7, 3), L(1, 1), L(5, 1);
            return x;
        };
        r.h = 4;
        double c1 = gmi * gpl * gm * gm, c2 = gmi * gmi - gpl * gpl, c3 = std::pow(gmi, 4) - std::pow(gpl, 4),
               c4 = gmi * gpl * gp * gp;
        r.prefactor = gpl * gmi / std::pow(c2, 4);
        Poly P1 = v(4, 0, gp) + gm;
        Poly P2 = k(4, c1) - (c2 * c2 / 4) * (v(4, 2) * v(4, 2)) + v(4, 0, c3 / 4) + c4 * (v(4, 0) * v(4, 0));
        r.factors.push_back({P1, 2, true, "P1"});
        r.factors.push_back({P2, 1, true, "P2"});
        MatX s1 = MatX::Zero(4, 4);
        s1(0, 0) = 1;
        r.s_forms = {s1, MatX()};
    } else if (kind == "spin_boson") {
        double w = param_or(p, "omega", 1.0), g = param(p, "gamma"), D = param(p, "Delta"), b = param(p, "beta");
        r.l = mat({{0, w, 0, 0, 0, 0},
                   {0, 0, -w, 0, 0, 0},
                   {g, 4 * D * D / w + w, -g, 0, 0, 0},
                   {0, 0, 0, -g, -w, 0},
                   {0, 0, 0, w, -g, -2 * D},
                   {0, 0, 0, 0, 2 * D, 0}});
        r.lambda0 = VecX::Zero(6);
        r.lambda0 << 1, 0, 1, 0, 0, 1;
        auto T = zero_polymat(6);
        T[0][0] = k(6, 1);
        T[1][1] = v(6, 0);
        T[1][2] = v(6, 1);
        T[2][1] = v(6, 1, -1);
        T[2][2] = v(6, 2);
        T[3][3] = v(6, 5);
        T[3][0] = (v(6, 5, b * w) + v(6, 3, 2 * b * D) - b * w) * 0.5;
        r.system_transfer = T;
        r.coords_of = [](const MatX& L) {
            VecX x(6);
            x << L(1, 1), L(1, 2), L(2, 2), L(5, 3), L(6, 3), L(3, 3);
            return x;
        };
        r.h = 4;
        r.prefactor = 1.0 / 4096.0;
        Poly q = v(6, 5, b * w) + v(6, 3, 2 * b * D) - b * w;
        Poly d13 = v(6, 0) - v(6, 2), s13 = v(6, 0) + v(6, 2);
        Poly l6m = v(6, 5) - 1.0, l6p = v(6, 5) + 1.0;
        Poly P1 = -1.0 * (q * q) - 4.0 * (d13 * d13) + 4.0 * (l6m * l6m);
        Poly P2 = -1.0 * (q * q) - 4.0 * (4.0 * (v(6, 1) * v(6, 1)) + s13 * s13 - l6p * l6p);
        r.factors.push_back({P1, 1, true, "P1"});
        r.factors.push_back({P2, 1, true, "P2"});
        r.s_forms = {MatX(), MatX()};
    } else {
        r = krylov_reduce(m);
        r.builtin = false;
        // h: maximal numerical rank of chi along a scan, filled by the propagator
        r.h = 4;
        finish_reduced(r);
        r.factors.push_back({r.eh, 1, true, "e_h"});
        r.s_forms = {MatX()};
        return r;
    }
    finish_reduced(r);
    return r;
}

// factors of e_h(chi + delta I); spin-Boson gets the shifted pair, others a single polynomial when delta > 0
inline std::vector<Poly> eh_factorization(const HeomModel& m, double delta_min = 0.0) {
    if (delta_min < 0) throw std::invalid_argument("delta_min must be non-negative");
    ReducedSystem r = reduced_system(m);
    if (delta_min == 0.0) {
        std::vector<Poly> out;
        for (auto& f : r.factors) out.push_back(f.P);
        return out;
    }
    if (m.name == "spin_boson" && !m.params.empty()) {
        int n = 6;
        Poly P1 = r.factors[0].P + Poly::var(n, 5, -32 * delta_min) + 32 * delta_min * (1 + 2 * delta_min);
        Poly P2 = r.factors[1].P + Poly::var(n, 5, 32 * delta_min) + 32 * delta_min * (1 + 2 * delta_min);
        return {P1, P2};
    }
    auto e = elementary_symmetric_polys(r.system_transfer, delta_min);
    return {e[r.h]};
}

}  // namespace heomcp
