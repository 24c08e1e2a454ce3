#pragma once
// Pauli-basis representations of qubit superoperators.
#include <Eigen/Dense>
#include <array>
#include <complex>
#include <stdexcept>
#include <vector>

namespace heomcp {

using cplx = std::complex<double>;
using Mat2c = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4d;
using Mat4c = Eigen::Matrix4cd;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;
using MatXc = Eigen::MatrixXcd;

inline const std::array<Mat2c, 4>& pauli() {
    static const std::array<Mat2c, 4> s = [] {
        std::array<Mat2c, 4> p;
        const cplx I(0, 1);
        p[0] << 1, 0, 0, 1;
        p[1] << 0, 1, 1, 0;
        p[2] << 0, -I, I, 0;
        p[3] << 1, 0, 0, -1;
        return p;
    }();
    return s;
}
inline Mat2c sigma_plus() { return (pauli()[1] + cplx(0, 1) * pauli()[2]) / 2.0; }
inline Mat2c sigma_minus() { return (pauli()[1] - cplx(0, 1) * pauli()[2]) / 2.0; }

// c * A rho B^dagger
struct SandwichTerm {
    cplx c{1.0};
    Mat2c A = Mat2c::Identity();
    Mat2c B = Mat2c::Identity();
};

using Terms = std::vector<SandwichTerm>;

inline Mat2c apply_terms(const Terms& ts, const Mat2c& rho) {
    Mat2c out = Mat2c::Zero();
    for (const auto& t : ts) out += t.c * t.A * rho * t.B.adjoint();
    return out;
}

inline Mat4 transfer_of_sandwich_sum(const Terms& ts, double tol = 1e-12) {
    const auto& s = pauli();
    Mat4 T;
    for (int k = 0; k < 4; ++k) {
        Mat2c img = apply_terms(ts, s[k]);
        for (int j = 0; j < 4; ++j) {
            cplx v = 0.5 * (s[j] * img).trace();
            if (std::abs(v.imag()) > tol * std::max(1.0, std::abs(v.real())))
                throw std::invalid_argument("superoperator is not Hermiticity-preserving");
            T(j, k) = v.real();
        }
    }
    return T;
}

// building blocks used by the model constructors
inline Terms operator+(Terms a, const Terms& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}
inline Terms operator*(cplx c, Terms a) {
    for (auto& t : a) t.c *= c;
    return a;
}
inline Terms operator*(double c, Terms a) { return cplx(c) * std::move(a); }
inline Terms sandwich(const Mat2c& A, const Mat2c& B, cplx c = 1.0) { return {SandwichTerm{c, A, B}}; }
inline Terms identity_map() { return sandwich(Mat2c::Identity(), Mat2c::Identity()); }
inline Terms commutator(const Mat2c& H) {  // rho -> H rho - rho H
    return sandwich(H, Mat2c::Identity()) + sandwich(Mat2c::Identity(), H.adjoint(), -1.0);
}
inline Terms anticommutator(const Mat2c& H) {
    return sandwich(H, Mat2c::Identity()) + sandwich(Mat2c::Identity(), H.adjoint());
}
// L rho L^dag - {L^dag L, rho}/2
inline Terms dissipator(const Mat2c& L) {
    Mat2c LL = L.adjoint() * L;
    return sandwich(L, L) + sandwich(LL, Mat2c::Identity(), -0.5) + sandwich(Mat2c::Identity(), LL, -0.5);
}

// M column (a,b) holds T_jk of rho -> sigma_a rho sigma_b^dag
inline const Eigen::Matrix<cplx, 16, 16>& chi_basis_matrix() {
    static const Eigen::Matrix<cplx, 16, 16> M = [] {
        const auto& s = pauli();
        Eigen::Matrix<cplx, 16, 16> m;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int j = 0; j < 4; ++j)
                    for (int k = 0; k < 4; ++k)
                        m(4 * j + k, 4 * a + b) = 0.5 * (s[j] * s[a] * s[k] * s[b].adjoint()).trace();
        return m;
    }();
    return M;
}

inline Mat4c chi_of_transfer(const Mat4& T) {
    static const Eigen::Matrix<cplx, 16, 16> Minv = chi_basis_matrix().inverse();
    Eigen::Matrix<cplx, 16, 1> t;
    for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k) t(4 * j + k) = T(j, k);
    Eigen::Matrix<cplx, 16, 1> x = Minv * t;
    Mat4c chi;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) chi(a, b) = x(4 * a + b);
    return (chi + chi.adjoint()) / 2.0;
}

inline Mat4 transfer_of_chi(const Mat4c& chi) {
    Eigen::Matrix<cplx, 16, 1> x;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) x(4 * a + b) = chi(a, b);
    Eigen::Matrix<cplx, 16, 1> t = chi_basis_matrix() * x;
    Mat4 T;
    for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k) T(j, k) = t(4 * j + k).real();
    return T;
}

// all e_1..e_n of a Hermitian matrix from power sums (Newton's identities)
inline std::vector<double> elementary_symmetric_all(const MatXc& M) {
    const int n = static_cast<int>(M.rows());
    std::vector<double> p(n + 1, 0.0), e(n + 1, 0.0);
    MatXc P = MatXc::Identity(n, n);
    for (int k = 1; k <= n; ++k) {
        P = P * M;
        p[k] = P.trace().real();
    }
    e[0] = 1.0;
    for (int k = 1; k <= n; ++k) {
        double acc = 0.0;
        for (int i = 1; i <= k; ++i) acc += ((i % 2) ? 1.0 : -1.0) * e[k - i] * p[i];
        e[k] = acc / k;
    }
    return e;
}

inline double elementary_symmetric(const MatXc& M, int k) {
    if (k < 1 || k > M.rows()) throw std::invalid_argument("elementary_symmetric: k out of range");
    return elementary_symmetric_all(M)[k];
}

// blocks[i][j] is the 4x4 transfer matrix of L_ij
inline MatX assemble_extended_generator(const std::vector<std::vector<Mat4>>& blocks) {
    const int n = static_cast<int>(blocks.size());
    if (n < 1) throw std::invalid_argument("assemble_extended_generator: empty block grid");
    MatX L = MatX::Zero(4 * n, 4 * n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(blocks[i].size()) != n)
            throw std::invalid_argument("assemble_extended_generator: ragged block grid");
        for (int j = 0; j < n; ++j) L.block<4, 4>(4 * i, 4 * j) = blocks[i][j];
    }
    return L;
}

inline Mat2c density_of_bloch(const Eigen::Vector4d& b) {
    const auto& s = pauli();
    Mat2c r = Mat2c::Zero();
    for (int j = 0; j < 4; ++j) r += 0.5 * b(j) * s[j];
    return r;
}

}  // namespace heomcp
