#pragma once
// Process matrix and elementary symmetric polynomials as polynomials in reduced coordinates.
#include "bloch.hpp"
#include "poly.hpp"

namespace heomcp {

struct ChiPoly {
    std::array<std::array<Poly, 4>, 4> re, im;
};

inline ChiPoly chi_poly_of_transfer(const PolyMat4& T) {
    static const Eigen::Matrix<cplx, 16, 16> Minv = chi_basis_matrix().inverse();
    int nv = T[0][0].nvars();
    ChiPoly c;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            Poly re(nv), im(nv);
            for (int j = 0; j < 4; ++j)
                for (int k = 0; k < 4; ++k) {
                    cplx w = Minv(4 * a + b, 4 * j + k);
                    if (std::abs(w.real()) > 1e-15) re += w.real() * T[j][k];
                    if (std::abs(w.imag()) > 1e-15) im += w.imag() * T[j][k];
                }
            c.re[a][b] = re.pruned(1e-14);
            c.im[a][b] = im.pruned(1e-14);
        }
    return c;
}

// e_0..e_4 of chi(lambda) + delta*I as polynomials
inline std::vector<Poly> elementary_symmetric_polys(const PolyMat4& T, double delta = 0.0) {
    ChiPoly c = chi_poly_of_transfer(T);
    int nv = T[0][0].nvars();
    using PM = std::vector<std::vector<Poly>>;
    // real 8x8 embedding [[Re,-Im],[Im,Re]]; its power traces are twice those of chi
    PM E(8, std::vector<Poly>(8, Poly(nv)));
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            Poly re = c.re[a][b];
            if (a == b && delta != 0.0) re = re + delta;
            E[a][b] = re;
            E[a + 4][b + 4] = re;
            E[a][b + 4] = -1.0 * c.im[a][b];
            E[a + 4][b] = c.im[a][b];
        }
    auto mul = [&](const PM& A, const PM& B) {
        PM C(8, std::vector<Poly>(8, Poly(nv)));
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j) {
                Poly acc(nv);
                for (int k = 0; k < 8; ++k)
                    if (!A[i][k].is_zero() && !B[k][j].is_zero()) acc += A[i][k] * B[k][j];
                C[i][j] = acc;
            }
        return C;
    };
    std::vector<Poly> p(5, Poly(nv)), e(5, Poly(nv));
    PM P = E;
    for (int k = 1; k <= 4; ++k) {
        if (k > 1) P = mul(P, E);
        Poly tr(nv);
        for (int i = 0; i < 8; ++i) tr += P[i][i];
        p[k] = 0.5 * tr;
    }
    e[0] = Poly::constant(nv, 1.0);
    for (int k = 1; k <= 4; ++k) {
        Poly acc(nv);
        for (int i = 1; i <= k; ++i) acc += ((i % 2) ? 1.0 : -1.0) * (e[k - i] * p[i]);
        e[k] = (acc * (1.0 / k)).pruned(1e-13);
    }
    return e;
}

}  // namespace heomcp
