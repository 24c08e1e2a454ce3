#pragma once
// Sparse multivariate polynomials with real coefficients.
#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace heomcp {

using Monomial = std::vector<int>;

class Poly {
public:
    Poly() = default;
    explicit Poly(int nvars) : n_(nvars) {}
    static Poly constant(int nvars, double c) {
        Poly p(nvars);
        if (c != 0.0) p.terms_[Monomial(nvars, 0)] = c;
        return p;
    }
    static Poly var(int nvars, int i, double c = 1.0) {
        Poly p(nvars);
        Monomial m(nvars, 0);
        m[i] = 1;
        p.terms_[m] = c;
        return p;
    }

    int nvars() const { return n_; }
    const std::map<Monomial, double>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    double coeff(const Monomial& m) const {
        auto it = terms_.find(m);
        return it == terms_.end() ? 0.0 : it->second;
    }
    double constant_term() const { return coeff(Monomial(n_, 0)); }
    void add_term(const Monomial& m, double c) {
        if (c == 0.0) return;
        double& v = terms_[m];
        v += c;
        if (v == 0.0) terms_.erase(m);
    }

    int degree() const {
        int d = 0;
        for (auto& [m, c] : terms_) {
            int s = 0;
            for (int e : m) s += e;
            d = std::max(d, s);
        }
        return d;
    }

    template <class V>
    double operator()(const V& x) const {
        double acc = 0.0;
        for (auto& [m, c] : terms_) {
            double t = c;
            for (int i = 0; i < n_; ++i)
                for (int k = 0; k < m[i]; ++k) t *= x[i];
            acc += t;
        }
        return acc;
    }

    Poly diff(int i) const {
        Poly r(n_);
        for (auto& [m, c] : terms_) {
            if (m[i] == 0) continue;
            Monomial mm = m;
            mm[i] -= 1;
            r.add_term(mm, c * m[i]);
        }
        return r;
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
        Eigen::VectorXd g(n_);
        for (int i = 0; i < n_; ++i) g(i) = diff(i)(x);
        return g;
    }

    // d/dt along x' = l x
    Poly flow_derivative(const Eigen::MatrixXd& l) const {
        Poly r(n_);
        for (auto& [m, c] : terms_)
            for (int i = 0; i < n_; ++i) {
                if (m[i] == 0) continue;
                for (int j = 0; j < n_; ++j) {
                    if (l(i, j) == 0.0) continue;
                    Monomial mm = m;
                    mm[i] -= 1;
                    mm[j] += 1;
                    r.add_term(mm, c * m[i] * l(i, j));
                }
            }
        return r;
    }

    Poly& operator+=(const Poly& o) {
        if (n_ == 0) n_ = o.n_;
        for (auto& [m, c] : o.terms_) add_term(m, c);
        return *this;
    }
    Poly& operator-=(const Poly& o) {
        if (n_ == 0) n_ = o.n_;
        for (auto& [m, c] : o.terms_) add_term(m, -c);
        return *this;
    }
    Poly& operator*=(double s) {
        if (s == 0.0) {
            terms_.clear();
            return *this;
        }
        for (auto& [m, c] : terms_) c *= s;
        return *this;
    }
    friend Poly operator+(Poly a, const Poly& b) { return a += b; }
    friend Poly operator-(Poly a, const Poly& b) { return a -= b; }
    friend Poly operator*(Poly a, double s) { return a *= s; }
    friend Poly operator*(double s, Poly a) { return a *= s; }
    friend Poly operator+(Poly a, double s) {
        a.add_term(Monomial(a.n_, 0), s);
        return a;
    }
    friend Poly operator-(Poly a, double s) { return a + (-s); }
    friend Poly operator*(const Poly& a, const Poly& b) {
        Poly r(std::max(a.n_, b.n_));
        for (auto& [ma, ca] : a.terms_)
            for (auto& [mb, cb] : b.terms_) {
                Monomial m(r.n_, 0);
                for (int i = 0; i < r.n_; ++i) m[i] = ma[i] + mb[i];
                r.add_term(m, ca * cb);
            }
        return r;
    }

    // drop coefficients below tol * max|coeff|
    Poly pruned(double rel_tol = 1e-13) const {
        double mx = 0.0;
        for (auto& [m, c] : terms_) mx = std::max(mx, std::abs(c));
        Poly r(n_);
        for (auto& [m, c] : terms_)
            if (std::abs(c) > rel_tol * mx) r.terms_[m] = c;
        return r;
    }

    double max_abs_coeff() const {
        double mx = 0.0;
        for (auto& [m, c] : terms_) mx = std::max(mx, std::abs(c));
        return mx;
    }

    std::string str(const std::string& var = "l") const {
        std::ostringstream os;
        bool first = true;
        for (auto& [m, c] : terms_) {
            if (!first) os << (c < 0 ? " - " : " + ");
            else if (c < 0) os << "-";
            first = false;
            os << std::abs(c);
            for (int i = 0; i < n_; ++i)
                if (m[i] > 0) os << "*" << var << (i + 1) << (m[i] > 1 ? "^" + std::to_string(m[i]) : "");
        }
        if (first) os << "0";
        return os.str();
    }

private:
    int n_ = 0;
    std::map<Monomial, double> terms_;
};

using PolyMat4 = std::array<std::array<Poly, 4>, 4>;

inline Eigen::Matrix4d eval(const PolyMat4& P, const Eigen::VectorXd& x) {
    Eigen::Matrix4d T;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) T(i, j) = P[i][j](x);
    return T;
}

}  // namespace heomcp
