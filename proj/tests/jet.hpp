#pragma once

// Second-order jets in the real coordinates (x, y): exact first and second
// partial derivatives of closed-form expressions, used as test oracles.

#include <complex>

namespace jet {

using cplx = std::complex<double>;

struct Jet {
    cplx v{}, dx{}, dy{}, dxx{}, dxy{}, dyy{};

    Jet() = default;
    Jet(cplx c) : v(c) {}
    Jet(double c) : v(c) {}
    Jet(cplx v, cplx dx, cplx dy, cplx dxx, cplx dxy, cplx dyy) : v(v), dx(dx), dy(dy), dxx(dxx), dxy(dxy), dyy(dyy) {}

    cplx dz() const { return 0.5 * (dx - cplx(0, 1) * dy); }
    cplx dzbar() const { return 0.5 * (dx + cplx(0, 1) * dy); }
    cplx dz_dzbar() const { return 0.25 * (dxx + dyy); }
    cplx dzbar_dzbar() const { return 0.25 * (dxx + cplx(0, 2) * dxy - dyy); }
    cplx dz_dz() const { return 0.25 * (dxx - cplx(0, 2) * dxy - dyy); }
};

inline Jet var_x(double x) { return {x, 1, 0, 0, 0, 0}; }
inline Jet var_y(double y) { return {y, 0, 1, 0, 0, 0}; }
inline Jet var_z(cplx z) { return {z, 1, cplx(0, 1), 0, 0, 0}; }
inline Jet var_zbar(cplx z) { return {std::conj(z), 1, cplx(0, -1), 0, 0, 0}; }

inline Jet operator+(const Jet& a, const Jet& b) {
    return {a.v + b.v, a.dx + b.dx, a.dy + b.dy, a.dxx + b.dxx, a.dxy + b.dxy, a.dyy + b.dyy};
}
inline Jet operator-(const Jet& a) { return {-a.v, -a.dx, -a.dy, -a.dxx, -a.dxy, -a.dyy}; }
inline Jet operator-(const Jet& a, const Jet& b) { return a + (-b); }
inline Jet operator*(const Jet& a, const Jet& b) {
    return {a.v * b.v,
            a.dx * b.v + a.v * b.dx,
            a.dy * b.v + a.v * b.dy,
            a.dxx * b.v + 2.0 * a.dx * b.dx + a.v * b.dxx,
            a.dxy * b.v + a.dx * b.dy + a.dy * b.dx + a.v * b.dxy,
            a.dyy * b.v + 2.0 * a.dy * b.dy + a.v * b.dyy};
}

// phi(a) given phi, phi', phi'' at a.v
inline Jet chain(const Jet& a, cplx f, cplx f1, cplx f2) {
    return {f,
            f1 * a.dx,
            f1 * a.dy,
            f2 * a.dx * a.dx + f1 * a.dxx,
            f2 * a.dx * a.dy + f1 * a.dxy,
            f2 * a.dy * a.dy + f1 * a.dyy};
}

inline Jet inv(const Jet& a) { return chain(a, 1.0 / a.v, -1.0 / (a.v * a.v), 2.0 / (a.v * a.v * a.v)); }
inline Jet operator/(const Jet& a, const Jet& b) { return a * inv(b); }
inline Jet exp(const Jet& a) {
    cplx e = std::exp(a.v);
    return chain(a, e, e, e);
}
inline Jet log(const Jet& a) { return chain(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v)); }
inline Jet sqrt(const Jet& a) {
    cplx s = std::sqrt(a.v);
    return chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}
inline Jet sin(const Jet& a) { return chain(a, std::sin(a.v), std::cos(a.v), -std::sin(a.v)); }
inline Jet cos(const Jet& a) { return chain(a, std::cos(a.v), -std::sin(a.v), -std::cos(a.v)); }
inline Jet conj(const Jet& a) {
    return {std::conj(a.v), std::conj(a.dx), std::conj(a.dy), std::conj(a.dxx), std::conj(a.dxy), std::conj(a.dyy)};
}
inline Jet pow(const Jet& a, int n) {
    Jet r(1.0);
    for (int i = 0; i < n; ++i) r = r * a;
    return r;
}

// Symmetric metric E dx^2 + 2F dx dy + G dy^2 from (z, z̄) components with g_z̄z̄ = 0.
struct XYMetric {
    Jet E, F, G;
};

inline XYMetric xy_metric(const Jet& gzz, const Jet& gzzbar) {
    return {gzz + 2.0 * gzzbar, cplx(0, 1) * gzz, 2.0 * gzzbar - gzz};
}

// Laplace-Beltrami in divergence form, independent of any complex-frame formula.
inline cplx laplacian(const XYMetric& m, const Jet& f) {
    Jet det = m.E * m.G - m.F * m.F;
    Jet W = sqrt(det);
    Jet gxx = m.G / det, gxy = -m.F / det, gyy = m.E / det;
    Jet px = W * gxx, qx = W * gxy, qy = W * gyy;
    cplx second = gxx.v * f.dxx + 2.0 * gxy.v * f.dxy + gyy.v * f.dyy;
    cplx first = (px.dx + qx.dy) * f.dx + (qx.dx + qy.dy) * f.dy;
    return second + first / W.v;
}

// Brioschi formula for the Gaussian curvature, valid for complex E, F, G.
inline cplx brioschi(const XYMetric& m) {
    const Jet &E = m.E, &F = m.F, &G = m.G;
    cplx Ex = E.dx, Ey = E.dy, Fx = F.dx, Fy = F.dy, Gx = G.dx, Gy = G.dy;
    cplx a11 = -0.5 * E.dyy + F.dxy - 0.5 * G.dxx;
    auto det3 = [](cplx a, cplx b, cplx c, cplx d, cplx e, cplx f, cplx g, cplx h, cplx i) {
        return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
    };
    cplx M1 = det3(a11, 0.5 * Ex, Fx - 0.5 * Ey, Fy - 0.5 * Gx, E.v, F.v, 0.5 * Gy, F.v, G.v);
    cplx M2 = det3(0.0, 0.5 * Ey, 0.5 * Gx, 0.5 * Ey, E.v, F.v, 0.5 * Gx, F.v, G.v);
    cplx D = E.v * G.v - F.v * F.v;
    return (M1 - M2) / (D * D);
}

} // namespace jet
