#pragma once

// Manufactured metrics with closed-form jets, shared by unit and acceptance tests.

#include "caslab/cmetric.hpp"
#include "jet.hpp"

#include <functional>
#include <numbers>
#include <string>
#include <vector>

namespace cases {

using caslab::cplx;
using jet::Jet;
constexpr double pi = std::numbers::pi;

struct Manufactured {
    std::string name;
    caslab::GridDomain domain;
    std::function<Jet(cplx)> lambda_b; // lambda * d_zbar w̄
    std::function<Jet(cplx)> mubar;
    std::function<Jet(cplx)> f;        // test function
};

inline jet::XYMetric xy_of(const Manufactured& c, cplx z) {
    Jet lb = c.lambda_b(z), mb = c.mubar(z);
    return jet::xy_metric(lb * mb, 0.5 * lb);
}

inline caslab::ComplexMetric metric_of(const Manufactured& c, caslab::DiffOptions o = {}) {
    using caslab::make_field;
    auto lam = make_field(c.domain, [&](cplx z) { return c.lambda_b(z).v; });
    auto mu = make_field(c.domain, [&](cplx z) { return std::conj(c.mubar(z).v); });
    auto b = caslab::ComplexField::constant(c.domain, 1.0);
    return caslab::make_metric(lam, mu, b, o);
}

inline caslab::ComplexField exact_laplacian(const Manufactured& c) {
    return caslab::make_field(c.domain, [&](cplx z) { return jet::laplacian(xy_of(c, z), c.f(z)); });
}

inline caslab::ComplexField exact_curvature(const Manufactured& c) {
    return caslab::make_field(c.domain, [&](cplx z) { return jet::brioschi(xy_of(c, z)); });
}

inline Jet X(cplx z) { return jet::var_x(z.real()); }
inline Jet Y(cplx z) { return jet::var_y(z.imag()); }
inline Jet Z(cplx z) { return jet::var_z(z); }
inline Jet Zb(cplx z) { return jet::var_zbar(z); }

inline Jet periodic_f(cplx z) {
    return jet::exp(0.5 * jet::sin(2 * pi * X(z)) + cplx(0, 0.3) * jet::cos(2 * pi * Y(z))) +
           jet::sin(2 * pi * (X(z) + 2.0 * Y(z)));
}

inline Jet window_f(cplx z) { return jet::exp(0.4 * X(z) - 0.3 * Y(z)) * jet::sin(X(z) + 2.0 * Y(z)) + Zb(z) * Z(z); }

inline std::vector<Manufactured> laplacian_cases(int n) {
    using caslab::GridDomain;
    auto torus = GridDomain::torus(n, n, 1.0, 1.0);
    auto win = GridDomain::window(n, n, 1.0, 1.0, cplx(0.0, 1.0));
    return {
        {"flat", torus, [](cplx) { return Jet(2.0); }, [](cplx) { return Jet(0.0); }, periodic_f},
        {"constant-mu", torus, [](cplx) { return Jet(1.0); }, [](cplx) { return Jet(cplx(0.3, -0.2)); }, periodic_f},
        {"riemannian-conformal", torus,
         [](cplx z) { return jet::exp(0.3 * jet::sin(2 * pi * X(z)) * jet::cos(2 * pi * Y(z))); },
         [](cplx) { return Jet(0.0); }, periodic_f},
        {"hyperbolic-window", win, [](cplx z) { return 1.0 / (Y(z) * Y(z)); }, [](cplx) { return Jet(0.0); },
         window_f},
        {"bers-window", win,
         [](cplx z) {
             Jet d = Z(z) - Zb(z) - 0.1 * Z(z) * Z(z);
             return -4.0 / (d * d);
         },
         [](cplx z) { return 0.2 * Z(z); }, window_f},
    };
}

// Bers pair f1 = z, f̄2 = z̄ + eps q(z) on the window [0,1] x [1,2].
inline caslab::ComplexMetric bers_window(int n, cplx eps, std::function<cplx(cplx)> q,
                                         std::function<cplx(cplx)> dq, caslab::DiffOptions o = {}) {
    using caslab::make_field;
    auto d = caslab::GridDomain::window(n, n, 1.0, 1.0, cplx(0.0, 1.0));
    caslab::BersMaps m{make_field(d, [](cplx z) { return z; }), caslab::ComplexField::constant(d, 1.0),
                       make_field(d, [&](cplx z) { return std::conj(z) + eps * q(z); }),
                       make_field(d, [&](cplx z) { return eps * dq(z); }), caslab::ComplexField::constant(d, 1.0)};
    auto g = caslab::bers_metric(m);
    g.diff = o;
    return g;
}

inline double rel_err(const caslab::ComplexField& a, const caslab::ComplexField& b) {
    return (a - b).max_abs() / b.max_abs();
}

} // namespace cases
