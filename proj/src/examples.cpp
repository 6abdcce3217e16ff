#include "caslab/examples.hpp"

#include "caslab/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <exception>
#include <numbers>
#include <sstream>
#include <thread>

namespace caslab {

namespace {

using Vec3 = std::array<ComplexField, 3>;
using M3 = Eigen::Matrix3cd;

const cplx I{0.0, 1.0};
const cplx zeta = std::polar(1.0, 2 * std::numbers::pi / 3);

Vec3 map3(const Vec3& v, const std::function<ComplexField(const ComplexField&)>& f) { return {f(v[0]), f(v[1]), f(v[2])}; }

Vec3 sample3(const GridDomain& d, const std::function<std::array<cplx, 3>(double, double)>& gen) {
    auto fs = sample_map(d, 3, [&](cplx p, std::span<cplx> out) {
        auto v = gen(p.real(), p.imag());
        for (int i = 0; i < 3; ++i) out[std::size_t(i)] = v[std::size_t(i)];
    });
    return {fs[0], fs[1], fs[2]};
}

Eigen::Vector3cd at(const Vec3& v, std::size_t i) { return {v[0][i], v[1][i], v[2][i]}; }

cplx poly(const std::vector<cplx>& c, cplx z) {
    cplx acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * z + *it;
    return acc;
}

std::vector<cplx> coeffs(const json& j) {
    std::vector<cplx> out;
    for (const auto& v : j) out.push_back(cplx_from_json(v));
    if (out.empty()) throw DomainError("polynomial needs at least one coefficient");
    return out;
}

// 2x2 symmetric metric helpers with g = (xx, xy, yy)
struct Inv2 {
    ComplexField xx, xy, yy;
};

Inv2 invert(const std::array<ComplexField, 3>& g) {
    ComplexField det = g[0] * g[2] - g[1] * g[1];
    for (std::size_t i = 0; i < det.size(); ++i)
        if (std::abs(det[i]) < 1e-14) throw SingularMetricError("affine metric is degenerate at node " + std::to_string(i));
    ComplexField r = det.inverse();
    return {g[2] * r, -(g[1] * r), g[0] * r};
}

const ComplexField& comp(const std::array<ComplexField, 3>& g, int a, int b) { return g[std::size_t(a + b)]; }
const ComplexField& comp(const Inv2& h, int a, int b) { return a + b == 0 ? h.xx : a + b == 1 ? h.xy : h.yy; }

double interior_max(const ComplexField& f, int margin) {
    const auto& d = f.domain();
    double m = 0;
    for (int k = margin; k < d.ny - margin; ++k)
        for (int j = margin; j < d.nx - margin; ++j) m = std::max(m, std::abs(f(j, k)));
    return m;
}

} // namespace

GridDomain default_window(const std::string& kind, int n) {
    if (n < 9) throw DomainError("catalogue windows need at least 9 nodes per side");
    if (kind == "bers") return GridDomain::window(n, n, 1.0, 1.0, {-0.5, 1.0});
    if (kind == "tzitzeica" || kind == "paraboloid" || kind == "graph")
        return GridDomain::window(n, n, 1.0, 1.0, {-0.5, -0.5});
    throw DomainError("unknown example kind '" + kind + "'");
}

ImmersionSample tzitzeica(const GridDomain& d, cplx c, cplx kappa) {
    if (std::abs(c) == 0.0) throw DomainError("Tzitzeica constant must be nonzero");
    if (std::abs(kappa) >= 1.0) throw DomainError("chart shear kappa must satisfy |kappa| < 1");
    const std::array<cplx, 3> a{1.0, zeta * zeta, zeta}, b{1.0, zeta, zeta * zeta};
    const cplx kb = std::conj(kappa);
    // d_x and d_y of (z, wbar)
    const cplx zx = 1.0, zy = I, wx = 1.0 + kb, wy = -I + I * kb;
    ImmersionSample s;
    s.kind = "tzitzeica";
    s.params = {{"c", cplx_to_json(c)}, {"kappa", cplx_to_json(kappa)}};
    auto chart_z = make_field(d, [](cplx z) { return z; }, "z");
    auto chart_w = make_field(d, [&](cplx z) { return std::conj(z) + kb * z; }, "wbar");
    s.chart = std::array<ComplexField, 2>{chart_z, chart_w};
    for (std::size_t m = 0; m < 3; ++m)
        s.sigma[m] = (chart_z * a[m] + chart_w * b[m]).exp() * c;
    s.xi = s.sigma;
    std::array<cplx, 3> p, q;
    for (std::size_t m = 0; m < 3; ++m) {
        p[m] = a[m] * zx + b[m] * wx;
        q[m] = a[m] * zy + b[m] * wy;
    }
    auto scaled = [&](const std::array<cplx, 3>& k) {
        return Vec3{s.sigma[0] * k[0], s.sigma[1] * k[1], s.sigma[2] * k[2]};
    };
    auto prod = [](const std::array<cplx, 3>& u, const std::array<cplx, 3>& v) {
        return std::array<cplx, 3>{u[0] * v[0], u[1] * v[1], u[2] * v[2]};
    };
    s.sigma_jet = {{scaled(p), scaled(q), scaled(prod(p, p)), scaled(prod(p, q)), scaled(prod(q, q))}};
    s.xi_jet = {{scaled(p), scaled(q)}};
    return s;
}

ImmersionSample paraboloid(const GridDomain& d, double theta) {
    const cplx e = std::polar(1.0, theta);
    ImmersionSample s;
    s.kind = "paraboloid";
    s.params = {{"theta", theta}};
    s.sigma = sample3(d, [&](double x, double y) { return std::array<cplx, 3>{x, y, 0.5 * (x * x + e * y * y)}; });
    s.xi = sample3(d, [&](double, double) { return std::array<cplx, 3>{0.0, 0.0, 1.0 / e}; });
    auto c3 = [&](cplx a, cplx b, cplx cz) { return sample3(d, [=](double, double) { return std::array<cplx, 3>{a, b, cz}; }); };
    s.sigma_jet = {{sample3(d, [](double x, double) { return std::array<cplx, 3>{1.0, 0.0, x}; }),
                    sample3(d, [&](double, double y) { return std::array<cplx, 3>{0.0, 1.0, e * y}; }),
                    c3(0.0, 0.0, 1.0), c3(0.0, 0.0, 0.0), c3(0.0, 0.0, e)}};
    s.xi_jet = {{c3(0.0, 0.0, 0.0), c3(0.0, 0.0, 0.0)}};
    return s;
}

ImmersionSample graph(const GridDomain& d, const std::function<cplx(double, double)>& F, json params) {
    ImmersionSample s;
    s.kind = "graph";
    s.params = std::move(params);
    s.sigma = sample3(d, [&](double x, double y) { return std::array<cplx, 3>{x, y, F(x, y)}; });
    s.xi = sample3(d, [](double, double) { return std::array<cplx, 3>{0.0, 0.0, 1.0}; });
    return s;
}

ImmersionSample bers_immersion(const GridDomain& d, const std::function<cplx(cplx)>& f1,
                               const std::function<cplx(cplx)>& f2bar, json params) {
    ImmersionSample s;
    s.kind = "bers";
    s.params = std::move(params);
    s.sigma = sample3(d, [&](double x, double y) {
        cplx z(x, y), a = f1(z), b = f2bar(std::conj(z));
        cplx t = (a - b) / (2.0 * I);
        if (std::abs(t) < 1e-12) throw DomainError("f1 and f2bar meet; the Bers pair leaves the hyperboloid chart");
        return std::array<cplx, 3>{(a + b) / (2.0 * t), (a * b - 1.0) / (2.0 * t), (a * b + 1.0) / (2.0 * t)};
    });
    s.xi = s.sigma;
    return s;
}

ImmersionSample build(const std::string& kind, const json& params, int n) {
    GridDomain d = params.contains("window") ? domain_from_json(params.at("window")) : default_window(kind, n);
    if (d.periodic) throw DomainError("catalogue examples live on windows");
    auto get = [&](const char* key, cplx dflt) { return params.contains(key) ? cplx_from_json(params.at(key)) : dflt; };
    if (kind == "tzitzeica") return tzitzeica(d, get("c", 1.0), get("kappa", 0.0));
    if (kind == "paraboloid") return paraboloid(d, params.value("theta", 0.0));
    if (kind == "graph") {
        // terms: [[i, j, c], ...] for c x^i y^j
        json terms = params.value("terms", json::array({json::array({2, 0, 0.5}), json::array({0, 2, 0.5})}));
        std::vector<std::tuple<int, int, cplx>> t;
        for (const auto& e : terms) t.emplace_back(e.at(0).get<int>(), e.at(1).get<int>(), cplx_from_json(e.at(2)));
        auto F = [t](double x, double y) {
            cplx acc = 0.0;
            for (const auto& [i, j, c] : t) acc += c * std::pow(x, i) * std::pow(y, j);
            return acc;
        };
        return graph(d, F, {{"terms", terms}});
    }
    if (kind == "bers") {
        auto a = coeffs(params.value("f1", json::array({0.0, 1.0})));
        auto b = coeffs(params.value("f2bar", json::array({0.0, 1.0})));
        json p = {{"f1", json::array()}, {"f2bar", json::array()}};
        for (cplx v : a) p["f1"].push_back(cplx_to_json(v));
        for (cplx v : b) p["f2bar"].push_back(cplx_to_json(v));
        return bers_immersion(d, [a](cplx z) { return poly(a, z); }, [b](cplx w) { return poly(b, w); }, p);
    }
    throw DomainError("unknown example kind '" + kind + "'");
}

namespace {

std::array<Vec3, 5> sigma_derivatives(const ImmersionSample& s) {
    if (s.sigma_jet) return *s.sigma_jet;
    Vec3 sx = map3(s.sigma, [&](const ComplexField& f) { return d_x(f, s.diff); });
    Vec3 sy = map3(s.sigma, [&](const ComplexField& f) { return d_y(f, s.diff); });
    return {sx, sy, map3(sx, [&](const ComplexField& f) { return d_x(f, s.diff); }),
            map3(sx, [&](const ComplexField& f) { return d_y(f, s.diff); }),
            map3(sy, [&](const ComplexField& f) { return d_y(f, s.diff); })};
}

std::array<Vec3, 2> xi_derivatives(const ImmersionSample& s) {
    if (s.xi_jet) return *s.xi_jet;
    return {map3(s.xi, [&](const ComplexField& f) { return d_x(f, s.diff); }),
            map3(s.xi, [&](const ComplexField& f) { return d_y(f, s.diff); })};
}

std::string node_name(const GridDomain& d, std::size_t i) {
    int j = int(i % std::size_t(d.nx)), k = int(i / std::size_t(d.nx));
    cplx p = d.node(j, k);
    std::ostringstream o;
    o << "node (" << j << ", " << k << ") at " << p.real() << (p.imag() < 0 ? " - " : " + ") << std::abs(p.imag()) << "i";
    return o.str();
}

} // namespace

void check_admissible(const ImmersionSample& s, double tol) {
    auto D = sigma_derivatives(s);
    for (std::size_t i = 0; i < s.sigma[0].size(); ++i) {
        Eigen::Matrix<cplx, 3, 2> J;
        J.col(0) = at(D[0], i);
        J.col(1) = at(D[1], i);
        Eigen::JacobiSVD<Eigen::Matrix<cplx, 3, 2>> svd(J);
        auto sv = svd.singularValues();
        if (!(sv(1) > tol * std::max(sv(0), 1e-300)))
            throw DomainError("immersion is not admissible at " + node_name(s.domain(), i) +
                              ": sigma_x and sigma_y are linearly dependent");
    }
}

AffineData extract_affine_data(const ImmersionSample& s, double cond_cap) {
    check_admissible(s);
    auto D = sigma_derivatives(s);
    auto X = xi_derivatives(s);
    const GridDomain& d = s.domain();
    const std::size_t n = d.size();
    // gamma 0-5, g 6-8, S 9-12, tau 13-14, theta 15, cond 16
    std::vector<std::vector<cplx>> out(17, std::vector<cplx>(n));
    double worst = 0;
    for (std::size_t i = 0; i < n; ++i) {
        M3 B;
        B.col(0) = at(D[0], i);
        B.col(1) = at(D[1], i);
        B.col(2) = at(s.xi, i);
        Eigen::JacobiSVD<M3> svd(B);
        auto sv = svd.singularValues();
        double cond = sv(2) > 0 ? sv(0) / sv(2) : INFINITY;
        if (!(cond <= cond_cap))
            throw SingularMetricError("frame (sigma_x, sigma_y, xi) is degenerate at " + node_name(d, i) +
                                      " (condition number " + std::to_string(cond) + ")");
        worst = std::max(worst, cond);
        Eigen::Matrix<cplx, 3, 5> R;
        R << at(D[2], i), at(D[3], i), at(D[4], i), at(X[0], i), at(X[1], i);
        Eigen::Matrix<cplx, 3, 5> sol = B.partialPivLu().solve(R);
        for (int ab = 0; ab < 3; ++ab) {
            out[std::size_t(2 * ab)][i] = sol(0, ab);
            out[std::size_t(2 * ab + 1)][i] = sol(1, ab);
            out[std::size_t(6 + ab)][i] = sol(2, ab);
        }
        for (int a = 0; a < 2; ++a) {
            out[std::size_t(9 + a)][i] = -sol(0, 3 + a);
            out[std::size_t(11 + a)][i] = -sol(1, 3 + a);
            out[std::size_t(13 + a)][i] = sol(2, 3 + a);
        }
        out[15][i] = B.determinant();
        out[16][i] = cond;
    }
    auto F = [&](std::size_t k) { return ComplexField(d, out[k]); };
    AffineData a;
    for (std::size_t k = 0; k < 6; ++k) a.gamma[k] = F(k);
    for (std::size_t k = 0; k < 3; ++k) a.g[k] = F(6 + k);
    a.S = {F(9), F(10), F(11), F(12)};
    a.tau = {F(13), F(14)};
    a.theta = F(15);
    a.cond = F(16);
    a.max_cond = worst;
    return a;
}

std::array<ComplexField, 8> pick_tensor(const AffineData& a, const DiffOptions& diff) {
    Inv2 h = invert(a.g);
    // dg[e][ab] = d_e g_ab
    std::array<std::array<ComplexField, 3>, 2> dg;
    for (std::size_t ab = 0; ab < 3; ++ab) {
        dg[0][ab] = d_x(a.g[ab], diff);
        dg[1][ab] = d_y(a.g[ab], diff);
    }
    auto D = [&](int e, int x, int y) -> const ComplexField& { return dg[std::size_t(e)][std::size_t(x + y)]; };
    std::array<ComplexField, 8> C;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            std::array<ComplexField, 2> diffc;
            for (int dd = 0; dd < 2; ++dd) {
                ComplexField lc = ComplexField::constant(a.theta.domain(), 0.0);
                for (int e = 0; e < 2; ++e) lc += comp(h, dd, e) * (D(i, e, j) + D(j, e, i) - D(e, i, j));
                diffc[std::size_t(dd)] = a.gamma[std::size_t(2 * (i + j) + dd)] - 0.5 * lc;
            }
            for (int c = 0; c < 2; ++c)
                C[std::size_t(4 * i + 2 * j + c)] = comp(a.g, c, 0) * diffc[0] + comp(a.g, c, 1) * diffc[1];
        }
    return C;
}

ComplexField metric_curvature(const std::array<ComplexField, 3>& g, const DiffOptions& diff) {
    const ComplexField &E = g[0], &F = g[1], &G = g[2];
    ComplexField Eu = d_x(E, diff), Ev = d_y(E, diff), Fu = d_x(F, diff), Fv = d_y(F, diff), Gu = d_x(G, diff),
                 Gv = d_y(G, diff);
    ComplexField Evv = d_y(Ev, diff), Guu = d_x(Gu, diff), Fuv = d_y(Fu, diff);
    using S = ComplexField;
    auto det3 = [](const S& a, const S& b, const S& c, const S& d, const S& e, const S& f, const S& g2, const S& h,
                   const S& i) { return a * (e * i - f * h) - b * (d * i - f * g2) + c * (d * h - e * g2); };
    S a11 = -0.5 * Evv + Fuv - 0.5 * Guu;
    S first = det3(a11, 0.5 * Eu, Fu - 0.5 * Ev, Fv - 0.5 * Gu, E, F, 0.5 * Gv, F, G);
    S zero = ComplexField::constant(E.domain(), 0.0);
    S second = det3(zero, 0.5 * Ev, 0.5 * Gu, 0.5 * Ev, E, F, 0.5 * Gu, F, G);
    S D = E * G - F * F;
    for (std::size_t i = 0; i < D.size(); ++i)
        if (std::abs(D[i]) < 1e-14) throw SingularMetricError("affine metric is degenerate at node " + std::to_string(i));
    return (first - second) / (D * D);
}

ComplexField cubic_norm(const std::array<ComplexField, 3>& g, const std::array<ComplexField, 8>& C) {
    Inv2 h = invert(g);
    ComplexField acc = ComplexField::constant(g[0].domain(), 0.0);
    for (int p = 0; p < 8; ++p)
        for (int q = 0; q < 8; ++q)
            acc += comp(h, p >> 2, q >> 2) * comp(h, (p >> 1) & 1, (q >> 1) & 1) * comp(h, p & 1, q & 1) *
                   C[std::size_t(p)] * C[std::size_t(q)];
    return acc;
}

ComplexField metric_volume(const std::array<ComplexField, 3>& g) { return sqrt_field(g[0] * g[2] - g[1] * g[1]); }

BlaschkeNormalization blaschke_normalize(const ImmersionSample& s) {
    AffineData a = extract_affine_data(s);
    ComplexField alpha = sqrt_field(metric_volume(a.g) / a.theta);
    std::array<ComplexField, 2> w{alpha * a.tau[0] + d_x(alpha, s.diff), alpha * a.tau[1] + d_y(alpha, s.diff)};
    Inv2 h = invert(a.g);
    std::array<ComplexField, 2> eta{-(h.xx * w[0] + h.xy * w[1]), -(h.xy * w[0] + h.yy * w[1])};
    auto D = sigma_derivatives(s);
    BlaschkeNormalization out{s, alpha, eta};
    for (std::size_t m = 0; m < 3; ++m) out.sample.xi[m] = alpha * s.xi[m] + eta[0] * D[0][m] + eta[1] * D[1][m];
    out.sample.xi_jet.reset();
    return out;
}

bool ExampleReport::pass() const {
    for (const auto& c : checks)
        if (!c.informational && !c.pass) return false;
    return true;
}

bool CatalogueReport::pass() const {
    for (const auto& e : examples)
        if (!e.pass()) return false;
    return true;
}

namespace {

const double cond_ref = 10.0;

struct Checks {
    ExampleReport& r;
    void add(std::string name, double value, double tol, bool scaled = true, bool informational = false,
             std::string note = {}) {
        double t = scaled ? tol * std::max(1.0, r.max_cond / cond_ref) : tol;
        r.checks.push_back({std::move(name), value, t, value <= t, informational, std::move(note)});
    }
};

using Vec2 = std::array<ComplexField, 2>;

ComplexField contract2(const std::array<ComplexField, 3>& g, const Vec2& u, const Vec2& v) {
    ComplexField acc = ComplexField::constant(g[0].domain(), 0.0);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) acc += comp(g, a, b) * u[std::size_t(a)] * v[std::size_t(b)];
    return acc;
}

ComplexField contract3(const std::array<ComplexField, 8>& C, const Vec2& u, const Vec2& v, const Vec2& w) {
    ComplexField acc = ComplexField::constant(u[0].domain(), 0.0);
    for (int p = 0; p < 8; ++p) acc += C[std::size_t(p)] * u[std::size_t(p >> 2)] * v[std::size_t((p >> 1) & 1)] * w[std::size_t(p & 1)];
    return acc;
}

// Coordinate vectors d_z, d_wbar of the chart, in (x, y) components.
std::array<Vec2, 2> chart_vectors(const std::array<ComplexField, 2>& ch, const DiffOptions& diff) {
    ComplexField zx = d_x(ch[0], diff), zy = d_y(ch[0], diff), wx = d_x(ch[1], diff), wy = d_y(ch[1], diff);
    ComplexField r = (zx * wy - zy * wx).inverse();
    return {Vec2{wy * r, -(wx * r)}, Vec2{-(zy * r), zx * r}};
}

double max_of(std::initializer_list<double> v) { return *std::max_element(v.begin(), v.end()); }

double volume_mismatch(const AffineData& a, int margin) {
    ComplexField det = a.g[0] * a.g[2] - a.g[1] * a.g[1];
    return interior_max(a.theta * a.theta / det - 1.0, margin);
}

ComplexField mean_curvature(const AffineData& a) { return 0.5 * (a.S[0] + a.S[3]); }

// Checks shared by every example; returns measured curvature and |C|^2.
std::pair<ComplexField, ComplexField> structural(const ImmersionSample& s, const AffineData& a, Checks& ck, int margin,
                                                 std::array<ComplexField, 8>* Cout = nullptr, bool aligned = true) {
    auto C = pick_tensor(a, s.diff);
    double sym = 0;
    for (int p = 0; p < 8; ++p) {
        int q = ((p & 1) << 2) | (p & 2) | (p >> 2);
        sym = std::max(sym, interior_max(C[std::size_t(p)] - C[std::size_t(q)], margin));
    }
    ck.add("Pick tensor total symmetry", sym, 1e-6);
    ComplexField K = metric_curvature(a.g, s.diff);
    ComplexField C2 = cubic_norm(a.g, C);
    ck.add("Gauss identity K_g = H + |C|^2 / 2", interior_max(K - mean_curvature(a) - 0.5 * C2, margin), 1e-5, true,
           !aligned, aligned ? "" : "theta / dV_g is not constant, so C is not apolar and the identity does not apply");
    if (Cout) *Cout = C;
    return {K, C2};
}

ExampleReport tzitzeica_report(const std::string& name, cplx c, cplx kappa, const CatalogueOptions& opt) {
    ImmersionSample s = tzitzeica(default_window("tzitzeica", opt.n), c, kappa);
    AffineData a = extract_affine_data(s);
    ExampleReport r{name, s.kind, s.params, a.max_cond, {}};
    Checks ck{r};
    const int m = opt.margin;
    cplx c3 = c * c * c;
    ck.add("image on z1 z2 z3 = c^3", (s.sigma[0] * s.sigma[1] * s.sigma[2] - c3).max_abs() / std::abs(c3), 1e-10, false,
           false, c3 == c ? "" : "the constant is c^3, which differs from c here");
    const auto& d = s.domain();
    for (int k = 0; k < d.ny; ++k)
        for (int j = 0; j < d.nx; ++j)
            if (std::abs(d.node(j, k)) < 1e-12) {
                double e = 0;
                for (const auto& f : s.sigma) e = std::max(e, std::abs(f(j, k) - c));
                ck.add("sigma(0) = c (1, 1, 1)", e, 1e-12, false);
            }
    auto V = chart_vectors(*s.chart, s.diff);
    ck.add("g(d_z, d_wbar) = 1", interior_max(contract2(a.g, V[0], V[1]) - 1.0, 0), 1e-8);
    ck.add("g(d_z, d_z) = g(d_wbar, d_wbar) = 0",
           std::max(contract2(a.g, V[0], V[0]).max_abs(), contract2(a.g, V[1], V[1]).max_abs()), 1e-8);
    ck.add("S = -id", max_of({(a.S[0] + 1.0).max_abs(), a.S[1].max_abs(), a.S[2].max_abs(), (a.S[3] + 1.0).max_abs()}), 1e-8);
    ck.add("tau = 0", std::max(a.tau[0].max_abs(), a.tau[1].max_abs()), 1e-8);
    std::array<ComplexField, 8> C;
    auto [K, C2] = structural(s, a, ck, m, &C);
    double cerr = 0;
    for (int p = 0; p < 8; ++p) {
        ComplexField v = contract3(C, V[std::size_t(p >> 2)], V[std::size_t((p >> 1) & 1)], V[std::size_t(p & 1)]);
        cplx target = (p == 0 || p == 7) ? 1.0 : 0.0;
        cerr = std::max(cerr, interior_max(v - target, m));
    }
    ck.add("C = dz^3 + dwbar^3", cerr, 1e-6);
    ck.add("K_g = 0", interior_max(K, m), 1e-5);
    ck.add("K_g = -1 + g(Q1, Q2bar) / 4 with Q1 + Q2bar = C", interior_max(K + 1.0 - 0.125 * C2, m), 1e-5, true, true,
           "offset 3/4: this reading of the cubic forms is off by the factor -2 between C and the difference tensor");
    bool blaschke = std::abs(std::pow(std::abs(c), 6) - 1.0 / 27.0) < 1e-12;
    ck.add("volume theta^2 = det g", volume_mismatch(a, 0), 1e-8, true, !blaschke,
           blaschke ? "" : "xi = sigma is the Blaschke normal only when |c|^6 = 1/27");
    return r;
}

ExampleReport paraboloid_report(const std::string& name, double theta, const CatalogueOptions& opt) {
    ImmersionSample s = paraboloid(default_window("paraboloid", opt.n), theta);
    AffineData a = extract_affine_data(s);
    ExampleReport r{name, s.kind, s.params, a.max_cond, {}};
    Checks ck{r};
    const int m = opt.margin;
    double third_im = s.sigma[2].map([](cplx v) { return cplx(v.imag()); }).max_abs();
    if (theta == 0.0) ck.add("third coordinate real", third_im, 1e-15, false);
    ck.add("S = 0", max_of({a.S[0].max_abs(), a.S[1].max_abs(), a.S[2].max_abs(), a.S[3].max_abs()}), 1e-10);
    ck.add("tau = 0", std::max(a.tau[0].max_abs(), a.tau[1].max_abs()), 1e-10);
    std::array<ComplexField, 8> C;
    auto [K, C2] = structural(s, a, ck, m, &C);
    double cmax = 0;
    for (const auto& f : C) cmax = std::max(cmax, interior_max(f, m));
    ck.add("C = 0", cmax, 1e-8);
    ck.add("K_g = 0", interior_max(K, m), 1e-8);
    ck.add("volume theta^2 = det g", volume_mismatch(a, 0), 1e-10, true, theta != 0.0,
           theta != 0.0 ? "the stated transversal (0, 0, e^{-i theta}) is not volume-aligned for theta != 0" : "");
    auto bn = blaschke_normalize(s);
    AffineData b = extract_affine_data(bn.sample);
    ck.add("normalized tau = 0", std::max(interior_max(b.tau[0], m), interior_max(b.tau[1], m)), 1e-8);
    ck.add("normalized theta^2 = det g", volume_mismatch(b, 0), 1e-8);
    cplx want = std::polar(1.0, theta / 4);
    double e0 = std::max(bn.sample.xi[0].max_abs(), bn.sample.xi[1].max_abs());
    double ep = (bn.sample.xi[2] - want).max_abs(), en = (bn.sample.xi[2] + want).max_abs();
    ck.add("Blaschke normal = (0, 0, +-e^{i theta/4})", std::max(e0, std::min(ep, en)), 1e-8);
    return r;
}

ExampleReport graph_report(const std::string& name, const CatalogueOptions& opt) {
    // F = (x^2 + y^2)/2 + 0.2i xy + 0.1 x^3 - 0.05i y^3 + 0.1 x y^2
    auto F = [](double x, double y) {
        return 0.5 * (x * x + y * y) + 0.2 * I * x * y + 0.1 * x * x * x - 0.05 * I * y * y * y + 0.1 * x * y * y;
    };
    json terms = json::array({json::array({2, 0, 0.5}), json::array({0, 2, 0.5}), json::array({1, 1, cplx_to_json(0.2 * I)}),
                              json::array({3, 0, 0.1}), json::array({0, 3, cplx_to_json(-0.05 * I)}),
                              json::array({1, 2, 0.1})});
    ImmersionSample s = graph(default_window("graph", opt.n), F, {{"terms", terms}});
    AffineData a = extract_affine_data(s);
    ExampleReport r{name, s.kind, s.params, a.max_cond, {}};
    Checks ck{r};
    ck.add("S = 0", max_of({a.S[0].max_abs(), a.S[1].max_abs(), a.S[2].max_abs(), a.S[3].max_abs()}), 1e-8);
    ck.add("tau = 0", std::max(a.tau[0].max_abs(), a.tau[1].max_abs()), 1e-8);
    const auto& d = s.domain();
    auto hess = sample3(d, [](double x, double y) {
        return std::array<cplx, 3>{1.0 + 0.6 * x, 0.2 * I + 0.2 * y, 1.0 - 0.3 * I * y + 0.2 * x};
    });
    double herr = 0;
    for (std::size_t k = 0; k < 3; ++k) herr = std::max(herr, (a.g[k] - hess[k]).max_abs());
    ck.add("g = Hessian of F", herr, 1e-8);
    double gam = 0;
    for (const auto& f : a.gamma) gam = std::max(gam, f.max_abs());
    ck.add("induced connection = flat coordinate connection", gam, 1e-8);
    structural(s, a, ck, opt.margin, nullptr, false);
    return r;
}

ExampleReport bers_report(const std::string& name, std::vector<cplx> f1, std::vector<cplx> f2, const CatalogueOptions& opt) {
    json params = {{"f1", json::array()}, {"f2bar", json::array()}};
    for (cplx v : f1) params["f1"].push_back(cplx_to_json(v));
    for (cplx v : f2) params["f2bar"].push_back(cplx_to_json(v));
    ImmersionSample s = build("bers", params, opt.n);
    AffineData a = extract_affine_data(s);
    ExampleReport r{name, s.kind, s.params, a.max_cond, {}};
    Checks ck{r};
    const int m = opt.margin;
    ComplexField q = s.sigma[0] * s.sigma[0] + s.sigma[1] * s.sigma[1] - s.sigma[2] * s.sigma[2];
    ck.add("<sigma, sigma>_{2,1} = -1", (q + 1.0).max_abs(), 1e-10, false);
    ck.add("S = -id", max_of({(a.S[0] + 1.0).max_abs(), a.S[1].max_abs(), a.S[2].max_abs(), (a.S[3] + 1.0).max_abs()}), 1e-6);
    ck.add("tau = 0", std::max(a.tau[0].max_abs(), a.tau[1].max_abs()), 1e-6);
    const auto& d = s.domain();
    auto F1 = make_field(d, [&](cplx z) { return poly(f1, z); });
    auto F2 = make_field(d, [&](cplx z) { return poly(f2, std::conj(z)); });
    ComplexMetric bm = bers_metric(F1, F2, s.diff);
    ComplexField gzz = 0.25 * (a.g[0] - a.g[2] - 2.0 * I * a.g[1]), gzzb = 0.25 * (a.g[0] + a.g[2]);
    ck.add("g = Bers metric of (f1, f2bar)", std::max(interior_max(gzz - bm.g_zz(), m), interior_max(gzzb - bm.g_zzbar(), m)), 1e-6);
    std::array<ComplexField, 8> C;
    auto [K, C2] = structural(s, a, ck, m, &C);
    double cmax = 0;
    for (const auto& f : C) cmax = std::max(cmax, interior_max(f, m));
    ck.add("C = 0", cmax, 1e-5);
    ck.add("K_g = -1", interior_max(K + 1.0, m), 1e-5);
    return r;
}

} // namespace

CatalogueReport verify_catalogue(const CatalogueOptions& opt) {
    if (opt.margin < 0 || 2 * opt.margin >= opt.n) throw DomainError("catalogue margin leaves no interior nodes");
    std::vector<std::function<ExampleReport()>> jobs{
        [&] { return tzitzeica_report("tzitzeica", 1.0, 0.0, opt); },
        [&] { return tzitzeica_report("tzitzeica-blaschke", 1.0 / std::sqrt(3.0), cplx(0.3, 0.1), opt); },
        [&] { return paraboloid_report("paraboloid", 0.0, opt); },
        [&] { return paraboloid_report("paraboloid-rotated", std::numbers::pi / 3, opt); },
        [&] { return graph_report("graph-cubic", opt); },
        [&] { return bers_report("bers-fuchsian", {0.0, 1.0}, {0.0, 1.0}, opt); },
        [&] { return bers_report("bers-quasifuchsian", {0.0, 1.0, 0.1}, {0.0, 1.0, -0.05}, opt); },
    };
    CatalogueReport rep;
    rep.examples.resize(jobs.size());
    std::size_t workers = std::clamp<std::size_t>(std::size_t(std::max(opt.threads, 1)), 1, jobs.size());
    std::vector<std::exception_ptr> errs(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < jobs.size(); i += workers) rep.examples[i] = jobs[i]();
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    return rep;
}

json catalogue_to_json(const CatalogueReport& r) {
    json ex = json::array();
    for (const auto& e : r.examples) {
        json checks = json::array();
        for (const auto& c : e.checks)
            checks.push_back({{"name", c.name},
                              {"value", c.value},
                              {"tol", c.tol},
                              {"pass", c.pass},
                              {"informational", c.informational},
                              {"note", c.note}});
        ex.push_back({{"name", e.name}, {"kind", e.kind}, {"params", e.params}, {"max_cond", e.max_cond},
                      {"pass", e.pass()}, {"checks", checks}});
    }
    return {{"examples", ex}, {"pass", r.pass()}};
}

std::string catalogue_to_markdown(const CatalogueReport& r) {
    std::ostringstream o;
    char buf[64];
    auto sci = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.3e", v);
        return std::string(buf);
    };
    o << "# Example catalogue\n\nOverall: " << (r.pass() ? "PASS" : "FAIL") << "\n";
    for (const auto& e : r.examples) {
        o << "\n## " << e.name << " (" << e.kind << ")\n\n";
        o << "params: `" << e.params.dump() << "`, max frame condition number " << sci(e.max_cond) << "\n\n";
        o << "| check | value | tol | status |\n|---|---|---|---|\n";
        for (const auto& c : e.checks) {
            std::string status = c.informational ? (c.pass ? "info (within tol)" : "info") : (c.pass ? "PASS" : "FAIL");
            o << "| " << c.name << " | " << sci(c.value) << " | " << sci(c.tol) << " | " << status << " |\n";
        }
        for (const auto& c : e.checks)
            if (!c.note.empty()) o << "\n- " << c.name << ": " << c.note;
        o << "\n";
    }
    return o.str();
}

} // namespace caslab
