#include "caslab/transport.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace caslab {

PowerSeries2D::PowerSeries2D(int order, cplx center) : order_(order), center_(center) {
    if (order < 0) throw DomainError("series order must be non-negative");
    c_.assign(index(0, order) + 1, 0.0);
}

PowerSeries2D PowerSeries2D::constant(int order, cplx value, cplx center) {
    PowerSeries2D s(order, center);
    s.c_[0] = value;
    return s;
}

PowerSeries2D PowerSeries2D::monomial(int order, int j, int k, cplx coeff, cplx center) {
    PowerSeries2D s(order, center);
    if (j + k <= order) s.at(j, k) = coeff;
    return s;
}

PowerSeries2D PowerSeries2D::z(int order, cplx center) { return monomial(order, 1, 0, 1.0, center); }
PowerSeries2D PowerSeries2D::zbar(int order, cplx center) { return monomial(order, 0, 1, 1.0, center); }

cplx PowerSeries2D::operator()(int j, int k) const {
    if (j < 0 || k < 0 || j + k > order_) return 0.0;
    return c_[index(j, k)];
}

cplx& PowerSeries2D::at(int j, int k) {
    if (j < 0 || k < 0 || j + k > order_) throw DomainError("series index outside the truncation triangle");
    return c_[index(j, k)];
}

cplx PowerSeries2D::eval(cplx dz, cplx dzbar) const {
    cplx acc = 0.0;
    for (int d = order_; d >= 0; --d) {
        cplx row = 0.0;
        cplx zp = 1.0;
        // homogeneous part of degree d
        for (int k = 0; k <= d; ++k) {
            cplx term = c_[index(d - k, k)] * std::pow(dz, d - k) * zp;
            row += term;
            zp *= dzbar;
        }
        acc += row;
    }
    return acc;
}

double PowerSeries2D::ball_norm(double r, int max_degree) const {
    int top = max_degree < 0 ? order_ : std::min(max_degree, order_);
    double s = 0, rp = 1;
    for (int d = 0; d <= top; ++d, rp *= r)
        for (int k = 0; k <= d; ++k) s += std::abs(c_[index(d - k, k)]) * rp;
    return s;
}

bool PowerSeries2D::finite() const {
    for (cplx v : c_)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
}

PowerSeries2D PowerSeries2D::truncated(int degree) const {
    PowerSeries2D s = *this;
    for (int d = std::max(degree + 1, 0); d <= order_; ++d)
        for (int k = 0; k <= d; ++k) s.c_[index(d - k, k)] = 0.0;
    return s;
}

void PowerSeries2D::check_compatible(const PowerSeries2D& o) const {
    if (order_ != o.order_) throw DomainError("series orders differ");
    if (center_ != o.center_) throw DomainError("series centers differ");
}

PowerSeries2D& PowerSeries2D::operator+=(const PowerSeries2D& o) {
    check_compatible(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
}

PowerSeries2D& PowerSeries2D::operator-=(const PowerSeries2D& o) {
    check_compatible(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
}

PowerSeries2D& PowerSeries2D::operator*=(cplx s) {
    for (auto& v : c_) v *= s;
    return *this;
}

PowerSeries2D operator+(PowerSeries2D a, const PowerSeries2D& b) { return a += b; }
PowerSeries2D operator-(PowerSeries2D a, const PowerSeries2D& b) { return a -= b; }
PowerSeries2D operator-(PowerSeries2D a) { return a *= -1.0; }
PowerSeries2D operator*(PowerSeries2D a, cplx s) { return a *= s; }
PowerSeries2D operator*(cplx s, PowerSeries2D a) { return a *= s; }
PowerSeries2D operator+(PowerSeries2D a, cplx s) {
    a.at(0, 0) += s;
    return a;
}

PowerSeries2D operator*(const PowerSeries2D& a, const PowerSeries2D& b) {
    a.check_compatible(b);
    const int N = a.order();
    PowerSeries2D out(N, a.center());
    auto& o = out.coefficients();
    const auto &ca = a.coefficients(), &cb = b.coefficients();
    for (int da = 0; da <= N; ++da)
        for (int ka = 0; ka <= da; ++ka) {
            cplx x = ca[PowerSeries2D::index(da - ka, ka)];
            if (x == 0.0) continue;
            for (int db = 0; db <= N - da; ++db)
                for (int kb = 0; kb <= db; ++kb)
                    o[PowerSeries2D::index(da - ka + db - kb, ka + kb)] += x * cb[PowerSeries2D::index(db - kb, kb)];
        }
    return out;
}

PowerSeries2D d_z(const PowerSeries2D& f) {
    PowerSeries2D out(f.order(), f.center());
    for (int d = 0; d < f.order(); ++d)
        for (int k = 0; k <= d; ++k) out.at(d - k, k) = double(d - k + 1) * f(d - k + 1, k);
    return out;
}

PowerSeries2D d_zbar(const PowerSeries2D& f) {
    PowerSeries2D out(f.order(), f.center());
    for (int d = 0; d < f.order(); ++d)
        for (int k = 0; k <= d; ++k) out.at(d - k, k) = double(k + 1) * f(d - k, k + 1);
    return out;
}

PowerSeries2D inverse(const PowerSeries2D& f) {
    cplx a0 = f(0, 0);
    if (std::abs(a0) == 0.0) throw DomainError("series reciprocal needs a nonzero constant term");
    // 1/f = (1/a0) sum (-r)^n with r = f/a0 - 1 of valuation >= 1
    PowerSeries2D r = f * (1.0 / a0);
    r.at(0, 0) = 0.0;
    PowerSeries2D acc = PowerSeries2D::constant(f.order(), 1.0, f.center());
    PowerSeries2D term = acc;
    for (int n = 1; n <= f.order(); ++n) {
        term = term * r * cplx(-1.0);
        acc += term;
    }
    return acc * (1.0 / a0);
}

PowerSeries2D pow(const PowerSeries2D& f, int n) {
    if (n < 0) return pow(inverse(f), -n);
    PowerSeries2D acc = PowerSeries2D::constant(f.order(), 1.0, f.center());
    for (int i = 0; i < n; ++i) acc = acc * f;
    return acc;
}

PowerSeries2D compose(const PowerSeries2D& f, const PowerSeries2D& a, const PowerSeries2D& b) {
    a.check_compatible(b);
    if (a(0, 0) != 0.0 || b(0, 0) != 0.0) throw DomainError("composed series must vanish at the center");
    const int N = a.order();
    std::vector<PowerSeries2D> ap{PowerSeries2D::constant(N, 1.0, a.center())}, bp = ap;
    for (int i = 1; i <= N; ++i) {
        ap.push_back(ap.back() * a);
        bp.push_back(bp.back() * b);
    }
    PowerSeries2D out(N, a.center());
    for (int d = 0; d <= std::min(N, f.order()); ++d)
        for (int k = 0; k <= d; ++k)
            if (f(d - k, k) != 0.0) out += f(d - k, k) * (ap[std::size_t(d - k)] * bp[std::size_t(k)]);
    return out;
}

json series_to_json(const PowerSeries2D& f) {
    json rows = json::array();
    for (int d = 0; d <= f.order(); ++d) {
        json row = json::array();
        for (int k = 0; k <= d; ++k) row.push_back(cplx_to_json(f(d - k, k)));
        rows.push_back(row);
    }
    return {{"order", f.order()},
            {"center", cplx_to_json(f.center())},
            {"layout", "coefficients[d][k] multiplies z^(d-k) zbar^k"},
            {"coefficients", rows}};
}

PowerSeries2D series_from_json(const json& j) {
    PowerSeries2D f(j.at("order").get<int>(), j.contains("center") ? cplx_from_json(j.at("center")) : cplx(0.0));
    const auto& rows = j.at("coefficients");
    if (rows.size() > std::size_t(f.order() + 1)) throw DomainError("series has more rows than its order");
    for (std::size_t d = 0; d < rows.size(); ++d) {
        if (rows[d].size() != d + 1) throw DomainError("series row " + std::to_string(d) + " must have " + std::to_string(d + 1) + " entries");
        for (std::size_t k = 0; k <= d; ++k) f.at(int(d - k), int(k)) = cplx_from_json(rows[d][k]);
    }
    return f;
}

PowerSeries2D Generator::at(double t) const {
    if (terms.empty()) throw DomainError("generator has no terms");
    PowerSeries2D g = terms.back();
    for (std::size_t m = terms.size() - 1; m-- > 0;) g = g * t + terms[m];
    return g;
}

namespace {

using State = std::vector<PowerSeries2D>;
using Rhs = std::function<State(double, const State&)>;

State axpy(const State& x, double a, const State& y) {
    State out = x;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += a * y[i];
    return out;
}

double state_norm(const State& s, double r) {
    double n = 0;
    for (const auto& f : s) n += f.ball_norm(r);
    return n;
}

void check_options(const TransportOptions& opt) {
    if (!(opt.T >= 0) || !(opt.dt > 0)) throw DomainError("transport needs T >= 0 and dt > 0");
    if (!(opt.growth_limit > 1)) throw DomainError("growth limit must exceed 1");
}

// Spectral radius of the truncated coefficient operator f -> g d_zbar f.
double coefficient_radius(const PowerSeries2D& g) {
    const int N = g.order();
    const std::size_t M = g.size();
    Eigen::MatrixXcd L(M, M);
    for (std::size_t i = 0; i < M; ++i) {
        PowerSeries2D e(N, g.center());
        e.coefficients()[i] = 1.0;
        PowerSeries2D col = g * d_zbar(e);
        for (std::size_t r = 0; r < M; ++r) L(Eigen::Index(r), Eigen::Index(i)) = col.coefficients()[r];
    }
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(L, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

void check_stability(const Generator& g, const TransportOptions& opt) {
    for (double t : {0.0, opt.T}) {
        double rho = coefficient_radius(g.at(t));
        if (opt.dt * rho > 2.5)
            throw DomainError("dt = " + std::to_string(opt.dt) + " exceeds the RK4 stability bound " +
                              std::to_string(2.5 / rho) + " of the coefficient system");
    }
}

State integrate(State x, const Rhs& rhs, const TransportOptions& opt, std::vector<TransportStep>* history) {
    int n = std::max(1, int(std::ceil(opt.T / opt.dt - 1e-12)));
    double h = opt.T / n, t = 0;
    if (opt.T == 0) n = 0;
    double prev = state_norm(x, opt.norm_radius);
    if (history) history->push_back({0.0, prev});
    for (int s = 0; s < n; ++s) {
        State k1 = rhs(t, x);
        State k2 = rhs(t + 0.5 * h, axpy(x, 0.5 * h, k1));
        State k3 = rhs(t + 0.5 * h, axpy(x, 0.5 * h, k2));
        State k4 = rhs(t + h, axpy(x, h, k3));
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        t = (s + 1) * h;
        double nrm = state_norm(x, opt.norm_radius);
        bool ok = std::isfinite(nrm);
        for (const auto& f : x) ok = ok && f.finite();
        if (!ok || (prev > 1e-300 && nrm > opt.growth_limit * prev))
            throw TransportBreakdownError("transport breaks down near t = " + std::to_string(t) +
                                              ": coefficient norm grew from " + std::to_string(prev) + " to " +
                                              std::to_string(nrm) + " in one step",
                                          t);
        prev = nrm;
        if (history) history->push_back({t, nrm});
    }
    return x;
}

PowerSeries2D scalar_rhs(const PowerSeries2D& g, const PowerSeries2D& f) { return g * d_zbar(f); }

// L_Z h for Z = g d_zbar.
std::array<PowerSeries2D, 3> metric_rhs(const PowerSeries2D& g, const PowerSeries2D& a, const PowerSeries2D& b,
                                        const PowerSeries2D& c) {
    PowerSeries2D gz = d_z(g), gzb = d_zbar(g);
    return {g * d_zbar(a) + 2.0 * (b * gz), g * d_zbar(b) + c * gz + b * gzb, g * d_zbar(c) + 2.0 * (c * gzb)};
}

void check_generator(const Generator& Z, const PowerSeries2D& like) {
    if (Z.terms.empty()) throw DomainError("generator has no terms");
    for (const auto& t : Z.terms) t.check_compatible(like);
}

} // namespace

TransportState solve_transport(const PowerSeries2D& f0, const Generator& g, const TransportOptions& opt) {
    check_options(opt);
    check_generator(g, f0);
    check_stability(g, opt);
    TransportState st;
    st.g = g;
    State x = integrate({f0}, [&](double t, const State& s) { return State{scalar_rhs(g.at(t), s[0])}; }, opt, &st.history);
    st.f = x[0];
    st.t = opt.T;
    return st;
}

MetricSeries MetricSeries::from_triple(const PowerSeries2D& lambda, const PowerSeries2D& mubar, const PowerSeries2D& b) {
    PowerSeries2D lb = lambda * b;
    return {lb * mubar, 0.5 * lb, PowerSeries2D(lambda.order(), lambda.center())};
}

MetricSeries transport_metric(const MetricSeries& g0, const Generator& Z, const TransportOptions& opt) {
    check_options(opt);
    check_generator(Z, g0.h_zz);
    check_stability(Z, opt);
    State x = integrate({g0.h_zz, g0.h_zzbar, g0.h_zbarzbar},
                        [&](double t, const State& s) {
                            auto r = metric_rhs(Z.at(t), s[0], s[1], s[2]);
                            return State{r[0], r[1], r[2]};
                        },
                        opt, nullptr);
    return {x[0], x[1], x[2]};
}

PowerSeries2D gauss_curvature(const MetricSeries& g) {
    // Brioschi formula in the coordinates (u, v) = (z, zbar).
    const PowerSeries2D &E = g.h_zz, &F = g.h_zzbar, &G = g.h_zbarzbar;
    PowerSeries2D Eu = d_z(E), Ev = d_zbar(E), Fu = d_z(F), Fv = d_zbar(F), Gu = d_z(G), Gv = d_zbar(G);
    PowerSeries2D Evv = d_zbar(Ev), Guu = d_z(Gu), Fuv = d_zbar(Fu);
    using S = PowerSeries2D;
    auto det3 = [](const S& a, const S& b, const S& c, const S& d, const S& e, const S& f, const S& g2, const S& h,
                   const S& i) { return a * (e * i - f * h) - b * (d * i - f * g2) + c * (d * h - e * g2); };
    S a11 = -0.5 * Evv + Fuv - 0.5 * Guu;
    S first = det3(a11, 0.5 * Eu, Fu - 0.5 * Ev, Fv - 0.5 * Gu, E, F, 0.5 * Gv, F, G);
    S zero(E.order(), E.center());
    S second = det3(zero, 0.5 * Ev, 0.5 * Gu, 0.5 * Ev, E, F, 0.5 * Gu, F, G);
    S D = E * G - F * F;
    return (first - second) * inverse(D * D);
}

PowerSeries2D laplacian(const MetricSeries& g, const PowerSeries2D& f) {
    using S = PowerSeries2D;
    // h[a][b] with index 0 = z, 1 = zbar
    std::array<std::array<S, 2>, 2> h = {{{g.h_zz, g.h_zzbar}, {g.h_zzbar, g.h_zbarzbar}}};
    S invD = inverse(g.h_zz * g.h_zbarzbar - g.h_zzbar * g.h_zzbar);
    std::array<std::array<S, 2>, 2> hi = {{{g.h_zbarzbar * invD, -(g.h_zzbar * invD)}, {-(g.h_zzbar * invD), g.h_zz * invD}}};
    auto d = [](int a, const S& s) { return a == 0 ? d_z(s) : d_zbar(s); };
    std::array<S, 2> df = {d_z(f), d_zbar(f)};
    // dh[c][a][b] = d_c h_ab
    std::array<std::array<std::array<S, 2>, 2>, 2> dh;
    for (int c = 0; c < 2; ++c)
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) dh[c][a][b] = d(c, h[a][b]);
    S out(f.order(), f.center());
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            S term = d(a, df[std::size_t(b)]);
            for (int c = 0; c < 2; ++c) {
                S gamma(f.order(), f.center());
                for (int e = 0; e < 2; ++e)
                    gamma += hi[c][e] * (dh[a][e][b] + dh[b][e][a] - dh[e][a][b]);
                term -= 0.5 * (gamma * df[std::size_t(c)]);
            }
            out += hi[a][b] * term;
        }
    return out;
}

CommuteDefects commute_check(const MetricSeries& g0, const PowerSeries2D& f0, const Generator& Z,
                             const TransportOptions& opt) {
    check_options(opt);
    check_generator(Z, f0);
    check_stability(Z, opt);
    PowerSeries2D K0 = gauss_curvature(g0), L0 = laplacian(g0, f0);
    State x = integrate({g0.h_zz, g0.h_zzbar, g0.h_zbarzbar, f0, K0, L0, f0 * K0},
                        [&](double t, const State& s) {
                            PowerSeries2D g = Z.at(t);
                            auto r = metric_rhs(g, s[0], s[1], s[2]);
                            return State{r[0], r[1], r[2], scalar_rhs(g, s[3]), scalar_rhs(g, s[4]), scalar_rhs(g, s[5]),
                                         scalar_rhs(g, s[6])};
                        },
                        opt, nullptr);
    MetricSeries gt{x[0], x[1], x[2]};
    CommuteDefects d;
    d.compared_degree = f0.order() - 2;
    d.radius = opt.norm_radius;
    d.curvature = (x[4] - gauss_curvature(gt)).ball_norm(opt.norm_radius, d.compared_degree);
    d.laplacian = (x[5] - laplacian(gt, x[3])).ball_norm(opt.norm_radius, d.compared_degree);
    d.product = (x[6] - x[3] * x[4]).ball_norm(opt.norm_radius, d.compared_degree);
    return d;
}

json metric_series_to_json(const MetricSeries& g) {
    return {{"h_zz", series_to_json(g.h_zz)}, {"h_zzbar", series_to_json(g.h_zzbar)}, {"h_zbarzbar", series_to_json(g.h_zbarzbar)}};
}

json commute_defects_to_json(const CommuteDefects& d) {
    return {{"curvature", d.curvature},
            {"laplacian", d.laplacian},
            {"product", d.product},
            {"compared_degree", d.compared_degree},
            {"radius", d.radius}};
}

} // namespace caslab
