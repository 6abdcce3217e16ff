#include "caslab/cmetric.hpp"

#include "caslab/error.hpp"

#include <cmath>

namespace caslab {

namespace {

std::string at_node(const GridDomain& d, std::size_t i) {
    return "(" + std::to_string(i % std::size_t(d.nx)) + ", " + std::to_string(i / std::size_t(d.nx)) + ")";
}

} // namespace

ComplexField ComplexMetric::g_zz() const { return lambda * wbar_dzbar * mubar(); }
ComplexField ComplexMetric::g_zzbar() const { return 0.5 * lambda * wbar_dzbar; }

ComplexMetric make_metric(ComplexField lambda, ComplexField mu, ComplexField wbar_dzbar, DiffOptions diff) {
    lambda.check_compatible(mu);
    lambda.check_compatible(wbar_dzbar);
    resolve_backend(lambda.domain(), diff);
    return ComplexMetric{lambda.labelled("lambda"), mu.labelled("mu"), wbar_dzbar.labelled("wbar_dzbar"), diff};
}

ComplexMetric metric_from_components(const ComplexField& g_zz, const ComplexField& g_zzbar,
                                     const ComplexField& wbar_dzbar, DiffOptions diff) {
    return make_metric(2.0 * g_zzbar / wbar_dzbar, (g_zz / (2.0 * g_zzbar)).conj(), wbar_dzbar, diff);
}

ComplexMetric constant_metric(const GridDomain& d, cplx lambda) {
    auto g = make_metric(ComplexField::constant(d, lambda), ComplexField::constant(d, 0.0),
                         ComplexField::constant(d, 1.0));
    g.kind = "constant";
    return g;
}

PositivityCertificate check_positive(const ComplexMetric& g, double tol) {
    PositivityCertificate c;
    const GridDomain& d = g.domain();
    c.min_abs_lambda = INFINITY;
    c.min_abs_b = INFINITY;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        double m = std::abs(g.mu[i]);
        if (m > c.max_abs_mu || !std::isfinite(m)) {
            c.max_abs_mu = m;
            worst = i;
        }
        c.min_abs_lambda = std::min(c.min_abs_lambda, std::abs(g.lambda[i]));
        c.min_abs_b = std::min(c.min_abs_b, std::abs(g.wbar_dzbar[i]));
    }
    c.worst_j = int(worst % std::size_t(d.nx));
    c.worst_k = int(worst / std::size_t(d.nx));
    if (!(c.max_abs_mu < 1.0 - tol))
        c.reason = "|mu| reaches " + std::to_string(c.max_abs_mu) + " at node " + at_node(d, worst) +
                   "; the complex structures are not transverse";
    else if (!(c.min_abs_lambda > tol))
        c.reason = "lambda vanishes";
    else if (!(c.min_abs_b > tol))
        c.reason = "d_zbar wbar vanishes; w is not a chart";
    c.passed = c.reason.empty();
    return c;
}

void require_positive(const ComplexMetric& g, double tol) {
    auto c = check_positive(g, tol);
    if (!c.passed) throw PositivityError(c.reason);
}

ComplexField laplacian(const ComplexMetric& g, const ComplexField& u) {
    g.lambda.check_compatible(u);
    const auto& o = g.diff;
    return 2.0 * (d_zzbar(u, o) - d_zbar(g.mubar() * d_zbar(u, o), o)) / g.g_zzbar();
}

ComplexField laplacian_dirichlet(const ComplexMetric& g, const ComplexField& u) {
    g.lambda.check_compatible(u);
    const GridDomain& d = u.domain();
    if (d.periodic) return laplacian(g, u);
    int r = g.diff.fd_order / 2;
    if (r < 1 || g.diff.fd_order % 2 != 0) throw DomainError("finite-difference order must be even and >= 2");
    if (d.nx <= r || d.ny <= r) throw DomainError("window too small for the Dirichlet stencil");
    int px = d.nx + 2 * r, py = d.ny + 2 * r;
    std::vector<cplx> P(std::size_t(px) * py);
    auto at = [&](int j, int k) -> cplx& { return P[std::size_t(k + r) * px + (j + r)]; };
    for (int k = 0; k < d.ny; ++k) {
        for (int j = 0; j < d.nx; ++j) at(j, k) = u(j, k);
        for (int m = 1; m <= r; ++m) {
            at(-m, k) = 2.0 * u(0, k) - u(m, k);
            at(d.nx - 1 + m, k) = 2.0 * u(d.nx - 1, k) - u(d.nx - 1 - m, k);
        }
    }
    for (int j = -r; j < d.nx + r; ++j)
        for (int m = 1; m <= r; ++m) {
            at(j, -m) = 2.0 * at(j, 0) - at(j, m);
            at(j, d.ny - 1 + m) = 2.0 * at(j, d.ny - 1) - at(j, d.ny - 1 - m);
        }

    std::vector<double> offs(std::size_t(2 * r + 1));
    for (int q = -r; q <= r; ++q) offs[std::size_t(q + r)] = q;
    auto w1 = fornberg_weights(0.0, offs, 1), w2 = fornberg_weights(0.0, offs, 2);
    double dx = d.dx(), dy = d.dy();

    ComplexField mubar = g.mubar();
    ComplexField dmubar = d_zbar(mubar, g.diff);
    ComplexField B = g.g_zzbar();
    const cplx I(0, 1);
    std::vector<cplx> out(d.size(), 0.0);
    for (int k = 1; k < d.ny - 1; ++k)
        for (int j = 1; j < d.nx - 1; ++j) {
            cplx ux = 0, uy = 0, uxx = 0, uyy = 0, uxy = 0;
            for (int q = -r; q <= r; ++q) {
                double a1 = w1[std::size_t(q + r)], a2 = w2[std::size_t(q + r)];
                ux += a1 * at(j + q, k);
                uy += a1 * at(j, k + q);
                uxx += a2 * at(j + q, k);
                uyy += a2 * at(j, k + q);
                if (a1 == 0) continue;
                cplx inner = 0;
                for (int p = -r; p <= r; ++p) inner += w1[std::size_t(p + r)] * at(j + q, k + p);
                uxy += a1 * inner;
            }
            ux /= dx;
            uy /= dy;
            uxx /= dx * dx;
            uyy /= dy * dy;
            uxy /= dx * dy;
            cplx u_zzbar = 0.25 * (uxx + uyy);
            cplx u_zbarzbar = 0.25 * (uxx - uyy + 2.0 * I * uxy);
            cplx u_zbar = 0.5 * (ux + I * uy);
            std::size_t i = d.index(j, k);
            out[i] = 2.0 * (u_zzbar - mubar[i] * u_zbarzbar - dmubar[i] * u_zbar) / B[i];
        }
    return ComplexField(d, std::move(out));
}

FrameForms frame_connection_forms(const ComplexMetric& g) {
    const auto& o = g.diff;
    ComplexField mubar = g.mubar();
    ComplexField A = g.g_zz();
    ComplexField B = g.g_zzbar();
    // nu = 1 / (conj(b) (1 - |mu|^2)); only its logarithmic derivatives enter.
    ComplexField P = g.wbar_dzbar.conj() * g.mu.map([](cplx m) { return 1.0 - std::norm(m); });
    ComplexField nu = P.inverse();
    ComplexField dlognu_z = -d_z(P, o) / P;
    ComplexField dlognu_zbar = -d_zbar(P, o) / P;

    FrameForms f;
    f.nu = nu;
    f.G = nu * B;
    ComplexField B_z = d_z(B, o), B_zbar = d_zbar(B, o), A_zbar = d_zbar(A, o);
    f.alpha_z = A_zbar / (2.0 * B);
    f.alpha_zbar = B_zbar / B;
    f.alpha_w = nu * (f.alpha_z - mubar * f.alpha_zbar);
    f.beta_z = (2.0 * B_z - A_zbar) / (2.0 * B) + dlognu_z;
    f.beta_zbar = dlognu_zbar;
    f.beta_w = nu * (f.beta_z - mubar * f.beta_zbar);
    return f;
}

ComplexField gauss_curvature(const ComplexMetric& g, double eps) {
    FrameForms f = frame_connection_forms(g);
    for (std::size_t i = 0; i < f.G.size(); ++i)
        if (std::abs(f.G[i]) < eps)
            throw SingularMetricError("g(d_zbar, d_w) vanishes at node " + at_node(g.domain(), i));
    const auto& o = g.diff;
    // alpha = a1 dz + a2 dz̄, d alpha = (d_z a2 - d_zbar a1) dz^dz̄, dz^dz̄(d_zbar, d_w) = -nu.
    ComplexField dalpha = d_z(f.alpha_zbar, o) - d_zbar(f.alpha_z, o);
    return -(f.nu * dalpha) / f.G;
}

ComplexMetric bers_metric(const BersMaps& m, double tol) {
    const GridDomain& d = m.f1.domain();
    ComplexField diff = m.f1 - m.f2bar;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (std::abs(diff[i]) < tol)
            throw SingularMetricError("f1 meets f2bar at node " + at_node(d, i) + "; Bers metric is singular");
    ComplexField lambda = -4.0 * m.f1_z / (diff * diff);
    ComplexField mu = (m.f2bar_z / m.f2bar_zbar).conj();
    DiffOptions opt;
    auto g = make_metric(lambda, mu, m.f2bar_zbar, opt);
    g.kind = "bers";
    auto cert = check_positive(g);
    if (!cert.passed) throw PositivityError("Bers pair is not admissible: " + cert.reason);
    return g;
}

ComplexMetric bers_metric(const ComplexField& f1, const ComplexField& f2bar, DiffOptions diff, double tol) {
    BersMaps m{f1, d_z(f1, diff), f2bar, d_z(f2bar, diff), d_zbar(f2bar, diff)};
    auto g = bers_metric(m, tol);
    g.diff = diff;
    return g;
}

HolomorphyDefect holomorphy_defect(const ComplexMetric& g, const CubicPair& q) {
    FrameForms f = frame_connection_forms(g);
    HolomorphyDefect h;
    h.phi = d_zbar(q.phi, g.diff).max_abs();
    h.psibar = (f.nu * (d_z(q.psibar, g.diff) - g.mubar() * d_zbar(q.psibar, g.diff))).max_abs();
    return h;
}

ComplexField pair_cubics(const ComplexMetric& g, const CubicPair& q) {
    return 2.0 * q.phi * q.psibar / (g.lambda * g.lambda * g.lambda);
}

ComplexMetric conformal_scale(const ComplexMetric& g, const ComplexField& rho) {
    log_field(rho);
    ComplexMetric out = g;
    out.lambda = (g.lambda * rho).labelled("lambda");
    out.kind = "conformal";
    return out;
}

json metric_descriptor(const ComplexMetric& g) {
    return json{{"kind", g.kind},
                {"domain", domain_to_json(g.domain())},
                {"labels", json::array({"lambda", "mu", "wbar_dzbar"})},
                {"backend", resolve_backend(g.domain(), g.diff) == DiffBackend::Spectral ? "spectral" : "fd"},
                {"fd_order", g.diff.fd_order}};
}

void save_metric(const ComplexMetric& g, const std::filesystem::path& dir, const std::string& stem) {
    std::filesystem::create_directories(dir);
    json j = metric_descriptor(g);
    json files = json::object();
    for (auto [name, f] : {std::pair{"lambda", &g.lambda}, {"mu", &g.mu}, {"wbar_dzbar", &g.wbar_dzbar}}) {
        std::string file = stem + "." + name + ".casf";
        save_snapshot(*f, dir / file);
        files[name] = file;
    }
    j["files"] = files;
    write_json(dir / (stem + ".json"), j);
}

ComplexMetric load_metric(const std::filesystem::path& descriptor) {
    json j = read_json(descriptor);
    GridDomain d = domain_from_json(j.at("domain"));
    auto dir = descriptor.parent_path();
    auto load = [&](const char* name) { return load_snapshot(dir / j.at("files").at(name).get<std::string>(), d); };
    DiffOptions o;
    o.fd_order = j.value("fd_order", 6);
    auto g = make_metric(load("lambda"), load("mu"), load("wbar_dzbar"), o);
    g.kind = j.value("kind", "general");
    return g;
}

} // namespace caslab
