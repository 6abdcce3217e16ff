#include "caslab/cas.hpp"

#include "caslab/error.hpp"

#include <cmath>
#include <numbers>

namespace caslab {

namespace {

const cplx I(0, 1);

// Isotropic-frame components (a, c) of d_x and d_y: X = a d_zbar + c d_w.
struct RealDirections {
    ComplexField ax, cx, ay, cy;
};

RealDirections real_directions(const ComplexMetric& g, const ComplexField& nu) {
    ComplexField mubar = g.mubar();
    ComplexField inv_nu = nu.inverse();
    return {mubar + 1.0, inv_nu, I * (mubar - 1.0), I * inv_nu};
}

Mat3 entries(const std::array<ComplexField, 9>& a, std::size_t node) {
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = a[std::size_t(3 * r + c)][node];
    return m;
}

Mat3 real_basis() {
    const double s = 1.0 / std::sqrt(2.0);
    Mat3 t;
    t << s, -I * s, 0, s, I * s, 0, 0, 0, 1;
    return t;
}

} // namespace

DifferenceTensor difference_tensor(const ComplexMetric& g, const CubicPair& q) {
    require_positive(g);
    FrameForms f = frame_connection_forms(g);
    const ComplexField& b = g.wbar_dzbar;
    return {-0.5 * f.nu * f.nu * f.nu * q.phi / f.G, -0.5 * b * b * b * q.psibar / f.G};
}

ComplexField gauss_identity_residual(const ComplexMetric& g, const CubicPair& q) {
    require_positive(g);
    return gauss_curvature(g) + 1.0 - pair_cubics(g, q);
}

Mat3 FrameConnection::Ax(std::size_t node) const { return entries(ax, node); }
Mat3 FrameConnection::Ay(std::size_t node) const { return entries(ay, node); }

Mat3 FrameConnection::A(cplx z, cplx dir, int order) const {
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            std::size_t k = std::size_t(3 * r + c);
            m(r, c) = dir.real() * interpolate(ax[k], z, order) + dir.imag() * interpolate(ay[k], z, order);
        }
    return m;
}

FrameConnection assemble_connection(const ComplexMetric& g, const CubicPair& q, const AssemblyOptions& opt) {
    require_positive(g);
    const GridDomain& d = g.domain();
    q.phi.check_compatible(g.lambda);
    q.psibar.check_compatible(g.lambda);
    FrameForms f = frame_connection_forms(g);
    for (std::size_t i = 0; i < d.size(); ++i)
        if (std::abs(f.G[i]) < opt.frame_tol)
            throw SingularMetricError("degenerate frame: |g(d_zbar, d_w)| below tolerance at node " + std::to_string(i));
    HolomorphyDefect hd = holomorphy_defect(g, q);
    double scale = 1.0 + std::max(q.phi.max_abs(), q.psibar.max_abs());
    if (hd.phi > opt.holomorphy_tol * scale || hd.psibar > opt.holomorphy_tol * scale)
        throw DomainError("cubic data is not holomorphic at grid scale (|d_zbar phi| = " + std::to_string(hd.phi) +
                          ", |d_w psibar| = " + std::to_string(hd.psibar) + ")");

    DifferenceTensor K = difference_tensor(g, q);
    RealDirections rd = real_directions(g, f.nu);
    ComplexField sq = sqrt_field(f.G);

    // Trace-free isotropic matrices for X = a d_zbar + c d_w with alpha(X), beta(X).
    auto iso = [&](const ComplexField& a, const ComplexField& c, const ComplexField& al, const ComplexField& be) {
        ComplexField half = 0.5 * (al - be);
        return std::array<ComplexField, 9>{half,      c * K.k_ww, a * sq,
                                           a * K.k_zbarzbar, -half, c * sq,
                                           c * sq,    a * sq,     ComplexField::constant(d, 0.0)};
    };
    ComplexField al_x = f.alpha_z + f.alpha_zbar, al_y = I * (f.alpha_z - f.alpha_zbar);
    ComplexField be_x = f.beta_z + f.beta_zbar, be_y = I * (f.beta_z - f.beta_zbar);
    auto wx = iso(rd.ax, rd.cx, al_x, be_x);
    auto wy = iso(rd.ay, rd.cy, al_y, be_y);

    FrameConnection out;
    out.basis = real_basis();
    Mat3 T = out.basis, Ti = T.inverse();
    for (auto& e : out.ax) e = ComplexField::constant(d, 0.0);
    for (auto& e : out.ay) e = ComplexField::constant(d, 0.0);
    // T^{-1} W T entrywise on fields.
    auto conj_by = [&](const std::array<ComplexField, 9>& w, std::array<ComplexField, 9>& dst) {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                ComplexField acc = ComplexField::constant(d, 0.0);
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) {
                        cplx coef = Ti(r, i) * T(j, c);
                        if (coef != 0.0) acc += coef * w[std::size_t(3 * i + j)];
                    }
                dst[std::size_t(3 * r + c)] = acc;
            }
    };
    conj_by(wx, out.ax);
    conj_by(wy, out.ay);
    out.G = f.G;
    out.sqrt_G = sq;
    out.metric = metric_descriptor(g);
    return out;
}

ComplexField flatness_residual(const FrameConnection& c, const DiffOptions& diff) {
    const GridDomain& d = c.domain();
    std::array<ComplexField, 9> dxay, dyax;
    for (std::size_t k = 0; k < 9; ++k) {
        dxay[k] = d_x(c.ay[k], diff);
        dyax[k] = d_y(c.ax[k], diff);
    }
    std::vector<cplx> out(d.size());
    for (std::size_t n = 0; n < d.size(); ++n) {
        Mat3 ax = c.Ax(n), ay = c.Ay(n);
        Mat3 F = entries(dxay, n) - entries(dyax, n) + ax * ay - ay * ax;
        out[n] = F.norm();
    }
    return ComplexField(d, std::move(out), "flatness");
}

FrameConnection constant_connection(const GridDomain& d, const Mat3& ax, const Mat3& ay) {
    FrameConnection c;
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k) {
            c.ax[std::size_t(3 * r + k)] = ComplexField::constant(d, ax(r, k));
            c.ay[std::size_t(3 * r + k)] = ComplexField::constant(d, ay(r, k));
        }
    c.basis = Mat3::Identity();
    c.G = ComplexField::constant(d, 1.0);
    c.sqrt_G = c.G;
    c.metric = json::object();
    return c;
}

StructuralReport structural_report(const ComplexMetric& g, const CubicPair& q, double grid_tol) {
    StructuralReport r;
    r.grid_tol = grid_tol;
    const GridDomain& d = g.domain();
    FrameForms f = frame_connection_forms(g);
    DifferenceTensor K = difference_tensor(g, q);
    RealDirections rd = real_directions(g, f.nu);
    for (std::size_t n = 0; n < d.size(); ++n) {
        // Tangent frame (d_zbar, d_w); columns are images of the frame vectors.
        Eigen::Matrix2cd K1, K2, Gm;
        K1 << 0, 0, K.k_zbarzbar[n], 0;
        K2 << 0, K.k_ww[n], 0, 0;
        Gm << 0, f.G[n], f.G[n], 0;
        std::array<Eigen::Matrix2cd, 2> KX = {K1, K2};
        for (auto [a, c] : {std::pair{rd.ax[n], rd.cx[n]}, {rd.ay[n], rd.cy[n]}})
            r.apolarity_norm = std::max(r.apolarity_norm, std::abs((a * K1 + c * K2).trace()));
        auto C = [&](int x, int y, int z) { return (KX[std::size_t(x)].col(y).transpose() * Gm.col(z))(0); };
        for (int x = 0; x < 2; ++x)
            for (int y = 0; y < 2; ++y)
                for (int z = 0; z < 2; ++z) {
                    cplx gyz = (KX[std::size_t(x)].col(z).transpose() * Gm.col(y))(0);
                    r.symmetry_norm = std::max(r.symmetry_norm, std::abs(C(x, y, z) - C(y, x, z)) + std::abs(C(x, y, z) - gyz));
                }
    }
    HolomorphyDefect hd = holomorphy_defect(g, q);
    r.codazzi_phi = hd.phi;
    r.codazzi_psibar = hd.psibar;
    r.gauss_identity_norm = gauss_identity_residual(g, q).max_abs();
    ComplexField dlogG_z = d_z(f.G, g.diff) / f.G, dlogG_zbar = d_zbar(f.G, g.diff) / f.G;
    r.volume_norm = std::max((dlogG_z - f.alpha_z - f.beta_z).max_abs(), (dlogG_zbar - f.alpha_zbar - f.beta_zbar).max_abs());
    AssemblyOptions ao;
    ao.holomorphy_tol = INFINITY;
    FrameConnection c = assemble_connection(g, q, ao);
    r.flatness_norm = flatness_residual(c, g.diff).max_abs();
    for (std::size_t n = 0; n < d.size(); ++n)
        r.trace_norm = std::max({r.trace_norm, std::abs(c.Ax(n).trace()), std::abs(c.Ay(n).trace())});
    r.algebraic_pass = r.apolarity_norm <= r.algebraic_tol && r.symmetry_norm <= r.algebraic_tol &&
                       r.trace_norm <= r.algebraic_tol;
    r.gauss_pass = r.gauss_identity_norm <= grid_tol;
    r.flat_pass = r.flatness_norm <= grid_tol;
    return r;
}

json structural_report_to_json(const StructuralReport& r) {
    return {{"apolarity_norm", r.apolarity_norm},
            {"symmetry_norm", r.symmetry_norm},
            {"codazzi_norms", {{"phi", r.codazzi_phi}, {"psibar", r.codazzi_psibar}}},
            {"gauss_identity_norm", r.gauss_identity_norm},
            {"flatness_norm", r.flatness_norm},
            {"trace_norm", r.trace_norm},
            {"volume_norm", r.volume_norm},
            {"thresholds", {{"algebraic", r.algebraic_tol}, {"grid", r.grid_tol}}},
            {"pass", {{"algebraic", r.algebraic_pass}, {"gauss_identity", r.gauss_pass}, {"flatness", r.flat_pass}}}};
}

ManufacturedSphere manufactured_sphere(const GridDomain& d, const std::function<cplx(cplx)>& F,
                                       const std::function<cplx(cplx)>& dF, DiffOptions diff) {
    ManufacturedSphere m;
    ComplexField f1 = make_field(d, F), f1z = make_field(d, dF);
    for (std::size_t i = 0; i < d.size(); ++i)
        if (!(f1[i].imag() > 0)) throw DomainError("chart map leaves the upper half-plane");
    BersMaps maps{f1, f1z, f1.conj(), ComplexField::constant(d, 0.0), f1z.conj()};
    m.h = bers_metric(maps);
    m.h.diff = diff;
    m.q = {-2.0 * f1z * f1z * f1z, ComplexField::constant(d, -2.0)};
    m.u = f1.map([](cplx v) { return cplx(std::log(std::sqrt(2.0) * v.imag())); });
    m.g = conformal_scale(m.h, (2.0 * m.u).exp());
    return m;
}

void save_connection(const FrameConnection& c, const std::filesystem::path& dir, const std::string& stem) {
    std::filesystem::create_directories(dir);
    json files = json::object();
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k) {
            std::string tag = std::to_string(r) + std::to_string(k);
            std::size_t i = std::size_t(3 * r + k);
            save_snapshot(c.ax[i], dir / (stem + ".ax" + tag + ".casf"));
            save_snapshot(c.ay[i], dir / (stem + ".ay" + tag + ".casf"));
            files["ax" + tag] = stem + ".ax" + tag + ".casf";
            files["ay" + tag] = stem + ".ay" + tag + ".casf";
        }
    json basis = json::array();
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k) basis.push_back(cplx_to_json(c.basis(r, k)));
    save_snapshot(c.G, dir / (stem + ".G.casf"));
    write_json(dir / (stem + ".json"), {{"kind", "frame_connection"},
                                        {"frame", "(d_zbar, d_w, xi) normalized by G^-1/2, times basis"},
                                        {"domain", domain_to_json(c.domain())},
                                        {"basis", basis},
                                        {"metric", c.metric},
                                        {"G", stem + ".G.casf"},
                                        {"files", files}});
}

FrameConnection load_connection(const std::filesystem::path& descriptor) {
    json j = read_json(descriptor);
    auto dir = descriptor.parent_path();
    GridDomain d = domain_from_json(j.at("domain"));
    FrameConnection c;
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k) {
            std::string tag = std::to_string(r) + std::to_string(k);
            std::size_t i = std::size_t(3 * r + k);
            c.ax[i] = load_snapshot(dir / j.at("files").at("ax" + tag).get<std::string>(), d);
            c.ay[i] = load_snapshot(dir / j.at("files").at("ay" + tag).get<std::string>(), d);
            c.basis(r, k) = cplx_from_json(j.at("basis").at(std::size_t(3 * r + k)));
        }
    c.G = load_snapshot(dir / j.at("G").get<std::string>(), d);
    c.sqrt_G = sqrt_field(c.G);
    c.metric = j.at("metric");
    return c;
}

} // namespace caslab
