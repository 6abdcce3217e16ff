#include "caslab/holonomy.hpp"

#include "caslab/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

namespace caslab {

namespace {

// Both connection matrices at z with one set of interpolation weights.
struct Sampler {
    const FrameConnection& c;
    int order;

    void weights(double t, int n, bool periodic, int* idx, double* w) const {
        int base = int(std::floor(t)) - order / 2 + 1;
        if (!periodic) base = std::clamp(base, 0, n - order);
        std::vector<double> nodes(static_cast<std::size_t>(order));
        for (int q = 0; q < order; ++q) {
            nodes[std::size_t(q)] = double(base + q);
            idx[q] = periodic ? (((base + q) % n) + n) % n : base + q;
        }
        auto ws = fornberg_weights(t, nodes, 0);
        std::copy(ws.begin(), ws.end(), w);
    }

    Mat3 operator()(cplx z, cplx dir) const {
        const GridDomain& d = c.domain();
        int ix[8], iy[8];
        double wx[8], wy[8];
        cplx rel = z - d.origin;
        weights(rel.real() / d.dx(), d.nx, d.periodic, ix, wx);
        weights(rel.imag() / d.dy(), d.ny, d.periodic, iy, wy);
        Mat3 out = Mat3::Zero();
        for (int b = 0; b < order; ++b)
            for (int a = 0; a < order; ++a) {
                std::size_t n = d.index(ix[a], iy[b]);
                double w = wx[a] * wy[b];
                for (std::size_t k = 0; k < 9; ++k)
                    out(int(k / 3), int(k % 3)) += w * (dir.real() * c.ax[k][n] + dir.imag() * c.ay[k][n]);
            }
        return out;
    }
};

} // namespace

LoopPath LoopPath::rectangle(cplx corner, double width, double height, int subdivisions) {
    return {{corner, corner + width, corner + cplx(width, height), corner + cplx(0, height), corner}, subdivisions};
}

LoopPath LoopPath::circle(cplx center, double radius, int sides, int subdivisions) {
    if (sides < 3) throw DomainError("a circle loop needs at least 3 sides");
    LoopPath l{{}, subdivisions};
    for (int k = 0; k <= sides; ++k)
        l.vertices.push_back(center + std::polar(radius, 2 * std::numbers::pi * (k % sides) / sides));
    return l;
}

double LoopPath::length() const {
    double s = 0;
    for (std::size_t i = 1; i < vertices.size(); ++i) s += std::abs(vertices[i] - vertices[i - 1]);
    return s;
}

double LoopPath::area() const {
    double a = 0;
    for (std::size_t i = 1; i < vertices.size(); ++i)
        a += vertices[i - 1].real() * vertices[i].imag() - vertices[i].real() * vertices[i - 1].imag();
    return 0.5 * a;
}

LoopPath LoopPath::reversed() const {
    LoopPath r = *this;
    std::reverse(r.vertices.begin(), r.vertices.end());
    return r;
}

LoopPath LoopPath::then(const LoopPath& next) const {
    if (vertices.empty() || next.vertices.empty() || vertices.front() != next.vertices.front())
        throw DomainError("loops must share the base point to be composed");
    LoopPath r = *this;
    r.vertices.insert(r.vertices.end(), next.vertices.begin() + 1, next.vertices.end());
    r.subdivisions = subdivisions + next.subdivisions;
    return r;
}

void LoopPath::validate(const GridDomain& d) const {
    if (vertices.size() < 2) throw DomainError("loop needs at least two vertices");
    if (std::abs(vertices.front() - vertices.back()) > 1e-12 * (1 + std::abs(vertices.front())))
        throw DomainError("loop is not closed");
    if (subdivisions < 1) throw DomainError("loop subdivision count must be positive");
    if (d.periodic) return;
    double tol = 1e-12 * (d.lx + d.ly);
    for (cplx v : vertices) {
        cplx r = v - d.origin;
        if (r.real() < -tol || r.imag() < -tol || r.real() > d.lx + tol || r.imag() > d.ly + tol)
            throw DomainError("loop leaves the chart window at (" + std::to_string(v.real()) + ", " +
                              std::to_string(v.imag()) + ")");
    }
}

json loop_to_json(const LoopPath& l) {
    json v = json::array();
    for (cplx z : l.vertices) v.push_back(cplx_to_json(z));
    return {{"vertices", v}, {"subdivisions", l.subdivisions}, {"length", l.length()}, {"area", l.area()}};
}

LoopPath loop_from_json(const json& j) {
    LoopPath l;
    for (const auto& v : j.at("vertices")) l.vertices.push_back(cplx_from_json(v));
    l.subdivisions = j.value("subdivisions", 256);
    return l;
}

HolonomyMatrix integrate_loop(const FrameConnection& c, const LoopPath& loop, int steps) {
    const GridDomain& d = c.domain();
    loop.validate(d);
    if (steps == 0) steps = loop.subdivisions;
    if (steps < 1) throw DomainError("step count must be positive");
    Sampler A{c, 4};
    double L = loop.length();
    if (!(L > 0)) throw DomainError("loop has zero length");
    HolonomyMatrix h;
    h.loop = loop;
    h.steps = 0;
    Mat3 M = Mat3::Identity();
    for (std::size_t s = 1; s < loop.vertices.size(); ++s) {
        cplx a = loop.vertices[s - 1], b = loop.vertices[s];
        if (a == b) continue;
        cplx dir = b - a;
        // The interpolant is polynomial between grid lines, so steps never straddle one.
        std::vector<double> cuts = {0.0, 1.0};
        auto crossings = [&](double p0, double p1, double o, double h) {
            if (p0 == p1) return;
            double lo = std::min(p0, p1), hi = std::max(p0, p1);
            for (double k = std::ceil((lo - o) / h); o + k * h < hi; ++k) {
                double t = (o + k * h - p0) / (p1 - p0);
                if (t > 1e-12 && t < 1 - 1e-12) cuts.push_back(t);
            }
        };
        crossings(a.real(), b.real(), d.origin.real(), d.dx());
        crossings(a.imag(), b.imag(), d.origin.imag(), d.dy());
        std::sort(cuts.begin(), cuts.end());
        for (std::size_t p = 1; p < cuts.size(); ++p) {
            double t0 = cuts[p - 1], span = cuts[p] - t0;
            if (span <= 0) continue;
            int n = std::max(1, int(std::ceil(steps * span * std::abs(dir) / L - 1e-9)));
            double dt = span / n;
            if (std::abs(dir) * dt < 1e-15 * (1 + std::abs(a))) throw ConvergenceError("holonomy step underflow");
            for (int k = 0; k < n; ++k) {
                double t = t0 + k * dt;
                Mat3 A0 = -A(a + dir * t, dir), Am = -A(a + dir * (t + 0.5 * dt), dir), A1 = -A(a + dir * (t + dt), dir);
                Mat3 k1 = A0 * M;
                Mat3 k2 = Am * (M + 0.5 * dt * k1);
                Mat3 k3 = Am * (M + 0.5 * dt * k2);
                Mat3 k4 = A1 * (M + dt * k3);
                M += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            h.steps += n;
        }
    }
    if (!M.allFinite()) throw ConvergenceError("holonomy integration produced non-finite entries");
    h.M = M;
    h.det_defect = std::abs(M.determinant() - 1.0);
    return h;
}

std::vector<HolonomyMatrix> integrate_loops(const FrameConnection& c, const std::vector<LoopPath>& loops, int steps,
                                            int threads) {
    std::vector<HolonomyMatrix> out(loops.size());
    std::size_t workers = std::size_t(std::clamp(threads, 1, int(std::max<std::size_t>(loops.size(), 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < loops.size(); ++i) out[i] = integrate_loop(c, loops[i], steps);
        return out;
    }
    std::vector<std::exception_ptr> errs(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < loops.size(); i += workers) out[i] = integrate_loop(c, loops[i], steps);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    return out;
}

Mat3 unimodular_project(const Mat3& M, std::optional<cplx> root_hint, double det_floor) {
    cplx det = M.determinant();
    if (!std::isfinite(std::abs(det)) || std::abs(det) <= det_floor * std::pow(std::max(M.norm(), 1e-300), 3))
        throw DomainError("matrix is singular; cannot project to unit determinant");
    cplx root = std::pow(det, 1.0 / 3.0);
    if (root_hint) {
        const cplx w = std::polar(1.0, 2 * std::numbers::pi / 3);
        cplx best = root;
        for (cplx r : {root, root * w, root * w * w})
            if (std::abs(r - *root_hint) < std::abs(best - *root_hint)) best = r;
        root = best;
    }
    return M / root;
}

HolonomyMatrix unimodular_project(const HolonomyMatrix& h) {
    HolonomyMatrix r = h;
    r.M = unimodular_project(h.M);
    r.det_defect = std::abs(r.M.determinant() - 1.0);
    return r;
}

HolonomyInvariants invariants(const Mat3& M) {
    HolonomyInvariants inv;
    inv.trace = M.trace();
    inv.trace_inverse = M.inverse().trace();
    Eigen::ComplexEigenSolver<Mat3> es(M, false);
    auto ev = es.eigenvalues();
    std::array<cplx, 3> e = {ev(0), ev(1), ev(2)};
    std::sort(e.begin(), e.end(), [](cplx a, cplx b) {
        double ma = std::abs(a), mb = std::abs(b);
        if (std::abs(ma - mb) > 1e-12 * std::max(ma, mb)) return ma < mb;
        return std::arg(a) < std::arg(b);
    });
    inv.eigenvalues = e;
    return inv;
}

double preserves_form(const Mat3& M, const Mat3& J) { return (M.transpose() * J * M - J).norm(); }

json matrix_to_json(const Mat3& M) {
    json re = json::array(), im = json::array();
    for (int r = 0; r < 3; ++r) {
        json rr = json::array(), ii = json::array();
        for (int c = 0; c < 3; ++c) {
            rr.push_back(M(r, c).real());
            ii.push_back(M(r, c).imag());
        }
        re.push_back(rr);
        im.push_back(ii);
    }
    return {{"re", re}, {"im", im}};
}

Mat3 matrix_from_json(const json& j) {
    Mat3 M;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            M(r, c) = {j.at("re").at(std::size_t(r)).at(std::size_t(c)).get<double>(),
                       j.at("im").at(std::size_t(r)).at(std::size_t(c)).get<double>()};
    return M;
}

json holonomy_to_json(const HolonomyMatrix& h) {
    HolonomyInvariants inv = invariants(h.M);
    json ev = json::array();
    for (cplx e : inv.eigenvalues) ev.push_back(cplx_to_json(e));
    return {{"matrix", matrix_to_json(h.M)},
            {"invariants", {{"trace", cplx_to_json(inv.trace)}, {"trace_inverse", cplx_to_json(inv.trace_inverse)}, {"eigenvalues", ev}}},
            {"defects",
             {{"det", h.det_defect},
              {"identity", (h.M - Mat3::Identity()).norm()},
              {"form_2_1", preserves_form(h.M)}}},
            {"loop", loop_to_json(h.loop)},
            {"integrator", {{"method", "rk4"}, {"order", h.order}, {"steps", h.steps}}},
            {"composition", "hol(first then second) = hol(second) * hol(first)"}};
}

} // namespace caslab
