#include "caslab/gauss.hpp"

#include "fft.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

namespace caslab {

namespace {

using LinOp = std::function<VecC(const VecC&)>;

ComplexField zero_ring(ComplexField f) {
    const GridDomain& d = f.domain();
    if (d.periodic) return f;
    std::vector<cplx> v = f.values();
    for (int k = 0; k < d.ny; ++k)
        for (int j = 0; j < d.nx; ++j)
            if (d.boundary(j, k)) v[d.index(j, k)] = 0.0;
    return ComplexField(d, std::move(v));
}

ComplexField residual_s(const ComplexMetric& h, const ComplexField& s, const ComplexField& u) {
    ComplexField e2 = (2.0 * u).exp();
    ComplexField e4 = (-4.0 * u).exp();
    return zero_ring(laplacian_dirichlet(h, u) - e2 + s * e4 + 1.0);
}

double max_imag(const ComplexField& u) {
    double m = 0;
    for (cplx v : u.values()) m = std::max(m, std::abs(v.imag()));
    return m;
}

ComplexField with_boundary(const ComplexField& u, const ComplexField& b) {
    const GridDomain& d = u.domain();
    if (d.periodic) return u;
    b.check_compatible(u);
    std::vector<cplx> v = u.values();
    for (int k = 0; k < d.ny; ++k)
        for (int j = 0; j < d.nx; ++j)
            if (d.boundary(j, k)) v[d.index(j, k)] = b(j, k);
    return ComplexField(d, std::move(v));
}

// Restarted GMRES with right preconditioning.
VecC gmres(const LinOp& A, const LinOp& M, const VecC& b, int restart, int max_iter, double tol, double& relres) {
    Eigen::Index n = b.size();
    VecC x = VecC::Zero(n);
    double bnorm = b.norm();
    relres = 0;
    if (bnorm == 0) return x;
    int total = 0;
    double last = INFINITY;
    while (true) {
        VecC r = b - A(x);
        double beta = r.norm();
        relres = beta / bnorm;
        // A restart cycle that does not halve the residual has hit the roundoff floor.
        if (relres <= tol || total >= max_iter || relres > 0.5 * last) return x;
        last = relres;
        int m = restart;
        MatC V(n, m + 1);
        MatC H = MatC::Zero(m + 1, m);
        std::vector<double> cs(std::size_t(m), 0.0);
        std::vector<cplx> sn(std::size_t(m), 0.0);
        VecC g = VecC::Zero(m + 1);
        g[0] = beta;
        V.col(0) = r / beta;
        int k = 0;
        for (int j = 0; j < m && total < max_iter; ++j) {
            VecC w = A(M(V.col(j)));
            ++total;
            for (int pass = 0; pass < 2; ++pass)
                for (int i = 0; i <= j; ++i) {
                    cplx hij = V.col(i).dot(w);
                    H(i, j) += hij;
                    w -= hij * V.col(i);
                }
            double hn = w.norm();
            H(j + 1, j) = hn;
            if (hn > 0) V.col(j + 1) = w / hn;
            for (int i = 0; i < j; ++i) {
                cplx tmp = cs[std::size_t(i)] * H(i, j) + sn[std::size_t(i)] * H(i + 1, j);
                H(i + 1, j) = -std::conj(sn[std::size_t(i)]) * H(i, j) + cs[std::size_t(i)] * H(i + 1, j);
                H(i, j) = tmp;
            }
            cplx a = H(j, j);
            double nu = std::hypot(std::abs(a), hn);
            if (std::abs(a) == 0) {
                cs[std::size_t(j)] = 0;
                sn[std::size_t(j)] = 1;
            } else {
                cs[std::size_t(j)] = std::abs(a) / nu;
                sn[std::size_t(j)] = (a / std::abs(a)) * hn / nu;
            }
            H(j, j) = cs[std::size_t(j)] * a + sn[std::size_t(j)] * hn;
            H(j + 1, j) = 0;
            g[j + 1] = -std::conj(sn[std::size_t(j)]) * g[j];
            g[j] = cs[std::size_t(j)] * g[j];
            k = j + 1;
            if (std::abs(g[j + 1]) / bnorm <= tol || hn == 0) break;
        }
        VecC y = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        x += M(V.leftCols(k) * y);
    }
}

// Inverse of the constant-coefficient model of Delta_h + c with mean coefficients,
// with the Nyquist bins at their own wavenumber to match d_zzbar.
LinOp fourier_preconditioner(const ComplexMetric& h, const ComplexField& c) {
    const GridDomain& d = h.domain();
    cplx B = h.g_zzbar().mean();
    cplx m = h.mubar().mean();
    cplx cm = c.mean();
    const cplx i(0, 1);
    auto wave = [](int p, int n, double L) { return 2 * std::numbers::pi * (p <= n / 2 ? p : p - n) / L; };
    std::vector<cplx> inv(d.size());
    for (int q = 0; q < d.ny; ++q)
        for (int p = 0; p < d.nx; ++p) {
            double kx = wave(p, d.nx, d.lx), ky = wave(q, d.ny, d.ly);
            bool nyq = (2 * p == d.nx) || (2 * q == d.ny);
            cplx zb = nyq ? cplx(0) : 0.5 * (i * kx - ky);
            cplx sym = (2.0 / B) * (-0.25 * (kx * kx + ky * ky) - m * zb * zb) + cm;
            inv[d.index(p, q)] = (std::abs(sym) < 1e-12 ? cplx(1) : 1.0 / sym) / double(d.size());
        }
    return [=](const VecC& v) {
        std::vector<cplx> a(v.data(), v.data() + v.size());
        detail::fft2(a, d.nx, d.ny, -1);
        for (std::size_t k = 0; k < a.size(); ++k) a[k] *= inv[k];
        detail::fft2(a, d.nx, d.ny, +1);
        return VecC(Eigen::Map<VecC>(a.data(), Eigen::Index(a.size())));
    };
}

bool use_gmres(const ComplexMetric& h, std::size_t n, const GaussOptions& opt) {
    return resolve_backend(h.domain(), h.diff) == DiffBackend::Spectral && n > opt.dense_limit;
}

Factorization factor_checked(const OperatorMatrix& A, double floor) {
    try {
        Factorization F(A);
        if (A.dense && F.rcond() < floor)
            throw SingularOperatorError("reciprocal condition " + std::to_string(F.rcond()));
        return F;
    } catch (const SingularOperatorError& e) {
        throw SingularOperatorError(std::string("linearization is singular at grid scale (infinitesimally non-rigid): ") +
                                    e.what());
    }
}

struct EigenEstimate {
    cplx value{NAN, NAN};
    VecC vector;
    double residual = NAN;
};

// Block inverse iteration about 0 with Rayleigh-Ritz; `block` carries the
// subspace between calls.
EigenEstimate nearest_eigen(const OperatorMatrix& A, const Factorization& F, MatC& block, int max_iter = 60) {
    EigenEstimate e;
    Eigen::Index p = block.cols();
    for (int it = 0; it < max_iter; ++it) {
        MatC W(block.rows(), p);
        for (Eigen::Index j = 0; j < p; ++j) W.col(j) = F.solve(block.col(j));
        if (!W.allFinite()) break;
        Eigen::HouseholderQR<MatC> qr(W);
        block = qr.householderQ() * MatC::Identity(W.rows(), p);
        MatC AQ(block.rows(), p);
        for (Eigen::Index j = 0; j < p; ++j) AQ.col(j) = A.apply(block.col(j));
        Eigen::ComplexEigenSolver<MatC> es(block.adjoint() * AQ);
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < p; ++j)
            if (std::abs(es.eigenvalues()[j]) < std::abs(es.eigenvalues()[best])) best = j;
        VecC y = es.eigenvectors().col(best);
        e.value = es.eigenvalues()[best];
        e.vector = block * y;
        e.vector /= e.vector.norm();
        e.residual = (AQ * y / (block * y).norm() - e.value * e.vector).norm();
        if (e.residual <= 1e-10 * std::max(1.0, std::abs(e.value))) break;
    }
    return e;
}

MatC start_block(Eigen::Index n) {
    std::mt19937_64 rng(29);
    std::normal_distribution<double> nd;
    MatC v(n, std::min<Eigen::Index>(n, 6));
    for (Eigen::Index j = 0; j < v.cols(); ++j)
        for (Eigen::Index i = 0; i < n; ++i) v(i, j) = (j == 0 ? 1.0 : 0.0) + 0.1 * cplx(nd(rng), nd(rng));
    return v;
}

EigenEstimate nearest_eigen(const OperatorMatrix& A, const Factorization& F) {
    MatC b = start_block(Eigen::Index(A.size()));
    return nearest_eigen(A, F, b);
}

// [J col; row 0..N-1 corner] as an operator matrix of size N + 1.
OperatorMatrix bordered(const OperatorMatrix& J, const VecC& col, const VecC& row, cplx corner) {
    Eigen::Index n = Eigen::Index(J.size());
    OperatorMatrix B;
    B.dense = J.dense;
    if (J.dense) {
        B.D.resize(n + 1, n + 1);
        B.D.topLeftCorner(n, n) = J.D;
        B.D.col(n).head(n) = col;
        B.D.row(n).head(n) = row.transpose();
        B.D(n, n) = corner;
    } else {
        std::vector<Eigen::Triplet<cplx>> trip;
        trip.reserve(std::size_t(J.S.nonZeros() + 2 * n + 1));
        for (Eigen::Index c = 0; c < J.S.outerSize(); ++c)
            for (SpMatC::InnerIterator it(J.S, c); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
        for (Eigen::Index i = 0; i < n; ++i) {
            trip.emplace_back(i, n, col[i]);
            trip.emplace_back(n, i, row[i]);
        }
        trip.emplace_back(n, n, corner);
        B.S.resize(n + 1, n + 1);
        B.S.setFromTriplets(trip.begin(), trip.end());
        B.S.makeCompressed();
    }
    return B;
}

struct NewtonResult {
    ComplexField u;
    std::vector<double> trace, imag_trace;
    std::string solver;
    int iterations = 0;
};

NewtonResult newton_core(const ComplexMetric& h, const OperatorMatrix* lap, const ComplexField& s, ComplexField u,
                         const GaussOptions& opt) {
    DofMap dofs = DofMap::of(h.domain());
    bool iterative = use_gmres(h, dofs.size(), opt);
    std::optional<OperatorMatrix> own;
    if (!iterative && !lap) {
        own = laplacian_matrix(h);
        lap = &*own;
    }
    NewtonResult out;
    out.solver = iterative ? "gmres" : (lap->dense ? "dense-lu" : "sparse-lu");
    double r0 = 0;
    for (int k = 0;; ++k) {
        ComplexField G = residual_s(h, s, u);
        double r = G.max_abs();
        out.trace.push_back(r);
        out.imag_trace.push_back(max_imag(u));
        if (!std::isfinite(r)) throw ConvergenceError("Newton diverged: non-finite residual at iteration " + std::to_string(k));
        if (k == 0) r0 = r;
        if (r <= opt.tol) {
            out.iterations = k;
            out.u = std::move(u);
            return out;
        }
        if (r > 1e8 * std::max(1.0, r0))
            throw ConvergenceError("Newton diverged: residual " + std::to_string(r) + " at iteration " + std::to_string(k));
        if (k >= opt.max_iter)
            throw ConvergenceError("Newton did not reach tolerance in " + std::to_string(opt.max_iter) +
                                   " iterations (residual " + std::to_string(r) + ")");
        ComplexField c = linearization_potential(u, s);
        VecC rhs = -dofs.restrict(G);
        VecC du;
        if (iterative) {
            LinOp A = [&](const VecC& v) { return dofs.restrict(apply_operator(h, c, dofs.extend(v))); };
            double relres = 0;
            du = gmres(A, fourier_preconditioner(h, c), rhs, opt.gmres_restart, opt.gmres_max_iter,
                       opt.gmres_tol, relres);
        } else {
            OperatorMatrix J = lap->with_potential(c);
            du = factor_checked(J, opt.singular_floor).solve(rhs);
        }
        u += dofs.extend(du);
    }
}

double real_sign(cplx v) { return v.real() >= 0 ? 1.0 : -1.0; }

} // namespace

ComplexField gauss_residual(const ComplexMetric& h, const ComplexField& s, const ComplexField& u) {
    require_positive(h);
    return residual_s(h, s, u);
}

ComplexField gauss_residual(const ComplexMetric& h, const CubicPair& q, const ComplexField& u) {
    return gauss_residual(h, pair_cubics(h, q), u);
}

ComplexField linearize(const ComplexMetric& h, const CubicPair& q, const ComplexField& u, const ComplexField& v) {
    require_positive(h);
    return zero_ring(apply_operator(h, linearization_potential(u, pair_cubics(h, q)), v));
}

OperatorMatrix linearize(const ComplexMetric& h, const CubicPair& q, const ComplexField& u) {
    return discretize(h, u, pair_cubics(h, q));
}

SpectralSummary spectral_summary(const OperatorMatrix& A) {
    SpectralSummary s;
    SpectrumOptions so;
    so.direct_limit = 0;
    Factorization F(A);
    auto e = nearest_eigen(A, F);
    auto sm = sigma_min(A, F, so);
    s.computed = true;
    s.smallest_eigenvalue = e.value;
    s.eigen_residual = e.residual;
    s.sigma_min = sm.value;
    s.constant_alignment = e.vector.size() ? constant_alignment(e.vector) : NAN;
    return s;
}

GaussSolution newton_solve(const ComplexMetric& h, const CubicPair& q, const ComplexField& u0, const GaussOptions& opt) {
    require_positive(h);
    if (!u0.domain().same_as(h.domain())) throw DomainError("initial guess does not live on the metric grid");
    GaussSolution sol;
    sol.h = h;
    sol.cubics = q;
    sol.s = pair_cubics(h, q);
    ComplexField start = opt.boundary ? with_boundary(u0, *opt.boundary) : u0;
    auto nr = newton_core(h, nullptr, sol.s, start, opt);
    sol.u = std::move(nr.u);
    sol.newton_trace = std::move(nr.trace);
    sol.imag_trace = std::move(nr.imag_trace);
    sol.residual_norm = sol.newton_trace.back();
    sol.iterations = nr.iterations;
    sol.linear_solver = nr.solver;
    if (opt.spectral_summary && sol.linear_solver != "gmres")
        sol.spectral = spectral_summary(discretize(h, sol.u, sol.s));
    return sol;
}

double quadratic_constant(const std::vector<double>& trace, int pairs, double floor) {
    std::vector<double> ratios;
    for (std::size_t k = 0; k + 1 < trace.size(); ++k)
        if (trace[k + 1] > floor) ratios.push_back(trace[k + 1] / (trace[k] * trace[k]));
    if (int(ratios.size()) < pairs) return NAN;
    return *std::max_element(ratios.end() - pairs, ratios.end());
}

const char* ray_mode_name(RayMode m) { return m == RayMode::HLL ? "hll" : "twistor"; }

RayMode ray_mode_from_name(const std::string& s) {
    if (s == "hll") return RayMode::HLL;
    if (s == "twistor") return RayMode::Twistor;
    throw DomainError("unknown ray mode '" + s + "' (expected hll or twistor)");
}

CubicPair twistor_pair(const CubicPair& q, cplx zeta) {
    if (zeta == 0.0) throw DomainError("twistor parameter must be nonzero");
    return {zeta * q.phi, q.psibar / zeta};
}

CubicPair hll_pair(const CubicPair& q, double t) { return {t * q.phi, -t * q.phi.conj()}; }

void RaySchedule::validate() const {
    if (params.size() < 2) throw DomainError("ray schedule needs at least two parameters");
    double dir = params[1] > params[0] ? 1 : -1;
    for (std::size_t i = 1; i < params.size(); ++i)
        if (!((params[i] - params[i - 1]) * dir > 0)) throw DomainError("ray schedule parameters must be strictly monotone");
    if (!(step > 0 && min_step > 0 && max_step >= step && step >= min_step))
        throw DomainError("ray schedule needs 0 < min_step <= step <= max_step");
}

CubicPair RaySchedule::pair_at(const CubicPair& q, double t) const {
    return mode == RayMode::HLL ? hll_pair(q, t) : twistor_pair(q, std::exp(t * direction));
}

namespace {

// s(t) and ds/dt along a ray, for complex t.
struct RayModel {
    const ComplexMetric& h;
    const CubicPair& q;
    const RaySchedule& sch;
    ComplexField s_unit;  // HLL: s at t = 1

    RayModel(const ComplexMetric& h, const CubicPair& q, const RaySchedule& sch) : h(h), q(q), sch(sch) {
        if (sch.mode == RayMode::HLL) s_unit = pair_cubics(h, hll_pair(q, 1.0));
    }
    ComplexField s(cplx t) const {
        if (sch.mode == RayMode::HLL) return t * t * s_unit;
        return pair_cubics(h, twistor_pair(q, std::exp(t * sch.direction)));
    }
    ComplexField s_t(cplx t) const {
        if (sch.mode == RayMode::HLL) return 2.0 * t * s_unit;
        return ComplexField::constant(h.domain(), 0.0);
    }
};

struct Tangent {
    VecC u;
    cplx t;
};

// Weighted inner product <a, b> = a_u^H b_u / n + conj(a_t) b_t.
cplx winner(const Tangent& a, const Tangent& b) {
    return a.u.dot(b.u) / double(a.u.size()) + std::conj(a.t) * b.t;
}

cplx rowdot(const VecC& row, const VecC& x) { return row.cwiseProduct(x).sum(); }

// Solves [J Gt; row d] x = [f; g] by block elimination with one refinement.
std::pair<VecC, cplx> bordered_solve(const OperatorMatrix& J, const Factorization& F, const VecC& Gt, const VecC& row,
                                     cplx d, const VecC& f, cplx g) {
    VecC b = F.solve(Gt);
    cplx den = d - rowdot(row, b);
    auto once = [&](const VecC& ff, cplx gg) {
        VecC a = F.solve(ff);
        cplx dt = (gg - rowdot(row, a)) / den;
        return std::pair<VecC, cplx>{a - b * dt, dt};
    };
    auto [x, xt] = once(f, g);
    VecC rf = f - (J.apply(x) + Gt * xt);
    cplx rg = g - (rowdot(row, x) + d * xt);
    auto [y, yt] = once(rf, rg);
    return {x + y, xt + yt};
}

RayPoint make_point(const ComplexField& u, cplx t, const ComplexField& s, int branch, cplx eig, double tan_t,
                    double res) {
    RayPoint p;
    p.t = t.real();
    p.branch = branch;
    p.u = u;
    p.s_mean = s.mean();
    p.e2u_mean = (2.0 * u).exp().mean();
    p.u_mean = u.mean();
    p.eigenvalue = eig;
    p.tangent_t = tan_t;
    p.residual = res;
    return p;
}

} // namespace

RayResult continue_ray(const ComplexMetric& h, const CubicPair& q, const ComplexField& u0, const RaySchedule& sch) {
    require_positive(h);
    sch.validate();
    const GridDomain& d = h.domain();
    DofMap dofs = DofMap::of(d);
    const double nn = double(dofs.size());
    if (use_gmres(h, dofs.size(), sch.newton))
        throw DomainError("continuation needs an assembled linearization; grid exceeds the dense limit");
    const OperatorMatrix lap = laplacian_matrix(h);
    RayModel model(h, q, sch);
    const GaussOptions& nopt = sch.newton;
    const double tmin = std::min(sch.params.front(), sch.params.back());
    const double tmax = std::max(sch.params.front(), sch.params.back());
    const double dir = sch.params.back() > sch.params.front() ? 1.0 : -1.0;

    ComplexField bnd = nopt.boundary ? *nopt.boundary : u0;
    cplx t = sch.params.front();
    ComplexField u = newton_core(h, &lap, model.s(t), with_boundary(u0, bnd), nopt).u;

    auto jac = [&](const ComplexField& uu, cplx tt) {
        return lap.with_potential(linearization_potential(uu, model.s(tt)));
    };
    auto gt_vec = [&](const ComplexField& uu, cplx tt) { return dofs.restrict(model.s_t(tt) * (-4.0 * uu).exp()); };

    RayResult out;
    int branch = 0;
    Tangent tau{VecC::Zero(Eigen::Index(dofs.size())), dir};
    MatC eigblock = start_block(Eigen::Index(dofs.size()));

    // Tangent and nearest eigenvalue at an accepted point.
    auto analyse = [&](const ComplexField& uu, cplx tt, const Tangent& prev, Tangent& tan, EigenEstimate& eig) {
        OperatorMatrix J = jac(uu, tt);
        Factorization F = factor_checked(J, 0.0);
        VecC Gt = gt_vec(uu, tt);
        VecC row = prev.u.conjugate() / nn;
        auto [z, zt] = bordered_solve(J, F, Gt, row, std::conj(prev.t), VecC::Zero(Gt.size()), 1.0);
        tan = {z, zt};
        double nrm = std::sqrt(std::real(winner(tan, tan)));
        tan.u /= nrm;
        tan.t /= nrm;
        if (std::real(winner(tan, prev)) < 0) {
            tan.u = -tan.u;
            tan.t = -tan.t;
        }
        eig = nearest_eigen(J, F, eigblock);
    };

    Tangent tan;
    EigenEstimate eig;
    analyse(u, t, tau, tan, eig);
    tau = tan;
    out.path.push_back(make_point(u, t, model.s(t), branch, eig.value, tau.t.real(), residual_s(h, model.s(t), u).max_abs()));

    const std::size_t none = std::size_t(-1);
    std::size_t turn_at = none, cross_at = none;
    std::size_t fold_from = 0;
    double ds = sch.step;
    for (int step = 0; step < sch.max_steps; ++step) {
        if (t.real() < tmin - 1e-14 || t.real() > tmax + 1e-14 || u.max_abs() > 30) break;
        bool accepted = false;
        ComplexField un;
        cplx tn;
        while (!accepted) {
            if (ds < sch.min_step) {
                double lo = out.path.back().t, hi = out.path.back().t;
                if (out.path.size() > 1) lo = std::min(lo, out.path[out.path.size() - 2].t);
                throw StepUnderflowError("continuation step underflow near t = " + std::to_string(t.real()), lo, hi);
            }
            VecC U = dofs.restrict(u);
            VecC Up = U + ds * tau.u;
            cplx tp = t + ds * tau.t;
            VecC Uc = Up;
            cplx tc = tp;
            bool ok = false;
            double inc = INFINITY;
            for (int it = 0; it < 10; ++it) {
                ComplexField uc = dofs.extend(Uc, u);
                ComplexField G = residual_s(h, model.s(tc), uc);
                double r = G.max_abs();
                if (!std::isfinite(r)) break;
                cplx N = tau.u.dot(Uc - Up) / nn + std::conj(tau.t) * (tc - tp);
                if (r <= nopt.tol && std::abs(N) <= 1e-12 && inc <= 1e-8 * (1 + std::sqrt(Uc.squaredNorm() / nn))) {
                    ok = true;
                    un = uc;
                    tn = tc;
                    if (it <= 3) ds = std::min(sch.max_step, 1.5 * ds);
                    break;
                }
                OperatorMatrix J = jac(uc, tc);
                Factorization F(J);
                auto [du, dt] = bordered_solve(J, F, gt_vec(uc, tc), tau.u.conjugate() / nn, std::conj(tau.t),
                                               -dofs.restrict(G), -N);
                Uc += du;
                tc += dt;
                inc = std::sqrt(du.squaredNorm() / nn + std::norm(dt));
                if (!std::isfinite(inc)) break;
            }
            if (ok) accepted = true;
            else ds *= 0.5;
        }
        Tangent prev = tau;
        cplx prev_eig = eig.value;
        analyse(un, tn, prev, tan, eig);
        u = un;
        t = tn;
        tau = tan;
        std::size_t idx = out.path.size();
        if (real_sign(tau.t) != real_sign(prev.t)) turn_at = idx;
        if (std::isfinite(prev_eig.real()) && real_sign(eig.value) != real_sign(prev_eig)) cross_at = idx;
        if (turn_at != none && idx - turn_at > 1) turn_at = none;
        if (cross_at != none && idx - cross_at > 1) cross_at = none;
        if (turn_at != none && cross_at != none) {
            std::size_t lo_i = std::min(turn_at, cross_at) - 1;
            ++branch;
            if (!out.fold.detected) {
                out.fold.detected = out.fold.turning_point = out.fold.eigen_crossing = true;
                out.fold.t_before = out.path[lo_i].t;
                out.fold.t_after = t.real();
                fold_from = lo_i;
            }
            turn_at = cross_at = none;
        }
        out.path.push_back(make_point(u, t, model.s(t), branch, eig.value, tau.t.real(), residual_s(h, model.s(t), u).max_abs()));
    }
    out.branches = branch + 1;

    if (out.fold.detected) {
        // Start from the bracketing point nearest the fold.
        std::size_t best = fold_from;
        for (std::size_t i = fold_from; i < std::min(out.path.size(), fold_from + 3); ++i)
            if (std::abs(out.path[i].eigenvalue) < std::abs(out.path[best].eigenvalue)) best = i;
        ComplexField uf = out.path[best].u;
        cplx tf = out.path[best].t;
        OperatorMatrix J0 = jac(uf, tf);
        VecC v0 = nearest_eigen(J0, Factorization(J0)).vector;
        VecC vnull, wl;
        cplx gval = 0;
        for (int it = 0; it < 30; ++it) {
            ComplexField s = model.s(tf), st = model.s_t(tf);
            OperatorMatrix J = jac(uf, tf);
            OperatorMatrix M = bordered(J, v0, v0.conjugate(), 0.0);
            Factorization FM(M);
            Eigen::Index n = Eigen::Index(dofs.size());
            VecC e = VecC::Zero(n + 1);
            e[n] = 1.0;
            VecC vg = FM.solve(e), wg = FM.solve_adjoint(e);
            vnull = vg.head(n);
            wl = wg.head(n);
            gval = vg[n];
            ComplexField e4 = (-4.0 * uf).exp();
            VecC cu = dofs.restrict(-4.0 * (2.0 * uf).exp() + 16.0 * s * e4);
            VecC ct = dofs.restrict(-4.0 * st * e4);
            VecC Gt = dofs.restrict(st * e4);
            VecC grow = -(wl.conjugate().array() * cu.array() * vnull.array()).matrix();
            cplx gt = -(wl.conjugate().array() * ct.array() * vnull.array()).sum();
            VecC G = dofs.restrict(residual_s(h, s, uf));
            double r = G.lpNorm<Eigen::Infinity>();
            out.fold.refine_iterations = it;
            if (r <= nopt.tol && std::abs(gval) <= 1e-10) {
                out.fold.refined = true;
                break;
            }
            OperatorMatrix K = bordered(J, Gt, grow, gt);
            VecC rhs(n + 1);
            rhs.head(n) = -G;
            rhs[n] = -gval;
            VecC step = Factorization(K).solve(rhs);
            uf += dofs.extend(step.head(n));
            tf += step[n];
            if (!step.allFinite()) break;
        }
        if (out.fold.refined) {
            out.fold.t_star = tf.real();
            out.fold.s_star = model.s(tf).mean();
            out.fold.e2u_star = (2.0 * uf).exp().mean();
            OperatorMatrix J = jac(uf, tf);
            VecC v = vnull / vnull.norm();
            out.fold.eigenvalue = v.dot(J.apply(v));
            out.fold.constant_alignment = constant_alignment(v);
        } else {
            const RayPoint& p = out.path[best];
            out.fold.t_star = p.t;
            out.fold.s_star = p.s_mean;
            out.fold.e2u_star = p.e2u_mean;
            out.fold.eigenvalue = p.eigenvalue;
        }
    }

    // Solutions at the schedule parameters on every branch that reaches them.
    for (int b = 0; b < out.branches; ++b)
        for (double tp : sch.params) {
            for (std::size_t i = 0; i + 1 < out.path.size(); ++i) {
                const RayPoint& p = out.path[i];
                const RayPoint& r = out.path[i + 1];
                if (p.branch != b || r.branch != b) continue;
                if ((p.t - tp) * (r.t - tp) > 0) continue;
                double w = r.t == p.t ? 0.0 : (tp - p.t) / (r.t - p.t);
                ComplexField guess = (1 - w) * p.u + w * r.u;
                try {
                    ComplexField s = model.s(tp);
                    ComplexField us = newton_core(h, &lap, s, guess, nopt).u;
                    OperatorMatrix J = jac(us, tp);
                    Factorization F(J);
                    auto e = nearest_eigen(J, F);
                    out.samples.push_back(make_point(us, tp, s, b, e.value, NAN, residual_s(h, s, us).max_abs()));
                } catch (const Error&) {
                }
                break;
            }
        }
    return out;
}

json spectral_summary_to_json(const SpectralSummary& s) {
    if (!s.computed) return {{"computed", false}};
    return {{"computed", true},
            {"smallest_eigenvalue", cplx_to_json(s.smallest_eigenvalue)},
            {"eigen_residual", s.eigen_residual},
            {"sigma_min", s.sigma_min},
            {"constant_alignment", s.constant_alignment}};
}

json gauss_solution_to_json(const GaussSolution& sol, const json& field_refs) {
    json j;
    j["params"] = {{"domain", domain_to_json(sol.h.domain())},
                   {"metric", metric_descriptor(sol.h)},
                   {"s_mean", cplx_to_json(sol.s.mean())},
                   {"s_max_abs", sol.s.max_abs()}};
    j["residual_norm"] = sol.residual_norm;
    j["iterations"] = sol.iterations;
    j["linear_solver"] = sol.linear_solver;
    j["newton_trace"] = sol.newton_trace;
    j["imag_trace"] = sol.imag_trace;
    double c = quadratic_constant(sol.newton_trace);
    j["quadratic_constant"] = std::isfinite(c) ? json(c) : json(nullptr);
    j["u_mean"] = cplx_to_json(sol.u.mean());
    j["u_max_abs"] = sol.u.max_abs();
    j["spectral_summary"] = spectral_summary_to_json(sol.spectral);
    j["fields"] = field_refs;
    return j;
}

json fold_to_json(const FoldReport& f) {
    json j = {{"detected", f.detected}};
    if (!f.detected) return j;
    j["turning_point"] = f.turning_point;
    j["eigen_crossing"] = f.eigen_crossing;
    j["refined"] = f.refined;
    j["refine_iterations"] = f.refine_iterations;
    j["arc_bracket"] = {f.t_before, f.t_after};
    j["t_star"] = f.t_star;
    j["s_star"] = cplx_to_json(f.s_star);
    j["e2u_star"] = cplx_to_json(f.e2u_star);
    j["eigenvalue"] = cplx_to_json(f.eigenvalue);
    j["constant_alignment"] = f.constant_alignment;
    return j;
}

std::string ray_csv(const RayResult& r) {
    std::ostringstream os;
    os << "kind,t,branch,s_re,s_im,u_re,u_im,e2u_re,e2u_im,eig_re,eig_im,tangent_t,residual\n";
    char buf[512];
    auto row = [&](const char* kind, const RayPoint& p) {
        std::snprintf(buf, sizeof buf, "%s,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", kind,
                      p.t, p.branch, p.s_mean.real(), p.s_mean.imag(), p.u_mean.real(), p.u_mean.imag(),
                      p.e2u_mean.real(), p.e2u_mean.imag(), p.eigenvalue.real(), p.eigenvalue.imag(), p.tangent_t,
                      p.residual);
        os << buf;
    };
    for (const auto& p : r.path) row("path", p);
    for (const auto& p : r.samples) row("sample", p);
    if (r.fold.detected) {
        std::snprintf(buf, sizeof buf, "fold_bracket,%.17g,,,,,,,,,,,\nfold_bracket,%.17g,,,,,,,,,,,\n", r.fold.t_before,
                      r.fold.t_after);
        os << buf;
        RayPoint f;
        f.t = r.fold.t_star;
        f.branch = -1;
        f.s_mean = r.fold.s_star;
        f.e2u_mean = r.fold.e2u_star;
        f.u_mean = 0.5 * std::log(r.fold.e2u_star);
        f.eigenvalue = r.fold.eigenvalue;
        f.tangent_t = 0;
        f.residual = 0;
        row("fold", f);
    }
    return os.str();
}

} // namespace caslab
