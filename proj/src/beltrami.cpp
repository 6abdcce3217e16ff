#include "caslab/beltrami.hpp"

#include "caslab/error.hpp"
#include "fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace caslab {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

enum class Kernel { Cauchy, Beurling };

int signed_freq(int p, int n) { return p < (n + 1) / 2 ? p : p - n; }

// Zero-padded Fourier multipliers for the truncated plane kernels. The
// truncation factor depends on |k| only, so it is evaluated on one quadrant.
class PaddedOperator {
public:
    PaddedOperator(const GridDomain& d, int pad) : d_(d) {
        if (pad < 2) throw DomainError("padding factor must be at least 2");
        double dx = d.dx(), dy = d.dy();
        double diam = std::hypot((d.nx - 1) * dx, (d.ny - 1) * dy) + std::max(dx, dy);
        px_ = std::max(pad * d.nx, int(std::ceil(d.nx + diam / dx)) + 2);
        py_ = std::max(pad * d.ny, int(std::ceil(d.ny + diam / dy)) + 2);
        std::size_t n = std::size_t(px_) * py_;
        cauchy_.resize(n);
        beurling_.resize(n);
        int hx = px_ / 2 + 1, hy = py_ / 2 + 1;
        std::vector<double> trunc(std::size_t(hx) * hy);
        for (int q = 0; q < hy; ++q)
            for (int p = 0; p < hx; ++p) {
                double kappa = std::hypot(two_pi * p / (px_ * dx), two_pi * q / (py_ * dy));
                trunc[std::size_t(q) * hx + p] = 1.0 - std::cyl_bessel_j(0.0, kappa * diam);
            }
        double norm = 1.0 / double(n);
        for (int q = 0; q < py_; ++q) {
            int fq = signed_freq(q, py_);
            double ky = two_pi * fq / (py_ * dy);
            for (int p = 0; p < px_; ++p) {
                int fp = signed_freq(p, px_);
                cplx k(two_pi * fp / (px_ * dx), ky);
                std::size_t i = std::size_t(q) * px_ + p;
                if (fp == 0 && fq == 0) {
                    cauchy_[i] = beurling_[i] = 0.0;
                    continue;
                }
                double t = trunc[std::size_t(std::abs(fq)) * hx + std::abs(fp)] * norm;
                cauchy_[i] = cplx(0, -2.0) * t / k;
                beurling_[i] = std::conj(k) / k * t;
            }
        }
    }

    ComplexField apply(const ComplexField& h, Kernel kind) const {
        if (!h.domain().same_as(d_)) h.check_compatible(ComplexField::constant(d_, 0.0));
        const auto& mult = kind == Kernel::Cauchy ? cauchy_ : beurling_;
        std::vector<cplx> buf(mult.size(), 0.0);
        for (int k = 0; k < d_.ny; ++k)
            for (int j = 0; j < d_.nx; ++j) buf[std::size_t(k) * px_ + j] = h(j, k);
        detail::fft2(buf, px_, py_, -1);
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] *= mult[i];
        detail::fft2(buf, px_, py_, +1);
        std::vector<cplx> out(d_.size());
        for (int k = 0; k < d_.ny; ++k)
            for (int j = 0; j < d_.nx; ++j) out[d_.index(j, k)] = buf[std::size_t(k) * px_ + j];
        return ComplexField(d_, std::move(out));
    }

    int padded_nx() const { return px_; }
    int padded_ny() const { return py_; }

private:
    GridDomain d_;
    int px_ = 0, py_ = 0;
    std::vector<cplx> cauchy_, beurling_;
};

cplx node_z(const GridDomain& d, std::size_t i) { return d.node(int(i % std::size_t(d.nx)), int(i / std::size_t(d.nx))); }

} // namespace

ComplexField cauchy_transform(const ComplexField& h, int pad_factor) {
    return PaddedOperator(h.domain(), pad_factor).apply(h, Kernel::Cauchy);
}

ComplexField beurling_transform(const ComplexField& h, int pad_factor) {
    return PaddedOperator(h.domain(), pad_factor).apply(h, Kernel::Beurling);
}

ComplexField beurling_periodic(const ComplexField& h) {
    const GridDomain& d = h.domain();
    std::vector<cplx> a(d.size());
    auto phase = [&](int j, int k) { return std::polar(1.0, -std::numbers::pi * (double(j) / d.nx + double(k) / d.ny)); };
    for (int k = 0; k < d.ny; ++k)
        for (int j = 0; j < d.nx; ++j) a[d.index(j, k)] = h(j, k) * phase(j, k);
    detail::fft2(a, d.nx, d.ny, -1);
    double lx = d.nx * d.dx(), ly = d.ny * d.dy();
    for (int q = 0; q < d.ny; ++q) {
        int mq = q < d.ny / 2 ? q : q - d.ny;
        double ky = two_pi * (mq + 0.5) / ly;
        for (int p = 0; p < d.nx; ++p) {
            int mp = p < d.nx / 2 ? p : p - d.nx;
            cplx k(two_pi * (mp + 0.5) / lx, ky);
            a[d.index(p, q)] *= std::conj(k) / k / double(d.size());
        }
    }
    detail::fft2(a, d.nx, d.ny, +1);
    for (int k = 0; k < d.ny; ++k)
        for (int j = 0; j < d.nx; ++j) a[d.index(j, k)] *= std::conj(phase(j, k));
    return ComplexField(d, std::move(a));
}

QCMap solve_beltrami(const ComplexField& mu, const BeltramiOptions& opt) {
    const GridDomain& d = mu.domain();
    double sup = mu.max_abs();
    if (!(sup < 1.0)) throw PositivityError("Beltrami coefficient has sup |mu| = " + std::to_string(sup) + " >= 1");
    for (int k = 0; k < d.ny; ++k)
        for (int j = 0; j < d.nx; ++j) {
            bool edge = j < opt.support_margin || k < opt.support_margin || j >= d.nx - opt.support_margin ||
                        k >= d.ny - opt.support_margin;
            if (edge && std::abs(mu(j, k)) > 0)
                throw DomainError("Beltrami coefficient support touches the window edge at node (" + std::to_string(j) +
                                  ", " + std::to_string(k) + ")");
        }
    PaddedOperator T(d, opt.pad_factor);
    QCMap out;
    ComplexField h = mu;
    double scale = std::max(1.0, mu.l2_norm());
    double prev = 0;
    for (int it = 1;; ++it) {
        ComplexField next = mu * T.apply(h, Kernel::Beurling) + mu;
        double inc = (next - h).l2_norm();
        out.increments.push_back(inc);
        if (prev > 0) out.contraction = inc / prev;
        prev = inc;
        h = std::move(next);
        out.iterations = it;
        out.residual = inc;
        if (inc <= opt.tol * scale) break;
        if (it >= opt.max_iter)
            throw ConvergenceError("Beltrami iteration did not converge in " + std::to_string(it) +
                                   " steps; increment " + std::to_string(inc) + ", contraction estimate " +
                                   std::to_string(out.contraction) + ", sup|mu| " + std::to_string(sup));
    }
    ComplexField z = make_field(d, [](cplx w) { return w; });
    ComplexField c = T.apply(h, Kernel::Cauchy);
    out.f = (z + c).labelled("f");
    out.f_z = (1.0 + T.apply(h, Kernel::Beurling)).labelled("f_z");
    out.f_zbar = h.labelled("f_zbar");
    return out;
}

namespace {

// f - z is smooth across the whole grid, so it is interpolated instead of f.
struct Evaluator {
    const QCMap& m;
    ComplexField offset;
    int order;
    QCJet at(cplx z) const {
        return {z + interpolate(offset, z, order), interpolate(m.f_z, z, order), interpolate(m.f_zbar, z, order)};
    }
};

Evaluator evaluator(const QCMap& m, int order) {
    return {m, m.f - make_field(m.f.domain(), [](cplx w) { return w; }), order};
}

} // namespace

QCJet evaluate(const QCMap& m, cplx z, int order) { return evaluator(m, order).at(z); }

ComplexField inverse_coefficient(const QCMap& m, const GridDomain& target) {
    Evaluator ev = evaluator(m, 8);
    std::vector<cplx> out(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        cplx w = node_z(target, i);
        cplx z = w;
        QCJet J{};
        for (int it = 0; it < 50; ++it) {
            J = ev.at(z);
            cplx r = J.f - w;
            if (std::abs(r) < 1e-14 * (1.0 + std::abs(w))) break;
            double det = std::norm(J.f_z) - std::norm(J.f_zbar);
            z += (-std::conj(J.f_z) * r + J.f_zbar * std::conj(r)) / det;
        }
        out[i] = -J.f_zbar / std::conj(J.f_z);
    }
    return ComplexField(target, std::move(out), "mu_inverse");
}

double composition_defect(const QCMap& f, const QCMap& g) {
    Evaluator eg = evaluator(g, 8);
    const GridDomain& d = f.f.domain();
    const GridDomain& e = g.f.domain();
    double worst = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        cplx w = f.f[i];
        cplx rel = w - e.origin;
        if (rel.real() < 0 || rel.imag() < 0 || rel.real() > (e.nx - 1) * e.dx() || rel.imag() > (e.ny - 1) * e.dy())
            continue;
        worst = std::max(worst, std::abs(eg.at(w).f - node_z(d, i)));
    }
    return worst;
}

double smooth_cutoff(double r, double r0, double r1) {
    if (r <= r0) return 1.0;
    if (r >= r1) return 0.0;
    double t = (r1 - r) / (r1 - r0);
    double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

ComplexField radial_stretch_coefficient(const GridDomain& d, double k, double r0, double r1) {
    return make_field(d, [=](cplx z) {
        double r = std::abs(z);
        if (r == 0) return cplx(0.0);
        return k * smooth_cutoff(r, r0, r1) * z / std::conj(z);
    }, "mu");
}

} // namespace caslab
