#include "caslab/grid.hpp"

#include "caslab/error.hpp"
#include "fft.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace caslab {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

std::string node_text(const GridDomain& d, std::size_t i) {
    int j = int(i % std::size_t(d.nx));
    int k = int(i / std::size_t(d.nx));
    return "(" + std::to_string(j) + ", " + std::to_string(k) + ")";
}

// Signed integer frequency of FFT bin p on n points; nullopt for the Nyquist bin.
std::optional<int> frequency(int p, int n) {
    if (n % 2 == 0 && p == n / 2) return std::nullopt;
    return p <= n / 2 ? p : p - n;
}

struct Stencil {
    int start;
    std::vector<double> w;
};

std::vector<Stencil> stencils(int n, int order, bool periodic, double h, int m = 1) {
    if (order < 2 || order % 2 != 0) throw DomainError("finite-difference order must be even and >= 2");
    int width = order + 1;
    if (n < width) throw DomainError("grid of " + std::to_string(n) + " points too small for order " +
                                     std::to_string(order) + " differences");
    int half = order / 2;
    std::vector<Stencil> out(n);
    std::vector<double> offs(width);
    for (int i = 0; i < n; ++i) {
        int start = periodic ? i - half : std::clamp(i - half, 0, n - width);
        for (int q = 0; q < width; ++q) offs[q] = double(start + q - i);
        auto w = fornberg_weights(0.0, offs, m);
        for (double& v : w) v /= std::pow(h, m);
        out[i] = {start, std::move(w)};
    }
    return out;
}

ComplexField fd_axis(const ComplexField& f, int axis, int order, int m = 1) {
    const GridDomain& d = f.domain();
    int n = axis == 0 ? d.nx : d.ny;
    auto st = stencils(n, order, d.periodic, axis == 0 ? d.dx() : d.dy(), m);
    std::vector<cplx> out(f.size());
    const auto& v = f.values();
    for (int k = 0; k < d.ny; ++k) {
        for (int j = 0; j < d.nx; ++j) {
            const Stencil& s = st[axis == 0 ? j : k];
            cplx acc = 0.0;
            for (std::size_t q = 0; q < s.w.size(); ++q) {
                int m = s.start + int(q);
                if (d.periodic) m = ((m % n) + n) % n;
                acc += s.w[q] * (axis == 0 ? v[d.index(m, k)] : v[d.index(j, m)]);
            }
            out[d.index(j, k)] = acc;
        }
    }
    return ComplexField(d, std::move(out));
}

enum class Op { X, Y, Z, Zbar };

ComplexField spectral(const ComplexField& f, Op op) {
    return fourier_multiply(f, [op](double kx, double ky) -> cplx {
        const cplx i(0, 1);
        switch (op) {
        case Op::X: return i * kx;
        case Op::Y: return i * ky;
        case Op::Z: return 0.5 * (i * kx + ky);
        case Op::Zbar: return 0.5 * (i * kx - ky);
        }
        return 0.0;
    });
}

ComplexField derivative(const ComplexField& f, Op op, const DiffOptions& opt) {
    if (resolve_backend(f.domain(), opt) == DiffBackend::Spectral) return spectral(f, op);
    const cplx i(0, 1);
    switch (op) {
    case Op::X: return fd_axis(f, 0, opt.fd_order);
    case Op::Y: return fd_axis(f, 1, opt.fd_order);
    case Op::Z: return 0.5 * (fd_axis(f, 0, opt.fd_order) - i * fd_axis(f, 1, opt.fd_order));
    case Op::Zbar: return 0.5 * (fd_axis(f, 0, opt.fd_order) + i * fd_axis(f, 1, opt.fd_order));
    }
    return f;
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int s = 0; s < 4; ++s) b.push_back(std::uint8_t(v >> (8 * s)));
}
void put_f64(std::vector<std::uint8_t>& b, double x) {
    auto v = std::bit_cast<std::uint64_t>(x);
    for (int s = 0; s < 8; ++s) b.push_back(std::uint8_t(v >> (8 * s)));
}
std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int s = 0; s < 4; ++s) v |= std::uint32_t(p[s]) << (8 * s);
    return v;
}
double get_f64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int s = 0; s < 8; ++s) v |= std::uint64_t(p[s]) << (8 * s);
    return std::bit_cast<double>(v);
}

constexpr std::uint32_t snapshot_version = 1;

} // namespace

GridDomain GridDomain::torus(int nx, int ny, double lx, double ly, cplx origin) {
    GridDomain d{nx, ny, lx, ly, origin, true};
    d.validate();
    return d;
}

GridDomain GridDomain::window(int nx, int ny, double lx, double ly, cplx origin) {
    GridDomain d{nx, ny, lx, ly, origin, false};
    d.validate();
    return d;
}

GridDomain GridDomain::resampled(double factor) const {
    GridDomain d = *this;
    d.nx = int(std::lround(nx * factor));
    d.ny = int(std::lround(ny * factor));
    d.validate();
    return d;
}

bool GridDomain::same_as(const GridDomain& o) const {
    return nx == o.nx && ny == o.ny && lx == o.lx && ly == o.ly && origin == o.origin && periodic == o.periodic;
}

void GridDomain::validate() const {
    if (nx < 4 || ny < 4) throw DomainError("grid needs at least 4 nodes per axis");
    if (!(lx > 0) || !(ly > 0) || !std::isfinite(lx) || !std::isfinite(ly))
        throw DomainError("grid extents must be positive and finite");
}

ComplexField::ComplexField(GridDomain domain, std::vector<cplx> values, std::string label)
    : domain_(domain), values_(std::move(values)), label_(std::move(label)) {
    if (values_.size() != domain_.size())
        throw DomainError("field has " + std::to_string(values_.size()) + " samples, grid has " +
                          std::to_string(domain_.size()));
}

ComplexField ComplexField::constant(const GridDomain& d, cplx value, std::string label) {
    return ComplexField(d, std::vector<cplx>(d.size(), value), std::move(label));
}

ComplexField ComplexField::labelled(std::string label) const {
    ComplexField out = *this;
    out.label_ = std::move(label);
    return out;
}

double ComplexField::max_abs() const {
    double m = 0.0;
    for (const cplx& v : values_) m = std::max(m, std::abs(v));
    return m;
}

double ComplexField::l2_norm() const {
    double s = 0.0;
    for (const cplx& v : values_) s += std::norm(v);
    return std::sqrt(s * domain_.dx() * domain_.dy());
}

cplx ComplexField::mean() const {
    cplx s = 0.0;
    for (const cplx& v : values_) s += v;
    return s / double(values_.size());
}

std::size_t ComplexField::argmax_abs() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values_.size(); ++i)
        if (std::abs(values_[i]) > std::abs(values_[best])) best = i;
    return best;
}

ComplexField ComplexField::conj() const {
    return map([](cplx v) { return std::conj(v); });
}
ComplexField ComplexField::exp() const {
    return map([](cplx v) { return std::exp(v); });
}
ComplexField ComplexField::inverse() const {
    return map([](cplx v) { return 1.0 / v; });
}
ComplexField ComplexField::operator-() const {
    return map([](cplx v) { return -v; });
}

void ComplexField::check_compatible(const ComplexField& o) const {
    if (!domain_.same_as(o.domain_))
        throw DomainError("grid mismatch: " + std::to_string(domain_.nx) + "x" + std::to_string(domain_.ny) +
                          " vs " + std::to_string(o.domain_.nx) + "x" + std::to_string(o.domain_.ny));
}

ComplexField& ComplexField::operator+=(const ComplexField& o) {
    check_compatible(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
}
ComplexField& ComplexField::operator-=(const ComplexField& o) {
    check_compatible(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
}
ComplexField& ComplexField::operator*=(const ComplexField& o) {
    check_compatible(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] *= o.values_[i];
    return *this;
}
ComplexField& ComplexField::operator/=(const ComplexField& o) {
    check_compatible(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] /= o.values_[i];
    return *this;
}
ComplexField& ComplexField::operator*=(cplx s) {
    for (cplx& v : values_) v *= s;
    return *this;
}
ComplexField& ComplexField::operator+=(cplx s) {
    for (cplx& v : values_) v += s;
    return *this;
}

ComplexField operator+(ComplexField a, const ComplexField& b) { return a += b; }
ComplexField operator-(ComplexField a, const ComplexField& b) { return a -= b; }
ComplexField operator*(ComplexField a, const ComplexField& b) { return a *= b; }
ComplexField operator/(ComplexField a, const ComplexField& b) { return a /= b; }
ComplexField operator*(ComplexField a, cplx s) { return a *= s; }
ComplexField operator*(cplx s, ComplexField a) { return a *= s; }
ComplexField operator/(ComplexField a, cplx s) { return a *= 1.0 / s; }
ComplexField operator+(ComplexField a, cplx s) { return a += s; }
ComplexField operator+(cplx s, ComplexField a) { return a += s; }
ComplexField operator-(ComplexField a, cplx s) { return a += -s; }
ComplexField operator-(cplx s, const ComplexField& a) {
    return a.map([s](cplx v) { return s - v; });
}
ComplexField operator/(cplx s, const ComplexField& a) {
    return a.map([s](cplx v) { return s / v; });
}

ComplexField make_field(const GridDomain& d, const std::function<cplx(cplx)>& gen, std::string label) {
    d.validate();
    std::vector<cplx> v(d.size());
    for (int k = 0; k < d.ny; ++k)
        for (int j = 0; j < d.nx; ++j) {
            cplx x = gen(d.node(j, k));
            if (!std::isfinite(x.real()) || !std::isfinite(x.imag()))
                throw NonFiniteError("generator returned a non-finite value", j, k);
            v[d.index(j, k)] = x;
        }
    return ComplexField(d, std::move(v), std::move(label));
}

std::vector<ComplexField> sample_map(const GridDomain& d, std::size_t k,
                                     const std::function<void(cplx, std::span<cplx>)>& gen) {
    d.validate();
    std::vector<std::vector<cplx>> cols(k, std::vector<cplx>(d.size()));
    std::vector<cplx> buf(k);
    for (int r = 0; r < d.ny; ++r)
        for (int j = 0; j < d.nx; ++j) {
            gen(d.node(j, r), buf);
            for (std::size_t c = 0; c < k; ++c) {
                if (!std::isfinite(buf[c].real()) || !std::isfinite(buf[c].imag()))
                    throw NonFiniteError("map component " + std::to_string(c) + " is non-finite", j, r);
                cols[c][d.index(j, r)] = buf[c];
            }
        }
    std::vector<ComplexField> out;
    out.reserve(k);
    for (auto& c : cols) out.emplace_back(d, std::move(c));
    return out;
}

DiffBackend resolve_backend(const GridDomain& d, const DiffOptions& opt) {
    if (opt.backend == DiffBackend::Auto) return d.periodic ? DiffBackend::Spectral : DiffBackend::FiniteDifference;
    if (opt.backend == DiffBackend::Spectral && !d.periodic)
        throw DomainError("spectral differentiation needs a periodic domain");
    return opt.backend;
}

ComplexField d_x(const ComplexField& f, const DiffOptions& opt) { return derivative(f, Op::X, opt); }
ComplexField d_y(const ComplexField& f, const DiffOptions& opt) { return derivative(f, Op::Y, opt); }
ComplexField d_z(const ComplexField& f, const DiffOptions& opt) { return derivative(f, Op::Z, opt); }
ComplexField d_zbar(const ComplexField& f, const DiffOptions& opt) { return derivative(f, Op::Zbar, opt); }

ComplexField d_zzbar(const ComplexField& f, const DiffOptions& opt) {
    const GridDomain& d = f.domain();
    if (resolve_backend(d, opt) == DiffBackend::FiniteDifference)
        return 0.25 * (fd_axis(f, 0, opt.fd_order, 2) + fd_axis(f, 1, opt.fd_order, 2));
    std::vector<cplx> a = f.values();
    detail::fft2(a, d.nx, d.ny, -1);
    const double norm = 1.0 / double(d.size());
    for (int q = 0; q < d.ny; ++q) {
        double ky = two_pi * (q <= d.ny / 2 ? q : q - d.ny) / d.ly;
        for (int p = 0; p < d.nx; ++p) {
            double kx = two_pi * (p <= d.nx / 2 ? p : p - d.nx) / d.lx;
            a[d.index(p, q)] *= -0.25 * (kx * kx + ky * ky) * norm;
        }
    }
    detail::fft2(a, d.nx, d.ny, +1);
    return ComplexField(d, std::move(a));
}

ComplexField fourier_multiply(const ComplexField& f, const std::function<cplx(double, double)>& m) {
    const GridDomain& d = f.domain();
    if (!d.periodic) throw DomainError("Fourier multipliers need a periodic domain");
    std::vector<cplx> a = f.values();
    detail::fft2(a, d.nx, d.ny, -1);
    const double norm = 1.0 / double(d.size());
    for (int q = 0; q < d.ny; ++q) {
        auto fy = frequency(q, d.ny);
        double ky = fy ? two_pi * *fy / d.ly : 0.0;
        for (int p = 0; p < d.nx; ++p) {
            auto fx = frequency(p, d.nx);
            double kx = fx ? two_pi * *fx / d.lx : 0.0;
            // Unpaired Nyquist bins see a zero wavenumber along their axis.
            a[d.index(p, q)] *= m(kx, ky) * norm;
        }
    }
    detail::fft2(a, d.nx, d.ny, +1);
    return ComplexField(d, std::move(a));
}

ComplexField log_field(const ComplexField& f, double max_jump) {
    const GridDomain& d = f.domain();
    const auto& v = f.values();
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] == 0.0 || !std::isfinite(std::abs(v[i])))
            throw BranchError("logarithm undefined: zero or non-finite value at node " + node_text(d, i));
    auto step = [&](std::size_t a, std::size_t b) {
        cplx inc = std::log(v[b] / v[a]);
        if (std::abs(inc.imag()) > max_jump)
            throw BranchError("phase jump of " + std::to_string(inc.imag()) + " rad near node " + node_text(d, b) +
                              "; field under-resolved");
        return inc;
    };
    std::vector<cplx> out(v.size());
    out[0] = std::log(v[0]);
    for (int k = 1; k < d.ny; ++k) out[d.index(0, k)] = out[d.index(0, k - 1)] + step(d.index(0, k - 1), d.index(0, k));
    for (int k = 0; k < d.ny; ++k)
        for (int j = 1; j < d.nx; ++j)
            out[d.index(j, k)] = out[d.index(j - 1, k)] + step(d.index(j - 1, k), d.index(j, k));
    // Vertical edges must agree with the row-wise branch, otherwise a zero sits inside.
    for (int k = 1; k < d.ny; ++k)
        for (int j = 1; j < d.nx; ++j) {
            std::size_t a = d.index(j, k - 1), b = d.index(j, k);
            double gap = (out[b] - out[a] - step(a, b)).imag();
            if (std::abs(gap) > std::numbers::pi)
                throw BranchError("no continuous logarithm: phase winds around a zero near node " + node_text(d, b));
        }
    if (d.periodic) {
        for (int k = 0; k < d.ny; ++k) {
            std::size_t a = d.index(d.nx - 1, k), b = d.index(0, k);
            if (std::abs((out[a] + step(a, b) - out[b]).imag()) > std::numbers::pi)
                throw BranchError("logarithm winds around the x-period in row " + std::to_string(k));
        }
        for (int j = 0; j < d.nx; ++j) {
            std::size_t a = d.index(j, d.ny - 1), b = d.index(j, 0);
            if (std::abs((out[a] + step(a, b) - out[b]).imag()) > std::numbers::pi)
                throw BranchError("logarithm winds around the y-period in column " + std::to_string(j));
        }
    }
    return ComplexField(d, std::move(out));
}

ComplexField sqrt_field(const ComplexField& f, std::optional<cplx> sign_hint) {
    ComplexField r = (0.5 * log_field(f)).exp();
    cplx ref = sign_hint.value_or(cplx(1.0, 0.0));
    if ((std::conj(ref) * r[0]).real() < 0) r *= -1.0;
    return r;
}

cplx interpolate(const ComplexField& f, cplx z, int order) {
    const GridDomain& d = f.domain();
    if (order < 2 || order % 2 != 0) throw DomainError("interpolation order must be even");
    if (d.nx < order || d.ny < order) throw DomainError("grid too small for interpolation order");
    auto axis = [&](double t, int n, std::vector<int>& idx, std::vector<double>& w) {
        int base = int(std::floor(t)) - order / 2 + 1;
        if (!d.periodic) base = std::clamp(base, 0, n - order);
        std::vector<double> nodes(order);
        idx.resize(order);
        for (int q = 0; q < order; ++q) {
            nodes[q] = double(base + q);
            idx[q] = d.periodic ? (((base + q) % n) + n) % n : base + q;
        }
        w = fornberg_weights(t, nodes, 0);
    };
    cplx rel = z - d.origin;
    std::vector<int> ix, iy;
    std::vector<double> wx, wy;
    axis(rel.real() / d.dx(), d.nx, ix, wx);
    axis(rel.imag() / d.dy(), d.ny, iy, wy);
    cplx acc = 0.0;
    for (int b = 0; b < order; ++b) {
        cplx row = 0.0;
        for (int a = 0; a < order; ++a) row += wx[a] * f(ix[a], iy[b]);
        acc += wy[b] * row;
    }
    return acc;
}

std::vector<double> fornberg_weights(double x0, std::span<const double> x, int m) {
    const int n = int(x.size());
    std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
    double c1 = 1.0, c4 = x[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        int mn = std::min(i, m);
        double c2 = 1.0, c5 = c4;
        c4 = x[i] - x0;
        for (int j = 0; j < i; ++j) {
            double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = c[i][m];
    return w;
}

std::vector<std::uint8_t> encode_snapshot(const ComplexField& f) {
    const GridDomain& d = f.domain();
    std::vector<std::uint8_t> b;
    b.reserve(32 + 16 * f.size());
    for (char c : {'C', 'A', 'S', 'F'}) b.push_back(std::uint8_t(c));
    put_u32(b, snapshot_version);
    put_u32(b, std::uint32_t(d.nx));
    put_u32(b, std::uint32_t(d.ny));
    put_f64(b, d.lx);
    put_f64(b, d.ly);
    for (const cplx& v : f.values()) {
        put_f64(b, v.real());
        put_f64(b, v.imag());
    }
    return b;
}

ComplexField decode_snapshot(std::span<const std::uint8_t> b, std::optional<GridDomain> layout) {
    if (b.size() < 32 || std::memcmp(b.data(), "CASF", 4) != 0) throw DomainError("not a field snapshot");
    if (get_u32(b.data() + 4) != snapshot_version)
        throw DomainError("unsupported snapshot version " + std::to_string(get_u32(b.data() + 4)));
    int nx = int(get_u32(b.data() + 8)), ny = int(get_u32(b.data() + 12));
    double lx = get_f64(b.data() + 16), ly = get_f64(b.data() + 24);
    GridDomain d = layout.value_or(GridDomain{nx, ny, lx, ly, {}, true});
    if (d.nx != nx || d.ny != ny || d.lx != lx || d.ly != ly)
        throw DomainError("snapshot header does not match the requested layout");
    d.validate();
    if (b.size() != 32 + 16 * d.size()) throw DomainError("snapshot payload has the wrong length");
    std::vector<cplx> v(d.size());
    const std::uint8_t* p = b.data() + 32;
    for (auto& x : v) {
        x = cplx(get_f64(p), get_f64(p + 8));
        p += 16;
    }
    return ComplexField(d, std::move(v));
}

void save_snapshot(const ComplexField& f, const std::filesystem::path& path) {
    auto bytes = encode_snapshot(f);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

ComplexField load_snapshot(const std::filesystem::path& path, std::optional<GridDomain> layout) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_snapshot(bytes, layout);
}

} // namespace caslab
