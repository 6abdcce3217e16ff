#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace caslab {

using cplx = std::complex<double>;

// Uniform rectangular grid. Periodic domains are tori with spacing L/n; windows
// are closed rectangles [origin, origin + L] sampled with spacing L/(n-1).
struct GridDomain {
    int nx = 0;
    int ny = 0;
    double lx = 1.0;
    double ly = 1.0;
    cplx origin{0.0, 0.0};
    bool periodic = true;

    static GridDomain torus(int nx, int ny, double lx, double ly, cplx origin = {});
    static GridDomain window(int nx, int ny, double lx, double ly, cplx origin = {});

    double dx() const { return periodic ? lx / nx : lx / (nx - 1); }
    double dy() const { return periodic ? ly / ny : ly / (ny - 1); }
    std::size_t size() const { return std::size_t(nx) * std::size_t(ny); }
    std::size_t index(int j, int k) const { return std::size_t(k) * std::size_t(nx) + std::size_t(j); }
    cplx node(int j, int k) const { return origin + cplx(j * dx(), k * dy()); }
    bool boundary(int j, int k) const { return j == 0 || k == 0 || j == nx - 1 || k == ny - 1; }

    // Same shape and extent, sampling density changed by `factor` per axis.
    GridDomain resampled(double factor) const;
    bool same_as(const GridDomain& o) const;
    void validate() const;
};

class ComplexField {
public:
    ComplexField() = default;
    ComplexField(GridDomain domain, std::vector<cplx> values, std::string label = {});

    static ComplexField constant(const GridDomain& d, cplx value, std::string label = {});

    const GridDomain& domain() const { return domain_; }
    const std::vector<cplx>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }
    cplx operator[](std::size_t i) const { return values_[i]; }
    cplx operator()(int j, int k) const { return values_[domain_.index(j, k)]; }
    const std::string& label() const { return label_; }
    ComplexField labelled(std::string label) const;

    double max_abs() const;
    double l2_norm() const;
    cplx mean() const;
    std::size_t argmax_abs() const;

    template <class F>
    ComplexField map(F&& f) const {
        std::vector<cplx> out(values_.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(values_[i]);
        return ComplexField(domain_, std::move(out));
    }
    template <class F>
    ComplexField zip(const ComplexField& o, F&& f) const {
        check_compatible(o);
        std::vector<cplx> out(values_.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(values_[i], o.values_[i]);
        return ComplexField(domain_, std::move(out));
    }

    ComplexField conj() const;
    ComplexField exp() const;
    ComplexField inverse() const;

    ComplexField operator-() const;
    ComplexField& operator+=(const ComplexField& o);
    ComplexField& operator-=(const ComplexField& o);
    ComplexField& operator*=(const ComplexField& o);
    ComplexField& operator/=(const ComplexField& o);
    ComplexField& operator*=(cplx s);
    ComplexField& operator+=(cplx s);

    void check_compatible(const ComplexField& o) const;

private:
    GridDomain domain_;
    std::vector<cplx> values_;
    std::string label_;
};

ComplexField operator+(ComplexField a, const ComplexField& b);
ComplexField operator-(ComplexField a, const ComplexField& b);
ComplexField operator*(ComplexField a, const ComplexField& b);
ComplexField operator/(ComplexField a, const ComplexField& b);
ComplexField operator*(ComplexField a, cplx s);
ComplexField operator*(cplx s, ComplexField a);
ComplexField operator/(ComplexField a, cplx s);
ComplexField operator+(ComplexField a, cplx s);
ComplexField operator+(cplx s, ComplexField a);
ComplexField operator-(ComplexField a, cplx s);
ComplexField operator-(cplx s, const ComplexField& a);
ComplexField operator/(cplx s, const ComplexField& a);

// Samples `gen` at every node. Throws NonFiniteError on NaN/inf.
ComplexField make_field(const GridDomain& d, const std::function<cplx(cplx)>& gen, std::string label = {});

// Samples a map into C^k; returns k fields.
std::vector<ComplexField> sample_map(const GridDomain& d, std::size_t k,
                                     const std::function<void(cplx, std::span<cplx>)>& gen);

enum class DiffBackend { Auto, Spectral, FiniteDifference };

struct DiffOptions {
    DiffBackend backend = DiffBackend::Auto;
    int fd_order = 6;
};

// Auto picks spectral on periodic domains and finite differences on windows.
DiffBackend resolve_backend(const GridDomain& d, const DiffOptions& opt);

ComplexField d_x(const ComplexField& f, const DiffOptions& opt = {});
ComplexField d_y(const ComplexField& f, const DiffOptions& opt = {});
ComplexField d_z(const ComplexField& f, const DiffOptions& opt = {});
ComplexField d_zbar(const ComplexField& f, const DiffOptions& opt = {});
// Quarter of the flat Laplacian from second-derivative stencils or symbols; unlike
// d_zbar(d_z f) it does not annihilate the Nyquist modes.
ComplexField d_zzbar(const ComplexField& f, const DiffOptions& opt = {});

// Multiplies Fourier coefficients by m(kx, ky); kx, ky are angular wavenumbers.
// Requires a periodic domain.
ComplexField fourier_multiply(const ComplexField& f, const std::function<cplx(double, double)>& m);

// Continuous logarithm obtained by unwrapping the phase along the first column
// and then each row. Throws BranchError if a zero is met, the phase jumps by more
// than `max_jump` between neighbours, or the branch winds around a periodic cycle.
ComplexField log_field(const ComplexField& f, double max_jump = 1.0);

// Continuous square root; the sign at node (0,0) has positive real part, or
// matches `sign_hint` if given.
ComplexField sqrt_field(const ComplexField& f, std::optional<cplx> sign_hint = std::nullopt);

// Local Lagrange interpolation with an order x order stencil (order even).
cplx interpolate(const ComplexField& f, cplx z, int order = 4);

// Binary snapshot: 32 byte header then little-endian (re, im) pairs, row-major.
std::vector<std::uint8_t> encode_snapshot(const ComplexField& f);
ComplexField decode_snapshot(std::span<const std::uint8_t> bytes, std::optional<GridDomain> layout = std::nullopt);
void save_snapshot(const ComplexField& f, const std::filesystem::path& path);
ComplexField load_snapshot(const std::filesystem::path& path, std::optional<GridDomain> layout = std::nullopt);

// Finite-difference weights at x0 for derivative `m` on the given nodes.
std::vector<double> fornberg_weights(double x0, std::span<const double> nodes, int m);

} // namespace caslab
