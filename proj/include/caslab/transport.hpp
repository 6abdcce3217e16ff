#pragma once

#include "caslab/error.hpp"
#include "caslab/io.hpp"

#include <functional>
#include <vector>

namespace caslab {

// Sum of c_jk (z - z0)^j (zbar - conj z0)^k over j + k <= N, with z and zbar
// treated as independent variables.
class PowerSeries2D {
public:
    PowerSeries2D() = default;
    explicit PowerSeries2D(int order, cplx center = 0.0);

    static PowerSeries2D constant(int order, cplx value, cplx center = 0.0);
    static PowerSeries2D monomial(int order, int j, int k, cplx coeff = 1.0, cplx center = 0.0);
    // z - z0 and zbar - conj(z0)
    static PowerSeries2D z(int order, cplx center = 0.0);
    static PowerSeries2D zbar(int order, cplx center = 0.0);

    int order() const { return order_; }
    cplx center() const { return center_; }
    std::size_t size() const { return c_.size(); }
    static std::size_t index(int j, int k) { return std::size_t((j + k) * (j + k + 1) / 2 + k); }

    cplx operator()(int j, int k) const;
    cplx& at(int j, int k);
    const std::vector<cplx>& coefficients() const { return c_; }
    std::vector<cplx>& coefficients() { return c_; }

    // Evaluation at local offsets (z - z0, zbar - conj z0).
    cplx eval(cplx dz, cplx dzbar) const;
    // sum |c_jk| r^{j+k} over j + k <= max_degree (all when negative)
    double ball_norm(double r, int max_degree = -1) const;
    bool finite() const;
    PowerSeries2D truncated(int degree) const;

    PowerSeries2D& operator+=(const PowerSeries2D& o);
    PowerSeries2D& operator-=(const PowerSeries2D& o);
    PowerSeries2D& operator*=(cplx s);

    void check_compatible(const PowerSeries2D& o) const;

private:
    int order_ = 0;
    cplx center_ = 0.0;
    std::vector<cplx> c_;
};

PowerSeries2D operator+(PowerSeries2D a, const PowerSeries2D& b);
PowerSeries2D operator-(PowerSeries2D a, const PowerSeries2D& b);
PowerSeries2D operator-(PowerSeries2D a);
PowerSeries2D operator*(const PowerSeries2D& a, const PowerSeries2D& b);
PowerSeries2D operator*(PowerSeries2D a, cplx s);
PowerSeries2D operator*(cplx s, PowerSeries2D a);
PowerSeries2D operator+(PowerSeries2D a, cplx s);

PowerSeries2D d_z(const PowerSeries2D& f);
PowerSeries2D d_zbar(const PowerSeries2D& f);
// Throws DomainError when the constant term vanishes.
PowerSeries2D inverse(const PowerSeries2D& f);
PowerSeries2D pow(const PowerSeries2D& f, int n);
// f(a(z, zbar), b(z, zbar)) for a, b without constant term relative to f's center.
PowerSeries2D compose(const PowerSeries2D& f, const PowerSeries2D& a, const PowerSeries2D& b);

json series_to_json(const PowerSeries2D& f);
PowerSeries2D series_from_json(const json& j);

// Z = g(z, zbar, t) d_zbar with g(t) = sum_m t^m terms[m].
struct Generator {
    std::vector<PowerSeries2D> terms;
    PowerSeries2D at(double t) const;
};

class TransportBreakdownError : public ConvergenceError {
public:
    TransportBreakdownError(const std::string& what, double t) : ConvergenceError(what), time(t) {}
    double time;
};

struct TransportOptions {
    double T = 0.1;
    double dt = 0.01;
    double growth_limit = 10.0;  // per-step ratio of coefficient norms that counts as breakdown
    double norm_radius = 1.0;
};

struct TransportStep {
    double t;
    double norm;
};

// Scalar transport df/dt = g d_zbar f, RK4 on the truncated coefficients.
struct TransportState {
    PowerSeries2D f;
    Generator g;
    double t = 0;
    std::vector<TransportStep> history;
};

// Throws DomainError when dt violates the RK4 stability bound of the coefficient
// system, TransportBreakdownError on coefficient blow-up.
TransportState solve_transport(const PowerSeries2D& f0, const Generator& g, const TransportOptions& opt = {});

// Components h_zz, h_zzbar, h_zbarzbar of a complexified metric in (z, zbar).
struct MetricSeries {
    PowerSeries2D h_zz, h_zzbar, h_zbarzbar;
    // lambda dz dwbar with dwbar = b (mubar dz + dzbar)
    static MetricSeries from_triple(const PowerSeries2D& lambda, const PowerSeries2D& mubar, const PowerSeries2D& b);
    int order() const { return h_zz.order(); }
};

// Lie transport of the metric through Z: dh/dt = L_Z h.
MetricSeries transport_metric(const MetricSeries& g0, const Generator& Z, const TransportOptions& opt = {});

// Curvature and Laplacian of series metrics; exact through degree order - 2.
PowerSeries2D gauss_curvature(const MetricSeries& g);
PowerSeries2D laplacian(const MetricSeries& g, const PowerSeries2D& f);

struct CommuteDefects {
    double curvature = 0;   // |T(K_g) - K_{T g}|
    double laplacian = 0;   // |T(Delta_g f) - Delta_{T g}(T f)|
    double product = 0;     // |T(f K_g) - T(f) T(K_g)|
    int compared_degree = 0;
    double radius = 0;
};

// Ball norms over degrees <= order - 2, where both sides are exact.
CommuteDefects commute_check(const MetricSeries& g0, const PowerSeries2D& f0, const Generator& Z,
                             const TransportOptions& opt = {});

json metric_series_to_json(const MetricSeries& g);
json commute_defects_to_json(const CommuteDefects& d);

} // namespace caslab
