#include "caslab/spectra.hpp"

#include "caslab/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace caslab {

DofMap DofMap::of(const GridDomain& d) {
    DofMap m;
    m.domain = d;
    for (int k = 0; k < d.ny; ++k)
        for (int j = 0; j < d.nx; ++j)
            if (d.periodic || !d.boundary(j, k)) m.nodes.push_back(d.index(j, k));
    return m;
}

VecC DofMap::restrict(const ComplexField& f) const {
    if (!f.domain().same_as(domain)) throw DomainError("field does not live on the operator grid");
    VecC v(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) v[Eigen::Index(i)] = f[nodes[i]];
    return v;
}

ComplexField DofMap::extend(const VecC& v, const ComplexField& fill) const {
    if (std::size_t(v.size()) != nodes.size()) throw DomainError("vector length does not match the unknowns");
    std::vector<cplx> out = fill.empty() ? std::vector<cplx>(domain.size(), 0.0) : fill.values();
    for (std::size_t i = 0; i < nodes.size(); ++i) out[nodes[i]] = v[Eigen::Index(i)];
    return ComplexField(domain, std::move(out));
}

ComplexField apply_operator(const ComplexMetric& h, const ComplexField& c, const ComplexField& v) {
    ComplexField out = laplacian_dirichlet(h, v);
    return c.empty() ? out : out + c * v;
}

ComplexField linearization_potential(const ComplexField& u, const ComplexField& s) {
    return u.zip(s, [](cplx a, cplx b) { return -2.0 * std::exp(2.0 * a) - 4.0 * b * std::exp(-4.0 * a); });
}

VecC OperatorMatrix::apply(const VecC& v) const { return dense ? VecC(D * v) : VecC(S * v); }

VecC OperatorMatrix::apply_adjoint(const VecC& v) const {
    return dense ? VecC(D.adjoint() * v) : VecC(S.adjoint() * v);
}

MatC OperatorMatrix::to_dense() const { return dense ? D : MatC(S); }

OperatorMatrix OperatorMatrix::with_potential(const ComplexField& c) const {
    OperatorMatrix out = *this;
    VecC dc = dofs.restrict(c) - (potential.empty() ? VecC::Zero(Eigen::Index(size())) : dofs.restrict(potential));
    if (dense) {
        out.D.diagonal() += dc;
    } else {
        for (Eigen::Index i = 0; i < dc.size(); ++i) out.S.coeffRef(i, i) += dc[i];
    }
    out.potential = c;
    out.real_entries = real_entries && (dc.imag().array() == 0).all();
    return out;
}

namespace {

bool all_real(const MatC& m) { return m.imag().cwiseAbs().maxCoeff() <= 1e-13 * m.cwiseAbs().maxCoeff(); }

// Columns of the Laplacian by applying it to unit vectors. Finite-difference
// operators are local, so well separated columns share one application.
OperatorMatrix assemble(const ComplexMetric& h) {
    require_positive(h);
    const GridDomain& d = h.domain();
    OperatorMatrix A;
    A.dofs = DofMap::of(d);
    A.h = h;
    std::size_t n = A.dofs.size();
    std::vector<long> slot(d.size(), -1);
    for (std::size_t i = 0; i < n; ++i) slot[A.dofs.nodes[i]] = long(i);

    bool fd = resolve_backend(d, h.diff) == DiffBackend::FiniteDifference;
    A.dense = !fd;
    if (A.dense && n > max_dense_unknowns)
        throw DomainError("dense operator of " + std::to_string(n) + " unknowns exceeds the limit of " +
                          std::to_string(max_dense_unknowns));

    auto column = [&](const std::vector<std::size_t>& cols) {
        std::vector<cplx> e(d.size(), 0.0);
        for (auto c : cols) e[c] = 1.0;
        return laplacian_dirichlet(h, ComplexField(d, std::move(e)));
    };

    if (A.dense) {
        A.D = MatC::Zero(Eigen::Index(n), Eigen::Index(n));
        for (std::size_t c = 0; c < n; ++c) {
            ComplexField col = column({A.dofs.nodes[c]});
            for (std::size_t r = 0; r < n; ++r) A.D(Eigen::Index(r), Eigen::Index(c)) = col[A.dofs.nodes[r]];
        }
        A.real_entries = all_real(A.D);
        return A;
    }

    int reach = d.periodic ? 2 * h.diff.fd_order : h.diff.fd_order / 2;
    int P = 2 * reach + 1;
    std::vector<Eigen::Triplet<cplx>> trip;
    auto push = [&](std::size_t row_node, std::size_t col_node, cplx v) {
        if (v != 0.0 && slot[row_node] >= 0)
            trip.emplace_back(Eigen::Index(slot[row_node]), Eigen::Index(slot[col_node]), v);
    };
    if (d.periodic) {
        for (std::size_t c = 0; c < n; ++c) {
            ComplexField col = column({A.dofs.nodes[c]});
            for (std::size_t r = 0; r < d.size(); ++r) push(r, A.dofs.nodes[c], col[r]);
        }
    } else {
        for (int b = 0; b < P; ++b)
            for (int a = 0; a < P; ++a) {
                std::vector<std::size_t> cols;
                for (int k = b; k < d.ny; k += P)
                    for (int j = a; j < d.nx; j += P)
                        if (slot[d.index(j, k)] >= 0) cols.push_back(d.index(j, k));
                if (cols.empty()) continue;
                ComplexField out = column(cols);
                for (int k = 0; k < d.ny; ++k) {
                    int ck = b + P * ((k - b + reach + P) / P - 1);
                    if (ck < 0 || ck >= d.ny || std::abs(ck - k) > reach) continue;
                    for (int j = 0; j < d.nx; ++j) {
                        int cj = a + P * ((j - a + reach + P) / P - 1);
                        if (cj < 0 || cj >= d.nx || std::abs(cj - j) > reach) continue;
                        std::size_t cn = d.index(cj, ck);
                        if (slot[cn] >= 0) push(d.index(j, k), cn, out(j, k));
                    }
                }
            }
    }
    A.S.resize(Eigen::Index(n), Eigen::Index(n));
    A.S.setFromTriplets(trip.begin(), trip.end());
    A.S.makeCompressed();
    A.real_entries = std::all_of(trip.begin(), trip.end(), [](const auto& t) { return t.value().imag() == 0; });
    return A;
}

} // namespace

OperatorMatrix laplacian_matrix(const ComplexMetric& h) {
    OperatorMatrix A = assemble(h);
    A.potential = ComplexField::constant(h.domain(), 0.0);
    A.source = {{"operator", "laplacian"}, {"metric", metric_descriptor(h)}};
    return A;
}

OperatorMatrix discretize(const ComplexMetric& h, const ComplexField& u, const ComplexField& s) {
    OperatorMatrix A = laplacian_matrix(h).with_potential(linearization_potential(u, s));
    A.source = {{"operator", "gauss_linearization"},
                {"metric", metric_descriptor(h)},
                {"u_mean", cplx_to_json(u.mean())},
                {"s_mean", cplx_to_json(s.mean())}};
    return A;
}

OperatorMatrix discretize_shifted(const ComplexMetric& h, cplx k) {
    OperatorMatrix A = laplacian_matrix(h).with_potential(ComplexField::constant(h.domain(), -k));
    A.source = {{"operator", "shifted_laplacian"}, {"shift", cplx_to_json(k)}, {"metric", metric_descriptor(h)}};
    return A;
}

struct Factorization::Impl {
    bool dense = true;
    Eigen::PartialPivLU<MatC> lu;
    Eigen::SparseLU<SpMatC, Eigen::COLAMDOrdering<int>> slu;
};

Factorization::Factorization(const OperatorMatrix& A) : impl_(std::make_unique<Impl>()) {
    impl_->dense = A.dense;
    if (A.dense) {
        impl_->lu.compute(A.D);
    } else {
        impl_->slu.analyzePattern(A.S);
        impl_->slu.factorize(A.S);
        if (impl_->slu.info() != Eigen::Success)
            throw SingularOperatorError("sparse LU failed: " + impl_->slu.lastErrorMessage());
    }
}

Factorization::~Factorization() = default;
Factorization::Factorization(Factorization&&) noexcept = default;
Factorization& Factorization::operator=(Factorization&&) noexcept = default;

VecC Factorization::solve(const VecC& b) const {
    return impl_->dense ? VecC(impl_->lu.solve(b)) : VecC(impl_->slu.solve(b));
}

VecC Factorization::solve_adjoint(const VecC& b) const {
    return impl_->dense ? VecC(impl_->lu.adjoint().solve(b)) : VecC(impl_->slu.adjoint().solve(b));
}

double Factorization::rcond() const { return impl_->dense ? impl_->lu.rcond() : std::nan(""); }

double constant_alignment(const VecC& v) {
    double n = v.norm();
    if (n == 0) return 0;
    return std::abs(v.sum()) / (n * std::sqrt(double(v.size())));
}

namespace {

VecC random_unit(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    VecC v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = cplx(nd(rng), nd(rng));
    return v / v.norm();
}

// Largest eigenvalue of a Hermitian positive operator by Lanczos with full
// reorthogonalization.
template <class Op>
std::pair<double, VecC> lanczos_top(const Op& op, Eigen::Index n, std::uint64_t seed, double tol, int max_steps,
                                    bool& converged) {
    int m = int(std::min<Eigen::Index>(n, max_steps));
    MatC V(n, m + 1);
    std::vector<double> alpha, beta;
    V.col(0) = random_unit(n, seed);
    double theta = 0;
    VecC y;
    converged = false;
    for (int j = 0; j < m; ++j) {
        VecC w = op(V.col(j));
        double a = V.col(j).dot(w).real();
        alpha.push_back(a);
        for (int pass = 0; pass < 2; ++pass) w -= V.leftCols(j + 1) * (V.leftCols(j + 1).adjoint() * w);
        double b = w.norm();
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(j + 1, j + 1);
        for (int i = 0; i <= j; ++i) {
            T(i, i) = alpha[std::size_t(i)];
            if (i > 0) T(i, i - 1) = T(i - 1, i) = beta[std::size_t(i - 1)];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
        theta = es.eigenvalues()[j];
        Eigen::VectorXd s = es.eigenvectors().col(j);
        y = V.leftCols(j + 1) * s.cast<cplx>();
        if (b * std::abs(s[j]) <= tol * theta || j + 1 == n) {
            converged = true;
            break;
        }
        beta.push_back(b);
        V.col(j + 1) = w / b;
    }
    return {theta, y / y.norm()};
}

} // namespace

namespace {

SigmaMin direct_sigma_min(const OperatorMatrix& A) {
    Eigen::BDCSVD<MatC> svd(A.to_dense(), Eigen::ComputeFullV);
    Eigen::Index n = svd.singularValues().size();
    return {svd.singularValues()[n - 1], svd.matrixV().col(n - 1), true};
}

} // namespace

SigmaMin sigma_min(const OperatorMatrix& A, const Factorization& F, const SpectrumOptions& opt) {
    if (A.size() <= opt.direct_limit) return direct_sigma_min(A);
    SigmaMin out;
    auto op = [&](const VecC& x) { return F.solve(F.solve_adjoint(x)); };
    auto [theta, v] = lanczos_top(op, Eigen::Index(A.size()), opt.seed, 1e-12, 120, out.converged);
    out.value = 1.0 / std::sqrt(theta);
    out.vector = v;
    return out;
}

SigmaMin sigma_min(const OperatorMatrix& A, const SpectrumOptions& opt) {
    if (A.size() <= opt.direct_limit) return direct_sigma_min(A);
    return sigma_min(A, Factorization(A), opt);
}

namespace {

struct EigenPairs {
    std::vector<cplx> values;
    std::vector<VecC> vectors;
};

EigenPairs nearest_zero_direct(const MatC& M, int k) {
    Eigen::ComplexEigenSolver<MatC> es(M);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(M.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](auto a, auto b) { return std::abs(es.eigenvalues()[a]) < std::abs(es.eigenvalues()[b]); });
    EigenPairs out;
    for (int i = 0; i < k && i < int(idx.size()); ++i) {
        out.values.push_back(es.eigenvalues()[idx[std::size_t(i)]]);
        VecC v = es.eigenvectors().col(idx[std::size_t(i)]);
        out.vectors.push_back(v / v.norm());
    }
    return out;
}

// Shift-invert Arnoldi about 0 with explicit restarts on the wanted Ritz vectors.
EigenPairs nearest_zero_arnoldi(const OperatorMatrix& A, const Factorization& F, int k, const SpectrumOptions& opt,
                                bool& converged) {
    Eigen::Index n = Eigen::Index(A.size());
    int m = int(std::min<Eigen::Index>(n, std::max(3 * k, k + 40)));
    VecC start = random_unit(n, opt.seed);
    EigenPairs out;
    converged = false;
    for (int restart = 0; restart <= opt.max_restarts; ++restart) {
        MatC V(n, m + 1);
        MatC H = MatC::Zero(m + 1, m);
        V.col(0) = start;
        int steps = m;
        for (int j = 0; j < m; ++j) {
            VecC w = F.solve(V.col(j));
            for (int pass = 0; pass < 2; ++pass) {
                VecC c = V.leftCols(j + 1).adjoint() * w;
                w -= V.leftCols(j + 1) * c;
                H.col(j).head(j + 1) += c;
            }
            double b = w.norm();
            H(j + 1, j) = b;
            if (b < 1e-14 * H.col(j).head(j + 1).norm()) {
                steps = j + 1;
                break;
            }
            V.col(j + 1) = w / b;
        }
        Eigen::ComplexEigenSolver<MatC> es(H.topLeftCorner(steps, steps));
        std::vector<int> idx(static_cast<std::size_t>(steps));
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](int a, int b) { return std::abs(es.eigenvalues()[a]) > std::abs(es.eigenvalues()[b]); });
        out = {};
        bool ok = true;
        VecC next = VecC::Zero(n);
        for (int i = 0; i < k && i < steps; ++i) {
            cplx theta = es.eigenvalues()[idx[std::size_t(i)]];
            VecC x = V.leftCols(steps) * es.eigenvectors().col(idx[std::size_t(i)]);
            x /= x.norm();
            cplx lam = 1.0 / theta;
            double res = (A.apply(x) - lam * x).norm();
            ok = ok && res < opt.tol;
            out.values.push_back(lam);
            out.vectors.push_back(x);
            next += x;
        }
        if (ok) {
            converged = true;
            break;
        }
        m = int(std::min<Eigen::Index>(n, 2 * m));
        start = next / next.norm();
    }
    return out;
}

} // namespace

SpectrumReport spectrum(const OperatorMatrix& A, int k, const SpectrumOptions& opt) {
    if (k < 1) throw DomainError("spectrum needs k >= 1");
    Eigen::Index n = Eigen::Index(A.size());
    if (!A.dense && !A.S.coeffs().allFinite()) throw NonFiniteError("operator matrix has non-finite entries", -1, -1);
    if (A.dense && !A.D.allFinite()) throw NonFiniteError("operator matrix has non-finite entries", -1, -1);
    SpectrumReport r;
    r.nx = A.dofs.domain.nx;
    r.ny = A.dofs.domain.ny;
    k = int(std::min<Eigen::Index>(k, n));
    EigenPairs pairs;
    SigmaMin sm;
    if (std::size_t(n) <= opt.direct_limit) {
        MatC M = A.to_dense();
        pairs = nearest_zero_direct(M, k);
        Eigen::BDCSVD<MatC> svd(M, Eigen::ComputeFullV);
        sm = {svd.singularValues()[n - 1], svd.matrixV().col(n - 1), true};
        r.sigma_max = svd.singularValues()[0];
        r.converged = true;
    } else {
        Factorization F(A);
        bool ok = false;
        pairs = nearest_zero_arnoldi(A, F, k, opt, ok);
        sm = sigma_min(A, F, opt);
        bool ok2 = false;
        auto normal = [&](const VecC& x) { return A.apply_adjoint(A.apply(x)); };
        r.sigma_max = std::sqrt(lanczos_top(normal, n, opt.seed + 1, 1e-6, 60, ok2).first);
        r.converged = ok && sm.converged;
    }
    r.eigenvalues = pairs.values;
    r.eigenvectors = pairs.vectors;
    for (std::size_t i = 0; i < pairs.values.size(); ++i)
        r.residuals.push_back((A.apply(pairs.vectors[i]) - pairs.values[i] * pairs.vectors[i]).norm());
    r.sigma_min = sm.value;
    r.sigma_vector = sm.vector;
    r.condition_estimate = sm.value > 0 ? r.sigma_max / sm.value : INFINITY;
    return r;
}

json spectrum_to_json(const SpectrumReport& r) {
    json ev = json::array(), res = json::array();
    for (auto v : r.eigenvalues) ev.push_back(cplx_to_json(v));
    for (auto v : r.residuals) res.push_back(v);
    return {{"grid", {r.nx, r.ny}},
            {"eigenvalues", ev},
            {"residuals", res},
            {"sigma_min", r.sigma_min},
            {"sigma_max", r.sigma_max},
            {"condition_estimate", r.condition_estimate},
            {"converged", r.converged},
            {"qualifier", "at grid scale"}};
}

const char* family_name(MetricFamily f) {
    switch (f) {
    case MetricFamily::Riemannian: return "riemannian";
    case MetricFamily::BersAnalytic: return "bers_analytic";
    case MetricFamily::Degenerate: return "degenerate";
    }
    return "";
}

MetricFamily family_from_name(const std::string& s) {
    for (auto f : {MetricFamily::Riemannian, MetricFamily::BersAnalytic, MetricFamily::Degenerate})
        if (s == family_name(f)) return f;
    throw DomainError("unknown metric family '" + s + "'");
}

FamilySample sample_family(MetricFamily f, std::uint64_t seed, int index, int n) {
    std::mt19937_64 rng(seed * 1000003ULL + std::uint64_t(index));
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    FamilySample out;
    GridDomain d = GridDomain::window(n, n, 1.0, 1.0, cplx(-0.5, 1.0));
    switch (f) {
    case MetricFamily::Riemannian: {
        // lambda = exp(sum of low modes) / y^2 on the window [-1/2, 1/2] x [1, 2].
        std::vector<double> a(6);
        for (auto& x : a) x = 0.3 * U(rng);
        out.params = {{"family", "riemannian"}, {"index", index}, {"coeffs", a}};
        auto lam = make_field(d, [&](cplx z) {
            double x = z.real(), y = z.imag();
            double e = a[0] * std::cos(2 * x) + a[1] * std::sin(3 * x) + a[2] * std::cos(2 * y) + a[3] * std::sin(y + x) +
                       a[4] * std::cos(3 * x * y) + a[5] * x * y;
            return std::exp(e) / (y * y);
        });
        out.metric = make_metric(lam, ComplexField::constant(d, 0.0), ComplexField::constant(d, 1.0));
        out.metric.kind = "riemannian";
        break;
    }
    case MetricFamily::BersAnalytic:
    case MetricFamily::Degenerate: {
        // f1 = z, f̄2 = z̄ + q(z - 1.5i), q a small cubic; conj(mu) = q'.
        std::vector<cplx> c(4);
        double scale = f == MetricFamily::BersAnalytic ? 0.08 : 0.0;
        for (auto& x : c) x = scale * cplx(U(rng), U(rng));
        if (f == MetricFamily::Degenerate) c[1] = std::polar(0.9 + 0.2 * (U(rng) + 1.0) / 2.0, 3.0 * U(rng));
        json cj = json::array();
        for (auto x : c) cj.push_back(cplx_to_json(x));
        out.params = {{"family", family_name(f)}, {"index", index}, {"q", cj}};
        BersMaps m;
        m.f1 = make_field(d, [](cplx z) { return z; });
        m.f1_z = ComplexField::constant(d, 1.0);
        const cplx zc(0.0, 1.5);
        m.f2bar = make_field(d, [&](cplx z) {
            cplx t = z - zc;
            return std::conj(z) + c[0] + t * (c[1] + t * (c[2] + t * c[3]));
        });
        m.f2bar_z = make_field(d, [&](cplx z) {
            cplx t = z - zc;
            return c[1] + t * (2.0 * c[2] + 3.0 * t * c[3]);
        });
        m.f2bar_zbar = ComplexField::constant(d, 1.0);
        out.metric = bers_metric(m);
        break;
    }
    }
    return out;
}

ScanReport invertibility_scan(const ScanOptions& opt) {
    ScanReport rep;
    for (int i = 0; i < opt.samples; ++i) {
        ScanRow row;
        row.index = i;
        row.grid = opt.n;
        try {
            FamilySample fs = sample_family(opt.family, opt.seed, i, opt.n);
            row.params = fs.params;
            row.params_hash = fnv1a_hex(fs.params.dump());
            require_positive(fs.metric);
            SigmaMin fine = sigma_min(discretize_shifted(fs.metric, opt.shift));
            row.sigma_min = fine.value;
            row.numerical_kernel = fine.value < 1e-8;
            bool stable = true;
            if (opt.refine) {
                FamilySample coarse = sample_family(opt.family, opt.seed, i, opt.n / 2);
                row.sigma_min_coarse = sigma_min(discretize_shifted(coarse.metric, opt.shift)).value;
                stable = std::abs(row.sigma_min - row.sigma_min_coarse) <= opt.stability * row.sigma_min;
            }
            if (!stable)
                row.verdict = "no verdict: unstable under refinement";
            else if (row.sigma_min >= opt.floor)
                row.verdict = "invertible at grid scale";
            else
                row.verdict = "below floor at grid scale";
            if (row.verdict == "invertible at grid scale") ++rep.passed;
        } catch (const Error& e) {
            if (row.params.is_null()) row.params = {{"family", family_name(opt.family)}, {"index", i}};
            row.params_hash = fnv1a_hex(row.params.dump());
            row.verdict = std::string("skipped: ") + e.what();
            ++rep.skipped;
        }
        rep.rows.push_back(std::move(row));
    }
    int evaluated = opt.samples - rep.skipped;
    rep.pass_fraction = evaluated > 0 ? double(rep.passed) / evaluated : 0.0;
    return rep;
}

std::string scan_csv(const ScanReport& r) {
    std::ostringstream os;
    os.precision(12);
    os << "index,params_hash,sigma_min,sigma_min_coarse,grid,verdict\n";
    for (const auto& row : r.rows)
        os << row.index << ',' << row.params_hash << ',' << row.sigma_min << ',' << row.sigma_min_coarse << ','
           << row.grid << ",\"" << row.verdict << "\"\n";
    return os.str();
}

} // namespace caslab
