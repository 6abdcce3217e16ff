#pragma once

#include "caslab/cmetric.hpp"
#include "caslab/io.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace caslab {

using VecC = Eigen::VectorXcd;
using MatC = Eigen::MatrixXcd;
using SpMatC = Eigen::SparseMatrix<cplx>;

// Nodes carrying unknowns: every node of a torus, the interior nodes of a window
// (homogeneous Dirichlet data on the boundary ring).
struct DofMap {
    GridDomain domain;
    std::vector<std::size_t> nodes;

    static DofMap of(const GridDomain& d);
    std::size_t size() const { return nodes.size(); }
    VecC restrict(const ComplexField& f) const;
    // Free values from v, remaining nodes from `fill` (zero if empty).
    ComplexField extend(const VecC& v, const ComplexField& fill = {}) const;
};

// v -> Delta_h v + c v on the free nodes.
ComplexField apply_operator(const ComplexMetric& h, const ComplexField& c, const ComplexField& v);

// Potential of the Gauss linearization: -2 e^{2u} - 4 s e^{-4u}.
ComplexField linearization_potential(const ComplexField& u, const ComplexField& s);

struct OperatorMatrix {
    DofMap dofs;
    bool dense = true;
    MatC D;
    SpMatC S;
    ComplexMetric h;
    ComplexField potential;
    bool real_entries = false;
    json source;

    std::size_t size() const { return dofs.size(); }
    VecC apply(const VecC& v) const;
    VecC apply_adjoint(const VecC& v) const;
    MatC to_dense() const;
    // Same Laplacian part, potential replaced by c.
    OperatorMatrix with_potential(const ComplexField& c) const;
};

// Spectral (dense) operators are limited to this many unknowns.
inline constexpr std::size_t max_dense_unknowns = 4096;

OperatorMatrix laplacian_matrix(const ComplexMetric& h);
OperatorMatrix discretize(const ComplexMetric& h, const ComplexField& u, const ComplexField& s);
// Delta_h - k.
OperatorMatrix discretize_shifted(const ComplexMetric& h, cplx k);

class Factorization {
public:
    explicit Factorization(const OperatorMatrix& A);
    ~Factorization();
    Factorization(Factorization&&) noexcept;
    Factorization& operator=(Factorization&&) noexcept;

    VecC solve(const VecC& b) const;
    VecC solve_adjoint(const VecC& b) const;
    // Reciprocal condition estimate; dense factorizations only, NaN otherwise.
    double rcond() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct SpectrumOptions {
    double tol = 1e-8;          // eigen-residual bound |Lv - lambda v| / |v|
    int max_restarts = 6;
    std::uint64_t seed = 17;
    std::size_t direct_limit = 300;  // full eigensolver at or below this size
};

struct SpectrumReport {
    std::vector<cplx> eigenvalues;  // nearest 0 first
    std::vector<double> residuals;
    std::vector<VecC> eigenvectors;
    double sigma_min = 0;
    double sigma_max = 0;
    double condition_estimate = 0;
    VecC sigma_vector;              // right singular vector of sigma_min
    int nx = 0, ny = 0;
    bool converged = false;
};

SpectrumReport spectrum(const OperatorMatrix& A, int k, const SpectrumOptions& opt = {});

struct SigmaMin {
    double value = 0;
    VecC vector;
    bool converged = false;
};
SigmaMin sigma_min(const OperatorMatrix& A, const Factorization& F, const SpectrumOptions& opt = {});
SigmaMin sigma_min(const OperatorMatrix& A, const SpectrumOptions& opt = {});

// |<v, 1>| / (|v| |1|).
double constant_alignment(const VecC& v);

enum class MetricFamily { Riemannian, BersAnalytic, Degenerate };
const char* family_name(MetricFamily f);
MetricFamily family_from_name(const std::string& s);

// Random member of a family on an n x n window; params records the draw.
struct FamilySample {
    json params;
    ComplexMetric metric;
};
FamilySample sample_family(MetricFamily f, std::uint64_t seed, int index, int n);

struct ScanOptions {
    MetricFamily family = MetricFamily::Riemannian;
    int samples = 20;
    std::uint64_t seed = 1;
    int n = 48;
    cplx shift = 2.0;
    double floor = 0.5;
    double stability = 0.05;  // allowed relative change of sigma_min from n/2 to n
    bool refine = true;
};

struct ScanRow {
    int index = 0;
    std::string params_hash;
    json params;
    double sigma_min = 0;
    double sigma_min_coarse = 0;
    int grid = 0;
    bool numerical_kernel = false;
    std::string verdict;
};

struct ScanReport {
    std::vector<ScanRow> rows;
    int passed = 0;
    int skipped = 0;
    double pass_fraction = 0;
};

ScanReport invertibility_scan(const ScanOptions& opt);
std::string scan_csv(const ScanReport& r);
json spectrum_to_json(const SpectrumReport& r);

} // namespace caslab
