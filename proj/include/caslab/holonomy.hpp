#pragma once

#include "caslab/cas.hpp"

#include <optional>
#include <vector>

namespace caslab {

// Closed polyline in the chart. `subdivisions` is the default RK4 step count.
struct LoopPath {
    std::vector<cplx> vertices;  // first == last
    int subdivisions = 256;

    static LoopPath rectangle(cplx corner, double width, double height, int subdivisions = 256);
    static LoopPath circle(cplx center, double radius, int sides = 64, int subdivisions = 256);

    double length() const;
    // Signed area enclosed (shoelace).
    double area() const;
    LoopPath reversed() const;
    // this, then `next`; both must share the base point.
    LoopPath then(const LoopPath& next) const;
    // Throws DomainError if not closed or if a vertex leaves the window.
    void validate(const GridDomain& d) const;
};

json loop_to_json(const LoopPath& l);
LoopPath loop_from_json(const json& j);

struct HolonomyMatrix {
    Mat3 M = Mat3::Identity();
    LoopPath loop;
    int order = 4;
    int steps = 0;
    double det_defect = 0;  // |det M - 1|
};

// Path-ordered solution of M' = -A(gamma') M, M(0) = I, by classical RK4 with
// about `steps` steps distributed by length (loop.subdivisions when 0). Segments are
// split where they cross grid lines, so the step count actually taken is at least
// the number of pieces and is reported in HolonomyMatrix::steps.
// Traversing gamma1 then gamma2 gives M(gamma2) M(gamma1).
HolonomyMatrix integrate_loop(const FrameConnection& c, const LoopPath& loop, int steps = 0);
// Independent loops on up to `threads` workers; results in input order.
std::vector<HolonomyMatrix> integrate_loops(const FrameConnection& c, const std::vector<LoopPath>& loops, int steps = 0,
                                            int threads = 1);

// M / det(M)^{1/3}: principal cube root, or the root nearest `root_hint` when given.
Mat3 unimodular_project(const Mat3& M, std::optional<cplx> root_hint = std::nullopt, double det_floor = 1e-14);
HolonomyMatrix unimodular_project(const HolonomyMatrix& h);

struct HolonomyInvariants {
    cplx trace, trace_inverse;
    std::array<cplx, 3> eigenvalues;  // ordered by modulus, then argument
};
HolonomyInvariants invariants(const Mat3& M);

// ||M^T J M - J|| (Frobenius); J defaults to diag(1, 1, -1).
double preserves_form(const Mat3& M, const Mat3& J = Eigen::Vector3cd(1, 1, -1).asDiagonal().toDenseMatrix());

json matrix_to_json(const Mat3& M);
Mat3 matrix_from_json(const json& j);
json holonomy_to_json(const HolonomyMatrix& h);

} // namespace caslab
