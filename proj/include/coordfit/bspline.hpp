#pragma once

#include <array>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coordfit/types.hpp"

namespace coordfit {

// Uniform cubic B-spline basis on the unit cell, t in [0,1).
std::array<double, 4> bspline_weights(double t);
std::array<double, 4> bspline_dweights(double t);  // d/dt

// Regular control lattice aligned to world axes. Control point (i,j,k) sits
// at origin + (i,j,k) * spacing.
struct BsplineLattice {
    Vec3 origin = Vec3::Zero();
    Vec3 spacing = Vec3::Ones();
    std::array<int, 3> dims{0, 0, 0};

    std::size_t size() const {
        return std::size_t(dims[0]) * std::size_t(dims[1]) * std::size_t(dims[2]);
    }
    std::size_t index(int i, int j, int k) const {
        return std::size_t(i) + std::size_t(dims[0]) * (std::size_t(j) + std::size_t(dims[1]) * std::size_t(k));
    }
};

// Lattice whose cubic support covers [lo, hi] with one full spacing of pad on
// each side: origin = lo - 2*spacing, dims = ceil((hi-lo)/spacing) + 6.
BsplineLattice lattice_covering(const Vec3& lo, const Vec3& hi, const Vec3& spacing);

// Residual-displacement model: one 3-vector coefficient per control point.
struct BsplineModel {
    BsplineLattice lattice;
    double lambda = 0.0;
    std::vector<Vec3> coeffs;  // lattice-sized, x-fastest
};

// Normal-equation blocks of the regularized least-squares fit, restricted to
// the active columns (control points whose support touches a masked voxel);
// the remaining columns are pinned to zero coefficients.
struct DesignSystem {
    BsplineLattice lattice;
    std::vector<int> active;        // active column -> lattice linear index
    std::vector<int> column_of;     // lattice linear index -> active column or -1
    Eigen::MatrixXd gram;           // phi^T phi
    Eigen::MatrixXd reg;            // Gx^T Gx + Gy^T Gy + Gz^T Gz
    Eigen::MatrixXd rhs;            // phi^T d, one column per output component
    std::size_t n_rows = 0;
};

// Rows are the masked voxels of `residual`; gradients are the analytic spatial
// derivatives of the basis functions evaluated at the same rows.
// Throws EmptyMask, GridMismatch, InvalidArgument (non-positive spacing).
DesignSystem build_bspline_system(const DisplacementField& residual, const Mask& mask,
                                  const Vec3& spacing);

// c = [phi^T phi + lambda*(Gx^T Gx + Gy^T Gy + Gz^T Gz)]^-1 phi^T d per
// component, solved by Cholesky with escalating diagonal jitter. Returns the
// full lattice-sized coefficient matrix (pinned columns zero).
// Throws SingularSystem when Cholesky fails at the final jitter level.
Eigen::MatrixXd solve_regularized(const DesignSystem& sys, double lambda);

std::pair<BsplineModel, FitReport> fit_bspline(const DisplacementField& residual, const Mask& mask,
                                               const Vec3& spacing, double lambda);

// Dense tensor-product evaluation; every grid voxel must have full cubic
// support in the control lattice. Throws OutOfSupport otherwise.
DisplacementField evaluate_bspline(const BsplineModel& model, const Grid& grid);

// Pointwise evaluation on the zero-extended lattice (terms outside the
// control grid contribute nothing); defined everywhere.
Vec3 evaluate_bspline_at(const BsplineModel& model, const Vec3& point_mm);

// c^T reg c summed over the three components, for full lattice-sized coeffs.
double reg_energy(const DesignSystem& sys, const Eigen::MatrixXd& full_coeffs);

} // namespace coordfit
