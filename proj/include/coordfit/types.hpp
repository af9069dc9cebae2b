#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "coordfit/errors.hpp"

namespace coordfit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Voxel lattice geometry shared by all volume types. Linear sample order is
// x-fastest: index(i,j,k) = i + nx*(j + ny*k). All values are immutable after
// construction; treat instances as values.
struct Grid {
    std::array<int, 3> dims{0, 0, 0};   // voxel counts, each >= 1
    Vec3 spacing{1, 1, 1};              // mm per voxel step, each > 0
    Mat4 voxel_to_world = Mat4::Identity();

    std::size_t nvox() const {
        return std::size_t(dims[0]) * std::size_t(dims[1]) * std::size_t(dims[2]);
    }
    std::size_t index(int i, int j, int k) const {
        return std::size_t(i) + std::size_t(dims[0]) * (std::size_t(j) + std::size_t(dims[1]) * std::size_t(k));
    }
    // World position of the voxel center (i,j,k).
    Vec3 world(int i, int j, int k) const {
        return voxel_to_world.block<3, 3>(0, 0) * Vec3(i, j, k) + voxel_to_world.block<3, 1>(0, 3);
    }
    Mat4 world_to_voxel() const { return voxel_to_world.inverse(); }
};

// Axis-aligned grid helper; validates the Grid invariants.
Grid make_grid(std::array<int, 3> dims, Vec3 spacing, Vec3 origin = Vec3::Zero());
Grid make_grid(std::array<int, 3> dims, const Mat4& voxel_to_world);

// Throws InvalidArgument when the invariants do not hold:
// dims >= 1, spacing > 0, non-singular 3x3 block, column norms == spacing.
void validate_grid(const Grid& g);

// Grids compare equal when dims match and affines agree to `tol` (absolute).
bool same_grid(const Grid& a, const Grid& b, double tol = 1e-6);

struct ScalarVolume {
    Grid grid;
    std::vector<double> values;  // nvox, x-fastest
};

struct Mask {
    Grid grid;
    std::vector<std::uint8_t> flags;  // nvox, 0/1

    std::size_t count() const {
        std::size_t n = 0;
        for (auto f : flags) n += (f != 0);
        return n;
    }
};

struct LabelVolume {
    Grid grid;
    std::vector<std::int32_t> labels;  // nvox, non-negative, < 2^16
};

// Per-voxel predicted target-space coordinates in world mm.
struct CoordField {
    Grid grid;
    std::vector<Vec3> coords;  // nvox
};

// Dense displacement: mapped position = world position + disp.
struct DisplacementField {
    Grid grid;
    std::vector<Vec3> disp;  // nvox
};

// Stationary velocity field plus its scale-and-square step count.
struct SvfField {
    Grid grid;
    std::vector<Vec3> velocity;  // nvox, mm
    int n_steps = 1;
};

// T(x) = linear * x + translation, world mm on both sides.
struct AffineTransform {
    Mat3 linear = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 operator()(const Vec3& x) const { return linear * x + translation; }
};

AffineTransform affine_identity();
AffineTransform affine_from_homogeneous(const Mat4& m);
Mat4 affine_to_homogeneous(const AffineTransform& t);
AffineTransform affine_compose(const AffineTransform& a, const AffineTransform& b);  // a after b
AffineTransform affine_inverse(const AffineTransform& t);

// Residual statistics and diagnostics shared by every fitting operation.
struct FitReport {
    double rms_residual_mm = 0.0;
    double max_residual_mm = 0.0;
    std::size_t n_points = 0;
    double condition_estimate = 0.0;
    double inlier_fraction = 1.0;
};

} // namespace coordfit
