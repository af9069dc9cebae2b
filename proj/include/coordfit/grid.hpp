#pragma once

#include <span>
#include <vector>

#include "coordfit/types.hpp"

namespace coordfit {

struct BsplineModel;  // bspline.hpp

// coords[v] = voxel_to_world * (i,j,k,1) for every voxel.
CoordField world_coords(const Grid& grid);

// Trilinear interpolation in voxel space. Points whose voxel coordinates fall
// outside the voxel-center hull [0, n-1] per axis return `fill`.
double sample_trilinear(const ScalarVolume& vol, const Vec3& point_mm, double fill = 0.0);
std::vector<double> sample_trilinear(const ScalarVolume& vol, std::span<const Vec3> points_mm,
                                     double fill = 0.0);

// Nearest-voxel lookup; ties round half up per axis; outside the grid -> 0.
std::int32_t sample_nearest(const LabelVolume& vol, const Vec3& point_mm);
std::vector<std::int32_t> sample_nearest(const LabelVolume& vol, std::span<const Vec3> points_mm);

// Trilinear sample of a vector field with edge-clamped voxel coordinates.
Vec3 sample_field_clamped(const DisplacementField& f, const Vec3& point_mm);

// disp[v] = T(world(v)) - world(v) for every voxel.
DisplacementField resolve_transform(const AffineTransform& t, const Grid& grid);
// B-spline models are evaluated on the zero-extended control lattice, so the
// result is defined (and smoothly decays to zero) outside the fitted support.
DisplacementField resolve_transform(const BsplineModel& model, const Grid& grid);
// Dense transforms resolve to themselves; grids must match.
DisplacementField resolve_transform(const DisplacementField& disp, const Grid& grid);

// Warp helpers used by the CLI `apply` subcommand: output voxel v takes the
// input volume sampled at world(v) + disp(v).
ScalarVolume warp_scalar(const ScalarVolume& vol, const DisplacementField& disp, double fill = 0.0);
LabelVolume warp_labels(const LabelVolume& vol, const DisplacementField& disp);

// World-axis-aligned bounding box of the masked voxel centers.
// Throws EmptyMask when no voxel is set.
void masked_world_bbox(const Mask& mask, Vec3& lo, Vec3& hi);
// Bounding box of all eight grid corners.
void grid_world_bbox(const Grid& grid, Vec3& lo, Vec3& hi);

// Indices of masked voxels in canonical x-fastest order.
std::vector<std::size_t> masked_indices(const Mask& mask);

} // namespace coordfit
