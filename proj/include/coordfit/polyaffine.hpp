#pragma once

#include <vector>

#include "coordfit/types.hpp"

namespace coordfit {

// Local affine in log form: log(T_s) = [L_s v_s; 0 0].
struct SupervoxelAffine {
    Vec3 center = Vec3::Zero();  // world mm, center of the supervoxel cube
    Mat3 log_linear = Mat3::Zero();
    Vec3 log_translation = Vec3::Zero();
    int n_voxels = 0;
};

struct PolyaffineParams {
    double width_mm = 32.0;        // supervoxel cube width W
    int min_voxels = 100;          // minimum masked voxels per supervoxel
    double weight_sigma_mm = 0.0;  // 0 -> W/2
    int n_steps = 0;               // scale-and-square steps, 0 -> auto
};

struct SupervoxelFit {
    std::vector<SupervoxelAffine> cells;
    int n_dropped = 0;  // below min_voxels is not counted; degenerate/log failures are
};

// Tile the grid's world bounding box with W-width cubes anchored at the masked
// bounding-box minimum corner; fit an affine per qualifying supervoxel and
// take its matrix log. Supervoxels that are degenerate or have no principal
// log are dropped (counted in n_dropped).
// Throws NoValidSupervoxels when nothing survives, EmptyMask, InvalidArgument.
SupervoxelFit fit_supervoxel_affines(const CoordField& pred, const Mask& mask,
                                     const PolyaffineParams& params);

// Psi(p) = sum_s w_s(p) (v_s + L_s p) with normalized Gaussian weights of the
// distance to each supervoxel center. When every unnormalized weight at a
// voxel underflows (< 1e-300), the nearest center takes weight 1.
SvfField build_svf(const std::vector<SupervoxelAffine>& supervoxels, const Grid& grid,
                   double weight_sigma_mm, int n_steps_override = 0);

// Scale-and-square integration of the SVF: halve n times, then compose the
// small displacement with itself n times using edge-clamped trilinear
// sampling. n comes from the field (auto rule: max||Psi||/2^n < half the
// smallest spacing, floored at 4 and capped at 12).
DisplacementField integrate_svf(const SvfField& svf);

// Integration of the negated SVF.
DisplacementField invert_svf(const SvfField& svf);

int auto_step_count(const SvfField& svf);

struct PolyaffineResult {
    SvfField svf;
    DisplacementField disp;
    FitReport report;
    int n_dropped = 0;
};

// Full log-polyaffine fit of `pred`: supervoxel affines -> logs -> fused SVF
// -> integrated displacement. The report measures the integrated map against
// `pred` at masked voxels.
PolyaffineResult fit_polyaffine(const CoordField& pred, const Mask& mask,
                                const PolyaffineParams& params);

} // namespace coordfit
