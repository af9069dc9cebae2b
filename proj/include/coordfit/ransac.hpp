#pragma once

#include <cstdint>
#include <utility>

#include "coordfit/types.hpp"

namespace coordfit {

struct RansacParams {
    int n_candidate_voxels = 50000;
    int max_iterations = 100;
    int sample_size = 500;
    double min_inlier_fraction = 0.20;
    double inlier_threshold_mm = 4.0;
    std::uint64_t seed = 0;
};

struct RansacResult {
    AffineTransform transform;
    Mask inliers;  // candidate voxels within threshold under the final refit
    FitReport report;
};

// Robust affine fit: draw candidates without replacement, repeatedly fit on a
// random sample and count candidates within the inlier threshold, then refit
// on the inliers of the best hypothesis. Deterministic for a fixed seed.
// Throws NoConsensus when no hypothesis reaches min_inlier_fraction,
// DegenerateGeometry when every sample fit is degenerate, EmptyMask,
// InvalidArgument (mask smaller than sample_size or bad params).
RansacResult fit_affine_ransac(const CoordField& pred, const Mask& mask,
                               const RansacParams& params);

// r(x) = pred(x) - T(world(x)). Voxels with ||r|| > clip_mm are removed from
// the returned fitting mask (or kept with r scaled to clip_mm when
// clamp_instead is set); the residual is zero outside the returned mask.
std::pair<DisplacementField, Mask> residual_after_affine(const CoordField& pred, const Mask& mask,
                                                         const AffineTransform& t,
                                                         double clip_mm = 10.0,
                                                         bool clamp_instead = false);

} // namespace coordfit
