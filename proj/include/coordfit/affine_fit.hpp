#pragma once

#include <utility>
#include <vector>

#include "coordfit/types.hpp"

namespace coordfit {

// Least-squares affine fit of predicted coordinates over the mask, basis
// [x, y, z, 1] per output coordinate, no regularization.
// Throws EmptyMask, DegenerateGeometry (normal-matrix condition > 1e12).
std::pair<AffineTransform, FitReport> fit_affine(const CoordField& pred, const Mask& mask);

// Same fit on an explicit point set; shared with RANSAC and the supervoxel
// fits. `targets[i]` corresponds to `points[i]`.
std::pair<AffineTransform, FitReport> fit_affine_points(const std::vector<Vec3>& points,
                                                        const std::vector<Vec3>& targets);

} // namespace coordfit
