#pragma once

#include <utility>

#include "coordfit/types.hpp"

namespace coordfit {

// Principal logarithm of the 4x4 homogeneous matrix of T, by inverse scaling
// and squaring: Denman-Beavers square roots until ||M - I||_F < 0.25, an
// 8-term Gregory series, then scaling back. Returns the (L, v) blocks of
// log(T) = [L v; 0 0].
// Throws LogUndefined when det < 0 or an eigenvalue lies on the closed
// negative real axis (the offending eigenvalue is reported).
std::pair<Mat3, Vec3> matrix_log_affine(const AffineTransform& t);

// 4x4 matrix exponential (scaling and squaring with a truncated Taylor
// series); inverse of the above on homogeneous logs.
Mat4 expm(const Mat4& a);

} // namespace coordfit
