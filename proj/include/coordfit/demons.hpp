#pragma once

#include "coordfit/types.hpp"

namespace coordfit {

// One-step Demons-like model: masked normalized Gaussian smoothing of the
// residual field, component-wise: (G * (m.r)) / (G * m), defined where the
// denominator exceeds 1e-6 and zero elsewhere. Separable kernel, truncated at
// ceil(3*sigma/spacing) taps per axis with renormalized weights; sigma is in
// mm and converted per axis by the grid spacing. sigma == 0 returns the
// masked residual unchanged.
DisplacementField fit_demons(const DisplacementField& residual, const Mask& mask, double sigma_mm);

// Plain separable Gaussian blur of a scalar lattice (zero padding); shared
// with the synthetic generator for band-limiting noise.
void separable_gaussian_blur(std::vector<double>& values, const std::array<int, 3>& dims,
                             const Vec3& spacing_mm, double sigma_mm);

} // namespace coordfit
