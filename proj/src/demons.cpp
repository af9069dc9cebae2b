#include "coordfit/demons.hpp"

#include <cmath>
#include <vector>

#include "coordfit/grid.hpp"

namespace coordfit {

namespace {

std::vector<double> gaussian_taps(double sigma_mm, double spacing_mm) {
    const int radius = int(std::ceil(3.0 * sigma_mm / spacing_mm));
    std::vector<double> taps(std::size_t(2 * radius + 1));
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        const double x = double(k) * spacing_mm;
        const double w = std::exp(-x * x / (2.0 * sigma_mm * sigma_mm));
        taps[std::size_t(k + radius)] = w;
        sum += w;
    }
    for (double& w : taps) w /= sum;
    return taps;
}

// One zero-padded pass along `axis`; per-line summation order is fixed.
void blur_axis(std::vector<double>& values, const std::array<int, 3>& dims, int axis,
               const std::vector<double>& taps) {
    const int radius = int(taps.size() / 2);
    const int n[3] = {dims[0], dims[1], dims[2]};
    const std::ptrdiff_t stride[3] = {1, std::ptrdiff_t(dims[0]),
                                      std::ptrdiff_t(dims[0]) * std::ptrdiff_t(dims[1])};
    std::vector<double> line(std::size_t(n[axis]));
    const int oa = (axis + 1) % 3, ob = (axis + 2) % 3;
    for (int b = 0; b < n[ob]; ++b)
        for (int a = 0; a < n[oa]; ++a) {
            const std::ptrdiff_t base = stride[oa] * a + stride[ob] * b;
            double* p = values.data() + base;
            for (int i = 0; i < n[axis]; ++i) line[std::size_t(i)] = p[stride[axis] * i];
            for (int i = 0; i < n[axis]; ++i) {
                double acc = 0.0;
                const int k0 = std::max(-radius, -i), k1 = std::min(radius, n[axis] - 1 - i);
                for (int k = k0; k <= k1; ++k)
                    acc += taps[std::size_t(k + radius)] * line[std::size_t(i + k)];
                p[stride[axis] * i] = acc;
            }
        }
}

} // namespace

void separable_gaussian_blur(std::vector<double>& values, const std::array<int, 3>& dims,
                             const Vec3& spacing_mm, double sigma_mm) {
    if (sigma_mm <= 0.0) return;
    for (int axis = 0; axis < 3; ++axis) {
        const auto taps = gaussian_taps(sigma_mm, spacing_mm[axis]);
        if (taps.size() > 1) blur_axis(values, dims, axis, taps);
    }
}

DisplacementField fit_demons(const DisplacementField& residual, const Mask& mask, double sigma_mm) {
    if (!same_grid(residual.grid, mask.grid))
        throw GridMismatch("fit_demons: residual and mask grids differ");
    if (sigma_mm < 0.0) throw InvalidArgument("fit_demons: sigma must be >= 0");

    const std::size_t nvox = residual.grid.nvox();
    DisplacementField out;
    out.grid = residual.grid;
    out.disp.assign(nvox, Vec3::Zero());

    if (sigma_mm == 0.0) {
        for (std::size_t v = 0; v < nvox; ++v)
            if (mask.flags[v]) out.disp[v] = residual.disp[v];
        return out;
    }

    std::vector<double> den(nvox);
    for (std::size_t v = 0; v < nvox; ++v) den[v] = mask.flags[v] ? 1.0 : 0.0;
    separable_gaussian_blur(den, residual.grid.dims, residual.grid.spacing, sigma_mm);

    std::vector<double> num(nvox);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t v = 0; v < nvox; ++v)
            num[v] = mask.flags[v] ? residual.disp[v][c] : 0.0;
        separable_gaussian_blur(num, residual.grid.dims, residual.grid.spacing, sigma_mm);
        for (std::size_t v = 0; v < nvox; ++v)
            if (den[v] > 1e-6) out.disp[v][c] = num[v] / den[v];
    }
    return out;
}

} // namespace coordfit
