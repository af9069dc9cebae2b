#include "coordfit/grid.hpp"

#include <cmath>
#include <limits>

namespace coordfit {

Grid make_grid(std::array<int, 3> dims, Vec3 spacing, Vec3 origin) {
    Mat4 m = Mat4::Identity();
    m(0, 0) = spacing[0];
    m(1, 1) = spacing[1];
    m(2, 2) = spacing[2];
    m.block<3, 1>(0, 3) = origin;
    return make_grid(dims, m);
}

Grid make_grid(std::array<int, 3> dims, const Mat4& voxel_to_world) {
    Grid g;
    g.dims = dims;
    g.voxel_to_world = voxel_to_world;
    for (int a = 0; a < 3; ++a) g.spacing[a] = voxel_to_world.block<3, 1>(0, a).norm();
    validate_grid(g);
    return g;
}

void validate_grid(const Grid& g) {
    for (int a = 0; a < 3; ++a) {
        if (g.dims[a] < 1) throw InvalidArgument("grid: dims must be >= 1");
        if (!(g.spacing[a] > 0.0) || !std::isfinite(g.spacing[a]))
            throw InvalidArgument("grid: spacing must be positive");
    }
    const Mat3 rot = g.voxel_to_world.block<3, 3>(0, 0);
    if (std::abs(rot.determinant()) < 1e-300)
        throw InvalidArgument("grid: voxel_to_world 3x3 block is singular");
    for (int a = 0; a < 3; ++a) {
        const double n = rot.col(a).norm();
        if (std::abs(n - g.spacing[a]) > 1e-6 * std::max(1.0, g.spacing[a]))
            throw InvalidArgument("grid: voxel_to_world column norm disagrees with spacing");
    }
}

bool same_grid(const Grid& a, const Grid& b, double tol) {
    if (a.dims != b.dims) return false;
    return (a.voxel_to_world - b.voxel_to_world).cwiseAbs().maxCoeff() <= tol;
}

CoordField world_coords(const Grid& grid) {
    CoordField cf;
    cf.grid = grid;
    cf.coords.resize(grid.nvox());
    const Mat3 rot = grid.voxel_to_world.block<3, 3>(0, 0);
    const Vec3 off = grid.voxel_to_world.block<3, 1>(0, 3);
    std::size_t v = 0;
    for (int k = 0; k < grid.dims[2]; ++k)
        for (int j = 0; j < grid.dims[1]; ++j) {
            // Row start; stepping along x adds the first affine column.
            Vec3 p = rot.col(1) * j + rot.col(2) * k + off;
            for (int i = 0; i < grid.dims[0]; ++i, ++v) cf.coords[v] = p + rot.col(0) * i;
        }
    return cf;
}

namespace {

inline Vec3 to_voxel(const Mat4& world_to_voxel, const Vec3& p) {
    return world_to_voxel.block<3, 3>(0, 0) * p + world_to_voxel.block<3, 1>(0, 3);
}

// Gather the 8 trilinear corners for voxel coordinate v; returns false when v
// is outside the voxel-center hull.
struct TrilinearStencil {
    int i0[3];
    double f[3];
};

inline bool trilinear_setup(const std::array<int, 3>& dims, const Vec3& v, TrilinearStencil& st) {
    for (int a = 0; a < 3; ++a) {
        const double x = v[a];
        if (!(x >= 0.0) || x > double(dims[a] - 1)) return false;
        if (dims[a] == 1) {
            st.i0[a] = 0;
            st.f[a] = 0.0;
            continue;
        }
        int i = int(std::floor(x));
        if (i > dims[a] - 2) i = dims[a] - 2;
        st.i0[a] = i;
        st.f[a] = x - double(i);
    }
    return true;
}

} // namespace

double sample_trilinear(const ScalarVolume& vol, const Vec3& point_mm, double fill) {
    const Mat4 w2v = vol.grid.world_to_voxel();
    const Vec3 v = to_voxel(w2v, point_mm);
    TrilinearStencil st;
    if (!trilinear_setup(vol.grid.dims, v, st)) return fill;
    double acc = 0.0;
    for (int dk = 0; dk < 2; ++dk)
        for (int dj = 0; dj < 2; ++dj)
            for (int di = 0; di < 2; ++di) {
                const double w = (di ? st.f[0] : 1.0 - st.f[0]) * (dj ? st.f[1] : 1.0 - st.f[1]) *
                                 (dk ? st.f[2] : 1.0 - st.f[2]);
                const int i = std::min(st.i0[0] + di, vol.grid.dims[0] - 1);
                const int j = std::min(st.i0[1] + dj, vol.grid.dims[1] - 1);
                const int k = std::min(st.i0[2] + dk, vol.grid.dims[2] - 1);
                acc += w * vol.values[vol.grid.index(i, j, k)];
            }
    return acc;
}

std::vector<double> sample_trilinear(const ScalarVolume& vol, std::span<const Vec3> points_mm,
                                     double fill) {
    std::vector<double> out(points_mm.size());
    for (std::size_t n = 0; n < points_mm.size(); ++n) out[n] = sample_trilinear(vol, points_mm[n], fill);
    return out;
}

std::int32_t sample_nearest(const LabelVolume& vol, const Vec3& point_mm) {
    const Mat4 w2v = vol.grid.world_to_voxel();
    const Vec3 v = to_voxel(w2v, point_mm);
    int idx[3];
    for (int a = 0; a < 3; ++a) {
        // round half up
        const double r = std::floor(v[a] + 0.5);
        if (r < 0.0 || r > double(vol.grid.dims[a] - 1)) return 0;
        idx[a] = int(r);
    }
    return vol.labels[vol.grid.index(idx[0], idx[1], idx[2])];
}

std::vector<std::int32_t> sample_nearest(const LabelVolume& vol, std::span<const Vec3> points_mm) {
    std::vector<std::int32_t> out(points_mm.size());
    for (std::size_t n = 0; n < points_mm.size(); ++n) out[n] = sample_nearest(vol, points_mm[n]);
    return out;
}

Vec3 sample_field_clamped(const DisplacementField& f, const Vec3& point_mm) {
    const Mat4 w2v = f.grid.world_to_voxel();
    Vec3 v = to_voxel(w2v, point_mm);
    for (int a = 0; a < 3; ++a) v[a] = std::clamp(v[a], 0.0, double(f.grid.dims[a] - 1));
    TrilinearStencil st;
    trilinear_setup(f.grid.dims, v, st);
    Vec3 acc = Vec3::Zero();
    for (int dk = 0; dk < 2; ++dk)
        for (int dj = 0; dj < 2; ++dj)
            for (int di = 0; di < 2; ++di) {
                const double w = (di ? st.f[0] : 1.0 - st.f[0]) * (dj ? st.f[1] : 1.0 - st.f[1]) *
                                 (dk ? st.f[2] : 1.0 - st.f[2]);
                const int i = std::min(st.i0[0] + di, f.grid.dims[0] - 1);
                const int j = std::min(st.i0[1] + dj, f.grid.dims[1] - 1);
                const int k = std::min(st.i0[2] + dk, f.grid.dims[2] - 1);
                acc += w * f.disp[f.grid.index(i, j, k)];
            }
    return acc;
}

DisplacementField resolve_transform(const AffineTransform& t, const Grid& grid) {
    DisplacementField out;
    out.grid = grid;
    out.disp.resize(grid.nvox());
    const CoordField wc = world_coords(grid);
    for (std::size_t v = 0; v < wc.coords.size(); ++v) out.disp[v] = t(wc.coords[v]) - wc.coords[v];
    return out;
}

DisplacementField resolve_transform(const DisplacementField& disp, const Grid& grid) {
    if (!same_grid(disp.grid, grid)) throw GridMismatch("resolve_transform: displacement grid differs");
    return disp;
}

ScalarVolume warp_scalar(const ScalarVolume& vol, const DisplacementField& disp, double fill) {
    ScalarVolume out;
    out.grid = disp.grid;
    out.values.resize(disp.grid.nvox());
    const CoordField wc = world_coords(disp.grid);
    for (std::size_t v = 0; v < out.values.size(); ++v)
        out.values[v] = sample_trilinear(vol, wc.coords[v] + disp.disp[v], fill);
    return out;
}

LabelVolume warp_labels(const LabelVolume& vol, const DisplacementField& disp) {
    LabelVolume out;
    out.grid = disp.grid;
    out.labels.resize(disp.grid.nvox());
    const CoordField wc = world_coords(disp.grid);
    for (std::size_t v = 0; v < out.labels.size(); ++v)
        out.labels[v] = sample_nearest(vol, wc.coords[v] + disp.disp[v]);
    return out;
}

void masked_world_bbox(const Mask& mask, Vec3& lo, Vec3& hi) {
    lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    hi = -lo;
    bool any = false;
    std::size_t v = 0;
    for (int k = 0; k < mask.grid.dims[2]; ++k)
        for (int j = 0; j < mask.grid.dims[1]; ++j)
            for (int i = 0; i < mask.grid.dims[0]; ++i, ++v) {
                if (!mask.flags[v]) continue;
                any = true;
                const Vec3 p = mask.grid.world(i, j, k);
                lo = lo.cwiseMin(p);
                hi = hi.cwiseMax(p);
            }
    if (!any) throw EmptyMask("masked_world_bbox: mask has no voxels set");
}

void grid_world_bbox(const Grid& grid, Vec3& lo, Vec3& hi) {
    lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    hi = -lo;
    for (int c = 0; c < 8; ++c) {
        const Vec3 p = grid.world((c & 1) ? grid.dims[0] - 1 : 0, (c & 2) ? grid.dims[1] - 1 : 0,
                                  (c & 4) ? grid.dims[2] - 1 : 0);
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
}

std::vector<std::size_t> masked_indices(const Mask& mask) {
    std::vector<std::size_t> idx;
    idx.reserve(mask.flags.size() / 4);
    for (std::size_t v = 0; v < mask.flags.size(); ++v)
        if (mask.flags[v]) idx.push_back(v);
    return idx;
}

AffineTransform affine_identity() { return AffineTransform{}; }

AffineTransform affine_from_homogeneous(const Mat4& m) {
    AffineTransform t;
    t.linear = m.block<3, 3>(0, 0);
    t.translation = m.block<3, 1>(0, 3);
    return t;
}

Mat4 affine_to_homogeneous(const AffineTransform& t) {
    Mat4 m = Mat4::Identity();
    m.block<3, 3>(0, 0) = t.linear;
    m.block<3, 1>(0, 3) = t.translation;
    return m;
}

AffineTransform affine_compose(const AffineTransform& a, const AffineTransform& b) {
    AffineTransform t;
    t.linear = a.linear * b.linear;
    t.translation = a.linear * b.translation + a.translation;
    return t;
}

AffineTransform affine_inverse(const AffineTransform& t) {
    AffineTransform inv;
    inv.linear = t.linear.inverse();
    inv.translation = -(inv.linear * t.translation);
    return inv;
}

} // namespace coordfit
