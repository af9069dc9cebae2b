#include "coordfit/bspline.hpp"

#include <cmath>

#include "coordfit/grid.hpp"

namespace coordfit {

std::array<double, 4> bspline_weights(double t) {
    const double t2 = t * t, t3 = t2 * t;
    const double omt = 1.0 - t;
    return {omt * omt * omt / 6.0, (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
            (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0, t3 / 6.0};
}

std::array<double, 4> bspline_dweights(double t) {
    const double t2 = t * t;
    const double omt = 1.0 - t;
    return {-omt * omt / 2.0, (3.0 * t2 - 4.0 * t) / 2.0, (-3.0 * t2 + 2.0 * t + 1.0) / 2.0,
            t2 / 2.0};
}

BsplineLattice lattice_covering(const Vec3& lo, const Vec3& hi, const Vec3& spacing) {
    for (int a = 0; a < 3; ++a)
        if (!(spacing[a] > 0.0)) throw InvalidArgument("bspline: control spacing must be positive");
    BsplineLattice lat;
    lat.spacing = spacing;
    lat.origin = lo - 2.0 * spacing;
    for (int a = 0; a < 3; ++a)
        lat.dims[a] = int(std::ceil((hi[a] - lo[a]) / spacing[a])) + 6;
    return lat;
}

namespace {

constexpr std::size_t kMaxActiveColumns = 8000;

struct SupportPoint {
    int fl[3];        // lower cell index per axis
    double w[3][4];   // value weights per axis
    double dw[3][4];  // derivative weights per axis (per mm)
    bool in_support = false;
};

SupportPoint locate(const BsplineLattice& lat, const Vec3& p) {
    SupportPoint sp;
    sp.in_support = true;
    for (int a = 0; a < 3; ++a) {
        const double u = (p[a] - lat.origin[a]) / lat.spacing[a];
        const int fl = int(std::floor(u));
        const double t = u - double(fl);
        sp.fl[a] = fl;
        const auto w = bspline_weights(t);
        const auto dw = bspline_dweights(t);
        for (int b = 0; b < 4; ++b) {
            sp.w[a][b] = w[b];
            sp.dw[a][b] = dw[b] / lat.spacing[a];
        }
        if (fl - 1 < 0 || fl + 2 > lat.dims[a] - 1) sp.in_support = false;
    }
    return sp;
}

// 64 tensor-product weights in (z, y, x) minor order matched to cols64().
void tensor_rows(const SupportPoint& sp, double w[64], double gx[64], double gy[64],
                 double gz[64]) {
    int n = 0;
    for (int c = 0; c < 4; ++c)
        for (int b = 0; b < 4; ++b)
            for (int a = 0; a < 4; ++a, ++n) {
                w[n] = sp.w[0][a] * sp.w[1][b] * sp.w[2][c];
                gx[n] = sp.dw[0][a] * sp.w[1][b] * sp.w[2][c];
                gy[n] = sp.w[0][a] * sp.dw[1][b] * sp.w[2][c];
                gz[n] = sp.w[0][a] * sp.w[1][b] * sp.dw[2][c];
            }
}

void cols64(const BsplineLattice& lat, const int fl[3], std::size_t cols[64]) {
    int n = 0;
    for (int c = 0; c < 4; ++c)
        for (int b = 0; b < 4; ++b)
            for (int a = 0; a < 4; ++a, ++n)
                cols[n] = lat.index(fl[0] - 1 + a, fl[1] - 1 + b, fl[2] - 1 + c);
}

// Accumulates the (symmetric) per-cell blocks and scatters them into the
// global matrices when the support cell changes. Voxels are visited in
// canonical x-fastest order, so the result is independent of everything but
// the input.
struct CellAccumulator {
    const BsplineLattice& lat;
    const std::vector<int>& column_of;
    Eigen::MatrixXd& gram;
    Eigen::MatrixXd& reg;
    Eigen::MatrixXd& rhs;

    int cur[3] = {INT_MIN, INT_MIN, INT_MIN};
    bool open = false;
    double lg[64][64], lr[64][64], lb[64][3];

    CellAccumulator(const BsplineLattice& l, const std::vector<int>& cmap, Eigen::MatrixXd& g,
                    Eigen::MatrixXd& r, Eigen::MatrixXd& b)
        : lat(l), column_of(cmap), gram(g), reg(r), rhs(b) {}

    void start(const int fl[3]) {
        cur[0] = fl[0];
        cur[1] = fl[1];
        cur[2] = fl[2];
        open = true;
        std::memset(lg, 0, sizeof lg);
        std::memset(lr, 0, sizeof lr);
        std::memset(lb, 0, sizeof lb);
    }

    void add(const SupportPoint& sp, const Vec3& value) {
        if (!open || sp.fl[0] != cur[0] || sp.fl[1] != cur[1] || sp.fl[2] != cur[2]) {
            flush();
            start(sp.fl);
        }
        double w[64], gx[64], gy[64], gz[64];
        tensor_rows(sp, w, gx, gy, gz);
        for (int i = 0; i < 64; ++i) {
            const double wi = w[i], gxi = gx[i], gyi = gy[i], gzi = gz[i];
            for (int j = i; j < 64; ++j) {
                lg[i][j] += wi * w[j];
                lr[i][j] += gxi * gx[j] + gyi * gy[j] + gzi * gz[j];
            }
            lb[i][0] += wi * value[0];
            lb[i][1] += wi * value[1];
            lb[i][2] += wi * value[2];
        }
    }

    void flush() {
        if (!open) return;
        std::size_t cols[64];
        cols64(lat, cur, cols);
        int acols[64];
        for (int i = 0; i < 64; ++i) acols[i] = column_of[cols[i]];
        for (int i = 0; i < 64; ++i) {
            const int A = acols[i];
            for (int j = i; j < 64; ++j) {
                const int B = acols[j];
                gram(A, B) += lg[i][j];
                reg(A, B) += lr[i][j];
                if (A != B) {
                    gram(B, A) += lg[i][j];
                    reg(B, A) += lr[i][j];
                }
            }
            rhs(A, 0) += lb[i][0];
            rhs(A, 1) += lb[i][1];
            rhs(A, 2) += lb[i][2];
        }
        open = false;
    }
};

// Cholesky with the jitter escalation schedule; returns the factor so callers
// can reuse it for condition estimation.
Eigen::LLT<Eigen::MatrixXd> factor_with_jitter(const Eigen::MatrixXd& a) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) return llt;
    const double unit = a.trace() / double(a.rows());
    for (double scale = 1e-10; scale <= 1e-4 * 1.0000001; scale *= 10.0) {
        Eigen::MatrixXd jittered = a;
        jittered.diagonal().array() += scale * unit;
        llt.compute(jittered);
        if (llt.info() == Eigen::Success) return llt;
    }
    throw SingularSystem("solve_regularized: Cholesky failed after jitter escalation to 1e-4");
}

double estimate_condition(const Eigen::MatrixXd& a, const Eigen::LLT<Eigen::MatrixXd>& llt) {
    const Eigen::Index n = a.rows();
    Eigen::VectorXd v = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(double(n)));
    double hi = 0.0;
    for (int it = 0; it < 15; ++it) {
        v = a * v;
        hi = v.norm();
        if (hi == 0.0) return std::numeric_limits<double>::infinity();
        v /= hi;
    }
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(double(n)));
    double inv_norm = 0.0;
    for (int it = 0; it < 15; ++it) {
        w = llt.solve(w);
        inv_norm = w.norm();
        if (inv_norm == 0.0) return std::numeric_limits<double>::infinity();
        w /= inv_norm;
    }
    return hi * inv_norm;
}

Eigen::MatrixXd solve_active(const DesignSystem& sys, double lambda, double* condition_out) {
    if (lambda < 0.0) throw InvalidArgument("solve_regularized: lambda must be >= 0");
    Eigen::MatrixXd a = sys.gram + lambda * sys.reg;
    const auto llt = factor_with_jitter(a);
    if (condition_out) *condition_out = estimate_condition(a, llt);
    return llt.solve(sys.rhs);
}

} // namespace

DesignSystem build_bspline_system(const DisplacementField& residual, const Mask& mask,
                                  const Vec3& spacing) {
    if (!same_grid(residual.grid, mask.grid))
        throw GridMismatch("build_bspline_system: residual and mask grids differ");
    Vec3 lo, hi;
    masked_world_bbox(mask, lo, hi);  // throws EmptyMask

    DesignSystem sys;
    sys.lattice = lattice_covering(lo, hi, spacing);

    const CoordField wc = world_coords(mask.grid);
    const std::vector<std::size_t> idx = masked_indices(mask);
    sys.n_rows = idx.size();

    // Pass 1: mark active columns in lattice order.
    std::vector<std::uint8_t> touched(sys.lattice.size(), 0);
    std::vector<SupportPoint> pts(idx.size());
    for (std::size_t n = 0; n < idx.size(); ++n) {
        pts[n] = locate(sys.lattice, wc.coords[idx[n]]);
        if (!pts[n].in_support)
            throw OutOfSupport("build_bspline_system: masked voxel outside lattice support");
        std::size_t cols[64];
        cols64(sys.lattice, pts[n].fl, cols);
        for (int i = 0; i < 64; ++i) touched[cols[i]] = 1;
    }
    sys.column_of.assign(sys.lattice.size(), -1);
    for (std::size_t c = 0; c < touched.size(); ++c)
        if (touched[c]) {
            sys.column_of[c] = int(sys.active.size());
            sys.active.push_back(int(c));
        }
    if (sys.active.size() > kMaxActiveColumns)
        throw InvalidArgument("build_bspline_system: " + std::to_string(sys.active.size()) +
                              " active control points; increase --spacing");

    const Eigen::Index b = Eigen::Index(sys.active.size());
    sys.gram = Eigen::MatrixXd::Zero(b, b);
    sys.reg = Eigen::MatrixXd::Zero(b, b);
    sys.rhs = Eigen::MatrixXd::Zero(b, 3);

    // Pass 2: accumulate per support cell.
    CellAccumulator acc(sys.lattice, sys.column_of, sys.gram, sys.reg, sys.rhs);
    for (std::size_t n = 0; n < idx.size(); ++n) acc.add(pts[n], residual.disp[idx[n]]);
    acc.flush();
    return sys;
}

Eigen::MatrixXd solve_regularized(const DesignSystem& sys, double lambda) {
    const Eigen::MatrixXd ac = solve_active(sys, lambda, nullptr);
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(Eigen::Index(sys.lattice.size()), 3);
    for (std::size_t c = 0; c < sys.active.size(); ++c)
        full.row(Eigen::Index(sys.active[c])) = ac.row(Eigen::Index(c));
    return full;
}

std::pair<BsplineModel, FitReport> fit_bspline(const DisplacementField& residual, const Mask& mask,
                                               const Vec3& spacing, double lambda) {
    const DesignSystem sys = build_bspline_system(residual, mask, spacing);
    double condition = 0.0;
    const Eigen::MatrixXd ac = solve_active(sys, lambda, &condition);

    BsplineModel model;
    model.lattice = sys.lattice;
    model.lambda = lambda;
    model.coeffs.assign(sys.lattice.size(), Vec3::Zero());
    for (std::size_t c = 0; c < sys.active.size(); ++c)
        model.coeffs[std::size_t(sys.active[c])] = ac.row(Eigen::Index(c)).transpose();

    FitReport report;
    report.n_points = sys.n_rows;
    report.condition_estimate = condition;
    report.inlier_fraction = 1.0;
    const CoordField wc = world_coords(mask.grid);
    double ss = 0.0, mx = 0.0;
    for (std::size_t v = 0; v < mask.flags.size(); ++v) {
        if (!mask.flags[v]) continue;
        const double r = (evaluate_bspline_at(model, wc.coords[v]) - residual.disp[v]).norm();
        ss += r * r;
        mx = std::max(mx, r);
    }
    report.rms_residual_mm = std::sqrt(ss / double(sys.n_rows));
    report.max_residual_mm = mx;
    return {model, report};
}

DisplacementField evaluate_bspline(const BsplineModel& model, const Grid& grid) {
    DisplacementField out;
    out.grid = grid;
    out.disp.resize(grid.nvox());
    const CoordField wc = world_coords(grid);
    for (std::size_t v = 0; v < out.disp.size(); ++v) {
        const SupportPoint sp = locate(model.lattice, wc.coords[v]);
        if (!sp.in_support)
            throw OutOfSupport("evaluate_bspline: grid voxel outside lattice support");
        Vec3 acc = Vec3::Zero();
        for (int c = 0; c < 4; ++c)
            for (int b = 0; b < 4; ++b)
                for (int a = 0; a < 4; ++a) {
                    const double w = sp.w[0][a] * sp.w[1][b] * sp.w[2][c];
                    acc += w * model.coeffs[model.lattice.index(sp.fl[0] - 1 + a, sp.fl[1] - 1 + b,
                                                                sp.fl[2] - 1 + c)];
                }
        out.disp[v] = acc;
    }
    return out;
}

Vec3 evaluate_bspline_at(const BsplineModel& model, const Vec3& point_mm) {
    const SupportPoint sp = locate(model.lattice, point_mm);
    Vec3 acc = Vec3::Zero();
    for (int c = 0; c < 4; ++c) {
        const int kc = sp.fl[2] - 1 + c;
        if (kc < 0 || kc >= model.lattice.dims[2]) continue;
        for (int b = 0; b < 4; ++b) {
            const int kb = sp.fl[1] - 1 + b;
            if (kb < 0 || kb >= model.lattice.dims[1]) continue;
            for (int a = 0; a < 4; ++a) {
                const int ka = sp.fl[0] - 1 + a;
                if (ka < 0 || ka >= model.lattice.dims[0]) continue;
                const double w = sp.w[0][a] * sp.w[1][b] * sp.w[2][c];
                acc += w * model.coeffs[model.lattice.index(ka, kb, kc)];
            }
        }
    }
    return acc;
}

DisplacementField resolve_transform(const BsplineModel& model, const Grid& grid) {
    DisplacementField out;
    out.grid = grid;
    out.disp.resize(grid.nvox());
    const CoordField wc = world_coords(grid);
    for (std::size_t v = 0; v < out.disp.size(); ++v)
        out.disp[v] = evaluate_bspline_at(model, wc.coords[v]);
    return out;
}

double reg_energy(const DesignSystem& sys, const Eigen::MatrixXd& full_coeffs) {
    const Eigen::Index b = Eigen::Index(sys.active.size());
    Eigen::MatrixXd ac(b, 3);
    for (std::size_t c = 0; c < sys.active.size(); ++c)
        ac.row(Eigen::Index(c)) = full_coeffs.row(Eigen::Index(sys.active[c]));
    double e = 0.0;
    for (int comp = 0; comp < 3; ++comp) e += ac.col(comp).dot(sys.reg * ac.col(comp));
    return e;
}

} // namespace coordfit
