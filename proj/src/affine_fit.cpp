#include "coordfit/affine_fit.hpp"

#include <cmath>

#include "coordfit/grid.hpp"

namespace coordfit {

namespace {

constexpr double kConditionLimit = 1e12;

struct NormalSystem {
    Eigen::Matrix4d ata = Eigen::Matrix4d::Zero();
    Eigen::Matrix<double, 4, 3> atb = Eigen::Matrix<double, 4, 3>::Zero();
    std::size_t n = 0;

    void add(const Vec3& x, const Vec3& y) {
        Eigen::Vector4d row(x[0], x[1], x[2], 1.0);
        ata.noalias() += row * row.transpose();
        atb.noalias() += row * y.transpose();
        ++n;
    }
};

std::pair<AffineTransform, FitReport> solve_normal(const NormalSystem& sys) {
    if (sys.n == 0) throw EmptyMask("fit_affine: no points to fit");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(sys.ata);
    const double lo = eig.eigenvalues()(0), hi = eig.eigenvalues()(3);
    const double cond = (lo > 0.0) ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(cond < kConditionLimit))
        throw DegenerateGeometry("fit_affine: normal matrix condition " + std::to_string(cond) +
                                 " exceeds 1e12 (points coplanar or too few)");
    const Eigen::Matrix<double, 4, 3> coeff = sys.ata.ldlt().solve(sys.atb);
    AffineTransform t;
    t.linear = coeff.block<3, 3>(0, 0).transpose();
    t.translation = coeff.block<1, 3>(3, 0).transpose();
    FitReport report;
    report.n_points = sys.n;
    report.condition_estimate = cond;
    report.inlier_fraction = 1.0;
    return {t, report};
}

void fill_residuals(const std::vector<Vec3>& points, const std::vector<Vec3>& targets,
                    const AffineTransform& t, FitReport& report) {
    double ss = 0.0, mx = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double r = (t(points[i]) - targets[i]).norm();
        ss += r * r;
        mx = std::max(mx, r);
    }
    report.rms_residual_mm = points.empty() ? 0.0 : std::sqrt(ss / double(points.size()));
    report.max_residual_mm = mx;
}

} // namespace

std::pair<AffineTransform, FitReport> fit_affine_points(const std::vector<Vec3>& points,
                                                        const std::vector<Vec3>& targets) {
    NormalSystem sys;
    for (std::size_t i = 0; i < points.size(); ++i) sys.add(points[i], targets[i]);
    auto [t, report] = solve_normal(sys);
    fill_residuals(points, targets, t, report);
    return {t, report};
}

std::pair<AffineTransform, FitReport> fit_affine(const CoordField& pred, const Mask& mask) {
    if (!same_grid(pred.grid, mask.grid)) throw GridMismatch("fit_affine: pred and mask grids differ");
    const CoordField wc = world_coords(pred.grid);
    NormalSystem sys;
    for (std::size_t v = 0; v < mask.flags.size(); ++v)
        if (mask.flags[v]) sys.add(wc.coords[v], pred.coords[v]);
    auto [t, report] = solve_normal(sys);
    double ss = 0.0, mx = 0.0;
    for (std::size_t v = 0; v < mask.flags.size(); ++v) {
        if (!mask.flags[v]) continue;
        const double r = (t(wc.coords[v]) - pred.coords[v]).norm();
        ss += r * r;
        mx = std::max(mx, r);
    }
    report.rms_residual_mm = std::sqrt(ss / double(report.n_points));
    report.max_residual_mm = mx;
    return {t, report};
}

} // namespace coordfit
