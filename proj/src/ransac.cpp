#include "coordfit/ransac.hpp"

#include <cmath>
#include <numeric>

#include "coordfit/affine_fit.hpp"
#include "coordfit/grid.hpp"
#include "coordfit/rng.hpp"

namespace coordfit {

namespace {

void check_params(const RansacParams& p) {
    if (p.sample_size < 4) throw InvalidArgument("ransac: sample_size must be >= 4");
    if (!(p.min_inlier_fraction > 0.0) || p.min_inlier_fraction > 1.0)
        throw InvalidArgument("ransac: min_inlier_fraction must be in (0, 1]");
    if (!(p.inlier_threshold_mm > 0.0)) throw InvalidArgument("ransac: threshold must be > 0");
    if (p.n_candidate_voxels < p.sample_size)
        throw InvalidArgument("ransac: n_candidate_voxels must be >= sample_size");
    if (p.max_iterations < 1) throw InvalidArgument("ransac: max_iterations must be >= 1");
}

std::size_t count_inliers(const AffineTransform& t, const std::vector<Vec3>& pts,
                          const std::vector<Vec3>& tgt, double thresh,
                          std::vector<std::uint8_t>* flags) {
    const double t2 = thresh * thresh;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const bool in = (t(pts[i]) - tgt[i]).squaredNorm() < t2;
        if (flags) (*flags)[i] = in ? 1 : 0;
        n += in;
    }
    return n;
}

} // namespace

RansacResult fit_affine_ransac(const CoordField& pred, const Mask& mask,
                               const RansacParams& params) {
    check_params(params);
    if (!same_grid(pred.grid, mask.grid))
        throw GridMismatch("fit_affine_ransac: pred and mask grids differ");

    std::vector<std::size_t> candidates = masked_indices(mask);
    if (candidates.empty()) throw EmptyMask("fit_affine_ransac: empty mask");
    if (candidates.size() < std::size_t(params.sample_size))
        throw InvalidArgument("fit_affine_ransac: mask has fewer voxels than sample_size");

    // Candidate draw: seeded Fisher-Yates over masked indices in canonical
    // order; all of them when the mask is smaller than the candidate budget.
    rng::Engine gen = rng::seeded(params.seed);
    if (candidates.size() > std::size_t(params.n_candidate_voxels)) {
        rng::partial_shuffle(candidates, std::size_t(params.n_candidate_voxels), gen);
        candidates.resize(std::size_t(params.n_candidate_voxels));
    }
    const std::size_t n_cand = candidates.size();

    const CoordField wc = world_coords(pred.grid);
    std::vector<Vec3> pts(n_cand), tgt(n_cand);
    for (std::size_t i = 0; i < n_cand; ++i) {
        pts[i] = wc.coords[candidates[i]];
        tgt[i] = pred.coords[candidates[i]];
    }

    const std::size_t min_inliers =
        std::size_t(std::ceil(params.min_inlier_fraction * double(n_cand)));

    std::size_t best_count = 0;
    AffineTransform best_t;
    bool have_hypothesis = false;
    int degenerate = 0;

    std::vector<std::size_t> positions(n_cand);
    std::vector<Vec3> spts(std::size_t(params.sample_size)), stgt(std::size_t(params.sample_size));
    for (int it = 0; it < params.max_iterations; ++it) {
        // Sample derives from (seed, iteration) only, so evaluation order
        // cannot change the result.
        rng::Engine g = rng::seeded_stream(params.seed, std::uint64_t(it));
        std::iota(positions.begin(), positions.end(), std::size_t(0));
        rng::partial_shuffle(positions, std::size_t(params.sample_size), g);
        for (int s = 0; s < params.sample_size; ++s) {
            spts[std::size_t(s)] = pts[positions[std::size_t(s)]];
            stgt[std::size_t(s)] = tgt[positions[std::size_t(s)]];
        }
        AffineTransform t;
        try {
            t = fit_affine_points(spts, stgt).first;
        } catch (const DegenerateGeometry&) {
            ++degenerate;
            continue;
        }
        const std::size_t n_in = count_inliers(t, pts, tgt, params.inlier_threshold_mm, nullptr);
        if (n_in >= min_inliers && n_in > best_count) {
            best_count = n_in;
            best_t = t;
            have_hypothesis = true;
        }
    }

    if (!have_hypothesis) {
        if (degenerate == params.max_iterations)
            throw DegenerateGeometry("fit_affine_ransac: every sample fit was degenerate");
        throw NoConsensus("fit_affine_ransac: no hypothesis reached " +
                          std::to_string(params.min_inlier_fraction * 100.0) + "% inliers");
    }

    // Consensus refit on the best hypothesis's inliers, then re-evaluate the
    // inlier set under the refit transform so the returned mask is consistent
    // with the returned transform.
    std::vector<std::uint8_t> in_flags(n_cand, 0);
    count_inliers(best_t, pts, tgt, params.inlier_threshold_mm, &in_flags);
    std::vector<Vec3> ipts, itgt;
    ipts.reserve(best_count);
    itgt.reserve(best_count);
    for (std::size_t i = 0; i < n_cand; ++i)
        if (in_flags[i]) {
            ipts.push_back(pts[i]);
            itgt.push_back(tgt[i]);
        }
    auto [refit, refit_report] = fit_affine_points(ipts, itgt);
    const std::size_t final_count =
        count_inliers(refit, pts, tgt, params.inlier_threshold_mm, &in_flags);

    RansacResult res;
    res.transform = refit;
    res.inliers.grid = mask.grid;
    res.inliers.flags.assign(mask.flags.size(), 0);
    double ss = 0.0, mx = 0.0;
    for (std::size_t i = 0; i < n_cand; ++i) {
        if (!in_flags[i]) continue;
        res.inliers.flags[candidates[i]] = 1;
        const double r = (refit(pts[i]) - tgt[i]).norm();
        ss += r * r;
        mx = std::max(mx, r);
    }
    res.report.n_points = final_count;
    res.report.rms_residual_mm = final_count ? std::sqrt(ss / double(final_count)) : 0.0;
    res.report.max_residual_mm = mx;
    res.report.condition_estimate = refit_report.condition_estimate;
    res.report.inlier_fraction = double(final_count) / double(n_cand);
    return res;
}

std::pair<DisplacementField, Mask> residual_after_affine(const CoordField& pred, const Mask& mask,
                                                         const AffineTransform& t, double clip_mm,
                                                         bool clamp_instead) {
    if (!same_grid(pred.grid, mask.grid))
        throw GridMismatch("residual_after_affine: pred and mask grids differ");
    if (!(clip_mm > 0.0)) throw InvalidArgument("residual_after_affine: clip must be > 0");

    DisplacementField residual;
    residual.grid = pred.grid;
    residual.disp.assign(pred.grid.nvox(), Vec3::Zero());
    Mask kept;
    kept.grid = mask.grid;
    kept.flags.assign(mask.flags.size(), 0);

    const CoordField wc = world_coords(pred.grid);
    for (std::size_t v = 0; v < mask.flags.size(); ++v) {
        if (!mask.flags[v]) continue;
        Vec3 r = pred.coords[v] - t(wc.coords[v]);
        const double n = r.norm();
        if (n > clip_mm) {
            if (!clamp_instead) continue;  // excluded from the fitting mask
            r *= clip_mm / n;
        }
        residual.disp[v] = r;
        kept.flags[v] = 1;
    }
    return {std::move(residual), std::move(kept)};
}

} // namespace coordfit
