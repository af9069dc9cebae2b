#include "coordfit/matrix_log.hpp"

#include <cmath>
#include <complex>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace coordfit {

namespace {

// Denman-Beavers iteration for the principal square root.
Mat4 principal_sqrt(const Mat4& m) {
    Mat4 y = m;
    Mat4 z = Mat4::Identity();
    for (int it = 0; it < 50; ++it) {
        const Mat4 y_next = 0.5 * (y + z.inverse());
        const Mat4 z_next = 0.5 * (z + y.inverse());
        const double delta = (y_next - y).norm();
        y = y_next;
        z = z_next;
        if (delta <= 1e-14 * std::max(1.0, y.norm())) break;
    }
    return y;
}

// log(M) = 2 * atanh(Z) with Z = (M-I)(M+I)^-1, eight odd-power terms.
Mat4 gregory_log(const Mat4& m) {
    const Mat4 z = (m - Mat4::Identity()) * (m + Mat4::Identity()).inverse();
    const Mat4 z2 = z * z;
    Mat4 term = z;
    Mat4 acc = z;
    for (int j = 3; j <= 15; j += 2) {
        term = term * z2;
        acc += term / double(j);
    }
    return 2.0 * acc;
}

} // namespace

std::pair<Mat3, Vec3> matrix_log_affine(const AffineTransform& t) {
    if (t.linear.determinant() <= 0.0)
        throw LogUndefined("matrix_log_affine: non-positive determinant " +
                           std::to_string(t.linear.determinant()));
    Mat4 m = affine_to_homogeneous(t);

    const Eigen::EigenSolver<Mat4> eig(m);
    for (int i = 0; i < 4; ++i) {
        const std::complex<double> ev = eig.eigenvalues()(i);
        const double scale = std::max(1.0, std::abs(ev));
        if (std::abs(ev.imag()) <= 1e-12 * scale && ev.real() <= 0.0) {
            std::ostringstream os;
            os << "matrix_log_affine: eigenvalue " << ev.real()
               << " on the closed negative real axis";
            throw LogUndefined(os.str());
        }
    }

    int k = 0;
    while ((m - Mat4::Identity()).norm() > 0.25 && k < 60) {
        m = principal_sqrt(m);
        ++k;
    }
    const Mat4 logm = gregory_log(m) * std::pow(2.0, k);
    return {logm.block<3, 3>(0, 0), logm.block<3, 1>(0, 3)};
}

Mat4 expm(const Mat4& a) {
    const double norm = a.norm();
    int s = 0;
    if (norm > 0.25) s = int(std::ceil(std::log2(norm / 0.25)));
    const Mat4 b = a / std::pow(2.0, s);
    Mat4 term = Mat4::Identity();
    Mat4 acc = Mat4::Identity();
    for (int j = 1; j <= 24; ++j) {
        term = term * b / double(j);
        acc += term;
        if (term.norm() < 1e-20 * std::max(1.0, acc.norm())) break;
    }
    for (int i = 0; i < s; ++i) acc = acc * acc;
    return acc;
}

} // namespace coordfit
