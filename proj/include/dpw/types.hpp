#ifndef DPW_TYPES_HPP
#define DPW_TYPES_HPP

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace dpw {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Vec3 = Eigen::Vector3d;

inline constexpr cplx kI{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Largest singular value of a 2x2 complex matrix, closed form.
inline double opNorm(const Mat2& m) {
    const double f2 = m.squaredNorm();
    const double d = std::abs(m.determinant());
    const double disc = std::max(f2 * f2 - 4.0 * d * d, 0.0);
    return std::sqrt(0.5 * (f2 + std::sqrt(disc)));
}

/// Smallest singular value (companion of opNorm).
inline double minSingularValue(const Mat2& m) {
    const double f2 = m.squaredNorm();
    const double d = std::abs(m.determinant());
    const double disc = std::max(f2 * f2 - 4.0 * d * d, 0.0);
    return std::sqrt(std::max(0.5 * (f2 - std::sqrt(disc)), 0.0));
}

inline double sl2Residual(const Mat2& m) { return std::abs(m.determinant() - 1.0); }

inline double su2Residual(const Mat2& m) {
    return std::max(opNorm(m * m.adjoint() - Mat2::Identity()), sl2Residual(m));
}

// su(2) model of R^3:
//   x = (x1,x2,x3)  <->  X = (-i/2) [[-x3, x1+i x2], [x1-i x2, x3]]
// with ||x||^2 = 4 det X.
inline Mat2 su2FromR3(const Vec3& x) {
    Mat2 m;
    m << cplx(0, 1) * 0.5 * x[2], cplx(0, -0.5) * cplx(x[0], x[1]),
         cplx(0, -0.5) * cplx(x[0], -x[1]), cplx(0, -0.5) * x[2];
    return m;
}

inline double antiHermitianTracelessResidual(const Mat2& m) {
    return opNorm(m + m.adjoint()) + std::abs(m.trace());
}

inline Vec3 r3FromSu2(const Mat2& m, double tol = 1e-9) {
    if (antiHermitianTracelessResidual(m) > tol * std::max(1.0, opNorm(m)))
        throw Error("r3FromSu2: matrix is not trace-free anti-Hermitian within tolerance");
    const cplx a12 = m(0, 1);
    Vec3 x;
    // From X = (-i/2)[[-x3, x1+ix2],[x1-ix2, x3]]:
    //   m(0,1) = (-i/2)(x1+ix2)  =>  x1+ix2 = 2i m(0,1)
    //   m(1,1) = (-i/2) x3       =>  x3 = 2i m(1,1)
    const cplx w = 2.0 * kI * a12;
    x[0] = w.real();
    x[1] = w.imag();
    x[2] = (2.0 * kI * m(1, 1)).real();
    return x;
}

/// Nearest trace-free anti-Hermitian matrix (orthogonal projection onto su2).
inline Mat2 projectSu2(const Mat2& m, double* residual = nullptr) {
    Mat2 ah = 0.5 * (m - m.adjoint());
    ah -= 0.5 * ah.trace() * Mat2::Identity();
    if (residual) *residual = opNorm(m - ah);
    return ah;
}

}  // namespace dpw

#endif
