#include "dpw/surface.hpp"

namespace dpw {

Vec3 symBobenko(const LoopMatrix& F, double* proj_residual) {
    const Mat2 f1 = F.evalUnchecked(1.0);
    const Mat2 df = F.derivLambda().evalUnchecked(1.0);
    const Mat2 raw = kI * df * f1.inverse();
    double res = 0.0;
    const Mat2 su = projectSu2(raw, &res);
    if (proj_residual) *proj_residual = res;
    return r3FromSu2(su, 1e-5);
}

Vec3 normalMap(const LoopMatrix& F) {
    const Mat2 f1 = F.evalUnchecked(1.0);
    Mat2 sigma;
    sigma << 1.0, 0.0, 0.0, -1.0;
    const Mat2 raw = -0.5 * kI * f1 * sigma * f1.inverse();
    const Vec3 n = r3FromSu2(projectSu2(raw), 1e-5);
    const double len = n.norm();
    if (std::abs(len - 1.0) > 1e-6) throw Error("normalMap: normal is not unit length");
    return n / len;
}

SurfaceInvariants surfaceInvariants(const LoopMatrix& B, const LoopMatrix& xi_at_z) {
    if (B.negativeEnergy() > 1e-8) throw Error("surfaceInvariants: B is not a plus loop");
    const cplx b0 = B.coeff(0)(0, 0);
    if (b0.real() <= 0.0 || std::abs(b0.imag()) > 1e-8 * std::max(1.0, b0.real()))
        throw Error("surfaceInvariants: B(z,0) has a non-positive diagonal");
    SurfaceInvariants out;
    out.rho = b0.real();
    const cplx xm = xi_at_z.coeff(-1)(0, 1);
    const cplx x0 = xi_at_z.coeff(0)(1, 0);
    out.metric_density = 2.0 * out.rho * out.rho * std::abs(xm);
    out.hopf = -2.0 * xm * x0;
    return out;
}

LoopMatrix potentialAtZ(const Potential& xi, const CircleGrid& grid, cplx z) {
    std::vector<Mat2> s(static_cast<size_t>(grid.L));
    for (int m = 0; m < grid.L; ++m) s[static_cast<size_t>(m)] = xi.eval(z, grid.point(m));
    return LoopMatrix::fromSamples(grid, s);
}

RigidMotion::RigidMotion(LoopMatrix H, double tol) : H_(std::move(H)) {
    if (H_.unitaryResidual() > tol) throw Error("RigidMotion: loop is not SU2 on the circle");
    h1_ = H_.evalUnchecked(1.0);
    translation_ = symBobenko(H_);
}

Vec3 RigidMotion::applyPoint(const Vec3& p) const {
    const Mat2 x = h1_ * su2FromR3(p) * h1_.inverse();
    return r3FromSu2(projectSu2(x), 1e-5) + translation_;
}

Vec3 RigidMotion::applyTangent(const Vec3& v) const {
    const Mat2 x = h1_ * su2FromR3(v) * h1_.inverse();
    return r3FromSu2(projectSu2(x), 1e-5);
}

SurfaceSample makeSurfaceSample(const IwasawaFactors& fac, const LoopMatrix& xi_at_z,
                                CoverPoint zc) {
    SurfaceSample s;
    s.z = zc;
    s.f = symBobenko(fac.F, &s.proj_residual);
    s.N = normalMap(fac.F);
    const auto inv = surfaceInvariants(fac.B, xi_at_z);
    s.metric_density = inv.metric_density;
    s.hopf = inv.hopf;
    return s;
}

SurfaceSample delaunayModelImmersion(const LoopMatrix& M, const DelaunayResidue& res,
                                     const CircleGrid& grid, CoverPoint zc,
                                     const IwasawaOptions& opt) {
    const LoopMatrix phi = M * zPowA(grid, res, zc);
    const auto fac = iwasawaDecompose(phi, opt);
    const cplx z = zc.z();
    std::vector<Mat2> s(static_cast<size_t>(grid.L));
    for (int m = 0; m < grid.L; ++m) s[static_cast<size_t>(m)] = res.matrix(grid.point(m)) / z;
    return makeSurfaceSample(fac, LoopMatrix::fromSamples(grid, s), zc);
}

OrientedLine axisLimit(Branch branch, const LoopMatrix* Q) {
    if (Q) {
        RigidMotion motion(*Q);
        return {motion.applyPoint(Vec3::Zero()), motion.applyTangent(Vec3(0, 0, 1))};
    }
    if (branch == Branch::spherical) return {Vec3(0, 0, -1), Vec3(-1, 0, 0)};
    return {Vec3::Zero(), Vec3(-1, 0, 0)};
}

double distanceToLine(const Vec3& p, const OrientedLine& axis) {
    const Vec3 d = axis.direction.normalized();
    const Vec3 w = p - axis.point;
    return (w - w.dot(d) * d).norm();
}

}  // namespace dpw
