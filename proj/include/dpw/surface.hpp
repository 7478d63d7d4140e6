#ifndef DPW_SURFACE_HPP
#define DPW_SURFACE_HPP

#include "dpw/frame.hpp"
#include "dpw/iwasawa.hpp"

namespace dpw {

/// One evaluated point of an immersion.
struct SurfaceSample {
    CoverPoint z;
    Vec3 f = Vec3::Zero();
    Vec3 N = Vec3::Zero();
    double metric_density = 0.0;  ///< coefficient of |dz|
    cplx hopf = 0.0;              ///< coefficient of dz^2
    double proj_residual = 0.0;   ///< distance of the raw Sym output to su(2)
};

/// f = i dF/dlambda(1) F(1)^{-1}, projected onto su(2) and read off as an
/// R^3 point. The projection residual is reported, never hidden.
Vec3 symBobenko(const LoopMatrix& F, double* proj_residual = nullptr);

/// N = (-i/2) F(1) diag(1,-1) F(1)^{-1}, a unit vector.
Vec3 normalMap(const LoopMatrix& F);

struct SurfaceInvariants {
    double rho = 0.0;  ///< upper-left entry of B(z, 0)
    double metric_density = 0.0;
    cplx hopf = 0.0;
};

/// Metric density 2 rho^2 |xi_{-1}^{12}| and Hopf coefficient
/// -2 xi_{-1}^{12} xi_0^{21} from the positive factor B(z,.) and the
/// potential evaluated at z (as a loop in lambda).
SurfaceInvariants surfaceInvariants(const LoopMatrix& B, const LoopMatrix& xi_at_z);

/// Samples xi(z, .) on the lambda grid.
LoopMatrix potentialAtZ(const Potential& xi, const CircleGrid& grid, cplx z);

/// z-independent unitary loop acting on R^3 by
///   H . X = H(1) X H(1)^{-1} + Sym(H)   (points)
///   H . v = H(1) v H(1)^{-1}            (tangents)
struct RigidMotion {
    explicit RigidMotion(LoopMatrix H, double tol = 1e-8);
    Vec3 applyPoint(const Vec3& p) const;
    Vec3 applyTangent(const Vec3& v) const;
    Vec3 translation() const { return translation_; }
    const LoopMatrix& loop() const { return H_; }

private:
    LoopMatrix H_;
    Mat2 h1_;  ///< H(1)
    Vec3 translation_;
};

/// Assembles a full sample from Iwasawa factors and the potential at z.
SurfaceSample makeSurfaceSample(const IwasawaFactors& fac, const LoopMatrix& xi_at_z,
                                CoverPoint zc);

/// Model Delaunay immersion: frame M z^{A_t}, then Iwasawa and Sym.
SurfaceSample delaunayModelImmersion(const LoopMatrix& M, const DelaunayResidue& res,
                                     const CircleGrid& grid, CoverPoint zc,
                                     const IwasawaOptions& opt = {});

struct OrientedLine {
    Vec3 point = Vec3::Zero();
    Vec3 direction = Vec3::Zero();
};

/// Limit axis of the half Delaunay surface as t -> 0: (-e3, -e1) in the
/// spherical case, (0, -e1) in the catenoidal one. When the initial frame
/// was normalized by a unitary loop Q, the line is Q . (0, e3) instead.
OrientedLine axisLimit(Branch branch, const LoopMatrix* Q = nullptr);

/// Distance from p to the line {point + s * direction}.
double distanceToLine(const Vec3& p, const OrientedLine& axis);

}  // namespace dpw

#endif
