#ifndef DPW_FRAME_HPP
#define DPW_FRAME_HPP

#include <functional>
#include <vector>

#include "dpw/potential.hpp"

namespace dpw {

/// Point on the universal cover of the punctured disk: z = exp(log_abs + i arg)
/// with a continuous (unwrapped) argument.
struct CoverPoint {
    double log_abs = 0.0;
    double arg = 0.0;
    cplx z() const { return std::exp(cplx(log_abs, arg)); }
    cplx lnz() const { return {log_abs, arg}; }
};

/// Exact Delaunay frame z^{A_t} on the lambda-grid.
LoopMatrix zPowA(const CircleGrid& grid, const DelaunayResidue& res, CoverPoint zc);

struct OdeOptions {
    double ode_tol = 1e-10;
    double det_drift_limit = 1e-6;
    long max_steps = 2000000;
};

struct FramePath {
    std::vector<CoverPoint> waypoints;
    std::vector<LoopMatrix> frames;  ///< Phi at each waypoint
    double max_det_drift = 0.0;      ///< worst |det - 1| seen before renormalization
    long steps = 0;
};

std::vector<CoverPoint> radialPath(double r0, double r1, double arg = 0.0);
/// counterclockwise circle of radius r starting at arg0, sampled at n+1
/// waypoints (last one has arg advanced by 2 pi)
std::vector<CoverPoint> circlePath(double r, double arg0 = 0.0, int n = 16);

/// Integrates d Phi = Phi xi dz along the waypoint polyline (linear in
/// log-polar cover coordinates), all lambda-gridpoints together with a
/// shared adaptive Dormand-Prince 5(4) step.
FramePath odeSolveFrame(const Potential& xi, const CircleGrid& grid, const CoverPoint& start,
                        const LoopMatrix& phi_start, const std::vector<CoverPoint>& waypoints,
                        const OdeOptions& opt = {});

/// M = Phi(after one counterclockwise turn) Phi(base)^{-1}.
LoopMatrix monodromy(const Potential& xi, const CircleGrid& grid, const CoverPoint& base,
                     const LoopMatrix& phi_base, const OdeOptions& opt = {});

struct MonodromyReport {
    double unitary_residual = 0.0;  ///< sup over grid of ||M M^dagger - I||
    double at_one_residual = 0.0;   ///< min over signs of ||M(1) -+ I||
    int at_one_sign = 1;            ///< sign realizing the minimum
    double deriv_at_one_residual = 0.0;  ///< ||d M / d lambda at 1||
    bool pass(double tol_unitary = 1e-8, double tol_one = 1e-8, double tol_deriv = 1e-7) const {
        return unitary_residual <= tol_unitary && at_one_residual <= tol_one &&
               deriv_at_one_residual <= tol_deriv;
    }
};

MonodromyReport checkMonodromyProblem(const LoopMatrix& M);

/// One-parameter family of potentials with an analytic t-derivative.
class PotentialFamily {
public:
    virtual ~PotentialFamily() = default;
    virtual Mat2 eval(double t, cplx z, cplx lam) const = 0;
    virtual Mat2 dtEval(double t, cplx z, cplx lam) const = 0;
};

/// Pure Delaunay family xi_t = A_t / z.
class DelaunayFamily : public PotentialFamily {
public:
    explicit DelaunayFamily(Branch branch) : branch_(branch) {}
    Mat2 eval(double t, cplx z, cplx lam) const override {
        return DelaunayResidue::solve(t, branch_).matrix(lam) / z;
    }
    Mat2 dtEval(double t, cplx z, cplx lam) const override {
        return DelaunayResidue::solve(t, branch_).dtMatrix(lam) / z;
    }

private:
    Branch branch_;
};

/// Adapter for GaugedDelaunayFamily.
class GaugedFamilyAdapter : public PotentialFamily {
public:
    explicit GaugedFamilyAdapter(GaugedDelaunayFamily fam) : fam_(std::move(fam)) {}
    Mat2 eval(double t, cplx z, cplx lam) const override { return fam_.eval(t, z, lam); }
    Mat2 dtEval(double t, cplx z, cplx lam) const override { return fam_.dtEval(t, z, lam); }

private:
    GaugedDelaunayFamily fam_;
};

struct MonodromyDerivative {
    LoopMatrix M;       ///< monodromy at t0
    LoopMatrix dM;      ///< t-derivative of the monodromy at t0
    double commutation_residual = 0.0;  ///< ||M(t0) -+ I|| hypothesis check
};

/// dM/dt at t0 via the loop integral of Phi (d xi/dt) Phi^{-1}, with the
/// frame frozen to Phi(base) = I. Simpson quadrature with n panels.
MonodromyDerivative monodromyDerivative(const PotentialFamily& family, double t0,
                                        const CircleGrid& grid, double radius, int n = 512,
                                        const OdeOptions& opt = {});

/// z-power coefficients C_0 .. C_{K-1} of the holomorphic part of xi
/// (Cauchy integrals over |z| = z_c via FFT with n_z samples).
std::vector<LoopMatrix> zPowerTable(const Potential& xi, const DelaunayResidue& res,
                                    const CircleGrid& grid, double z_c, int K, int n_z = 128);

/// Frobenius recurrence P_0 = I, L_{k+1}(P_{k+1}) = sum_{i+j=k} P_i C_j with
/// L_n^{-1}(X) = (1/n)(X - (n^2 - 4 mu^2)^{-1}(n I - 2A)[A, X]).
/// The z^0 coefficient must already be absorbed by the regularizing gauge;
/// its size is reported in c0_residual and it is treated as zero.
std::vector<LoopMatrix> frobeniusSeries(const DelaunayResidue& res, const CircleGrid& grid,
                                        const std::vector<LoopMatrix>& C, int K,
                                        double* c0_residual = nullptr);

struct ZapForm {
    LoopMatrix M;                 ///< holomorphic representative M_t
    DelaunayResidue res;
    std::vector<LoopMatrix> P;    ///< P_1 .. P_K (P_0 = I)
    double c0_residual = 0.0;
    double fit_disagreement = 0.0;  ///< M extracted at the two fit radii

    LoopMatrix evalP(const CircleGrid& grid, CoverPoint zc) const;
    /// M z^{A} P(z)
    LoopMatrix reconstruct(const CircleGrid& grid, CoverPoint zc) const;
};

/// Builds the z^A P form of a regularized potential. `frame_at` must return
/// the frame Phi(z, .) of the potential at the requested cover point.
ZapForm buildZapForm(const Potential& xi, const DelaunayResidue& res, const CircleGrid& grid,
                     int K, const std::function<LoopMatrix(CoverPoint)>& frame_at,
                     double z_fit1 = 0.1, double z_fit2 = 0.05, double z_c = 0.4);

}  // namespace dpw

#endif
