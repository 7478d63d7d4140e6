#ifndef DPW_POTENTIAL_HPP
#define DPW_POTENTIAL_HPP

#include <functional>
#include <memory>
#include <vector>

#include "dpw/loop.hpp"

namespace dpw {

enum class Branch { spherical, catenoidal };

/// Polynomial in the weight parameter t, lowest degree first.
struct Poly {
    std::vector<cplx> c;
    cplx eval(double t) const;
    Poly deriv() const;
    bool zeroConstantTerm(double tol = 1e-14) const;
};

Poly polyAdd(const Poly& a, const Poly& b);
Poly polyMul(const Poly& a, const Poly& b, int max_deg);
Poly polyScale(const Poly& a, cplx s);
Poly polyShift(const Poly& a, int k);      ///< multiply by t^k
Poly polyDivT(const Poly& a);              ///< divide by t (needs zero constant term)
Poly sqrtOneMinus16T(int max_deg);         ///< Taylor series of sqrt(1 - 16 t)

/// Residue A_t(lambda) = [[0, r/lambda + s],[r lambda + s, 0]] with
/// r + s = 1/2, r s = t.
struct DelaunayResidue {
    double t = 0.0;
    double r = 0.5;
    double s = 0.0;
    Branch branch = Branch::spherical;

    static DelaunayResidue solve(double t, Branch branch);
    Mat2 matrix(cplx lam) const;
    Mat2 dtMatrix(cplx lam) const;   ///< dA_t/dt at fixed lambda
    cplx muSquared(cplx lam) const;  ///< 1/4 + t (lambda-1)^2 / lambda
};

/// z^{A_t} evaluated at a single lambda; lnz is the cover logarithm of z.
Mat2 zPowASample(const DelaunayResidue& res, cplx lnz, cplx lam);

/// One table entry: coefficient polynomial c(t) of z^k lambda^j in the
/// (row, col) matrix slot.
struct PerturbationTerm {
    int k = 0;
    int j = 0;
    int row = 0;
    int col = 0;
    Poly t_poly;
};

struct PerturbationSpec {
    std::vector<PerturbationTerm> terms;
    void validate() const;
    Mat2 eval(double t, cplx z, cplx lam) const;
    Mat2 dtEval(double t, cplx z, cplx lam) const;
    /// coefficient matrix of z^k as a polynomial in lambda-power j
    Mat2 zCoeff(double t, int k, cplx lam) const;
    int maxZPower() const;
};

struct PotentialSpec {
    DelaunayResidue residue;
    PerturbationSpec perturbation;
    double epsilon = 1.0;

    Mat2 evalAt(cplx z, cplx lam) const;  ///< A_t(lam)/z + R_t(z, lam), guarded
    Mat2 dtEvalPerturbation(cplx z, cplx lam) const;
};

/// Abstract potential evaluator xi(z, lambda) (the dz-coefficient).
class Potential {
public:
    virtual ~Potential() = default;
    virtual Mat2 eval(cplx z, cplx lam) const = 0;
};

class SpecPotential : public Potential {
public:
    explicit SpecPotential(PotentialSpec spec) : spec_(std::move(spec)) {}
    Mat2 eval(cplx z, cplx lam) const override { return spec_.evalAt(z, lam); }
    const PotentialSpec& spec() const { return spec_; }

private:
    PotentialSpec spec_;
};

struct MobiusMap {
    cplx p{0.0, 0.0};
    cplx q{1.0, 0.0};
    cplx apply(cplx z) const;
    cplx deriv(cplx z) const;  ///< h'(z) = q / (pz + q)^2
    bool isIdentity() const { return std::abs(p) == 0.0 && std::abs(q - 1.0) == 0.0; }
};

/// A z-holomorphic plus-loop gauge in closed form: value and analytic
/// z-derivative.
struct Gauge {
    std::function<Mat2(cplx z, cplx lam)> value;
    std::function<Mat2(cplx z, cplx lam)> dz;
};

/// xi . G = G^{-1} xi G + G^{-1} dG
class GaugedPotential : public Potential {
public:
    GaugedPotential(std::shared_ptr<const Potential> base, Gauge gauge)
        : base_(std::move(base)), gauge_(std::move(gauge)) {}
    Mat2 eval(cplx z, cplx lam) const override;

private:
    std::shared_ptr<const Potential> base_;
    Gauge gauge_;
};

/// (h^* xi)(z) = xi(h(z)) h'(z)
class MobiusPotential : public Potential {
public:
    MobiusPotential(std::shared_ptr<const Potential> base, MobiusMap h)
        : base_(std::move(base)), h_(h) {}
    Mat2 eval(cplx z, cplx lam) const override;

private:
    std::shared_ptr<const Potential> base_;
    MobiusMap h_;
};

/// p_t = (s c12(t,0) + r c21(t,0)) / 2 read from the z^0 term t C_t of the
/// perturbation, C_t = [[c11, c12/lambda],[c21, -c11]].
cplx computePt(const PotentialSpec& spec);

struct RegularizingGauge {
    LoopMatrix g;   ///< g_t(lambda); the gauge is G_t(z, lambda) = exp(g_t z)
    MobiusMap h;    ///< h_t(z) = z / (1 + p_t z)
    cplx p_t{};
    double resonance_residual = 0.0;  ///< extrapolation misfit at lambda = 1
    double plus_residual = 0.0;       ///< size of forbidden g_t components
    Gauge gauge() const;
};

/// Core builder from the z^0 normal form: Ct(lambda) is C_t sampled on the
/// grid (the z^0 perturbation coefficient divided by t).
RegularizingGauge buildRegularizingGauge(const CircleGrid& grid, const DelaunayResidue& res,
                                         const std::function<Mat2(cplx)>& Ct, cplx p_t,
                                         double reg_tol = 1e-6);
RegularizingGauge buildRegularizingGauge(const CircleGrid& grid, const PotentialSpec& spec,
                                         double reg_tol = 1e-6);

struct InitialFrameNormalization {
    double rho = 1.0;
    cplx mu{};
    cplx p{};
    cplx q{};
    Gauge gauge;   ///< the z-dependent normalizing gauge G(z, lambda)
    MobiusMap h;   ///< h(z) = z / (pz + q)
    LoopMatrix Q;  ///< unitary part of M H
    double unitary_residual = 0.0;  ///< unitarity misfit of M H G(1,.) H^{-1}
};

/// Section-2 normalization for an initial frame of hat form
/// M = [[a, b/lambda],[c lambda, d]], ad - bc = 1.
InitialFrameNormalization normalizeInitialFrame(const CircleGrid& grid, cplx a, cplx b, cplx c,
                                                cplx d);

/// Perturbed Delaunay family xi_t = h^*(xi_t^D . exp(t phi(z) g)) with
/// phi(z) = z^2 - z, g = [[0, chi],[0, 0]] and h(w) = w/(1 + kappa t w);
/// monodromy is exactly exp(2 i pi A_t) and p_t = -kappa t.
class GaugedDelaunayFamily {
public:
    GaugedDelaunayFamily(Branch branch, cplx coupling, double kappa, cplx nu = 0.0,
                         double epsilon = 1.2);

    Mat2 eval(double t, cplx w, cplx lam) const;
    Mat2 dtEval(double t, cplx w, cplx lam) const;
    std::shared_ptr<Potential> potential(double t) const;
    /// Phi_t(1, lambda) matching the exact construction; at nu = 0 this is the
    /// true frame (unitary monodromy), otherwise a normalization convention.
    Mat2 initialFrame(double t, cplx lam) const;
    /// C_t normal form of the z^0 perturbation coefficient.
    Mat2 Ct(double t, cplx lam) const;
    cplx pt(double t) const { return -kappa_ * t; }
    MobiusMap mobius(double t) const { return MobiusMap{cplx(kappa_ * t, 0.0), cplx(1.0, 0.0)}; }
    Branch branch() const { return branch_; }
    double epsilon() const { return epsilon_; }
    double kappa() const { return kappa_; }
    cplx coupling() const { return chi_; }
    cplx nu() const { return nu_; }

    /// Finite-table approximation (z-degree z_deg, t-degree t_deg).
    PotentialSpec tableSpec(double t, int z_deg = 6, int t_deg = 12) const;

private:
    Branch branch_;
    cplx chi_;
    double kappa_;
    cplx nu_;
    double epsilon_;
};

}  // namespace dpw

#endif
