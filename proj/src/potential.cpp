#include "dpw/potential.hpp"

#include <algorithm>
#include <cmath>

#include "dpw/iwasawa.hpp"

namespace dpw {

cplx Poly::eval(double t) const {
    cplx v{};
    for (size_t i = c.size(); i-- > 0;) v = v * t + c[i];
    return v;
}

Poly Poly::deriv() const {
    Poly d;
    for (size_t i = 1; i < c.size(); ++i) d.c.push_back(static_cast<double>(i) * c[i]);
    return d;
}

bool Poly::zeroConstantTerm(double tol) const { return c.empty() || std::abs(c[0]) <= tol; }

Poly polyAdd(const Poly& a, const Poly& b) {
    Poly out;
    out.c.resize(std::max(a.c.size(), b.c.size()), cplx{});
    for (size_t i = 0; i < a.c.size(); ++i) out.c[i] += a.c[i];
    for (size_t i = 0; i < b.c.size(); ++i) out.c[i] += b.c[i];
    return out;
}

Poly polyMul(const Poly& a, const Poly& b, int max_deg) {
    Poly out;
    if (a.c.empty() || b.c.empty()) return out;
    out.c.resize(std::min(a.c.size() + b.c.size() - 1, static_cast<size_t>(max_deg + 1)), cplx{});
    for (size_t i = 0; i < a.c.size(); ++i)
        for (size_t j = 0; j < b.c.size() && i + j < out.c.size(); ++j)
            out.c[i + j] += a.c[i] * b.c[j];
    return out;
}

Poly polyScale(const Poly& a, cplx s) {
    Poly out = a;
    for (auto& v : out.c) v *= s;
    return out;
}

Poly polyShift(const Poly& a, int k) {
    Poly out;
    out.c.assign(static_cast<size_t>(k), cplx{});
    out.c.insert(out.c.end(), a.c.begin(), a.c.end());
    return out;
}

Poly polyDivT(const Poly& a) {
    if (!a.zeroConstantTerm(1e-12))
        throw Error("polyDivT: nonzero constant term");
    Poly out;
    if (a.c.size() > 1) out.c.assign(a.c.begin() + 1, a.c.end());
    return out;
}

Poly sqrtOneMinus16T(int max_deg) {
    // sqrt(1+x) = sum binom(1/2, n) x^n with x = -16 t
    Poly out;
    out.c.resize(static_cast<size_t>(max_deg + 1), cplx{});
    double binom = 1.0;
    double x = 1.0;
    for (int n = 0; n <= max_deg; ++n) {
        out.c[static_cast<size_t>(n)] = binom * x;
        binom *= (0.5 - n) / (n + 1.0);
        x *= -16.0;
    }
    return out;
}

DelaunayResidue DelaunayResidue::solve(double t, Branch branch) {
    if (t > 1.0 / 16.0 + 1e-15) throw Error("solve_rs: t must not exceed 1/16");
    const double q = std::sqrt(std::max(1.0 - 16.0 * t, 0.0));
    DelaunayResidue out;
    out.t = t;
    out.branch = branch;
    const double sign = branch == Branch::spherical ? 1.0 : -1.0;
    out.r = (1.0 + sign * q) / 4.0;
    out.s = (1.0 - sign * q) / 4.0;
    return out;
}

Mat2 DelaunayResidue::matrix(cplx lam) const {
    Mat2 m;
    m << 0.0, r / lam + s, r * lam + s, 0.0;
    return m;
}

Mat2 DelaunayResidue::dtMatrix(cplx lam) const {
    const double q = std::sqrt(std::max(1.0 - 16.0 * t, 1e-300));
    const double sign = branch == Branch::spherical ? 1.0 : -1.0;
    const double dr = -2.0 * sign / q;
    const double ds = 2.0 * sign / q;
    Mat2 m;
    m << 0.0, dr / lam + ds, dr * lam + ds, 0.0;
    return m;
}

cplx DelaunayResidue::muSquared(cplx lam) const {
    if (std::abs(lam) == 0.0) throw Error("mu_squared: lambda = 0");
    const cplx d = lam - 1.0;
    return 0.25 + t * d * d / lam;
}

Mat2 zPowASample(const DelaunayResidue& res, cplx lnz, cplx lam) {
    // z^A = cosh(mu ln z) I + ln z sinhc(mu ln z) A; even in mu, so the
    // square-root branch is irrelevant.
    const cplx mu = std::sqrt(res.muSquared(lam));
    const cplx w = mu * lnz;
    cplx ch, shc;
    if (std::abs(w) < 1e-4) {
        const cplx w2 = w * w;
        ch = 1.0 + w2 * (0.5 + w2 * (1.0 / 24.0 + w2 / 720.0));
        shc = 1.0 + w2 * (1.0 / 6.0 + w2 * (1.0 / 120.0 + w2 / 5040.0));
    } else {
        ch = std::cosh(w);
        shc = std::sinh(w) / w;
    }
    return ch * Mat2::Identity() + lnz * shc * res.matrix(lam);
}

void PerturbationSpec::validate() const {
    for (const auto& term : terms) {
        if (term.k < 0) throw Error("perturbation: z-power must be >= 0");
        if (term.j < -1) throw Error("perturbation: lambda-power must be >= -1");
        if (term.row < 0 || term.row > 1 || term.col < 0 || term.col > 1)
            throw Error("perturbation: bad entry index");
        if (term.j == -1 && !(term.row == 0 && term.col == 1))
            throw Error("perturbation: 1/lambda allowed only in the upper-right entry");
        if (!term.t_poly.zeroConstantTerm())
            throw Error("perturbation: coefficients must vanish at t = 0");
    }
}

Mat2 PerturbationSpec::eval(double t, cplx z, cplx lam) const {
    Mat2 out = Mat2::Zero();
    for (const auto& term : terms)
        out(term.row, term.col) +=
            term.t_poly.eval(t) * std::pow(z, term.k) * std::pow(lam, term.j);
    return out;
}

Mat2 PerturbationSpec::dtEval(double t, cplx z, cplx lam) const {
    Mat2 out = Mat2::Zero();
    for (const auto& term : terms)
        out(term.row, term.col) +=
            term.t_poly.deriv().eval(t) * std::pow(z, term.k) * std::pow(lam, term.j);
    return out;
}

Mat2 PerturbationSpec::zCoeff(double t, int k, cplx lam) const {
    Mat2 out = Mat2::Zero();
    for (const auto& term : terms)
        if (term.k == k) out(term.row, term.col) += term.t_poly.eval(t) * std::pow(lam, term.j);
    return out;
}

int PerturbationSpec::maxZPower() const {
    int k = 0;
    for (const auto& term : terms) k = std::max(k, term.k);
    return k;
}

Mat2 PotentialSpec::evalAt(cplx z, cplx lam) const {
    if (std::abs(z) == 0.0) throw Error("potential_eval: z = 0");
    if (std::abs(z) >= epsilon) throw Error("potential_eval: |z| outside the domain disk");
    return residue.matrix(lam) / z + perturbation.eval(residue.t, z, lam);
}

Mat2 PotentialSpec::dtEvalPerturbation(cplx z, cplx lam) const {
    return perturbation.dtEval(residue.t, z, lam);
}

cplx MobiusMap::apply(cplx z) const {
    const cplx den = p * z + q;
    if (std::abs(den) < 1e-12 * std::max(1.0, std::abs(q)))
        throw Error("mobius: z at or beyond the pole");
    return z / den;
}

cplx MobiusMap::deriv(cplx z) const {
    const cplx den = p * z + q;
    if (std::abs(den) < 1e-12 * std::max(1.0, std::abs(q)))
        throw Error("mobius: z at or beyond the pole");
    return q / (den * den);
}

Mat2 GaugedPotential::eval(cplx z, cplx lam) const {
    const Mat2 G = gauge_.value(z, lam);
    if (minSingularValue(G) < 1e-12) throw Error("gauge_action: non-invertible gauge sample");
    const Mat2 Gi = G.inverse();
    return Gi * base_->eval(z, lam) * G + Gi * gauge_.dz(z, lam);
}

Mat2 MobiusPotential::eval(cplx z, cplx lam) const {
    return base_->eval(h_.apply(z), lam) * h_.deriv(z);
}

cplx computePt(const PotentialSpec& spec) {
    spec.perturbation.validate();
    Poly c12t, c21t;  // t c12(t, 0) and t c21(t, 0)
    for (const auto& term : spec.perturbation.terms) {
        if (term.k != 0) continue;
        if (term.row == 0 && term.col == 1 && term.j == -1) c12t = polyAdd(c12t, term.t_poly);
        if (term.row == 1 && term.col == 0 && term.j == 0) c21t = polyAdd(c21t, term.t_poly);
        if (term.row == 1 && term.col == 0 && term.j < 0)
            throw Error("compute_pt: lower-left z^0 term must be regular in lambda");
    }
    const double t = spec.residue.t;
    const cplx c12 = polyDivT(c12t).eval(t);
    const cplx c21 = polyDivT(c21t).eval(t);
    return 0.5 * (spec.residue.s * c12 + spec.residue.r * c21);
}

namespace {

// exponential of a traceless 2x2 matrix: M^2 = -det(M) I, so
// exp(M) = cosh(delta) I + sinhc(delta) M with delta^2 = -det M.
Mat2 expSl2(const Mat2& m) {
    const cplx d2 = -m.determinant();
    const cplx delta = std::sqrt(d2);
    cplx ch, shc;
    if (std::abs(delta) < 1e-4) {
        ch = 1.0 + d2 * (0.5 + d2 * (1.0 / 24.0 + d2 / 720.0));
        shc = 1.0 + d2 * (1.0 / 6.0 + d2 * (1.0 / 120.0 + d2 / 5040.0));
    } else {
        ch = std::cosh(delta);
        shc = std::sinh(delta) / delta;
    }
    return ch * Mat2::Identity() + shc * m;
}

}  // namespace

Gauge RegularizingGauge::gauge() const {
    const LoopMatrix gl = g;
    auto value = [gl](cplx z, cplx lam) -> Mat2 {
        return expSl2(z * gl.evalUnchecked(lam));
    };
    auto dz = [gl, value](cplx z, cplx lam) -> Mat2 {
        return gl.evalUnchecked(lam) * value(z, lam);
    };
    return Gauge{value, dz};
}

RegularizingGauge buildRegularizingGauge(const CircleGrid& grid, const DelaunayResidue& res,
                                         const std::function<Mat2(cplx)>& Ct, cplx p_t,
                                         double reg_tol) {
    grid.validate();
    // validated parameter range: |mu^2 - 1/4| = |t| |lam-1|^2 stays <= 1/4
    if (std::abs(res.t) * 4.0 > 0.25 + 1e-12)
        throw Error("build_regularizing_gauge: t outside the validated range |t| <= 1/16");
    std::vector<Mat2> samples(static_cast<size_t>(grid.L));
    for (int m = 1; m < grid.L; ++m) {
        const cplx lam = grid.point(m);
        const Mat2 A = res.matrix(lam);
        const Mat2 C = Ct(lam);
        const cplx d = lam - 1.0;
        // P_{t,1} = t C + lam / (4 (lam-1)^2) (I - 2A)[A, C], using the
        // identity t / (1 - 4 mu^2) = -lam / (4 (lam-1)^2)
        const Mat2 P1 = res.t * C +
                        (lam / (4.0 * d * d)) * (Mat2::Identity() - 2.0 * A) * (A * C - C * A);
        samples[static_cast<size_t>(m)] = p_t * A - P1;
    }
    // lambda = 1 gridpoint by quadratic extrapolation from the 4 nearest
    // neighbours; the odd-part misfit is the resonance diagnostic.
    double resonance = 0.0;
    {
        Mat2 val = Mat2::Zero();
        const Mat2 vp1 = samples[1], vp2 = samples[2];
        const Mat2 vm1 = samples[static_cast<size_t>(grid.L - 1)];
        const Mat2 vm2 = samples[static_cast<size_t>(grid.L - 2)];
        const Mat2 e1 = 0.5 * (vp1 + vm1), e2 = 0.5 * (vp2 + vm2);
        const Mat2 o1 = 0.5 * (vp1 - vm1), o2 = 0.5 * (vp2 - vm2);
        val = (4.0 * e1 - e2) / 3.0;
        const Mat2 b = (o1 + 2.0 * o2) / 5.0;  // slope * h
        const Mat2 r1 = b - o1, r2 = 2.0 * b - o2;
        resonance = std::max(opNorm(r1), opNorm(r2));
        samples[0] = val;
    }
    RegularizingGauge out;
    out.g = LoopMatrix::fromSamples(grid, samples);
    out.h = MobiusMap{p_t, cplx(1.0, 0.0)};
    out.p_t = p_t;
    out.resonance_residual = resonance;
    out.plus_residual = out.g.negativeEnergy() + std::abs(out.g.coeff(0)(1, 0));
    if (resonance > reg_tol)
        throw Error("build_regularizing_gauge: resonance at lambda = 1; monodromy hypothesis likely violated");
    return out;
}

RegularizingGauge buildRegularizingGauge(const CircleGrid& grid, const PotentialSpec& spec,
                                         double reg_tol) {
    const cplx p_t = computePt(spec);
    const double t = spec.residue.t;
    if (std::abs(t) == 0.0) {
        // g_0 = 0, h = id
        RegularizingGauge out;
        out.g = LoopMatrix(grid);
        out.h = MobiusMap{};
        out.p_t = 0.0;
        return out;
    }
    auto Ct = [&spec, t](cplx lam) -> Mat2 {
        return Mat2(spec.perturbation.zCoeff(t, 0, lam) / t);
    };
    return buildRegularizingGauge(grid, spec.residue, Ct, p_t, reg_tol);
}

InitialFrameNormalization normalizeInitialFrame(const CircleGrid& grid, cplx a, cplx b, cplx c,
                                                cplx d) {
    if (std::abs(a * d - b * c - 1.0) > 1e-10)
        throw Error("normalize_initial_frame: ad - bc differs from 1");
    const double den2 = std::norm(b - a) + std::norm(d - c);
    if (den2 < 1e-30) throw Error("normalize_initial_frame: b = a and d = c");
    const double den = std::sqrt(den2);
    InitialFrameNormalization out;
    out.rho = std::sqrt(2.0) / den;
    out.mu = ((a + b) * std::conj(b - a) + (c + d) * std::conj(d - c)) / (std::sqrt(2.0) * den);
    out.p = -out.rho * out.mu;
    out.q = out.rho * out.rho;
    const cplx p = out.p, q = out.q;
    out.h = MobiusMap{p, q};
    out.gauge.value = [p, q](cplx z, cplx lam) -> Mat2 {
        const cplx w = p * z + q;
        Mat2 g;
        g << std::sqrt(q / w), 0.0, lam * p * z / std::sqrt(q * w), std::sqrt(w / q);
        return g;
    };
    out.gauge.dz = [p, q](cplx z, cplx lam) -> Mat2 {
        const cplx w = p * z + q;
        Mat2 g;
        g << -0.5 * p * std::sqrt(q) / (w * std::sqrt(w)), 0.0,
            lam * p * (w - 0.5 * p * z) / (std::sqrt(q) * w * std::sqrt(w)),
            0.5 * p / std::sqrt(q * w);
        return g;
    };
    const double is2 = 1.0 / std::sqrt(2.0);
    out.Q = explicitIwasawaHat(grid, (a + b) * is2, (b - a) * is2, (c + d) * is2, (d - c) * is2).F;
    // verify unitarity of M H G(1,.) H^{-1} = Q H^{-1} on the grid
    double worst = 0.0;
    const double sq = std::sqrt(std::abs(q));
    for (int m = 0; m < grid.L; ++m) {
        const cplx lam = grid.point(m);
        Mat2 M, H, K;
        M << a, b / lam, c * lam, d;
        H << is2, -is2 / lam, is2 * lam, is2;
        K << 1.0 / sq, 0.0, lam * p / sq, sq;
        const Mat2 V = M * H * K * H.inverse();
        worst = std::max(worst, su2Residual(V));
    }
    out.unitary_residual = worst;
    return out;
}

namespace {

class FuncPotential : public Potential {
public:
    explicit FuncPotential(std::function<Mat2(cplx, cplx)> f) : f_(std::move(f)) {}
    Mat2 eval(cplx z, cplx lam) const override { return f_(z, lam); }

private:
    std::function<Mat2(cplx, cplx)> f_;
};

Mat2 nilpotent(cplx chi) {
    Mat2 g;
    g << 0.0, chi, 0.0, 0.0;
    return g;
}

}  // namespace

GaugedDelaunayFamily::GaugedDelaunayFamily(Branch branch, cplx coupling, double kappa, cplx nu,
                                           double epsilon)
    : branch_(branch), chi_(coupling), kappa_(kappa), nu_(nu), epsilon_(epsilon) {}

Mat2 GaugedDelaunayFamily::eval(double t, cplx w, cplx lam) const {
    const auto res = DelaunayResidue::solve(t, branch_);
    const Mat2 A = res.matrix(lam);
    const Mat2 g = nilpotent(chi_);
    const cplx b = res.r * lam + res.s;
    Mat2 K1, K2;
    K1 << -chi_ * b, 0.0, 0.0, chi_ * b;
    K2 << 0.0, -2.0 * chi_ * chi_ * b, 0.0, 0.0;
    const cplx den = 1.0 + kappa_ * t * w;
    if (std::abs(den) < 1e-12) throw Error("perturbed family: z at the Mobius pole");
    const cplx z = w / den;           // h(w)
    const cplx hp = 1.0 / (den * den);  // h'(w)
    const cplx u = z * (z - 1.0) * (z - 1.0);  // z^3 - 2 z^2 + z
    Mat2 E = Mat2::Zero();  // genuinely non-gauge term: t nu z^2 / lambda, upper right
    E(0, 1) = nu_ / lam;
    const Mat2 F = A / z + t * (z - 1.0) * K1 + 0.5 * t * t * u * K2 + t * (2.0 * z - 1.0) * g +
                   t * z * z * E;
    return F * hp;
}

Mat2 GaugedDelaunayFamily::dtEval(double t, cplx w, cplx lam) const {
    const auto res = DelaunayResidue::solve(t, branch_);
    const Mat2 A = res.matrix(lam);
    const Mat2 Ad = res.dtMatrix(lam);
    const Mat2 g = nilpotent(chi_);
    const cplx b = res.r * lam + res.s;
    const double q = std::sqrt(std::max(1.0 - 16.0 * t, 1e-300));
    const double sign = branch_ == Branch::spherical ? 1.0 : -1.0;
    const cplx bd = (-2.0 * sign / q) * lam + (2.0 * sign / q);  // db/dt
    Mat2 K1, K2, K1d, K2d;
    K1 << -chi_ * b, 0.0, 0.0, chi_ * b;
    K2 << 0.0, -2.0 * chi_ * chi_ * b, 0.0, 0.0;
    K1d << -chi_ * bd, 0.0, 0.0, chi_ * bd;
    K2d << 0.0, -2.0 * chi_ * chi_ * bd, 0.0, 0.0;
    const cplx den = 1.0 + kappa_ * t * w;
    if (std::abs(den) < 1e-12) throw Error("perturbed family: z at the Mobius pole");
    const cplx z = w / den;
    const cplx hp = 1.0 / (den * den);
    const cplx dth = -kappa_ * w * w / (den * den);       // d h / dt
    const cplx dthp = -2.0 * kappa_ * w / (den * den * den);  // d h' / dt
    const cplx u = z * (z - 1.0) * (z - 1.0);
    const cplx up = 3.0 * z * z - 4.0 * z + 1.0;
    Mat2 E = Mat2::Zero();
    E(0, 1) = nu_ / lam;
    const Mat2 F = A / z + t * (z - 1.0) * K1 + 0.5 * t * t * u * K2 + t * (2.0 * z - 1.0) * g +
                   t * z * z * E;
    const Mat2 Ft = Ad / z + (z - 1.0) * (K1 + t * K1d) + t * u * K2 + 0.5 * t * t * u * K2d +
                    (2.0 * z - 1.0) * g + z * z * E;
    const Mat2 Fz = -A / (z * z) + t * K1 + 0.5 * t * t * up * K2 + 2.0 * t * g +
                    2.0 * t * z * E;
    return (Ft + Fz * dth) * hp + F * dthp;
}

std::shared_ptr<Potential> GaugedDelaunayFamily::potential(double t) const {
    return std::make_shared<FuncPotential>(
        [fam = *this, t](cplx z, cplx lam) { return fam.eval(t, z, lam); });
}

Mat2 GaugedDelaunayFamily::initialFrame(double t, cplx lam) const {
    const auto res = DelaunayResidue::solve(t, branch_);
    const cplx z0 = 1.0 / (1.0 + kappa_ * t);
    const cplx phi = z0 * z0 - z0;
    return zPowASample(res, std::log(z0), lam) * (Mat2::Identity() + t * phi * nilpotent(chi_));
}

Mat2 GaugedDelaunayFamily::Ct(double t, cplx lam) const {
    const auto res = DelaunayResidue::solve(t, branch_);
    const cplx b = res.r * lam + res.s;
    Mat2 c;  // -( [A,g] + g ) - kappa A
    c << chi_ * b, -chi_, 0.0, -chi_ * b;
    return c - kappa_ * res.matrix(lam);
}

PotentialSpec GaugedDelaunayFamily::tableSpec(double t, int z_deg, int t_deg) const {
    PotentialSpec out;
    out.residue = DelaunayResidue::solve(t, branch_);
    out.epsilon = epsilon_;
    const double sign = branch_ == Branch::spherical ? 1.0 : -1.0;
    const Poly qs = sqrtOneMinus16T(t_deg);
    Poly rp, sp;  // r(t), s(t) as Taylor series
    rp.c.assign(static_cast<size_t>(t_deg + 1), cplx{});
    sp = rp;
    for (int i = 0; i <= t_deg; ++i) {
        rp.c[static_cast<size_t>(i)] = (sign * qs.c[static_cast<size_t>(i)]) / 4.0;
        sp.c[static_cast<size_t>(i)] = (-sign * qs.c[static_cast<size_t>(i)]) / 4.0;
    }
    rp.c[0] += 0.25;
    sp.c[0] += 0.25;

    auto add = [&out](int k, int j, int row, int col, Poly p) {
        // drop numerically empty polynomials
        double m = 0.0;
        for (auto& v : p.c) m = std::max(m, std::abs(v));
        if (m < 1e-300) return;
        out.perturbation.terms.push_back(PerturbationTerm{k, j, row, col, std::move(p)});
    };

    // pullback of the residue part: A (1/h . h' - 1/w) = sum_{n>=1} (-kappa t)^n w^{n-1} A
    Poly mkt;  // running (-kappa t)^n
    mkt.c = {1.0};
    for (int n = 1; n - 1 <= z_deg; ++n) {
        mkt = polyMul(mkt, Poly{{cplx{}, -kappa_}}, t_deg);
        add(n - 1, -1, 0, 1, polyMul(mkt, rp, t_deg));
        add(n - 1, 0, 0, 1, polyMul(mkt, sp, t_deg));
        add(n - 1, 1, 1, 0, polyMul(mkt, rp, t_deg));
        add(n - 1, 0, 1, 0, polyMul(mkt, sp, t_deg));
    }

    // holomorphic base terms (z-power kb, lambda-power j, entry, poly)
    struct Base {
        int kb, j, row, col;
        Poly p;
    };
    std::vector<Base> base;
    const Poly tr = polyShift(rp, 1), ts = polyShift(sp, 1);  // t r(t), t s(t)
    // t (z - 1) K1, K1 = diag(-chi b, chi b), b = r lambda + s
    for (auto [kb, sgn] : {std::pair{1, 1.0}, std::pair{0, -1.0}}) {
        base.push_back({kb, 1, 0, 0, polyScale(tr, -chi_ * sgn)});
        base.push_back({kb, 0, 0, 0, polyScale(ts, -chi_ * sgn)});
        base.push_back({kb, 1, 1, 1, polyScale(tr, chi_ * sgn)});
        base.push_back({kb, 0, 1, 1, polyScale(ts, chi_ * sgn)});
    }
    // (t^2/2)(z^3 - 2 z^2 + z) K2, K2 upper-right -2 chi^2 b
    const Poly t2r = polyShift(polyShift(rp, 1), 1), t2s = polyShift(polyShift(sp, 1), 1);
    for (auto [kb, sgn] : {std::pair{3, 1.0}, std::pair{2, -2.0}, std::pair{1, 1.0}}) {
        base.push_back({kb, 1, 0, 1, polyScale(t2r, -chi_ * chi_ * sgn)});
        base.push_back({kb, 0, 0, 1, polyScale(t2s, -chi_ * chi_ * sgn)});
    }
    // t (2z - 1) g, g upper-right chi
    base.push_back({1, 0, 0, 1, Poly{{cplx{}, 2.0 * chi_}}});
    base.push_back({0, 0, 0, 1, Poly{{cplx{}, -chi_}}});
    // t nu z^2 / lambda, upper right
    base.push_back({2, -1, 0, 1, Poly{{cplx{}, nu_}}});

    // Mobius pullback of z^kb: h(w)^kb h'(w) = sum_m (-kappa t)^m binom(kb+m+1, m) w^{kb+m}
    for (const auto& bterm : base) {
        Poly fac;
        fac.c = {1.0};
        double binom = 1.0;
        for (int m = 0; bterm.kb + m <= z_deg; ++m) {
            add(bterm.kb + m, bterm.j, bterm.row, bterm.col,
                polyScale(polyMul(bterm.p, fac, t_deg), binom));
            fac = polyMul(fac, Poly{{cplx{}, -kappa_}}, t_deg);
            binom *= static_cast<double>(bterm.kb + m + 2) / static_cast<double>(m + 1);
        }
    }
    out.perturbation.validate();
    return out;
}

}  // namespace dpw
