#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dpw/frame.hpp"
#include "dpw/iwasawa.hpp"

using namespace dpw;

namespace {

CircleGrid grid() { return CircleGrid{64, 16, 1.1}; }

Mat2 expTwoPiA(const DelaunayResidue& res, cplx lam) {
    const cplx mu = std::sqrt(res.muSquared(lam));
    cplx c, s;
    if (std::abs(mu) < 1e-5) {
        const cplx x = 2.0 * kPi * mu;
        c = std::cos(x);
        s = 2.0 * kPi * (1.0 - x * x / 6.0);
    } else {
        c = std::cos(2.0 * kPi * mu);
        s = std::sin(2.0 * kPi * mu) / mu;
    }
    return c * Mat2::Identity() + kI * s * res.matrix(lam);
}

class ConstPotential : public Potential {
public:
    explicit ConstPotential(const Mat2& c) : c_(c) {}
    Mat2 eval(cplx, cplx) const override { return c_; }

private:
    Mat2 c_;
};

class DelaunayPotential : public Potential {
public:
    explicit DelaunayPotential(DelaunayResidue res) : res_(res) {}
    Mat2 eval(cplx z, cplx lam) const override { return res_.matrix(lam) / z; }

private:
    DelaunayResidue res_;
};

std::mt19937& rng() {
    static std::mt19937 r(5);
    return r;
}
double randu(double a, double b) {
    std::uniform_real_distribution<double> u(a, b);
    return u(rng());
}

}  // namespace

TEST_CASE("z^A samples") {
    auto g = grid();
    auto res0 = DelaunayResidue::solve(0.0, Branch::spherical);
    CHECK((zPowA(g, res0, CoverPoint{0.0, 0.0}) - LoopMatrix::identity(g)).supNormCircle() <
          1e-13);
    Mat2 want;
    want << 1.25, 0.75, 0.75, 1.25;
    CHECK(opNorm(zPowASample(res0, std::log(cplx(4.0, 0.0)), 1.0) - want) < 1e-13);

    // arg + 2 pi acts by exp(2 i pi A) on the left
    auto res = DelaunayResidue::solve(0.03, Branch::catenoidal);
    const CoverPoint zc{std::log(0.4), 0.7};
    const CoverPoint zc2{zc.log_abs, zc.arg + 2.0 * kPi};
    for (int m = 0; m < g.L; m += 5) {
        const cplx lam = g.point(m);
        const Mat2 lhs = zPowASample(res, zc2.lnz(), lam);
        const Mat2 rhs = expTwoPiA(res, lam) * zPowASample(res, zc.lnz(), lam);
        CHECK(opNorm(lhs - rhs) < 1e-12);
    }

    // determinant one, including the mu = 0 point (t = 1/16, lambda = -1)
    auto cyl = DelaunayResidue::solve(1.0 / 16.0, Branch::spherical);
    const Mat2 at = zPowASample(cyl, std::log(cplx(0.3, 0.0)), -1.0);
    CHECK(std::abs(at.determinant() - 1.0) < 1e-12);
    Mat2 limit = Mat2::Identity() + std::log(0.3) * cyl.matrix(-1.0);
    CHECK(opNorm(at - limit) < 1e-10);
}

TEST_CASE("ODE integration against exact solutions") {
    auto g = grid();
    // constant-coefficient potential
    Mat2 c;
    c << cplx(0.1, 0.2), cplx(0.3, -0.1), cplx(-0.2, 0.1), cplx(-0.1, -0.2);
    ConstPotential cp(c);
    const CoverPoint a{std::log(0.5), 0.0}, b{std::log(1.5), 0.4};
    auto fp = odeSolveFrame(cp, g, a, LoopMatrix::identity(g), {b});
    // exp of the traceless matrix (b - a) c in closed form
    const Mat2 m = (b.z() - a.z()) * c;
    const cplx d = std::sqrt(-m.determinant());
    const cplx sh = std::abs(d) < 1e-8 ? cplx(1.0) : std::sinh(d) / d;
    const Mat2 want = std::cosh(d) * Mat2::Identity() + sh * m;
    CHECK(opNorm(fp.frames.back().evalUnchecked(1.0) - want) < 1e-9);

    // Delaunay potentials: Phi = z^{A_t} on a radial path
    for (double t : {-0.2, 0.01, 1.0 / 16.0}) {
        auto res = DelaunayResidue::solve(t, Branch::spherical);
        DelaunayPotential xi(res);
        const CoverPoint start{0.0, 0.0}, end{std::log(0.05), 0.0};
        auto path = odeSolveFrame(xi, g, start, LoopMatrix::identity(g), {end});
        CHECK((path.frames.back() - zPowA(g, res, end)).supNormCircle() < 1e-8);
        CHECK(path.max_det_drift < 1e-9);
    }
}

TEST_CASE("gauge covariance of the Cauchy problem") {
    auto g = grid();
    GaugedDelaunayFamily fam(Branch::spherical, cplx(0.5, 0.2), 0.3);
    auto base = fam.potential(0.01);
    Mat2 n;
    n << 0.0, cplx(0.4, -0.2), 0.0, 0.0;
    Gauge gauge{[n](cplx z, cplx lam) { return Mat2(Mat2::Identity() + lam * z * n); },
                [n](cplx, cplx lam) { return Mat2(lam * n); }};
    auto gauged = GaugedPotential(base, gauge);

    const CoverPoint start{std::log(0.8), 0.0}, end{std::log(0.2), 1.1};
    auto plain = odeSolveFrame(*base, g, start, LoopMatrix::identity(g), {end});

    // start frame for the gauged system is G(z_start)
    std::vector<Mat2> gs(static_cast<size_t>(g.L));
    for (int m = 0; m < g.L; ++m) gs[static_cast<size_t>(m)] = gauge.value(start.z(), g.point(m));
    auto gstart = LoopMatrix::fromSamples(g, gs);
    auto gauged_path = odeSolveFrame(gauged, g, start, gstart, {end});

    std::vector<Mat2> expect(static_cast<size_t>(g.L));
    auto ps = plain.frames.back().samples();
    for (int m = 0; m < g.L; ++m)
        expect[static_cast<size_t>(m)] = ps[static_cast<size_t>(m)] * gauge.value(end.z(), g.point(m));
    CHECK((gauged_path.frames.back() - LoopMatrix::fromSamples(g, expect)).supNormCircle() <
          1e-8);
}

TEST_CASE("monodromy of Delaunay potentials") {
    auto g = grid();
    for (double t : {0.0, 0.01, -0.1}) {
        auto res = DelaunayResidue::solve(t, Branch::spherical);
        DelaunayPotential xi(res);
        const CoverPoint base{std::log(0.3), 0.0};
        auto M = monodromy(xi, g, base, zPowA(g, res, base));
        for (int m = 0; m < g.L; m += 7)
            CHECK(opNorm(M.evalUnchecked(g.point(m)) - expTwoPiA(res, g.point(m))) < 1e-8);
        if (t == 0.0)
            CHECK((M + LoopMatrix::identity(g)).supNormCircle() < 1e-8);
        auto rep = checkMonodromyProblem(M);
        CHECK(rep.pass());
        CHECK(rep.at_one_sign == -1);

        // basepoint independence
        const CoverPoint base2{std::log(0.7), 0.0};
        auto M2 = monodromy(xi, g, base2, zPowA(g, res, base2));
        CHECK((M - M2).supNormCircle() < 1e-8);
    }

    // conjugation: frame H Phi has monodromy H M H^{-1}
    auto res = DelaunayResidue::solve(0.02, Branch::catenoidal);
    DelaunayPotential xi(res);
    const CoverPoint base{std::log(0.3), 0.0};
    const double is2 = 1.0 / std::sqrt(2.0);
    LoopMatrix H(g);
    Mat2 hm1, h0, h1;
    hm1 << 0, -is2, 0, 0;
    h0 << is2, 0, 0, is2;
    h1 << 0, 0, is2, 0;
    H.setCoeff(-1, hm1);
    H.setCoeff(0, h0);
    H.setCoeff(1, h1);
    auto M = monodromy(xi, g, base, zPowA(g, res, base));
    auto Mc = monodromy(xi, g, base, H * zPowA(g, res, base));
    CHECK((Mc - H * M * H.inverseOnGrid()).supNormCircle() < 1e-7);
}

TEST_CASE("monodromy problem report") {
    auto g = grid();
    auto id = checkMonodromyProblem(LoopMatrix::identity(g));
    CHECK(id.unitary_residual < 1e-14);
    CHECK(id.at_one_residual < 1e-14);
    CHECK(id.at_one_sign == 1);
    CHECK(id.deriv_at_one_residual < 1e-14);

    Mat2 d;
    d << 2.0, 0.0, 0.0, 0.5;
    auto bad = checkMonodromyProblem(LoopMatrix::constant(g, d));
    CHECK(bad.unitary_residual >= 1.5);
}

TEST_CASE("monodromy derivative") {
    auto g = grid();
    // t-independent family: derivative vanishes
    class Frozen : public PotentialFamily {
    public:
        Mat2 eval(double, cplx z, cplx lam) const override {
            return DelaunayResidue::solve(0.02, Branch::spherical).matrix(lam) / z;
        }
        Mat2 dtEval(double, cplx, cplx) const override { return Mat2::Zero(); }
    };
    auto frozen = monodromyDerivative(Frozen{}, 0.0, g, 0.5, 128);
    CHECK(frozen.dM.supNormCircle() < 1e-10);

    // pure Delaunay at t0 = 0 against a finite difference of exp(2 i pi A_t)
    DelaunayFamily fam(Branch::spherical);
    auto der = monodromyDerivative(fam, 0.0, g, 0.5, 512);
    const double h = 1e-4;
    double worst = 0.0, scale = 0.0;
    for (int m = 0; m < g.L; m += 3) {
        const cplx lam = g.point(m);
        const Mat2 fd = (expTwoPiA(DelaunayResidue::solve(h, Branch::spherical), lam) -
                         expTwoPiA(DelaunayResidue::solve(-h, Branch::spherical), lam)) /
                        (2.0 * h);
        worst = std::max(worst, opNorm(der.dM.evalUnchecked(lam) - fd));
        scale = std::max(scale, opNorm(fd));
    }
    CHECK(worst / scale < 1e-5);
    CHECK(der.commutation_residual < 1e-8);
}

TEST_CASE("Frobenius operator determinant") {
    for (int i = 0; i < 100; ++i) {
        auto res = DelaunayResidue::solve(randu(-0.5, 1.0 / 16.0),
                                          i % 2 ? Branch::spherical : Branch::catenoidal);
        const cplx lam = std::polar(randu(0.9, 1.1), randu(0, 2 * kPi));
        const int n = 1 + i % 5;
        const Mat2 A = res.matrix(lam);
        // brute-force 4x4 matrix of X -> [A,X] + nX in the entry basis
        Eigen::Matrix<cplx, 4, 4> L4;
        for (int e = 0; e < 4; ++e) {
            Mat2 X = Mat2::Zero();
            X(e / 2, e % 2) = 1.0;
            const Mat2 Y = A * X - X * A + static_cast<double>(n) * X;
            for (int f = 0; f < 4; ++f) L4(f, e) = Y(f / 2, f % 2);
        }
        const cplx want = static_cast<double>(n * n) *
                          (static_cast<double>(n * n) - 4.0 * res.muSquared(lam));
        CHECK(std::abs(L4.determinant() - want) < 1e-10 * std::max(1.0, std::abs(want)));
    }
}

TEST_CASE("zap form of a regularized potential") {
    auto g = grid();
    // pure gauge family (kappa = 0): p_t = 0, h = id, Phi(1) = I
    GaugedDelaunayFamily fam(Branch::spherical, cplx(0.8, 0.0), 0.0);
    const double t = 0.01;
    auto res = DelaunayResidue::solve(t, fam.branch());
    auto base = fam.potential(t);
    auto reg = buildRegularizingGauge(g, res, [&](cplx lam) { return fam.Ct(t, lam); },
                                      fam.pt(t));
    auto tilde = std::make_shared<GaugedPotential>(base, reg.gauge());

    // zero holomorphic part reconstructs z^{A} exactly
    {
        DelaunayPotential pure(res);
        auto C = zPowerTable(pure, res, g, 0.4, 6);
        for (const auto& ck : C) CHECK(ck.supNormCircle() < 1e-10);
        double c0 = 0.0;
        auto P = frobeniusSeries(res, g, C, 6, &c0);
        for (const auto& pk : P) CHECK(pk.supNormCircle() < 1e-9);
    }

    auto frame_at = [&](CoverPoint zc) -> LoopMatrix {
        auto fp = odeSolveFrame(*base, g, CoverPoint{0.0, 0.0}, LoopMatrix::identity(g), {zc});
        std::vector<Mat2> out(static_cast<size_t>(g.L));
        auto s = fp.frames.back().samples();
        const auto gg = reg.gauge();
        for (int m = 0; m < g.L; ++m)
            out[static_cast<size_t>(m)] = s[static_cast<size_t>(m)] * gg.value(zc.z(), g.point(m));
        return LoopMatrix::fromSamples(g, out);
    };
    auto zap = buildZapForm(*tilde, res, g, 8, frame_at);
    CHECK(zap.c0_residual < 1e-7);
    CHECK(zap.fit_disagreement < 1e-6);

    // P(z) - I is O(t z^2): check magnitude and slope over a z-ladder
    std::vector<double> zs{0.02, 0.04, 0.08}, errs;
    for (double z : zs)
        errs.push_back((zap.evalP(g, CoverPoint{std::log(z), 0.0}) - LoopMatrix::identity(g))
                           .supNormCircle());
    for (size_t i = 0; i + 1 < errs.size(); ++i) {
        const double slope = std::log(errs[i + 1] / errs[i]) / std::log(zs[i + 1] / zs[i]);
        CHECK(slope > 1.8);
    }
    CHECK(errs[0] < 20.0 * t * zs[0] * zs[0]);

    // reconstruction matches the actual regularized frame
    for (double z : {0.05, 0.2}) {
        const CoverPoint zc{std::log(z), 0.0};
        CHECK((zap.reconstruct(g, zc) - frame_at(zc)).supNormCircle() < 1e-6);
    }
}
