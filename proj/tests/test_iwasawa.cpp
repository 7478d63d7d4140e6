#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dpw/iwasawa.hpp"

using namespace dpw;

namespace {

CircleGrid grid() { return CircleGrid{64, 16, 1.1}; }

LoopMatrix hatLoop(const CircleGrid& g, cplx a, cplx b, cplx c, cplx d) {
    LoopMatrix l(g);
    Mat2 c0, cm1, c1;
    c0 << a, 0, 0, d;
    cm1 << 0, b, 0, 0;
    c1 << 0, 0, c, 0;
    l.setCoeff(0, c0);
    l.setCoeff(-1, cm1);
    l.setCoeff(1, c1);
    return l;
}

std::mt19937& rng() {
    static std::mt19937 r(2024);
    return r;
}

cplx randc(double s = 1.0) {
    std::uniform_real_distribution<double> u(-s, s);
    return {u(rng()), u(rng())};
}

}  // namespace

TEST_CASE("explicit hat factorization") {
    auto g = grid();
    auto id = explicitIwasawaHat(g, 1, 0, 0, 1);
    CHECK((id.F - LoopMatrix::identity(g)).supNormCircle() < 1e-13);
    CHECK((id.B - LoopMatrix::identity(g)).supNormCircle() < 1e-13);

    const double is2 = 1.0 / std::sqrt(2.0);
    auto h = explicitIwasawaHat(g, is2, -is2, is2, is2);
    CHECK((h.B - LoopMatrix::identity(g)).supNormCircle() < 1e-13);
    CHECK(opNorm(h.F.coeff(0) - is2 * Mat2::Identity()) < 1e-13);

    auto e = explicitIwasawaHat(g, 2, 1, 1, 1);
    Mat2 f0, b0, b1;
    f0 << is2, 0, 0, is2;
    b0 << is2, 0, 0, std::sqrt(2.0);
    b1 << 0, 0, 3.0 * is2, 0;
    CHECK(opNorm(e.F.coeff(0) - f0) < 1e-13);
    CHECK(opNorm(e.B.coeff(0) - b0) < 1e-13);
    CHECK(opNorm(e.B.coeff(1) - b1) < 1e-13);
    CHECK(e.residual < 1e-13);
    CHECK(e.B.detOneResidual() < 1e-13);
    CHECK(e.unitary_residual < 1e-13);

    CHECK_THROWS_AS(explicitIwasawaHat(g, 1, 1, 1, 1), Error);
}

TEST_CASE("spectral factorization basics") {
    auto g = grid();
    auto one = spectralFactorize(LoopMatrix::identity(g));
    CHECK((one.B - LoopMatrix::identity(g)).supNormCircle() < 1e-10);

    // round trip B0 = [[1, 0.3 lambda],[0,1]]
    LoopMatrix b0 = LoopMatrix::identity(g);
    Mat2 up;
    up << 0, 0.3, 0, 0;
    b0.setCoeff(1, up);
    auto P = b0.conjTransposeCircle() * b0;
    auto rec = spectralFactorize(P);
    CHECK((rec.B - b0).supNormCircle() < 1e-8);
    CHECK(rec.residual < 1e-9);

    auto notpos = LoopMatrix::constant(g, -Mat2::Identity());
    CHECK_THROWS_AS(spectralFactorize(notpos), Error);
}

TEST_CASE("scalar Fejer-Riesz with a boundary zero") {
    // P = (2 + lambda + 1/lambda) I has factor b = 1 + lambda, which
    // vanishes at lambda = -1; Bauer converges slowly, so allow a loose
    // tolerance and a large section.
    auto g = grid();
    LoopMatrix P = LoopMatrix::constant(g, 2.0 * Mat2::Identity());
    P.setCoeff(1, Mat2::Identity());
    P.setCoeff(-1, Mat2::Identity());
    IwasawaOptions opt;
    opt.det_normalize = false;
    opt.factor_tol = 5e-3;
    opt.block_rows = 1024;
    auto sf = spectralFactorize(P, opt);
    CHECK(opNorm(sf.B.coeff(0) - Mat2::Identity()) < 5e-2);
    CHECK(opNorm(sf.B.coeff(1) - Mat2::Identity()) < 5e-2);
    CHECK(sf.residual < 5e-3);
}

TEST_CASE("iwasawa decomposition against the explicit oracle") {
    auto g = grid();
    auto id = iwasawaDecompose(LoopMatrix::identity(g));
    CHECK((id.F - LoopMatrix::identity(g)).supNormCircle() < 1e-9);
    CHECK((id.B - LoopMatrix::identity(g)).supNormCircle() < 1e-9);

    for (int trial = 0; trial < 25; ++trial) {
        cplx a = randc(2.0), b = randc(2.0), c = randc(2.0);
        if (std::abs(a) < 0.2) a += 1.0;
        cplx d = (1.0 + b * c) / a;
        auto phi = hatLoop(g, a, b, c, d);
        auto num = iwasawaDecompose(phi);
        auto ora = explicitIwasawaHat(g, a, b, c, d);
        CHECK((num.F - ora.F).supNormCircle() < 1e-8);
        CHECK((num.B - ora.B).supNormCircle() < 1e-8);
        CHECK(num.residual < 1e-8);
        CHECK(num.unitary_residual < 1e-8);
        CHECK(num.reflection_residual < 1e-7);
    }
}

TEST_CASE("uniqueness and isometry consistency") {
    auto g = grid();
    // random unitary loop x random normalized plus-loop
    Mat2 u;
    u << cplx(0.6, 0.0), cplx(0.0, 0.8), cplx(0.0, 0.8), cplx(0.6, 0.0);
    LoopMatrix F0(g);
    Mat2 a, b;
    const double is2 = 1.0 / std::sqrt(2.0);
    a << 0, -is2, 0, 0;
    b << 0, 0, is2, 0;
    F0.setCoeff(-1, a);
    F0.setCoeff(0, is2 * Mat2::Identity());
    F0.setCoeff(1, b);
    auto F = LoopMatrix::constant(g, u) * F0;  // still unitary

    LoopMatrix B0 = LoopMatrix::identity(g);
    Mat2 up, diag;
    up << 0, cplx(0.2, 0.1), 0, 0;
    diag << 1.2, cplx(0.3, 0.0), 0, 1.0 / 1.2;
    B0.setCoeff(0, diag);
    B0.setCoeff(1, up);
    B0.setCoeff(2, 0.05 * Mat2::Identity() - 0.05 * Mat2::Identity());  // zero, band marker
    auto phi = F * B0;
    auto dec = iwasawaDecompose(phi);
    CHECK((dec.F - F).supNormCircle() < 1e-7);
    CHECK((dec.B - B0).supNormCircle() < 1e-7);

    // left multiplication by a constant SU2 matrix moves into F only
    auto phi2 = LoopMatrix::constant(g, u) * phi;
    auto dec2 = iwasawaDecompose(phi2);
    CHECK((dec2.B - dec.B).supNormCircle() < 1e-7);
    CHECK((dec2.F - LoopMatrix::constant(g, u) * dec.F).supNormCircle() < 1e-7);

    // det B = 1 on disk radii {0, 0.5, 1}
    for (double r : {0.0, 0.5, 1.0}) {
        cplx lam = r == 0.0 ? cplx(0, 0) : cplx(r, 0);
        CHECK(std::abs(dec.B.eval(lam).determinant() - 1.0) < 1e-9);
    }
}
