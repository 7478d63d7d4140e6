#include "dpw/iwasawa.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace dpw {

namespace {

void hermitianEig2(const Mat2& h, double& lo, double& hi) {
    const double tr = h.trace().real();
    const double det = h.determinant().real();
    const double disc = std::sqrt(std::max(tr * tr - 4.0 * det, 0.0));
    lo = 0.5 * (tr - disc);
    hi = 0.5 * (tr + disc);
}

// Bauer step: banded Cholesky T = L L^dagger of the 2M x 2M block-Toeplitz
// section with blocks T_{ij} = C_{j-i}; the deep rows of L carry the
// adjoints of the factor coefficients.
std::vector<Mat2> bauerFactor(const LoopMatrix& P, int W, int M) {
    const int n = 2 * M;
    const int bw = 2 * W + 1;  // scalar half-bandwidth
    auto entryT = [&](int i, int j) -> cplx {
        const int bi = i / 2, bj = j / 2;
        if (std::abs(bj - bi) > W) return {};
        return P.coeff(bj - bi)(i % 2, j % 2);
    };
    // L[i] stores L_{i, i-bw .. i}
    std::vector<std::vector<cplx>> L(static_cast<size_t>(n),
                                     std::vector<cplx>(static_cast<size_t>(bw + 1)));
    auto lat = [&](int i, int j) -> cplx& { return L[static_cast<size_t>(i)][static_cast<size_t>(j - i + bw)]; };
    for (int i = 0; i < n; ++i) {
        const int j0 = std::max(0, i - bw);
        for (int j = j0; j <= i; ++j) {
            cplx sum = entryT(j, i);  // T Hermitian; need T_{ij} = conj(T_{ji})
            sum = std::conj(sum);
            const int m0 = std::max(j0, j - bw);
            for (int m = m0; m < j; ++m) sum -= lat(i, m) * std::conj(lat(j, m));
            if (i == j) {
                const double d = sum.real();
                if (d <= 0.0) throw Error("spectral_factorize: Toeplitz section not positive definite");
                lat(i, i) = std::sqrt(d);
            } else {
                lat(i, j) = sum / lat(j, j).real();
            }
        }
    }
    // read block row j* = M-1-W: B_k = (L_{j*+k, j*})^dagger
    const int js = M - 1 - W;
    std::vector<Mat2> B(static_cast<size_t>(W + 1));
    for (int k = 0; k <= W; ++k) {
        Mat2 lblk;
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) {
                const int i = 2 * (js + k) + r, j = 2 * js + c;
                lblk(r, c) = (j >= i - bw && j <= i) ? lat(i, j) : cplx{};
            }
        B[static_cast<size_t>(k)] = lblk.adjoint();
    }
    return B;
}

double factorResidual(const LoopMatrix& B, const LoopMatrix& P) {
    auto sb = B.samples();
    auto sp = P.samples();
    double best = 0.0;
    for (size_t i = 0; i < sb.size(); ++i)
        best = std::max(best, opNorm(sb[i].adjoint() * sb[i] - sp[i]));
    return best;
}

// Divide B by the principal analytic square root of det B (a nonvanishing
// plus function with positive value at 0).
LoopMatrix detNormalize(const LoopMatrix& B) {
    const auto& g = B.grid();
    auto s = B.samples();
    std::vector<double> phase(static_cast<size_t>(g.L));
    std::vector<double> mag(static_cast<size_t>(g.L));
    double prev = 0.0;
    for (int m = 0; m < g.L; ++m) {
        const cplx d = s[static_cast<size_t>(m)].determinant();
        if (std::abs(d) < 1e-300) throw Error("spectral_factorize: det B vanishes on the circle");
        double ph = std::arg(d);
        if (m > 0) {
            while (ph - prev > kPi) ph -= 2.0 * kPi;
            while (ph - prev < -kPi) ph += 2.0 * kPi;
        }
        prev = ph;
        phase[static_cast<size_t>(m)] = ph;
        mag[static_cast<size_t>(m)] = std::abs(d);
    }
    // winding 0 is required for an analytic square root
    const double wind = (phase[static_cast<size_t>(g.L - 1)] - phase[0]) / (2.0 * kPi);
    if (std::abs(wind) > 0.6)
        throw Error("spectral_factorize: det B winds around 0; no analytic square root");
    for (int m = 0; m < g.L; ++m) {
        const cplx half = 0.5 * cplx(std::log(mag[static_cast<size_t>(m)]), phase[static_cast<size_t>(m)]);
        s[static_cast<size_t>(m)] /= std::exp(half);
    }
    return LoopMatrix::fromSamples(g, s);
}

}  // namespace

IwasawaFactors explicitIwasawaHat(const CircleGrid& g, cplx a, cplx b, cplx c, cplx d,
                                  double tol) {
    if (std::abs(a * d - b * c - 1.0) > tol)
        throw Error("explicit_iwasawa_hat: determinant ad-bc differs from 1");
    const double n = std::sqrt(std::norm(b) + std::norm(d));
    if (n == 0.0) throw Error("explicit_iwasawa_hat: b = d = 0");
    IwasawaFactors out{LoopMatrix(g), LoopMatrix(g)};
    Mat2 f0, fm1, f1;
    f0 << std::conj(d) / n, 0, 0, d / n;
    fm1 << 0, b / n, 0, 0;
    f1 << 0, 0, -std::conj(b) / n, 0;
    out.F.setCoeff(0, f0);
    out.F.setCoeff(-1, fm1);
    out.F.setCoeff(1, f1);
    Mat2 b0, b1;
    b0 << 1.0 / n, 0, 0, n;
    b1 << 0, 0, (a * std::conj(b) + c * std::conj(d)) / n, 0;
    out.B.setCoeff(0, b0);
    out.B.setCoeff(1, b1);
    out.unitary_residual = out.F.unitaryResidual();
    out.reflection_residual = reflectionResidual(out.F, std::sqrt(g.annulus_R));
    // residual against the hat loop itself
    double best = 0.0;
    for (int m = 0; m < g.L; ++m) {
        const cplx lam = g.point(m);
        Mat2 phi;
        phi << a, b / lam, c * lam, d;
        best = std::max(best, opNorm(out.F.evalUnchecked(lam) * out.B.evalUnchecked(lam) - phi));
    }
    out.residual = best;
    return out;
}

SpectralFactor spectralFactorize(const LoopMatrix& P, const IwasawaOptions& opt) {
    const auto& g = P.grid();
    const auto sp = P.samples();
    double scale = 0.0, herm = 0.0, mineig = 1e300;
    for (const auto& m : sp) {
        scale = std::max(scale, opNorm(m));
        herm = std::max(herm, opNorm(m - m.adjoint()));
        double lo, hi;
        hermitianEig2(0.5 * (m + m.adjoint()), lo, hi);
        mineig = std::min(mineig, lo);
    }
    if (herm > 1e-8 * std::max(1.0, scale))
        throw Error("spectral_factorize: loop is not Hermitian on the circle");
    if (mineig < -1e-10 * std::max(1.0, scale))
        throw Error("spectral_factorize: non-positive sample on the circle");

    const int W = std::max(1, P.measuredBand(1e-13 * std::max(1.0, scale)));
    const int M = opt.block_rows > 0 ? opt.block_rows
                                     : std::min(2048, std::max(64, 8 * W));
    if (M <= W + 1) throw Error("spectral_factorize: block_rows too small for the band");
    auto bk = bauerFactor(P, W, M);
    LoopMatrix B(g);
    for (int k = 0; k <= W && k <= g.N; ++k) B.setCoeff(k, bk[static_cast<size_t>(k)]);

    // Wilson-style refinement: B <- (I + S)B with S the analytic half of
    // E = B^{-dagger} P B^{-1} - I; skipped when B is nearly singular on
    // the circle (boundary zeros of P).
    double minsv = 1e300;
    for (const auto& m : B.samples()) minsv = std::min(minsv, minSingularValue(m));
    double res = factorResidual(B, P);
    if (minsv > 1e-6 * std::sqrt(std::max(1.0, scale))) {
        for (int it = 0; it < 25 && res > opt.factor_tol; ++it) {
            auto sb = B.samples();
            std::vector<Mat2> es(sb.size());
            for (size_t i = 0; i < sb.size(); ++i) {
                const Mat2 binv = sb[i].inverse();
                es[i] = binv.adjoint() * sp[i] * binv - Mat2::Identity();
            }
            auto E = LoopMatrix::fromSamples(g, es);
            LoopMatrix S(g);
            Mat2 s0 = E.coeff(0);
            s0(1, 0) = 0.0;
            s0(0, 0) *= 0.5;
            s0(1, 1) *= 0.5;
            S.setCoeff(0, s0 + Mat2::Identity());
            for (int k = 1; k <= g.N; ++k) S.setCoeff(k, E.coeff(k));
            auto Bn = S * B;
            const double rn = factorResidual(Bn, P);
            if (!(rn < res)) break;
            B = Bn;
            res = rn;
        }
    }
    if (opt.det_normalize) {
        B = detNormalize(B);
        res = factorResidual(B, P);
    }
    if (res > std::max(opt.factor_tol, 1e-12 * scale) * 10.0 && res > opt.factor_tol)
        throw Error("spectral_factorize: residual plateau above factor_tol");
    return SpectralFactor{B, res};
}

IwasawaFactors iwasawaDecompose(const LoopMatrix& phi, const IwasawaOptions& opt) {
    if (!phi.resolved(1e-8))
        throw Error("iwasawa_decompose: loop not resolved (tail energy too large)");
    if (phi.detOneResidual() > 1e-6)
        throw Error("iwasawa_decompose: det differs from 1 on the grid");
    const auto& g = phi.grid();
    auto sphi = phi.samples();
    std::vector<Mat2> sp(sphi.size());
    for (size_t i = 0; i < sp.size(); ++i) {
        sp[i] = sphi[i].adjoint() * sphi[i];
        const double c = opNorm(sp[i]) / std::max(minSingularValue(sp[i]), 1e-300);
        if (c > opt.cond_limit)
            throw Error("iwasawa_decompose: cond(Phi*Phi) exceeds limit; stay away from the singular end");
    }
    auto P = LoopMatrix::fromSamples(g, sp);
    auto sf = spectralFactorize(P, opt);

    // pin uniqueness: B(0) = Q R with R upper triangular, positive diagonal
    Mat2 b0 = sf.B.coeff(0);
    Eigen::HouseholderQR<Mat2> qr(b0);
    Mat2 Q = qr.householderQ();
    Mat2 R = Q.adjoint() * b0;
    for (int i = 0; i < 2; ++i) {
        const double a = std::abs(R(i, i));
        if (a < 1e-300) throw Error("iwasawa_decompose: singular B(0)");
        const cplx ph = R(i, i) / a;
        Q.col(i) *= ph;
    }
    auto sb = sf.B.samples();
    for (auto& m : sb) m = (Q.adjoint() * m).eval();
    auto B = LoopMatrix::fromSamples(g, sb);

    std::vector<Mat2> sfm(sphi.size());
    for (size_t i = 0; i < sphi.size(); ++i) sfm[i] = sphi[i] * sb[i].inverse();
    auto F = LoopMatrix::fromSamples(g, sfm);

    IwasawaFactors out{F, B};
    double best = 0.0;
    for (size_t i = 0; i < sphi.size(); ++i)
        best = std::max(best, opNorm(sfm[i] * sb[i] - sphi[i]));
    out.residual = best;
    out.unitary_residual = F.unitaryResidual();
    out.reflection_residual = reflectionResidual(F, std::sqrt(g.annulus_R));
    if (out.residual > opt.decomposition_tol)
        throw Error("iwasawa_decompose: residual above decomposition tolerance");
    return out;
}

}  // namespace dpw
