#include "dpw/loop.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace dpw {

void CircleGrid::validate() const {
    if (L < 4 || (L & (L - 1)) != 0) throw Error("CircleGrid: L must be a power of two >= 4");
    if (N < 1 || N > L / 2) throw Error("CircleGrid: need 1 <= N <= L/2");
    if (annulus_R <= 1.0) throw Error("CircleGrid: annulus_R must exceed 1");
}

void fftRadix2(std::vector<cplx>& a, int sign) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw Error("fftRadix2: length must be a power of two");
    // bit reversal
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = static_cast<double>(sign) * 2.0 * kPi / static_cast<double>(len);
        const cplx wl{std::cos(ang), std::sin(ang)};
        for (size_t i = 0; i < n; i += len) {
            cplx w{1.0, 0.0};
            for (size_t k = 0; k < len / 2; ++k) {
                const cplx u = a[i + k];
                const cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

LoopMatrix LoopMatrix::fromSamples(const CircleGrid& g, const std::vector<Mat2>& samples) {
    g.validate();
    if (static_cast<int>(samples.size()) != g.L)
        throw Error("loop_from_samples: sample count does not match grid");
    LoopMatrix out(g);
    std::vector<cplx> buf(static_cast<size_t>(g.L));
    const double inv = 1.0 / static_cast<double>(g.L);
    // full spectrum per entry; fold into [-N, N] and measure tail
    std::array<std::vector<cplx>, 4> spec;
    for (int e = 0; e < 4; ++e) {
        const int r = e / 2, c = e % 2;
        for (int m = 0; m < g.L; ++m) buf[static_cast<size_t>(m)] = samples[static_cast<size_t>(m)](r, c);
        fftRadix2(buf, -1);
        for (auto& v : buf) v *= inv;
        spec[static_cast<size_t>(e)] = buf;
    }
    // coefficient for frequency k lives at index (k mod L)
    for (int k = -g.N; k <= g.N; ++k) {
        const size_t idx = static_cast<size_t>((k % g.L + g.L) % g.L);
        Mat2 m;
        m << spec[0][idx], spec[1][idx], spec[2][idx], spec[3][idx];
        out.c_[static_cast<size_t>(k + g.N)] = m;
    }
    // tail energy: everything with |k| > N-4 in the full spectrum, where the
    // aliased frequency of index i is mapped to [-L/2, L/2).
    double tail = 0.0;
    for (int i = 0; i < g.L; ++i) {
        int k = i <= g.L / 2 ? i : i - g.L;
        if (std::abs(k) <= g.N - 4) continue;
        double fr2 = 0.0;
        for (int e = 0; e < 4; ++e) fr2 += std::norm(spec[static_cast<size_t>(e)][static_cast<size_t>(i)]);
        tail += std::sqrt(fr2);
    }
    out.tail_ = tail;
    return out;
}

LoopMatrix loopFromSamples(const CircleGrid& g, const std::vector<Mat2>& samples) {
    return LoopMatrix::fromSamples(g, samples);
}

LoopMatrix LoopMatrix::constant(const CircleGrid& g, const Mat2& m) {
    LoopMatrix out(g);
    out.c_[static_cast<size_t>(g.N)] = m;
    return out;
}

void LoopMatrix::setCoeff(int k, const Mat2& m) {
    if (k < -grid_.N || k > grid_.N) throw Error("LoopMatrix::setCoeff: index out of band");
    c_[static_cast<size_t>(k + grid_.N)] = m;
}

int LoopMatrix::measuredBand(double tol) const {
    int band = 0;
    for (int k = -grid_.N; k <= grid_.N; ++k)
        if (coeff(k).norm() > tol) band = std::max(band, std::abs(k));
    return band;
}

std::vector<Mat2> LoopMatrix::samples() const {
    std::vector<Mat2> out(static_cast<size_t>(grid_.L));
    std::vector<cplx> buf(static_cast<size_t>(grid_.L));
    for (int e = 0; e < 4; ++e) {
        const int r = e / 2, c = e % 2;
        std::fill(buf.begin(), buf.end(), cplx{});
        for (int k = -grid_.N; k <= grid_.N; ++k) {
            const size_t idx = static_cast<size_t>((k % grid_.L + grid_.L) % grid_.L);
            buf[idx] += c_[static_cast<size_t>(k + grid_.N)](r, c);
        }
        fftRadix2(buf, +1);
        for (int m = 0; m < grid_.L; ++m) out[static_cast<size_t>(m)](r, c) = buf[static_cast<size_t>(m)];
    }
    return out;
}

Mat2 LoopMatrix::evalUnchecked(cplx lambda) const {
    // Horner in two halves around k = 0 for stability at small/large |lambda|.
    Mat2 plus = Mat2::Zero();
    for (int k = grid_.N; k >= 1; --k) plus = plus * lambda + coeff(k);
    plus *= lambda;
    Mat2 minus = Mat2::Zero();
    const cplx li = 1.0 / lambda;
    for (int k = -grid_.N; k <= -1; ++k) minus = minus * li + coeff(k);
    minus *= li;
    return plus + minus + coeff(0);
}

Mat2 LoopMatrix::eval(cplx lambda) const {
    const double r = std::abs(lambda);
    const bool hasNeg = negativeEnergy() > 1e-13;
    // An exactly terminating polynomial plus-loop is entire.
    const bool finite = !hasNeg && tail_ < 1e-13 && measuredBand(1e-13) <= grid_.N - 4;
    if (!finite) {
        const double lo = hasNeg ? 1.0 / grid_.annulus_R : 0.0;
        if (r > grid_.annulus_R + 1e-12 || r < lo - 1e-12)
            throw Error("loop_eval: lambda outside declared annulus");
    }
    if (r == 0.0) {
        if (hasNeg) throw Error("loop_eval: lambda = 0 with negative coefficients");
        return coeff(0);
    }
    return evalUnchecked(lambda);
}

LoopMatrix LoopMatrix::derivLambda() const {
    if (!resolved()) throw Error("loop_deriv_lambda: loop not resolved (tail energy too large)");
    LoopMatrix out(grid_);
    // d/dlambda sum C_k lambda^k = sum k C_k lambda^{k-1}
    for (int k = -grid_.N + 1; k <= grid_.N; ++k)
        out.c_[static_cast<size_t>(k - 1 + grid_.N)] = static_cast<double>(k) * coeff(k);
    // k = -N term would land at -N-1; it is zero for resolved loops up to tail_tol
    out.tail_ = tail_ * static_cast<double>(grid_.N + 1);
    return out;
}

LoopMatrix LoopMatrix::conjTransposeCircle() const {
    LoopMatrix out(grid_);
    for (int k = -grid_.N; k <= grid_.N; ++k)
        out.c_[static_cast<size_t>(k + grid_.N)] = coeff(-k).adjoint();
    out.tail_ = tail_;
    return out;
}

LoopMatrix LoopMatrix::inverseOnGrid() const {
    auto s = samples();
    for (auto& m : s) {
        if (minSingularValue(m) < 1e-14) throw Error("inverseOnGrid: singular sample");
        m = m.inverse().eval();
    }
    return fromSamples(grid_, s);
}

double LoopMatrix::supNormCircle() const {
    double best = 0.0;
    for (const auto& m : samples()) best = std::max(best, opNorm(m));
    return best;
}

double LoopMatrix::detOneResidual() const {
    double best = 0.0;
    for (const auto& m : samples()) best = std::max(best, std::abs(m.determinant() - 1.0));
    return best;
}

double LoopMatrix::unitaryResidual() const {
    double best = 0.0;
    for (const auto& m : samples()) best = std::max(best, su2Residual(m));
    return best;
}

double LoopMatrix::negativeEnergy() const {
    double e = 0.0;
    for (int k = -grid_.N; k <= -1; ++k) e += c_[static_cast<size_t>(k + grid_.N)].norm();
    return e;
}

LoopMatrix& LoopMatrix::operator+=(const LoopMatrix& o) {
    if (!(grid_ == o.grid_)) throw Error("LoopMatrix: grid mismatch");
    for (size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    tail_ += o.tail_;
    return *this;
}

LoopMatrix& LoopMatrix::operator-=(const LoopMatrix& o) {
    if (!(grid_ == o.grid_)) throw Error("LoopMatrix: grid mismatch");
    for (size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    tail_ += o.tail_;
    return *this;
}

LoopMatrix& LoopMatrix::operator*=(cplx s) {
    for (auto& m : c_) m *= s;
    tail_ *= std::abs(s);
    return *this;
}

LoopMatrix operator*(const LoopMatrix& a, const LoopMatrix& b) {
    if (!(a.grid_ == b.grid_)) throw Error("LoopMatrix: grid mismatch");
    auto sa = a.samples();
    auto sb = b.samples();
    for (size_t i = 0; i < sa.size(); ++i) sa[i] = (sa[i] * sb[i]).eval();
    return LoopMatrix::fromSamples(a.grid_, sa);
}

double reflectionResidual(const LoopMatrix& F, double rho) {
    double best = 0.0;
    for (int m = 0; m < F.grid().L; ++m) {
        const cplx lam = rho * F.grid().point(m);
        const Mat2 a = F.evalUnchecked(1.0 / std::conj(lam)).adjoint();
        const Mat2 b = F.evalUnchecked(lam);
        best = std::max(best, opNorm(a * b - Mat2::Identity()));
    }
    return best;
}

LoopMatrix unitaryReflectionExtend(const LoopMatrix& F, double tol) {
    if (F.unitaryResidual() > tol)
        throw Error("unitary_reflection_extend: loop is not SU2 on the circle");
    return F;
}

}  // namespace dpw
