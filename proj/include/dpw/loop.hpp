#ifndef DPW_LOOP_HPP
#define DPW_LOOP_HPP

#include <vector>

#include "dpw/types.hpp"

namespace dpw {

/// Equispaced sampling of the unit circle |lambda| = 1 together with the
/// annulus A_R = { 1/R < |lambda| < R } the loops are expected to extend to.
struct CircleGrid {
    int L = 256;            ///< number of samples, power of two
    int N = 64;             ///< Fourier truncation, N <= L/2
    double annulus_R = 1.1;

    cplx point(int m) const {
        const double th = 2.0 * kPi * static_cast<double>(m) / static_cast<double>(L);
        return {std::cos(th), std::sin(th)};
    }
    bool operator==(const CircleGrid&) const = default;
    void validate() const;
};

/// In-place radix-2 FFT, sign=-1 forward (no scaling), sign=+1 inverse (no scaling).
void fftRadix2(std::vector<cplx>& a, int sign);

/// 2x2 matrix Laurent loop on a CircleGrid, stored as Fourier coefficients
/// C_k, k in [-N, N].
class LoopMatrix {
public:
    LoopMatrix() = default;
    explicit LoopMatrix(const CircleGrid& g) : grid_(g), c_(2 * g.N + 1, Mat2::Zero()) {}

    static LoopMatrix fromSamples(const CircleGrid& g, const std::vector<Mat2>& samples);
    static LoopMatrix constant(const CircleGrid& g, const Mat2& m);
    static LoopMatrix identity(const CircleGrid& g) { return constant(g, Mat2::Identity()); }

    const CircleGrid& grid() const { return grid_; }

    Mat2 coeff(int k) const {
        if (k < -grid_.N || k > grid_.N) return Mat2::Zero();
        return c_[static_cast<size_t>(k + grid_.N)];
    }
    void setCoeff(int k, const Mat2& m);

    /// Sum of ||C_k||_F over |k| > N-4, measured from the full spectrum at
    /// construction time (coefficient edits do not update it).
    double tailEnergy() const { return tail_; }
    bool resolved(double tail_tol = 1e-10) const { return tail_ <= tail_tol; }

    /// Index of the outermost coefficient with ||C_k||_F > tol (0 for constants).
    int measuredBand(double tol = 1e-14) const;

    std::vector<Mat2> samples() const;
    Mat2 eval(cplx lambda) const;
    Mat2 evalUnchecked(cplx lambda) const;

    LoopMatrix derivLambda() const;
    /// Coefficients C_k -> C_{-k}^dagger; on the circle this is lambda -> Phi(lambda)^dagger.
    LoopMatrix conjTransposeCircle() const;
    LoopMatrix inverseOnGrid() const;

    double supNormCircle() const;
    double detOneResidual() const;   ///< sup_m |det - 1|
    double unitaryResidual() const;  ///< sup_m ||M M^dagger - I|| combined with |det-1|
    /// Max over |k| in (band, N] of ||C_k||_F where band = max |k| of nonzero
    /// coefficients declared plus tail; used to decide plus-loop-ness.
    double negativeEnergy() const;   ///< sum ||C_k||_F for k < 0

    LoopMatrix& operator+=(const LoopMatrix& o);
    LoopMatrix& operator-=(const LoopMatrix& o);
    LoopMatrix& operator*=(cplx s);
    friend LoopMatrix operator+(LoopMatrix a, const LoopMatrix& b) { return a += b; }
    friend LoopMatrix operator-(LoopMatrix a, const LoopMatrix& b) { return a -= b; }
    friend LoopMatrix operator*(LoopMatrix a, cplx s) { return a *= s; }
    friend LoopMatrix operator*(cplx s, LoopMatrix a) { return a *= s; }
    /// Pointwise product on the grid, re-expanded (band growth is truncated at N).
    friend LoopMatrix operator*(const LoopMatrix& a, const LoopMatrix& b);

private:
    CircleGrid grid_;
    std::vector<Mat2> c_;  // index k + N
    double tail_ = 0.0;
};

LoopMatrix loopFromSamples(const CircleGrid& g, const std::vector<Mat2>& samples);

/// sup over the grid at radius rho of || F(1/conj(lambda))^dagger F(lambda) - I ||,
/// the Schwarz-reflection identity a unitary-on-the-circle loop must satisfy
/// on the annulus.
double reflectionResidual(const LoopMatrix& F, double rho);

/// Validates that F is SU2 on the circle and returns it as an annulus loop;
/// the Laurent coefficients already realize the reflected extension.
LoopMatrix unitaryReflectionExtend(const LoopMatrix& F, double tol = 1e-8);

}  // namespace dpw

#endif
