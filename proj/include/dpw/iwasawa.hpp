#ifndef DPW_IWASAWA_HPP
#define DPW_IWASAWA_HPP

#include "dpw/loop.hpp"

namespace dpw {

struct IwasawaOptions {
    double factor_tol = 1e-9;
    double decomposition_tol = 1e-8;
    double cond_limit = 1e12;   ///< refuse if cond(P) exceeds this at a gridpoint
    bool det_normalize = true;  ///< rescale B to det 1 by the analytic square root
    int block_rows = 0;         ///< Toeplitz block rows M; 0 = adaptive (8 x band)
};

/// Iwasawa pair Phi = F.B: F unitary on the circle, B a plus-loop with
/// B(0) upper triangular, positive diagonal, det B = 1.
struct IwasawaFactors {
    LoopMatrix F;
    LoopMatrix B;
    double residual = 0.0;            ///< sup ||F.B - Phi|| on the circle
    double unitary_residual = 0.0;    ///< sup ||F F^dagger - I|| + |det F - 1|
    double reflection_residual = 0.0; ///< Schwarz identity at |lambda| = R^{1/2}
};

/// Closed-form factorization of the hat loop [[a, b/lambda],[c lambda, d]],
/// ad - bc = 1.
IwasawaFactors explicitIwasawaHat(const CircleGrid& g, cplx a, cplx b, cplx c, cplx d,
                                  double tol = 1e-10);

struct SpectralFactor {
    LoopMatrix B;
    double residual = 0.0;  ///< sup ||B^dagger B - P|| on the circle
};

/// Spectral factor P = B^dagger B of a Hermitian positive loop: Bauer
/// block-Toeplitz Cholesky with Wilson-style refinement, B(0) upper
/// triangular with positive diagonal, optionally renormalized to det B = 1.
SpectralFactor spectralFactorize(const LoopMatrix& P, const IwasawaOptions& opt = {});

/// Numerical Iwasawa decomposition of a resolved SL2 loop via P = Phi*Phi.
IwasawaFactors iwasawaDecompose(const LoopMatrix& phi, const IwasawaOptions& opt = {});

}  // namespace dpw

#endif
