#ifndef DPW_ANALYSIS_HPP
#define DPW_ANALYSIS_HPP

#include <functional>
#include <memory>
#include <string>

#include "dpw/mesh.hpp"

namespace dpw {

struct PipelineOptions {
    CircleGrid grid{256, 64, 1.1};
    OdeOptions ode{};
    IwasawaOptions iwasawa{};
    int zap_K = 8;
    double reg_tol = 1e-6;
};

/// One member of a perturbed Delaunay family, ready for evaluation: the
/// potential is regularized (gauge + Mobius), the holomorphic representative
/// M_t is extracted once, and perturbed / model immersions share it.
class PerturbedPipeline {
public:
    PerturbedPipeline(const GaugedDelaunayFamily& fam, double t, PipelineOptions opt = {});

    const DelaunayResidue& residue() const { return res_; }
    const ZapForm& zap() const { return zap_; }
    const RegularizingGauge& regularization() const { return reg_; }
    double weight() const { return t_; }

    /// Frames of the regularized potential on a product grid (radii x
    /// thetas, row-major, radii decreasing recommended). One radial ODE
    /// spine plus one circular pass per radius.
    std::vector<LoopMatrix> framesOnGrid(const std::vector<double>& radii,
                                         const std::vector<double>& thetas) const;

    SurfaceSample perturbedSample(const LoopMatrix& frame, CoverPoint zc) const;
    SurfaceSample modelSample(CoverPoint zc) const;

    /// Frames of the family potential in its own coordinate (no
    /// regularization), anchored at the family frame at the basepoint.
    /// When the family is a gauge + reparametrization of a Delaunay
    /// potential its monodromy is exactly the Delaunay one, so rings
    /// spanning 2 pi close up to tolerance and meshes weld cleanly.
    std::vector<LoopMatrix> familyFramesOnGrid(const std::vector<double>& radii,
                                               const std::vector<double>& thetas) const;
    SurfaceSample familySample(const LoopMatrix& frame, CoverPoint zc) const;
    /// Model immersion in the family coordinate (trivial holomorphic
    /// representative: the family frame tends to w^A at the puncture).
    SurfaceSample familyModelSample(CoverPoint zc) const;

    /// Convenience: both immersions over a grid (closed = thetas span 2 pi).
    std::pair<std::vector<SurfaceSample>, std::vector<SurfaceSample>> sampleGrid(
        const std::vector<double>& radii, const std::vector<double>& thetas) const;

    const Potential& regularizedPotential() const { return *xi_reg_; }

private:
    double t_;
    PipelineOptions opt_;
    DelaunayResidue res_;
    RegularizingGauge reg_;
    std::shared_ptr<const Potential> xi_base_;
    std::shared_ptr<const Potential> xi_reg_;
    LoopMatrix phi_reg_at_1_;   ///< regularized frame at z = 1
    LoopMatrix phi_base_at_1_;  ///< family frame at w = 1
    ZapForm zap_;
};

enum class ConvergenceMode { immersion, normal };

struct ConvergenceReport {
    std::vector<double> t_ladder;
    std::vector<double> z_ladder;
    std::vector<std::vector<double>> errors;  ///< [i_t][i_z]
    ConvergenceMode mode = ConvergenceMode::immersion;
    double fitted_alpha = 0.0;    ///< exponent of |z| in the joint fit
    double fitted_t_slope = 0.0;  ///< exponent of |t|
    double fitted_C = 0.0;
    double fit_residual = 0.0;  ///< rms misfit of the log-log plane fit
    int masked = 0;             ///< cells excluded (pipeline failure)
    bool fit_skipped = false;   ///< all errors at the numerical floor
    double floor_level = 1e-7;
};

/// Runs perturbed vs model immersions over a (t, |z|) ladder and fits
/// log error = log C + beta log|t| + alpha log|z| by least squares.
ConvergenceReport convergenceExperiment(const GaugedDelaunayFamily& fam,
                                        const std::vector<double>& t_ladder,
                                        const std::vector<double>& z_ladder, ConvergenceMode mode,
                                        const PipelineOptions& opt = {});

struct ClaimResult {
    bool pass = false;
    double margin = 0.0;
};

struct EmbeddingReport {
    double epsilon_prime = 0.0;
    double r_n = 0.0;  ///< tubular radius used (post-blowup for catenoidal)
    ClaimResult projection;        ///< max ||f - f_model|| < r_n / 2
    ClaimResult normal_alignment;  ///< min <N_model(nearest), N> > threshold
    ClaimResult properness;        ///< model boundary vs interior separation > 2 r_n
    ClaimResult degree;            ///< winding 1 and one sheet over the model
    int winding = 0;
    int max_sheets = 0;
    bool self_intersects = false;  ///< independent triangle-triangle scan
    double max_adjacent_displacement = 0.0;
    bool pass() const {
        return projection.pass && normal_alignment.pass && properness.pass && degree.pass;
    }
};

struct EmbeddingOptions {
    double r_n_factor = 4.0;          ///< spherical: r_n = factor * t
    double catenoidal_r_n = 3.6;      ///< post-blowup tubular radius
    double normal_threshold = 0.1;
    int probes = 64;                  ///< normal-line sheet probes
    bool run_scan = true;             ///< triangle-triangle self-intersection
};

/// Numeric graph-over-model test on matching perturbed/model meshes (same
/// parameter grid). Catenoidal meshes are rescaled by 1/t first. Throws if
/// the mesh is too coarse for the tubular radius (adjacent displacement
/// above r_n / 4).
EmbeddingReport embeddednessCheck(SurfaceMesh perturbed, SurfaceMesh model, Branch branch,
                                  double t, const EmbeddingOptions& opt = {});

/// Produces (perturbed, model) meshes on the annulus eps_prime < |z| < eps.
using MeshSampler = std::function<std::pair<SurfaceMesh, SurfaceMesh>(double eps_prime)>;

struct EmbeddingScan {
    double epsilon_prime = 0.0;  ///< smallest tested inner radius still passing
    std::vector<double> tested;
    std::vector<char> passed;
    EmbeddingReport at_selected;
};

/// Walks the inner-radius ladder from the largest value down and keeps the
/// smallest radius for which the check (and everything above it) passes.
EmbeddingScan embeddednessScan(const MeshSampler& sampler, Branch branch, double t,
                               const std::vector<double>& ladder,
                               const EmbeddingOptions& opt = {});

struct GrowthReport {
    double lhs = 0.0;  ///< sup of ||F(z1, .)|| over the closed annulus A_R
    double rhs = 0.0;  ///< C ||F(z2, .)||_{A_R} exp((R-1)/2 |path|)
    double margin = 0.0;
    double path_length = 0.0;  ///< in the surface metric
    double R = 1.05;
    double C = 1.5;
    bool pass = false;
};

/// sup norm of the loop over the boundary circles of A_R.
double annulusSupNorm(const LoopMatrix& F, double R);

/// Gronwall-type growth bound for the unitary factor along a path: the
/// frame is integrated along `path` from phi_start, Iwasawa-split at each
/// waypoint, and the endpoint annulus norms are compared.
GrowthReport frameGrowthCheck(const Potential& xi, const CircleGrid& grid,
                              const std::vector<CoverPoint>& path, const LoopMatrix& phi_start,
                              double R, double C = 1.5, const OdeOptions& ode = {},
                              const IwasawaOptions& iw = {});

}  // namespace dpw

#endif
