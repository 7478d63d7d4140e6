#ifndef DPW_IO_HPP
#define DPW_IO_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "dpw/analysis.hpp"

namespace dpw {

/// Perturbed Delaunay family block of an experiment config.
struct FamilyConfig {
    Branch branch = Branch::spherical;
    cplx coupling{};
    double kappa = 0.0;
    cplx nu{};
    double epsilon = 1.2;

    GaugedDelaunayFamily family() const {
        return GaugedDelaunayFamily(branch, coupling, kappa, nu, epsilon);
    }
};

struct MeshConfig {
    int n_r = 48;
    int n_theta = 256;
    double eps = 0.18;
    std::vector<double> eps_prime{0.05};  ///< inner-radius ladder for the scan
};

/// Schema-validated experiment description. Unknown keys are rejected at
/// every level; weights above the cylinder bound 1/16 are rejected.
struct ExperimentConfig {
    std::string command;  ///< delaunay | perturbed | convergence | embeddedness | monodromy
    double t = 0.01;
    FamilyConfig family;
    PipelineOptions pipeline;
    std::vector<double> t_ladder;
    std::vector<double> z_ladder;
    std::string mode = "both";  ///< convergence: immersion | normal | both
    MeshConfig mesh;
    EmbeddingOptions embedding;
    std::string prefix = "run";  ///< artifact basename
};

/// Parses and validates a JSON config. Throws Error with a message naming
/// the offending key on any schema violation.
ExperimentConfig parseConfig(const std::string& text, const std::string& origin = "config");
ExperimentConfig loadConfig(const std::string& path);

/// RFC 4180 CSV: comma-separated, CRLF line endings, fields quoted when
/// they contain a comma, quote or newline.
void writeCsvRow(std::ostream& out, const std::vector<std::string>& fields);

std::string formatDouble(double v);  ///< 17 significant digits, round-trip safe

}  // namespace dpw

#endif
