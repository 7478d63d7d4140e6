// dpwlab: batch front end for the DPW pipeline.
// dpwlab <command> --config <path> [--out <dir>] [--threads <n>]

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dpw/io.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace dpw;

namespace {

struct Ctx {
    ExperimentConfig cfg;
    fs::path out;
    int threads = 1;
};

std::vector<double> geomLadder(double a, double b, int n) {
    std::vector<double> v(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        v[static_cast<size_t>(i)] = a * std::pow(b / a, double(i) / double(n - 1));
    return v;
}

std::vector<double> thetaRing(int n) {
    std::vector<double> v(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<size_t>(i)] = 2.0 * kPi * i / n;
    return v;
}

ojson jvec3(const Vec3& v) { return ojson::array({v[0], v[1], v[2]}); }
ojson jcplx(cplx v) { return ojson::array({v.real(), v.imag()}); }

void writeText(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
}

void writeReport(const fs::path& p, const ojson& j) {
    writeText(p, j.dump(2) + "\n");
    std::cout << "wrote " << p.string() << "\n";
}

void writeMesh(const fs::path& p, const SurfaceMesh& m) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    writeObj(out, m);
    std::cout << "wrote " << p.string() << " (" << m.vertices.size() << " vertices)\n";
}

void logRun(const Ctx& ctx) {
    const auto& c = ctx.cfg;
    std::cout << c.command << ": L=" << c.pipeline.grid.L << " N=" << c.pipeline.grid.N
              << " ode_tol=" << c.pipeline.ode.ode_tol << " threads=" << ctx.threads << "\n";
    std::cout << "weight t=" << c.t << " within the admissible range t <= 1/16\n";
}

ojson jmonodromy(const MonodromyReport& r) {
    return ojson{{"unitary_residual", r.unitary_residual},
                 {"at_one_residual", r.at_one_residual},
                 {"at_one_sign", r.at_one_sign},
                 {"deriv_at_one_residual", r.deriv_at_one_residual},
                 {"pass", r.pass()}};
}

ojson jclaim(const ClaimResult& c) { return ojson{{"pass", c.pass}, {"margin", c.margin}}; }

ojson jembedding(const EmbeddingReport& r) {
    return ojson{{"epsilon_prime", r.epsilon_prime},
                 {"r_n", r.r_n},
                 {"projection", jclaim(r.projection)},
                 {"normal_alignment", jclaim(r.normal_alignment)},
                 {"properness", jclaim(r.properness)},
                 {"degree", jclaim(r.degree)},
                 {"winding", r.winding},
                 {"max_sheets", r.max_sheets},
                 {"self_intersects", r.self_intersects},
                 {"max_adjacent_displacement", r.max_adjacent_displacement},
                 {"pass", r.pass()}};
}

class DelaunayPotential : public Potential {
public:
    explicit DelaunayPotential(DelaunayResidue res) : res_(res) {}
    Mat2 eval(cplx z, cplx lam) const override { return res_.matrix(lam) / z; }

private:
    DelaunayResidue res_;
};

MonodromyReport familyMonodromy(const GaugedDelaunayFamily& fam, double t,
                                const PipelineOptions& opt) {
    auto xi = fam.potential(t);
    std::vector<Mat2> init(static_cast<size_t>(opt.grid.L));
    for (int m = 0; m < opt.grid.L; ++m)
        init[static_cast<size_t>(m)] = fam.initialFrame(t, opt.grid.point(m));
    const auto phi1 = LoopMatrix::fromSamples(opt.grid, init);
    return checkMonodromyProblem(monodromy(*xi, opt.grid, CoverPoint{0.0, 0.0}, phi1, opt.ode));
}

int runDelaunay(const Ctx& ctx) {
    const auto& c = ctx.cfg;
    logRun(ctx);
    const auto res = DelaunayResidue::solve(c.t, c.family.branch);
    const auto g = c.pipeline.grid;

    const double inner = c.mesh.eps_prime.back();
    const auto radii = geomLadder(inner, c.mesh.eps, c.mesh.n_r);
    const auto thetas = thetaRing(c.mesh.n_theta);
    std::vector<SurfaceSample> s;
    s.reserve(radii.size() * thetas.size());
    for (double r : radii)
        for (double th : thetas)
            s.push_back(delaunayModelImmersion(LoopMatrix::identity(g), res, g,
                                               CoverPoint{std::log(r), th}, c.pipeline.iwasawa));
    auto mesh = buildMesh(s, c.mesh.n_r, c.mesh.n_theta, true);
    writeMesh(ctx.out / (c.prefix + ".obj"), mesh);

    // axis of revolution (x, 0, -2r) and the distance profile to it
    const OrientedLine axis{Vec3(0.0, 0.0, -2.0 * res.r), Vec3(1.0, 0.0, 0.0)};
    double dmin = 1e300, dmax = 0.0, dsum = 0.0;
    for (const auto& v : mesh.vertices) {
        const double d = distanceToLine(v, axis);
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
        dsum += d;
    }
    const auto mono =
        checkMonodromyProblem(monodromy(DelaunayPotential(res), g, CoverPoint{0.0, 0.0},
                                        LoopMatrix::identity(g), c.pipeline.ode));
    std::cout << "monodromy: unitary " << mono.unitary_residual << ", M(1) -+ I "
              << mono.at_one_residual << ", derivative " << mono.deriv_at_one_residual << "\n";

    ojson rep{{"command", "delaunay"},
              {"t", c.t},
              {"branch", c.family.branch == Branch::spherical ? "spherical" : "catenoidal"},
              {"grid", {{"L", g.L}, {"N", g.N}, {"annulus_R", g.annulus_R}}},
              {"ode_tol", c.pipeline.ode.ode_tol},
              {"axis", {{"point", jvec3(axis.point)}, {"direction", jvec3(axis.direction)}}},
              {"axis_distance",
               {{"min", dmin}, {"max", dmax}, {"mean", dsum / double(mesh.vertices.size())}}},
              {"monodromy", jmonodromy(mono)}};
    writeReport(ctx.out / (c.prefix + ".json"), rep);
    return 0;
}

int runMonodromy(const Ctx& ctx) {
    const auto& c = ctx.cfg;
    logRun(ctx);
    const auto fam = c.family.family();
    const auto mono = familyMonodromy(fam, c.t, c.pipeline);
    std::cout << "monodromy: unitary " << mono.unitary_residual << ", M(1) -+ I "
              << mono.at_one_residual << ", derivative " << mono.deriv_at_one_residual << "\n";

    // analytic t-derivative of the monodromy against a central difference
    GaugedFamilyAdapter adapter(fam);
    const auto md = monodromyDerivative(adapter, c.t, c.pipeline.grid, 1.0, 512, c.pipeline.ode);
    // the finite difference must share the derivative's normalization
    // (frame frozen to I at the basepoint)
    const double h = 1e-4;
    auto at = [&](double t) {
        return monodromy(*fam.potential(t), c.pipeline.grid, CoverPoint{0.0, 0.0},
                         LoopMatrix::identity(c.pipeline.grid), c.pipeline.ode);
    };
    const auto fd = (at(c.t + h) - at(c.t - h)) * cplx(1.0 / (2.0 * h));
    const double rel = (md.dM - fd).supNormCircle() / std::max(1e-300, md.dM.supNormCircle());

    // resonance diagnostic of the regularizing gauge at this weight
    PerturbedPipeline pipe(fam, c.t, c.pipeline);
    std::cout << "resonance residual " << pipe.regularization().resonance_residual << "\n";

    ojson rep{{"command", "monodromy"},
              {"t", c.t},
              {"monodromy", jmonodromy(mono)},
              {"derivative",
               {{"commutation_residual", md.commutation_residual},
                {"fd_relative_error", rel}}},
              {"regularization",
               {{"p_t", jcplx(pipe.regularization().p_t)},
                {"resonance_residual", pipe.regularization().resonance_residual},
                {"plus_residual", pipe.regularization().plus_residual}}}};
    writeReport(ctx.out / (c.prefix + ".json"), rep);
    return 0;
}

int runPerturbed(const Ctx& ctx) {
    const auto& c = ctx.cfg;
    logRun(ctx);
    const auto fam = c.family.family();
    PerturbedPipeline pipe(fam, c.t, c.pipeline);
    std::cout << "resonance residual " << pipe.regularization().resonance_residual << "\n";

    const auto radii = geomLadder(c.mesh.eps_prime.back(), c.mesh.eps, c.mesh.n_r);
    const auto thetas = thetaRing(c.mesh.n_theta);
    auto frames = pipe.familyFramesOnGrid(radii, thetas);
    std::vector<SurfaceSample> per, mod;
    per.reserve(frames.size());
    mod.reserve(frames.size());
    double dmax = 0.0, dsum = 0.0;
    for (size_t i = 0; i < radii.size(); ++i)
        for (size_t j = 0; j < thetas.size(); ++j) {
            const CoverPoint zc{std::log(radii[i]), thetas[j]};
            per.push_back(pipe.familySample(frames[i * thetas.size() + j], zc));
            mod.push_back(pipe.familyModelSample(zc));
            const double d = (per.back().f - mod.back().f).norm();
            dmax = std::max(dmax, d);
            dsum += d;
        }
    writeMesh(ctx.out / (c.prefix + "_perturbed.obj"),
              buildMesh(per, c.mesh.n_r, c.mesh.n_theta, true));
    writeMesh(ctx.out / (c.prefix + "_model.obj"),
              buildMesh(mod, c.mesh.n_r, c.mesh.n_theta, true));

    const auto mono = familyMonodromy(fam, c.t, c.pipeline);
    ojson rep{{"command", "perturbed"},
              {"t", c.t},
              {"distance_to_model", {{"max", dmax}, {"mean", dsum / double(per.size())}}},
              {"holomorphic_form",
               {{"c0_residual", pipe.zap().c0_residual},
                {"fit_disagreement", pipe.zap().fit_disagreement}}},
              {"regularization",
               {{"p_t", jcplx(pipe.regularization().p_t)},
                {"resonance_residual", pipe.regularization().resonance_residual},
                {"plus_residual", pipe.regularization().plus_residual}}},
              {"monodromy", jmonodromy(mono)}};
    writeReport(ctx.out / (c.prefix + ".json"), rep);
    return 0;
}

int runConvergence(const Ctx& ctx) {
    const auto& c = ctx.cfg;
    logRun(ctx);
    const auto fam = c.family.family();
    std::vector<ConvergenceMode> modes;
    if (c.mode == "immersion" || c.mode == "both") modes.push_back(ConvergenceMode::immersion);
    if (c.mode == "normal" || c.mode == "both") modes.push_back(ConvergenceMode::normal);

    std::ostringstream csv;
    writeCsvRow(csv, {"t", "abs_z", "error", "mode"});
    ojson rep{{"command", "convergence"}, {"t_ladder", c.t_ladder}, {"z_ladder", c.z_ladder}};
    for (auto mode : modes) {
        const char* name = mode == ConvergenceMode::immersion ? "immersion" : "normal";
        auto r = convergenceExperiment(fam, c.t_ladder, c.z_ladder, mode, c.pipeline);
        std::cout << name << ": alpha=" << r.fitted_alpha << " t_slope=" << r.fitted_t_slope
                  << " C=" << r.fitted_C << " residual=" << r.fit_residual
                  << " masked=" << r.masked << (r.fit_skipped ? " (fit skipped)" : "") << "\n";
        for (size_t i = 0; i < c.t_ladder.size(); ++i)
            for (size_t k = 0; k < c.z_ladder.size(); ++k)
                writeCsvRow(csv, {formatDouble(c.t_ladder[i]), formatDouble(c.z_ladder[k]),
                                  formatDouble(r.errors[i][k]), name});
        rep[name] = ojson{{"fitted_alpha", r.fitted_alpha},
                          {"fitted_t_slope", r.fitted_t_slope},
                          {"fitted_C", r.fitted_C},
                          {"fit_residual", r.fit_residual},
                          {"masked", r.masked},
                          {"fit_skipped", r.fit_skipped}};
    }
    writeText(ctx.out / (c.prefix + ".csv"), csv.str());
    std::cout << "wrote " << (ctx.out / (c.prefix + ".csv")).string() << "\n";
    writeReport(ctx.out / (c.prefix + ".json"), rep);
    return 0;
}

int runEmbeddedness(const Ctx& ctx) {
    const auto& c = ctx.cfg;
    logRun(ctx);
    const auto fam = c.family.family();
    PerturbedPipeline pipe(fam, c.t, c.pipeline);
    const auto thetas = thetaRing(c.mesh.n_theta);

    auto sampler = [&](double e0) {
        const auto radii = geomLadder(e0, c.mesh.eps, c.mesh.n_r);
        auto frames = pipe.familyFramesOnGrid(radii, thetas);
        std::vector<SurfaceSample> per, mod;
        for (size_t i = 0; i < radii.size(); ++i)
            for (size_t j = 0; j < thetas.size(); ++j) {
                const CoverPoint zc{std::log(radii[i]), thetas[j]};
                per.push_back(pipe.familySample(frames[i * thetas.size() + j], zc));
                mod.push_back(pipe.familyModelSample(zc));
            }
        return std::make_pair(buildMesh(per, c.mesh.n_r, c.mesh.n_theta, true),
                              buildMesh(mod, c.mesh.n_r, c.mesh.n_theta, true));
    };
    auto scan = embeddednessScan(sampler, fam.branch(), c.t, c.mesh.eps_prime, c.embedding);
    std::cout << "selected epsilon' = " << scan.epsilon_prime
              << (scan.at_selected.pass() ? " (pass)" : " (fail)") << "\n";

    auto [mper, mmod] = sampler(scan.epsilon_prime);
    writeMesh(ctx.out / (c.prefix + "_perturbed.obj"), mper);
    writeMesh(ctx.out / (c.prefix + "_model.obj"), mmod);

    ojson rep{{"command", "embeddedness"},
              {"t", c.t},
              {"epsilon", c.mesh.eps},
              {"epsilon_prime", scan.epsilon_prime},
              {"tested", scan.tested},
              {"passed", ojson::array()},
              {"report", jembedding(scan.at_selected)}};
    for (char p : scan.passed) rep["passed"].push_back(p != 0);
    writeReport(ctx.out / (c.prefix + ".json"), rep);
    return 0;
}

int runGenSpec(const Ctx& ctx, int z_deg, int t_deg) {
    const auto& c = ctx.cfg;
    const auto fam = c.family.family();
    const auto spec = fam.tableSpec(c.t, z_deg, t_deg);
    ojson rep{{"residue",
               {{"t", spec.residue.t},
                {"branch", spec.residue.branch == Branch::spherical ? "spherical" : "catenoidal"},
                {"r", spec.residue.r},
                {"s", spec.residue.s}}},
              {"epsilon", spec.epsilon},
              {"terms", ojson::array()}};
    for (const auto& term : spec.perturbation.terms) {
        ojson poly = ojson::array();
        for (cplx v : term.t_poly.c) poly.push_back(jcplx(v));
        rep["terms"].push_back(ojson{{"z_power", term.k},
                                     {"lambda_power", term.j},
                                     {"row", term.row},
                                     {"col", term.col},
                                     {"poly_t", poly}});
    }
    writeReport(ctx.out / (c.prefix + "_spec.json"), rep);
    return 0;
}

int threadCount(int cli_threads) {
    if (cli_threads > 0) return cli_threads;
    if (const char* env = std::getenv("DPWLAB_THREADS"))
        if (const int n = std::atoi(env); n > 0) return n;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CMC-1 surfaces from perturbed Delaunay potentials"};
    app.require_subcommand(1);

    struct Args {
        std::string config;
        std::string out = ".";
        int threads = 0;
        int z_deg = 6;
        int t_deg = 12;
    } args;

    const std::vector<std::string> commands{"delaunay", "perturbed", "convergence",
                                            "embeddedness", "monodromy"};
    for (const auto& name : commands) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", args.config, "experiment config (JSON)")->required();
        sub->add_option("--out", args.out, "output directory");
        sub->add_option("--threads", args.threads, "worker threads (DPWLAB_THREADS fallback)");
    }
    auto* gen = app.add_subcommand("gen-spec", "emit the finite-table form of a family");
    gen->add_option("--config", args.config, "experiment config (JSON)")->required();
    gen->add_option("--out", args.out, "output directory");
    gen->add_option("--z-degree", args.z_deg, "z truncation degree");
    gen->add_option("--t-degree", args.t_deg, "t truncation degree");

    CLI11_PARSE(app, argc, argv);
    const std::string sub = app.get_subcommands().front()->get_name();

    Ctx ctx;
    try {
        ctx.cfg = loadConfig(args.config);
        if (sub != "gen-spec" && ctx.cfg.command != sub)
            throw Error("config command \"" + ctx.cfg.command + "\" does not match subcommand \"" +
                        sub + "\"");
        ctx.out = args.out;
        ctx.threads = threadCount(args.threads);
        if (!fs::exists(ctx.out)) fs::create_directories(ctx.out);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (sub == "delaunay") return runDelaunay(ctx);
        if (sub == "perturbed") return runPerturbed(ctx);
        if (sub == "convergence") return runConvergence(ctx);
        if (sub == "embeddedness") return runEmbeddedness(ctx);
        if (sub == "monodromy") return runMonodromy(ctx);
        return runGenSpec(ctx, args.z_deg, args.t_deg);
    } catch (const std::exception& e) {
        std::cerr << sub << " failed: " << e.what() << "\n";
        return 2;
    }
}
