#include "dpw/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace dpw {

namespace {

LoopMatrix multiplyByGaugeAt(const LoopMatrix& phi, const Gauge& gauge, cplx z) {
    const auto& g = phi.grid();
    auto s = phi.samples();
    for (int m = 0; m < g.L; ++m) s[static_cast<size_t>(m)] *= gauge.value(z, g.point(m));
    return LoopMatrix::fromSamples(g, s);
}

}  // namespace

PerturbedPipeline::PerturbedPipeline(const GaugedDelaunayFamily& fam, double t,
                                     PipelineOptions opt)
    : t_(t),
      opt_(opt),
      res_(DelaunayResidue::solve(t, fam.branch())),
      reg_(buildRegularizingGauge(
          opt.grid, res_, [&fam, t](cplx lam) { return fam.Ct(t, lam); }, fam.pt(t),
          opt.reg_tol)),
      xi_base_(fam.potential(t)) {
    xi_reg_ = std::make_shared<MobiusPotential>(
        std::make_shared<GaugedPotential>(xi_base_, reg_.gauge()), reg_.h);

    std::vector<Mat2> init(static_cast<size_t>(opt_.grid.L));
    for (int m = 0; m < opt_.grid.L; ++m)
        init[static_cast<size_t>(m)] = fam.initialFrame(t, opt_.grid.point(m));
    LoopMatrix phi1 = LoopMatrix::fromSamples(opt_.grid, init);
    phi_base_at_1_ = phi1;

    // anchor the regularized frame: Phi~(1) = Phi(h(1)) G(h(1))
    const cplx z1 = reg_.h.apply(1.0);
    LoopMatrix phi_at_h1 = phi1;
    if (std::abs(z1 - 1.0) > 1e-15) {
        if (std::abs(z1.imag()) > 1e-12 * std::abs(z1))
            throw Error("PerturbedPipeline: Mobius image of the basepoint left the real axis");
        phi_at_h1 = odeSolveFrame(*xi_base_, opt_.grid, CoverPoint{0.0, 0.0}, phi1,
                                  {CoverPoint{std::log(z1.real()), 0.0}}, opt_.ode)
                        .frames.back();
    }
    phi_reg_at_1_ = multiplyByGaugeAt(phi_at_h1, reg_.gauge(), z1);

    auto frame_at = [this](CoverPoint zc) {
        return odeSolveFrame(*xi_reg_, opt_.grid, CoverPoint{0.0, 0.0}, phi_reg_at_1_, {zc},
                             opt_.ode)
            .frames.back();
    };
    zap_ = buildZapForm(*xi_reg_, res_, opt_.grid, opt_.zap_K, frame_at);
}

namespace {

// one radial spine ODE plus one circular pass per radius
std::vector<LoopMatrix> gridFrames(const Potential& xi, const CircleGrid& grid,
                                   const LoopMatrix& start, const std::vector<double>& radii,
                                   const std::vector<double>& thetas, const OdeOptions& ode) {
    const size_t nr = radii.size(), nt = thetas.size();
    std::vector<LoopMatrix> out(nr * nt);

    std::vector<CoverPoint> spine;
    spine.reserve(nr);
    for (double r : radii) spine.push_back(CoverPoint{std::log(r), thetas.front()});
    auto spine_path = odeSolveFrame(xi, grid, CoverPoint{0.0, 0.0}, start, spine, ode);

    for (size_t i = 0; i < nr; ++i) {
        const LoopMatrix& at_spine = spine_path.frames[i + 1];  // frames[0] is the start
        out[i * nt] = at_spine;
        if (nt == 1) continue;
        std::vector<CoverPoint> ring;
        ring.reserve(nt - 1);
        for (size_t j = 1; j < nt; ++j)
            ring.push_back(CoverPoint{std::log(radii[i]), thetas[j]});
        auto ring_path = odeSolveFrame(xi, grid, spine[i], at_spine, ring, ode);
        for (size_t j = 1; j < nt; ++j) out[i * nt + j] = ring_path.frames[j];
    }
    return out;
}

}  // namespace

std::vector<LoopMatrix> PerturbedPipeline::framesOnGrid(const std::vector<double>& radii,
                                                        const std::vector<double>& thetas) const {
    if (radii.empty() || thetas.empty()) return {};
    return gridFrames(*xi_reg_, opt_.grid, phi_reg_at_1_, radii, thetas, opt_.ode);
}

std::vector<LoopMatrix> PerturbedPipeline::familyFramesOnGrid(
    const std::vector<double>& radii, const std::vector<double>& thetas) const {
    if (radii.empty() || thetas.empty()) return {};
    return gridFrames(*xi_base_, opt_.grid, phi_base_at_1_, radii, thetas, opt_.ode);
}

SurfaceSample PerturbedPipeline::familySample(const LoopMatrix& frame, CoverPoint zc) const {
    const auto fac = iwasawaDecompose(frame, opt_.iwasawa);
    return makeSurfaceSample(fac, potentialAtZ(*xi_base_, opt_.grid, zc.z()), zc);
}

SurfaceSample PerturbedPipeline::familyModelSample(CoverPoint zc) const {
    return delaunayModelImmersion(LoopMatrix::identity(opt_.grid), res_, opt_.grid, zc,
                                  opt_.iwasawa);
}

SurfaceSample PerturbedPipeline::perturbedSample(const LoopMatrix& frame, CoverPoint zc) const {
    const auto fac = iwasawaDecompose(frame, opt_.iwasawa);
    return makeSurfaceSample(fac, potentialAtZ(*xi_reg_, opt_.grid, zc.z()), zc);
}

SurfaceSample PerturbedPipeline::modelSample(CoverPoint zc) const {
    return delaunayModelImmersion(zap_.M, res_, opt_.grid, zc, opt_.iwasawa);
}

std::pair<std::vector<SurfaceSample>, std::vector<SurfaceSample>> PerturbedPipeline::sampleGrid(
    const std::vector<double>& radii, const std::vector<double>& thetas) const {
    auto frames = framesOnGrid(radii, thetas);
    std::vector<SurfaceSample> per, mod;
    per.reserve(frames.size());
    mod.reserve(frames.size());
    for (size_t i = 0; i < radii.size(); ++i)
        for (size_t j = 0; j < thetas.size(); ++j) {
            const CoverPoint zc{std::log(radii[i]), thetas[j]};
            per.push_back(perturbedSample(frames[i * thetas.size() + j], zc));
            mod.push_back(modelSample(zc));
        }
    return {std::move(per), std::move(mod)};
}

ConvergenceReport convergenceExperiment(const GaugedDelaunayFamily& fam,
                                        const std::vector<double>& t_ladder,
                                        const std::vector<double>& z_ladder, ConvergenceMode mode,
                                        const PipelineOptions& opt) {
    ConvergenceReport rep;
    rep.t_ladder = t_ladder;
    rep.z_ladder = z_ladder;
    rep.mode = mode;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rep.errors.assign(t_ladder.size(), std::vector<double>(z_ladder.size(), nan));

    // integrate each t-row with radii in decreasing order
    std::vector<size_t> order(z_ladder.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return z_ladder[a] > z_ladder[b]; });

    for (size_t it = 0; it < t_ladder.size(); ++it) {
        try {
            PerturbedPipeline pipe(fam, t_ladder[it], opt);
            std::vector<double> radii;
            radii.reserve(order.size());
            for (size_t k : order) radii.push_back(z_ladder[k]);
            auto frames = pipe.framesOnGrid(radii, {0.0});
            for (size_t k = 0; k < order.size(); ++k) {
                try {
                    const CoverPoint zc{std::log(radii[k]), 0.0};
                    const auto p = pipe.perturbedSample(frames[k], zc);
                    const auto m = pipe.modelSample(zc);
                    rep.errors[it][order[k]] = mode == ConvergenceMode::immersion
                                                   ? (p.f - m.f).norm()
                                                   : (p.N - m.N).norm();
                } catch (const Error&) {
                    ++rep.masked;
                }
            }
        } catch (const Error&) {
            rep.masked += static_cast<int>(z_ladder.size());
        }
    }

    // joint log-log plane fit over usable cells
    std::vector<Eigen::Vector3d> rows;
    std::vector<double> ys;
    for (size_t it = 0; it < t_ladder.size(); ++it)
        for (size_t iz = 0; iz < z_ladder.size(); ++iz) {
            const double e = rep.errors[it][iz];
            if (!std::isfinite(e) || e <= rep.floor_level || t_ladder[it] == 0.0) continue;
            rows.emplace_back(1.0, std::log(std::abs(t_ladder[it])), std::log(z_ladder[iz]));
            ys.push_back(std::log(e));
        }
    if (rows.size() < 4) {
        rep.fit_skipped = true;
        return rep;
    }
    Eigen::MatrixXd X(static_cast<long>(rows.size()), 3);
    Eigen::VectorXd y(static_cast<long>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) {
        X.row(static_cast<long>(i)) = rows[i].transpose();
        y(static_cast<long>(i)) = ys[i];
    }
    const Eigen::Vector3d beta = X.colPivHouseholderQr().solve(y);
    rep.fitted_C = std::exp(beta(0));
    rep.fitted_t_slope = beta(1);
    rep.fitted_alpha = beta(2);
    rep.fit_residual = std::sqrt((X * beta - y).squaredNorm() / static_cast<double>(rows.size()));
    return rep;
}

namespace {

struct VertexHash {
    double cell = 1.0;
    Vec3 lo = Vec3::Zero();
    std::unordered_map<long, std::vector<int>> bins;

    long key(long x, long y, long z) const {
        return (x * 73856093L) ^ (y * 19349663L) ^ (z * 83492791L);
    }
    std::array<long, 3> cellOf(const Vec3& p) const {
        return {std::lround(std::floor((p[0] - lo[0]) / cell)),
                std::lround(std::floor((p[1] - lo[1]) / cell)),
                std::lround(std::floor((p[2] - lo[2]) / cell))};
    }
    void build(const std::vector<Vec3>& pts, double cell_size) {
        cell = cell_size;
        lo = pts.front();
        for (const auto& p : pts) lo = lo.cwiseMin(p);
        for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
            const auto c = cellOf(pts[static_cast<size_t>(i)]);
            bins[key(c[0], c[1], c[2])].push_back(i);
        }
    }
    int nearest(const std::vector<Vec3>& pts, const Vec3& q) const {
        const auto c = cellOf(q);
        int best = -1;
        double bd = std::numeric_limits<double>::max();
        for (long ring = 1; ring <= 4 && best < 0; ++ring) {
            for (long x = c[0] - ring; x <= c[0] + ring; ++x)
                for (long y = c[1] - ring; y <= c[1] + ring; ++y)
                    for (long z = c[2] - ring; z <= c[2] + ring; ++z) {
                        auto it = bins.find(key(x, y, z));
                        if (it == bins.end()) continue;
                        for (int i : it->second) {
                            const double d = (pts[static_cast<size_t>(i)] - q).squaredNorm();
                            if (d < bd) {
                                bd = d;
                                best = i;
                            }
                        }
                    }
        }
        if (best < 0) {  // sparse fallback
            for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
                const double d = (pts[static_cast<size_t>(i)] - q).squaredNorm();
                if (d < bd) {
                    bd = d;
                    best = i;
                }
            }
        }
        return best;
    }
};

// Moller-Trumbore segment/triangle intersection; fills the hit point.
bool segmentHitsTriangle(const Vec3& a, const Vec3& b, const Vec3& p0, const Vec3& p1,
                         const Vec3& p2, Vec3& hit) {
    const Vec3 dir = b - a;
    const Vec3 e1 = p1 - p0, e2 = p2 - p0;
    const Vec3 pv = dir.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-300) return false;
    const double inv = 1.0 / det;
    const double slack = 1e-9;  // inclusive boundaries: probes may pass through vertices
    const Vec3 tv = a - p0;
    const double u = tv.dot(pv) * inv;
    if (u < -slack || u > 1.0 + slack) return false;
    const Vec3 qv = tv.cross(e1);
    const double v = dir.dot(qv) * inv;
    if (v < -slack || u + v > 1.0 + slack) return false;
    const double s = e2.dot(qv) * inv;
    if (s < -slack || s > 1.0 + slack) return false;
    hit = a + s * dir;
    return true;
}

}  // namespace

EmbeddingReport embeddednessCheck(SurfaceMesh per, SurfaceMesh mod, Branch branch, double t,
                                  const EmbeddingOptions& opt) {
    if (per.vertices.size() != mod.vertices.size() || per.n_r != mod.n_r ||
        per.n_theta != mod.n_theta)
        throw Error("embeddednessCheck: perturbed and model meshes must share the grid");

    EmbeddingReport rep;
    if (branch == Branch::catenoidal) {
        if (t <= 0.0) throw Error("embeddednessCheck: catenoidal blowup needs t > 0");
        const double s = 1.0 / t;
        for (auto& v : per.vertices) v *= s;
        for (auto& v : mod.vertices) v *= s;
        rep.r_n = opt.catenoidal_r_n;
    } else {
        rep.r_n = opt.r_n_factor * t;
    }
    if (rep.r_n <= 0.0) throw Error("embeddednessCheck: tubular radius must be positive");

    rep.max_adjacent_displacement = mod.maxAdjacentDisplacement();
    if (rep.max_adjacent_displacement > rep.r_n / 4.0)
        throw Error(
            "embeddednessCheck: mesh too coarse for the tubular radius; increase n_r/n_theta "
            "until adjacent samples move by less than r_n/4");

    // (1) projection distance
    double dmax = 0.0;
    for (size_t i = 0; i < per.vertices.size(); ++i)
        dmax = std::max(dmax, (per.vertices[i] - mod.vertices[i]).norm());
    rep.projection = {dmax < rep.r_n / 2.0, rep.r_n / 2.0 - dmax};

    // (2) normal alignment against the nearest model vertex
    VertexHash hash;
    hash.build(mod.vertices, rep.r_n);
    double mindot = 1.0;
    for (size_t i = 0; i < per.vertices.size(); ++i) {
        const int j = hash.nearest(mod.vertices, per.vertices[i]);
        mindot = std::min(mindot, mod.normals[static_cast<size_t>(j)].dot(per.normals[i]));
    }
    rep.normal_alignment = {mindot > opt.normal_threshold, mindot - opt.normal_threshold};

    // (3) properness: model boundary rings vs intrinsically distant rows.
    // Rows closer than 4 r_n along the surface form the boundary collar;
    // everything beyond it must stay 2 r_n away in space (no fold-back).
    std::vector<double> row_arc(static_cast<size_t>(mod.n_r), 0.0);  // cumulative from row 0
    for (int i = 0; i + 1 < mod.n_r; ++i) {
        double step = 0.0;
        for (int j = 0; j < mod.n_theta; ++j)
            step = std::max(step,
                            (mod.vertices[static_cast<size_t>(mod.vertexIndex(i, j))] -
                             mod.vertices[static_cast<size_t>(mod.vertexIndex(i + 1, j))])
                                .norm());
        row_arc[static_cast<size_t>(i + 1)] = row_arc[static_cast<size_t>(i)] + step;
    }
    double sep = std::numeric_limits<double>::max();
    int gap = mod.n_r;  // widest collar used, for the degree probes below
    for (int border : {0, mod.n_r - 1}) {
        const double base = row_arc[static_cast<size_t>(border)];
        int first_far = -1;
        for (int i = 0; i < mod.n_r; ++i)
            if (std::abs(row_arc[static_cast<size_t>(i)] - base) >= 4.0 * rep.r_n) {
                if (first_far < 0 || std::abs(i - border) < std::abs(first_far - border))
                    first_far = i;
            }
        if (first_far < 0) continue;  // annulus fits inside one tube chart
        gap = std::min(gap, std::abs(first_far - border));
        for (int j = 0; j < mod.n_theta; ++j) {
            const Vec3& x = mod.vertices[static_cast<size_t>(mod.vertexIndex(border, j))];
            for (int i = 0; i < mod.n_r; ++i) {
                if (std::abs(row_arc[static_cast<size_t>(i)] - base) < 4.0 * rep.r_n) continue;
                for (int jj = 0; jj < mod.n_theta; ++jj)
                    sep = std::min(
                        sep, (x - mod.vertices[static_cast<size_t>(mod.vertexIndex(i, jj))])
                                 .norm());
            }
        }
    }
    if (sep == std::numeric_limits<double>::max())
        rep.properness = {true, 2.0 * rep.r_n};
    else
        rep.properness = {sep > 2.0 * rep.r_n, sep - 2.0 * rep.r_n};

    // (4a) winding of the middle perturbed ring around the model axis (x, 0, z_axis)
    const double z_axis =
        std::accumulate(mod.vertices.begin(), mod.vertices.end(), 0.0,
                        [](double acc, const Vec3& v) { return acc + v[2]; }) /
        static_cast<double>(mod.vertices.size());
    const int mid = per.n_r / 2;
    double total = 0.0, prev = 0.0;
    for (int j = 0; j <= per.n_theta; ++j) {
        const Vec3& v = per.vertices[static_cast<size_t>(per.vertexIndex(mid, j % per.n_theta))];
        const double ang = std::atan2(v[2] - z_axis, v[1]);
        if (j > 0) {
            double d = ang - prev;
            while (d > kPi) d -= 2.0 * kPi;
            while (d < -kPi) d += 2.0 * kPi;
            total += d;
        }
        prev = ang;
    }
    rep.winding = std::abs(static_cast<int>(std::lround(total / (2.0 * kPi))));
    if (!per.closed) rep.winding = 1;  // open sector: winding not applicable

    // (4b) sheet count along model normal lines at interior probe vertices
    int bad_probe = 0;
    rep.max_sheets = 1;
    const int probes = std::max(1, opt.probes);
    const int stride =
        std::max(1, static_cast<int>(per.vertices.size()) / probes);
    const int probe_gap = std::max(2, std::min(gap, mod.n_r / 8));
    for (size_t v = 0; v < mod.vertices.size(); v += static_cast<size_t>(stride)) {
        const int i_r = static_cast<int>(v) / mod.n_theta;
        if (i_r < probe_gap || i_r >= mod.n_r - probe_gap) continue;
        const Vec3 a = mod.vertices[v] - 0.7 * rep.r_n * mod.normals[v];
        const Vec3 b = mod.vertices[v] + 0.7 * rep.r_n * mod.normals[v];
        std::vector<Vec3> hits;
        for (const auto& tri : per.triangles) {
            Vec3 h;
            if (segmentHitsTriangle(a, b, per.vertices[static_cast<size_t>(tri[0])],
                                    per.vertices[static_cast<size_t>(tri[1])],
                                    per.vertices[static_cast<size_t>(tri[2])], h)) {
                bool dup = false;
                for (const auto& o : hits)
                    if ((o - h).norm() < rep.r_n * 1e-3) dup = true;
                if (!dup) hits.push_back(h);
            }
        }
        rep.max_sheets = std::max(rep.max_sheets, static_cast<int>(hits.size()));
        if (hits.size() != 1) ++bad_probe;
    }
    rep.degree = {rep.winding == 1 && bad_probe == 0,
                  rep.winding == 1 ? static_cast<double>(-bad_probe) : -1.0};

    if (opt.run_scan) rep.self_intersects = meshSelfIntersects(per);
    return rep;
}

EmbeddingScan embeddednessScan(const MeshSampler& sampler, Branch branch, double t,
                               const std::vector<double>& ladder, const EmbeddingOptions& opt) {
    EmbeddingScan scan;
    std::vector<double> eps = ladder;
    std::sort(eps.begin(), eps.end(), std::greater<>());
    bool any = false;
    for (double e : eps) {
        auto [per, mod] = sampler(e);
        bool ok = false;
        EmbeddingReport rep;
        try {
            rep = embeddednessCheck(std::move(per), std::move(mod), branch, t, opt);
            ok = rep.pass() && !rep.self_intersects;
        } catch (const Error&) {
            ok = false;
        }
        scan.tested.push_back(e);
        scan.passed.push_back(ok ? 1 : 0);
        if (!ok) break;
        any = true;
        scan.epsilon_prime = e;
        scan.at_selected = rep;
        scan.at_selected.epsilon_prime = e;
    }
    if (!any) scan.epsilon_prime = 0.0;
    return scan;
}

double annulusSupNorm(const LoopMatrix& F, double R) {
    const auto& g = F.grid();
    if (R > g.annulus_R + 1e-12) throw Error("annulusSupNorm: R outside the working annulus");
    double m = 0.0;
    for (int k = 0; k < g.L; ++k) {
        const cplx lam = g.point(k);
        m = std::max(m, opNorm(F.evalUnchecked(lam * R)));
        m = std::max(m, opNorm(F.evalUnchecked(lam / R)));
    }
    return m;
}

GrowthReport frameGrowthCheck(const Potential& xi, const CircleGrid& grid,
                              const std::vector<CoverPoint>& path, const LoopMatrix& phi_start,
                              double R, double C, const OdeOptions& ode,
                              const IwasawaOptions& iw) {
    if (path.size() < 2) throw Error("frameGrowthCheck: path needs at least two points");
    auto fp = odeSolveFrame(xi, grid, path.front(), phi_start,
                            {path.begin() + 1, path.end()}, ode);
    const auto& frames = fp.frames;  // frames[0] is phi_start

    GrowthReport rep;
    rep.R = R;
    rep.C = C;
    std::vector<double> density(path.size());
    LoopMatrix F_first, F_last;
    for (size_t k = 0; k < path.size(); ++k) {
        const auto fac = iwasawaDecompose(frames[k], iw);
        const auto inv = surfaceInvariants(fac.B, potentialAtZ(xi, grid, path[k].z()));
        density[k] = inv.metric_density;
        if (k == 0) F_first = fac.F;
        if (k + 1 == path.size()) F_last = fac.F;
    }
    for (size_t k = 0; k + 1 < path.size(); ++k)
        rep.path_length += 0.5 * (density[k] + density[k + 1]) *
                           std::abs(path[k + 1].z() - path[k].z());
    rep.lhs = annulusSupNorm(F_last, R);
    rep.rhs = C * annulusSupNorm(F_first, R) * std::exp(0.5 * (R - 1.0) * rep.path_length);
    rep.margin = rep.rhs - rep.lhs;
    rep.pass = rep.margin > 0.0;
    return rep;
}

}  // namespace dpw
