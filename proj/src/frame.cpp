#include "dpw/frame.hpp"

#include <algorithm>
#include <cmath>

namespace dpw {

LoopMatrix zPowA(const CircleGrid& grid, const DelaunayResidue& res, CoverPoint zc) {
    std::vector<Mat2> s(static_cast<size_t>(grid.L));
    for (int m = 0; m < grid.L; ++m)
        s[static_cast<size_t>(m)] = zPowASample(res, zc.lnz(), grid.point(m));
    return LoopMatrix::fromSamples(grid, s);
}

std::vector<CoverPoint> radialPath(double r0, double r1, double arg) {
    if (r0 <= 0.0 || r1 <= 0.0) throw Error("radialPath: radii must be positive");
    return {CoverPoint{std::log(r0), arg}, CoverPoint{std::log(r1), arg}};
}

std::vector<CoverPoint> circlePath(double r, double arg0, int n) {
    if (r <= 0.0 || n < 2) throw Error("circlePath: bad parameters");
    std::vector<CoverPoint> out;
    out.reserve(static_cast<size_t>(n + 1));
    for (int i = 0; i <= n; ++i)
        out.push_back(CoverPoint{std::log(r), arg0 + 2.0 * kPi * i / n});
    return out;
}

namespace {

// Dormand-Prince 5(4) tableau
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187, kA53 = 64448.0 / 6561,
                 kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33, kA63 = 46732.0 / 5247,
                 kA64 = 49.0 / 176, kA65 = -5103.0 / 18656;
constexpr double kB1 = 35.0 / 384, kB3 = 500.0 / 1113, kB4 = 125.0 / 192,
                 kB5 = -2187.0 / 6784, kB6 = 11.0 / 84;
constexpr double kE1 = 35.0 / 384 - 5179.0 / 57600, kE3 = 500.0 / 1113 - 7571.0 / 16695,
                 kE4 = 125.0 / 192 - 393.0 / 640, kE5 = -2187.0 / 6784 + 92097.0 / 339200,
                 kE6 = 11.0 / 84 - 187.0 / 2100, kE7 = -1.0 / 40;

using State = std::vector<Mat2>;  // one frame matrix per lambda gridpoint

void axpy(State& y, double a, const State& x) {
    for (size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace

FramePath odeSolveFrame(const Potential& xi, const CircleGrid& grid, const CoverPoint& start,
                        const LoopMatrix& phi_start, const std::vector<CoverPoint>& waypoints,
                        const OdeOptions& opt) {
    grid.validate();
    if (waypoints.empty()) throw Error("ode_solve_frame: empty path");
    FramePath out;
    out.waypoints.reserve(waypoints.size() + 1);
    out.frames.reserve(waypoints.size() + 1);

    const int L = grid.L;
    std::vector<cplx> lams(static_cast<size_t>(L));
    for (int m = 0; m < L; ++m) lams[static_cast<size_t>(m)] = grid.point(m);

    State y(static_cast<size_t>(L));
    {
        auto s = phi_start.samples();
        for (int m = 0; m < L; ++m) y[static_cast<size_t>(m)] = s[static_cast<size_t>(m)];
    }
    CoverPoint cur = start;
    out.waypoints.push_back(cur);
    out.frames.push_back(phi_start);

    auto renorm = [&](State& st) {
        for (auto& m : st) {
            const cplx d = m.determinant();
            const double drift = std::abs(d - 1.0);
            out.max_det_drift = std::max(out.max_det_drift, drift);
            if (drift > opt.det_drift_limit)
                throw Error("ode_solve_frame: determinant drift above limit");
            m /= std::sqrt(d);
        }
    };

    State k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size()), k5(y.size()), k6(y.size()),
        k7(y.size()), ytmp(y.size()), y5(y.size());
    double errprev = 1.0;

    for (const auto& target : waypoints) {
        const double dl = target.log_abs - cur.log_abs;
        const double da = target.arg - cur.arg;
        const double seg = std::hypot(dl, da);
        if (seg < 1e-15) {
            out.waypoints.push_back(target);
            out.frames.push_back(out.frames.back());
            cur = target;
            continue;
        }
        const cplx dc{dl, da};  // d(ln z)/ds over the unit segment
        auto rhs = [&](double s, const State& st, State& k) {
            const cplx lnz = cplx(cur.log_abs, cur.arg) + s * dc;
            const cplx z = std::exp(lnz);
            const cplx dzds = z * dc;
            for (int m = 0; m < L; ++m)
                k[static_cast<size_t>(m)] =
                    st[static_cast<size_t>(m)] * (xi.eval(z, lams[static_cast<size_t>(m)]) * dzds);
        };
        double s = 0.0;
        double h = std::min(0.1, 0.5 / seg);
        rhs(s, y, k1);
        while (s < 1.0) {
            h = std::min(h, 1.0 - s);
            // stages
            ytmp = y;
            axpy(ytmp, h * kA21, k1);
            rhs(s + h / 5, ytmp, k2);
            ytmp = y;
            axpy(ytmp, h * kA31, k1);
            axpy(ytmp, h * kA32, k2);
            rhs(s + 3 * h / 10, ytmp, k3);
            ytmp = y;
            axpy(ytmp, h * kA41, k1);
            axpy(ytmp, h * kA42, k2);
            axpy(ytmp, h * kA43, k3);
            rhs(s + 4 * h / 5, ytmp, k4);
            ytmp = y;
            axpy(ytmp, h * kA51, k1);
            axpy(ytmp, h * kA52, k2);
            axpy(ytmp, h * kA53, k3);
            axpy(ytmp, h * kA54, k4);
            rhs(s + 8 * h / 9, ytmp, k5);
            ytmp = y;
            axpy(ytmp, h * kA61, k1);
            axpy(ytmp, h * kA62, k2);
            axpy(ytmp, h * kA63, k3);
            axpy(ytmp, h * kA64, k4);
            axpy(ytmp, h * kA65, k5);
            rhs(s + h, ytmp, k6);
            y5 = y;
            axpy(y5, h * kB1, k1);
            axpy(y5, h * kB3, k3);
            axpy(y5, h * kB4, k4);
            axpy(y5, h * kB5, k5);
            axpy(y5, h * kB6, k6);
            rhs(s + h, y5, k7);
            // embedded error estimate
            double err = 0.0;
            for (size_t i = 0; i < y.size(); ++i) {
                const Mat2 e = h * (kE1 * k1[i] + kE3 * k3[i] + kE4 * k4[i] + kE5 * k5[i] +
                                    kE6 * k6[i] + kE7 * k7[i]);
                const double sc = opt.ode_tol * (1.0 + y5[i].norm());
                err = std::max(err, e.norm() / sc);
            }
            if (err <= 1.0) {
                s += h;
                y.swap(y5);
                k1.swap(k7);  // FSAL
                const double fac =
                    0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) * std::pow(errprev, 0.4 / 5.0);
                h *= std::clamp(fac, 0.2, 5.0);
                errprev = std::max(err, 1e-10);
            } else {
                h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 1.0);
                // k1 unchanged: retry from the same point
            }
            if (++out.steps > opt.max_steps)
                throw Error("ode_solve_frame: step limit exceeded (singularity?)");
            if (h < 1e-14) throw Error("ode_solve_frame: step-size underflow");
        }
        renorm(y);
        cur = target;
        out.waypoints.push_back(cur);
        std::vector<Mat2> snap(y.begin(), y.end());
        out.frames.push_back(LoopMatrix::fromSamples(grid, snap));
        // k1 is stale after renormalization; recompute at segment start later
        errprev = 1.0;
    }
    return out;
}

LoopMatrix monodromy(const Potential& xi, const CircleGrid& grid, const CoverPoint& base,
                     const LoopMatrix& phi_base, const OdeOptions& opt) {
    auto path = circlePath(std::exp(base.log_abs), base.arg, 16);
    auto fp = odeSolveFrame(xi, grid, base, phi_base, path, opt);
    auto end = fp.frames.back().samples();
    auto start = phi_base.samples();
    std::vector<Mat2> m(end.size());
    for (size_t i = 0; i < m.size(); ++i) m[i] = end[i] * start[i].inverse();
    return LoopMatrix::fromSamples(grid, m);
}

MonodromyReport checkMonodromyProblem(const LoopMatrix& M) {
    MonodromyReport rep;
    rep.unitary_residual = M.unitaryResidual();
    const Mat2 m1 = M.evalUnchecked(1.0);
    const double plus = opNorm(m1 - Mat2::Identity());
    const double minus = opNorm(m1 + Mat2::Identity());
    rep.at_one_sign = plus <= minus ? 1 : -1;
    rep.at_one_residual = std::min(plus, minus);
    rep.deriv_at_one_residual = opNorm(M.derivLambda().evalUnchecked(1.0));
    return rep;
}

MonodromyDerivative monodromyDerivative(const PotentialFamily& family, double t0,
                                        const CircleGrid& grid, double radius, int n,
                                        const OdeOptions& opt) {
    if (n % 2 != 0) throw Error("monodromy_derivative: Simpson needs an even panel count");
    class Fixed : public Potential {
    public:
        Fixed(const PotentialFamily& f, double t) : f_(f), t_(t) {}
        Mat2 eval(cplx z, cplx lam) const override { return f_.eval(t_, z, lam); }

    private:
        const PotentialFamily& f_;
        double t_;
    };
    Fixed xi(family, t0);
    auto path = circlePath(radius, 0.0, n);
    const CoverPoint base{std::log(radius), 0.0};
    auto fp = odeSolveFrame(xi, grid, base, LoopMatrix::identity(grid), path, opt);

    MonodromyDerivative out{LoopMatrix(grid), LoopMatrix(grid)};
    out.M = fp.frames.back();  // Phi(base) = I so M is the final frame
    {
        const Mat2 m1 = out.M.evalUnchecked(1.0);
        out.commutation_residual =
            std::min(opNorm(m1 - Mat2::Identity()), opNorm(m1 + Mat2::Identity()));
    }

    // Simpson quadrature of Phi (d xi/dt) Phi^{-1} dz over the loop
    const int L = grid.L;
    std::vector<Mat2> acc(static_cast<size_t>(L), Mat2::Zero());
    const double hth = 2.0 * kPi / n;
    for (int i = 0; i <= n; ++i) {
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const cplx z = std::exp(cplx(std::log(radius), hth * i));
        const cplx dz = z * cplx(0.0, 1.0);  // dz/dtheta
        auto phis = fp.frames[static_cast<size_t>(i) + 1].samples();  // frames[0] is the start
        for (int m = 0; m < L; ++m) {
            const Mat2& phi = phis[static_cast<size_t>(m)];
            acc[static_cast<size_t>(m)] +=
                w * (phi * family.dtEval(t0, z, grid.point(m)) * phi.inverse() * dz);
        }
    }
    std::vector<Mat2> dm(static_cast<size_t>(L));
    auto msamp = out.M.samples();
    for (int m = 0; m < L; ++m)
        dm[static_cast<size_t>(m)] =
            (hth / 3.0) * acc[static_cast<size_t>(m)] * msamp[static_cast<size_t>(m)];
    out.dM = LoopMatrix::fromSamples(grid, dm);
    return out;
}

std::vector<LoopMatrix> zPowerTable(const Potential& xi, const DelaunayResidue& res,
                                    const CircleGrid& grid, double z_c, int K, int n_z) {
    if (K < 1 || n_z < 2 * K || (n_z & (n_z - 1)) != 0)
        throw Error("zPowerTable: need power-of-two n_z >= 2K");
    // holomorphic part samples on |z| = z_c, per lambda gridpoint
    std::vector<std::vector<Mat2>> hol(static_cast<size_t>(n_z),
                                       std::vector<Mat2>(static_cast<size_t>(grid.L)));
    for (int i = 0; i < n_z; ++i) {
        const cplx z = std::polar(z_c, 2.0 * kPi * i / n_z);
        for (int m = 0; m < grid.L; ++m) {
            const cplx lam = grid.point(m);
            hol[static_cast<size_t>(i)][static_cast<size_t>(m)] =
                xi.eval(z, lam) - res.matrix(lam) / z;
        }
    }
    std::vector<LoopMatrix> C;
    C.reserve(static_cast<size_t>(K));
    std::vector<cplx> buf(static_cast<size_t>(n_z));
    std::vector<std::vector<Mat2>> coeffs(static_cast<size_t>(K),
                                          std::vector<Mat2>(static_cast<size_t>(grid.L)));
    for (int m = 0; m < grid.L; ++m) {
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) {
                for (int i = 0; i < n_z; ++i)
                    buf[static_cast<size_t>(i)] = hol[static_cast<size_t>(i)][static_cast<size_t>(m)](r, c);
                fftRadix2(buf, -1);
                for (int k = 0; k < K; ++k)
                    coeffs[static_cast<size_t>(k)][static_cast<size_t>(m)](r, c) =
                        buf[static_cast<size_t>(k)] / (static_cast<double>(n_z) * std::pow(z_c, k));
            }
    }
    for (int k = 0; k < K; ++k) C.push_back(LoopMatrix::fromSamples(grid, coeffs[static_cast<size_t>(k)]));
    return C;
}

std::vector<LoopMatrix> frobeniusSeries(const DelaunayResidue& res, const CircleGrid& grid,
                                        const std::vector<LoopMatrix>& C, int K,
                                        double* c0_residual) {
    if (static_cast<int>(C.size()) < K) throw Error("frobeniusSeries: need K coefficients");
    const double c0 = C[0].supNormCircle();
    if (c0_residual) *c0_residual = c0;
    // P_k per lambda gridpoint; P_0 = I, C_0 treated as absorbed (zero)
    const int L = grid.L;
    std::vector<std::vector<Mat2>> P(static_cast<size_t>(K + 1),
                                     std::vector<Mat2>(static_cast<size_t>(L)));
    std::vector<std::vector<Mat2>> Cs(C.size());
    for (size_t j = 0; j < C.size(); ++j) Cs[j] = C[j].samples();
    for (int m = 0; m < L; ++m) {
        const cplx lam = grid.point(m);
        const Mat2 A = res.matrix(lam);
        const cplx mu2 = res.muSquared(lam);
        P[0][static_cast<size_t>(m)] = Mat2::Identity();
        for (int k = 0; k < K; ++k) {
            Mat2 rhs = Mat2::Zero();
            for (int i = 0; i <= k; ++i) {
                const int j = k - i;
                if (j == 0) continue;  // C_0 absorbed by the regularizing gauge
                if (j < static_cast<int>(Cs.size()))
                    rhs += P[static_cast<size_t>(i)][static_cast<size_t>(m)] * Cs[static_cast<size_t>(j)][static_cast<size_t>(m)];
            }
            const double n = k + 1;
            const cplx det = n * n - 4.0 * mu2;
            if (std::abs(det) < 1e-6 && n >= 2)
                throw Error("frobeniusSeries: resonance at n >= 2 (outside validated range)");
            Mat2 x;
            if (rhs.norm() == 0.0) {
                x = Mat2::Zero();
            } else {
                const Mat2 com = A * rhs - rhs * A;
                x = (rhs - (n * Mat2::Identity() - 2.0 * A) * com / det) / n;
            }
            P[static_cast<size_t>(k + 1)][static_cast<size_t>(m)] = x;
        }
    }
    std::vector<LoopMatrix> out;
    out.reserve(static_cast<size_t>(K));
    for (int k = 1; k <= K; ++k) out.push_back(LoopMatrix::fromSamples(grid, P[static_cast<size_t>(k)]));
    return out;
}

LoopMatrix ZapForm::evalP(const CircleGrid& grid, CoverPoint zc) const {
    const cplx z = zc.z();
    std::vector<Mat2> s(static_cast<size_t>(grid.L), Mat2::Identity());
    cplx zk = 1.0;
    for (size_t k = 0; k < P.size(); ++k) {
        zk *= z;
        auto ps = P[k].samples();
        for (int m = 0; m < grid.L; ++m) s[static_cast<size_t>(m)] += zk * ps[static_cast<size_t>(m)];
    }
    return LoopMatrix::fromSamples(grid, s);
}

LoopMatrix ZapForm::reconstruct(const CircleGrid& grid, CoverPoint zc) const {
    return M * zPowA(grid, res, zc) * evalP(grid, zc);
}

ZapForm buildZapForm(const Potential& xi, const DelaunayResidue& res, const CircleGrid& grid,
                     int K, const std::function<LoopMatrix(CoverPoint)>& frame_at, double z_fit1,
                     double z_fit2, double z_c) {
    ZapForm out{LoopMatrix(grid), res, {}, 0.0, 0.0};
    auto C = zPowerTable(xi, res, grid, z_c, K);
    out.P = frobeniusSeries(res, grid, C, K, &out.c0_residual);

    auto extract = [&](double zf) -> LoopMatrix {
        const CoverPoint zc{std::log(zf), 0.0};
        auto phi = frame_at(zc).samples();
        auto p = out.evalP(grid, zc).samples();
        auto za = zPowA(grid, res, zc).samples();
        std::vector<Mat2> m(phi.size());
        for (size_t i = 0; i < m.size(); ++i)
            m[i] = phi[i] * p[i].inverse() * za[i].inverse();
        return LoopMatrix::fromSamples(grid, m);
    };
    auto m1 = extract(z_fit1);
    auto m2 = extract(z_fit2);
    out.fit_disagreement = (m1 - m2).supNormCircle();
    out.M = 0.5 * (m1 + m2);
    return out;
}

}  // namespace dpw
