#include "phinv/verifier.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "phinv/error.hpp"

namespace phinv {

namespace {

struct Bump1d {
    double value, d1, d2;
};

// b(t) = exp(-1/(1-t²)) and its first two derivatives. With s = 1 - t² and
// g = -1/s: g' = -2t/s², g'' = -2/s² - 8t²/s³, b' = b g', b'' = b (g'² + g'').
Bump1d bump1d(double t) {
    if (!(std::abs(t) < 1.0)) return {0.0, 0.0, 0.0};
    double s = 1.0 - t * t;
    double b = std::exp(-1.0 / s);
    double g1 = -2.0 * t / (s * s);
    double g2 = -2.0 / (s * s) - 8.0 * t * t / (s * s * s);
    return {b, b * g1, b * (g1 * g1 + g2)};
}

// Periodic minimum-image distance from point p to the box [lo, hi].
double distance_to_box(std::span<const double> p, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    double sq = 0.0;
    for (Eigen::Index j = 0; j < lo.size(); ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (int shift = -1; shift <= 1; ++shift) {
            double x = p[static_cast<std::size_t>(j)] + shift;
            double d = x < lo(j) ? lo(j) - x : (x > hi(j) ? x - hi(j) : 0.0);
            best = std::min(best, d);
        }
        sq += best * best;
    }
    return std::sqrt(sq);
}

std::string describe(const BumpTestFunction& f) {
    std::ostringstream os;
    os << "bump(center=(";
    for (int j = 0; j < f.dim(); ++j) os << (j ? "," : "") << f.center(j);
    os << "), width=(";
    for (int j = 0; j < f.dim(); ++j) os << (j ? "," : "") << f.width(j);
    os << "))";
    return os.str();
}

// Periodic finite-difference operators along one axis of a row-major grid.
class GridStencil {
public:
    explicit GridStencil(const GridSpec& g) : grid_(g), stride_(static_cast<std::size_t>(g.dim())) {
        std::size_t s = 1;
        for (int j = g.dim() - 1; j >= 0; --j) {
            stride_[static_cast<std::size_t>(j)] = s;
            s *= static_cast<std::size_t>(g.n_per_axis());
        }
    }

    // Fourth-order first derivative.
    std::vector<double> first(const std::vector<double>& f, int axis) const {
        const double h = grid_.spacing();
        std::vector<double> out(f.size());
        for (std::size_t i = 0; i < f.size(); ++i)
            out[i] = (-f[neighbor(i, axis, 2)] + 8.0 * f[neighbor(i, axis, 1)] - 8.0 * f[neighbor(i, axis, -1)] +
                      f[neighbor(i, axis, -2)]) /
                     (12.0 * h);
        return out;
    }

    // Fourth-order second derivative.
    std::vector<double> second(const std::vector<double>& f, int axis) const {
        const double h = grid_.spacing();
        std::vector<double> out(f.size());
        for (std::size_t i = 0; i < f.size(); ++i)
            out[i] = (-f[neighbor(i, axis, 2)] + 16.0 * f[neighbor(i, axis, 1)] - 30.0 * f[i] +
                      16.0 * f[neighbor(i, axis, -1)] - f[neighbor(i, axis, -2)]) /
                     (12.0 * h * h);
        return out;
    }

private:
    std::size_t neighbor(std::size_t i, int axis, int step) const {
        const std::size_t n = static_cast<std::size_t>(grid_.n_per_axis());
        const std::size_t stride = stride_[static_cast<std::size_t>(axis)];
        std::size_t coord = (i / stride) % n;
        std::size_t moved = (coord + n + static_cast<std::size_t>(step + static_cast<int>(n))) % n;
        return i - coord * stride + moved * stride;
    }

    GridSpec grid_;
    std::vector<std::size_t> stride_;
};

double radical_inverse(std::uint64_t index, unsigned base) {
    double inv = 1.0 / base;
    double f = inv;
    double r = 0.0;
    while (index > 0) {
        r += f * static_cast<double>(index % base);
        index /= base;
        f *= inv;
    }
    return r;
}

constexpr std::array<unsigned, 16> kPrimes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

}  // namespace

BumpTestFunction::BumpTestFunction(Eigen::VectorXd c, Eigen::VectorXd w) : center(std::move(c)), width(std::move(w)) {
    if (center.size() != width.size() || center.size() == 0)
        throw ConfigError("bump center and width must have the same positive dimension");
    for (Eigen::Index j = 0; j < width.size(); ++j)
        if (!(width(j) > 0.0) || !std::isfinite(center(j)))
            throw ConfigError("bump widths must be positive and centers finite");
}

double BumpTestFunction::value(std::span<const double> k) const {
    double v = 1.0;
    for (int j = 0; j < dim(); ++j) v *= bump1d((k[static_cast<std::size_t>(j)] - center(j)) / width(j)).value;
    return v;
}

BumpJet bump_derivs(const BumpTestFunction& f, std::span<const double> k) {
    const int d = f.dim();
    BumpJet jet{0.0, Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
    std::vector<Bump1d> axes(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
        axes[static_cast<std::size_t>(j)] = bump1d((k[static_cast<std::size_t>(j)] - f.center(j)) / f.width(j));
        if (axes[static_cast<std::size_t>(j)].value == 0.0) return jet;
    }
    // Factor j of ∂_a∂_b f: b'' on a == b == j, b' on a or b, b otherwise.
    auto factor = [&](int j, int a, int b) {
        const Bump1d& x = axes[static_cast<std::size_t>(j)];
        double w = f.width(j);
        int order = (j == a) + (j == b);
        return order == 0 ? x.value : (order == 1 ? x.d1 / w : x.d2 / (w * w));
    };
    jet.value = 1.0;
    for (int j = 0; j < d; ++j) jet.value *= axes[static_cast<std::size_t>(j)].value;
    for (int a = 0; a < d; ++a) {
        double g = 1.0;
        for (int j = 0; j < d; ++j) g *= factor(j, a, -1);
        jet.grad(a) = g;
        for (int b = a; b < d; ++b) {
            double h = 1.0;
            for (int j = 0; j < d; ++j) h *= factor(j, a, b);
            jet.hess(a, b) = h;
            jet.hess(b, a) = h;
        }
    }
    return jet;
}

void check_support(const BumpTestFunction& f, const GridFunction& omega, const VerifierOptions& opts) {
    const GridSpec& grid = omega.spec;
    if (f.dim() != grid.dim()) throw GridMismatch("bump and grid dimensions differ");
    Eigen::VectorXd lo = f.center - f.width;
    Eigen::VectorXd hi = f.center + f.width;
    for (int j = 0; j < f.dim(); ++j)
        if (!(lo(j) > -0.5 && hi(j) < 0.5))
            throw SupportViolation(describe(f) + " is not strictly inside the fundamental cell");
    std::vector<double> k(static_cast<std::size_t>(grid.dim()));
    for (std::size_t i = 0; i < omega.size(); ++i) {
        if (omega[i] >= opts.eps0) continue;
        grid.point(static_cast<PointIndex>(i), k);
        if (distance_to_box(k, lo, hi) < opts.margin)
            throw SupportViolation(describe(f) + " comes within the margin of a near-singular grid point");
    }
}

MomentMatrices compute_AB(const GridFunction& psi, const GridFunction& omega, const BumpTestFunction& f,
                          const VerifierOptions& opts) {
    if (!(psi.spec == omega.spec)) throw GridMismatch("psi and omega live on different grids");
    check_support(f, omega, opts);
    const GridSpec& grid = omega.spec;
    const int d = grid.dim();

    std::vector<double> samples(grid.size());
    std::vector<double> k(static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.point(static_cast<PointIndex>(i), k);
        samples[i] = f.value(k);
    }
    GridStencil stencil(grid);
    std::vector<std::vector<double>> first(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) first[static_cast<std::size_t>(a)] = stencil.first(samples, a);

    const double weight = std::pow(grid.spacing(), d);
    MomentMatrices mm{Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(d, d), std::nullopt, 0.0};
    for (int a = 0; a < d; ++a) {
        for (int b = a; b < d; ++b) {
            std::vector<double> dd =
                a == b ? stencil.second(samples, a) : stencil.first(first[static_cast<std::size_t>(a)], b);
            double sa = 0.0, sb = 0.0;
            for (std::size_t i = 0; i < dd.size(); ++i) {
                sa += psi[i] * dd[i];
                sb += omega[i] * dd[i];
            }
            mm.A(a, b) = mm.A(b, a) = sa * weight;
            mm.B(a, b) = mm.B(b, a) = sb * weight;
        }
    }
    return mm;
}

MomentMatrices compute_C(MomentMatrices mm, double kappa_max) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mm.B);
    const Eigen::VectorXd& s = svd.singularValues();
    double smax = s(0);
    double smin = s(s.size() - 1);
    mm.cond_B = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (!(mm.cond_B <= kappa_max)) {
        std::ostringstream os;
        os << "cond(B) = " << mm.cond_B << " exceeds " << kappa_max;
        throw IllConditionedB(os.str(), mm.cond_B);
    }
    mm.C = mm.B.transpose().fullPivLu().solve(mm.A.transpose()).transpose();
    return mm;
}

double quadrature_error_bound(const GridFunction& psi, const BumpTestFunction& f) {
    const GridSpec& grid = psi.spec;
    double max_psi = 0.0, max_dd = 0.0;
    std::vector<double> k(static_cast<std::size_t>(grid.dim()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        max_psi = std::max(max_psi, std::abs(psi[i]));
        grid.point(static_cast<PointIndex>(i), k);
        max_dd = std::max(max_dd, bump_derivs(f, k).hess.cwiseAbs().maxCoeff());
    }
    return max_psi * max_dd * grid.spacing();
}

std::vector<BumpTestFunction> make_bump_family(const GridFunction& omega, std::size_t count, std::uint64_t seed,
                                               const VerifierOptions& opts, std::size_t max_draws) {
    const int d = omega.spec.dim();
    if (2 * static_cast<std::size_t>(d) > kPrimes.size()) throw ConfigError("bump family supports d <= 8");
    // Cranley-Patterson rotation of the Halton points, fixed by the seed.
    std::mt19937_64 rng(seed);
    std::vector<double> rotation(2 * static_cast<std::size_t>(d));
    for (double& r : rotation) r = static_cast<double>(rng() >> 11) * 0x1.0p-53;

    std::vector<BumpTestFunction> family;
    for (std::size_t draw = 1; draw <= max_draws && family.size() < count; ++draw) {
        Eigen::VectorXd c(d), w(d);
        for (int j = 0; j < d; ++j) {
            double u = radical_inverse(draw, kPrimes[static_cast<std::size_t>(j)]) + rotation[static_cast<std::size_t>(j)];
            double v = radical_inverse(draw, kPrimes[static_cast<std::size_t>(d + j)]) +
                       rotation[static_cast<std::size_t>(d + j)];
            c(j) = (u - std::floor(u)) - 0.5;
            w(j) = 0.1 + 0.1 * (v - std::floor(v));
        }
        BumpTestFunction f(c, w);
        try {
            compute_C(compute_AB(omega, omega, f, opts), opts.kappa_max);
        } catch (const SupportViolation&) {
            continue;
        } catch (const IllConditionedB&) {
            continue;
        }
        family.push_back(std::move(f));
    }
    return family;
}

ScalarCheck check_scalar_C(const GridFunction& psi, const GridFunction& omega,
                           std::span<const BumpTestFunction> family, const VerifierOptions& opts) {
    ScalarCheck out;
    for (const BumpTestFunction& f : family) {
        try {
            MomentMatrices mm = compute_C(compute_AB(psi, omega, f, opts), opts.kappa_max);
            out.cond_B.push_back(mm.cond_B);
            out.C.push_back(*mm.C);
        } catch (const IllConditionedB&) {
            continue;
        }
    }
    if (out.C.size() < 3)
        throw InsufficientTestFunctions("only " + std::to_string(out.C.size()) +
                                        " admissible test functions; at least 3 are required");
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : out.C)
        for (Eigen::Index j = 0; j < c.rows(); ++j) {
            sum += c(j, j);
            ++n;
        }
    out.a_est = sum / static_cast<double>(n);
    for (const auto& c : out.C)
        for (Eigen::Index i = 0; i < c.rows(); ++i)
            for (Eigen::Index j = 0; j < c.cols(); ++j) {
                if (i == j)
                    out.a_spread = std::max(out.a_spread, std::abs(c(i, i) - out.a_est));
                else
                    out.offdiag_max = std::max(out.offdiag_max, std::abs(c(i, j)));
            }
    return out;
}

AffineFit fit_affine(const GridFunction& psi, const GridFunction& omega, double a_est) {
    if (!(psi.spec == omega.spec)) throw GridMismatch("psi and omega live on different grids");
    AffineFit fit;
    fit.a = a_est;
    const double n = static_cast<double>(psi.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) mean += psi[i] - a_est * omega[i];
    fit.c = mean / n;
    double l1 = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        double r = std::abs(psi[i] - a_est * omega[i] - fit.c);
        l1 += r;
        fit.residual_linf = std::max(fit.residual_linf, r);
    }
    fit.residual_l1 = l1 / n;
    return fit;
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Affine: return "affine";
        case Verdict::NonAffine: return "non-affine";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

VerificationReport verify_candidate(const GridFunction& psi, const GridFunction& omega,
                                    std::span<const BumpTestFunction> family, const VerifierOptions& opts) {
    VerificationReport rep;
    rep.scalar = check_scalar_C(psi, omega, family, opts);
    rep.fit = fit_affine(psi, omega, rep.scalar.a_est);
    auto [lo, hi] = std::minmax_element(omega.values.begin(), omega.values.end());
    rep.tau_a = 1e-3 * std::max(1.0, std::abs(rep.scalar.a_est));
    rep.tau_r = 1e-3 * (*hi - *lo);
    bool scalar_ok = rep.scalar.a_spread <= rep.tau_a && rep.scalar.offdiag_max <= rep.tau_a;
    bool fit_ok = rep.fit.residual_linf <= rep.tau_r;
    if (scalar_ok && fit_ok)
        rep.verdict = Verdict::Affine;
    else if (!scalar_ok && !fit_ok)
        rep.verdict = Verdict::NonAffine;
    else
        rep.verdict = Verdict::Inconclusive;
    return rep;
}

SmoothPhi parse_phi(std::string_view name) {
    if (name == "const") return SmoothPhi::Constant;
    if (name == "eps") return SmoothPhi::Energy;
    if (name == "eps2") return SmoothPhi::EnergySquared;
    if (name == "sin_eta1_eps") return SmoothPhi::SinMomentumEnergy;
    if (name == "exp_neg_eps") return SmoothPhi::ExpNegEnergy;
    throw ConfigError("unknown phi \"" + std::string(name) + "\"");
}

std::string_view to_string(SmoothPhi phi) {
    switch (phi) {
        case SmoothPhi::Constant: return "const";
        case SmoothPhi::Energy: return "eps";
        case SmoothPhi::EnergySquared: return "eps2";
        case SmoothPhi::SinMomentumEnergy: return "sin_eta1_eps";
        case SmoothPhi::ExpNegEnergy: return "exp_neg_eps";
    }
    return "const";
}

namespace {

constexpr double kTanhRange = 3.0;

struct IbpNode {
    std::vector<double> k;
    double weight;
    double f;
    Eigen::VectorXd df;
    Eigen::VectorXd grad_omega;
    Eigen::MatrixXd hess_omega;
    double omega;
};

std::vector<IbpNode> ibp_nodes(const FourierDispersion& disp, const BumpTestFunction& f, int per_axis,
                               const VerifierOptions& opts) {
    const int d = f.dim();
    const double ds = 2.0 * kTanhRange / per_axis;
    std::vector<double> t(static_cast<std::size_t>(per_axis)), jac(static_cast<std::size_t>(per_axis));
    for (int i = 0; i < per_axis; ++i) {
        double s = -kTanhRange + (i + 0.5) * ds;
        t[static_cast<std::size_t>(i)] = std::tanh(s);
        jac[static_cast<std::size_t>(i)] = (1.0 - t[static_cast<std::size_t>(i)] * t[static_cast<std::size_t>(i)]) * ds;
    }
    std::size_t total = 1;
    for (int j = 0; j < d; ++j) total *= static_cast<std::size_t>(per_axis);

    std::vector<IbpNode> nodes;
    std::vector<double> k(static_cast<std::size_t>(d));
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t r = idx;
        double weight = 1.0;
        for (int j = d - 1; j >= 0; --j) {
            std::size_t i = r % static_cast<std::size_t>(per_axis);
            r /= static_cast<std::size_t>(per_axis);
            k[static_cast<std::size_t>(j)] = f.center(j) + f.width(j) * t[i];
            weight *= f.width(j) * jac[i];
        }
        BumpJet jet = bump_derivs(f, k);
        if (jet.value == 0.0 && jet.grad.isZero(0.0)) continue;
        IbpNode node;
        node.k = k;
        node.weight = weight;
        node.f = jet.value;
        node.df = jet.grad;
        try {
            node.grad_omega = disp.gradient(k, opts.eps0);
            node.hess_omega = disp.hessian(k, opts.eps0);
        } catch (const NearSingularSet&) {
            throw SupportViolation(describe(f) + " covers a point where omega < eps0");
        }
        node.omega = disp.omega(k);
        nodes.push_back(std::move(node));
    }
    return nodes;
}

double eval_phi(SmoothPhi phi, const double* eta, double eps) {
    switch (phi) {
        case SmoothPhi::Constant: return 1.0;
        case SmoothPhi::Energy: return eps;
        case SmoothPhi::EnergySquared: return eps * eps;
        case SmoothPhi::SinMomentumEnergy: return std::sin(2.0 * std::numbers::pi * eta[0]) * eps;
        case SmoothPhi::ExpNegEnergy: return std::exp(-eps);
    }
    return 0.0;
}

}  // namespace

IbpResult verify_ibp_identity(const FourierDispersion& disp, SmoothPhi phi, const BumpTestFunction& f1,
                              const BumpTestFunction& f2, int alpha, int beta, const GridSpec& grid,
                              const VerifierOptions& opts) {
    const int d = disp.dim();
    if (f1.dim() != d || f2.dim() != d || grid.dim() != d) throw GridMismatch("dimension mismatch in IBP check");
    if (alpha < 0 || alpha >= d || beta < 0 || beta >= d) throw ConfigError("axis index out of range");
    GridFunction omega = sample_grid(disp, grid);
    check_support(f1, omega, opts);
    check_support(f2, omega, opts);

    const int per_axis = grid.n_per_axis();
    std::vector<IbpNode> n1 = ibp_nodes(disp, f1, per_axis, opts);
    std::vector<IbpNode> n2 = ibp_nodes(disp, f2, per_axis, opts);

    // Line with derivative directions (a, b):
    //   φ · [ (∂_a f1 f2 - f1 ∂_a f2)(∂_b ω1 - ∂_b ω2) + f1 f2 (H1 + H2)_{ab} ]
    double lhs = 0.0, rhs = 0.0;
    std::vector<double> eta(static_cast<std::size_t>(d));
    for (const IbpNode& p : n1) {
        double line_l = 0.0, line_r = 0.0;
        for (const IbpNode& q : n2) {
            for (int j = 0; j < d; ++j) eta[static_cast<std::size_t>(j)] = p.k[static_cast<std::size_t>(j)] + q.k[static_cast<std::size_t>(j)];
            double w = q.weight * eval_phi(phi, eta.data(), p.omega + q.omega);
            double ff = p.f * q.f;
            double da = p.df(alpha) * q.f - p.f * q.df(alpha);
            double db = p.df(beta) * q.f - p.f * q.df(beta);
            double ga = p.grad_omega(alpha) - q.grad_omega(alpha);
            double gb = p.grad_omega(beta) - q.grad_omega(beta);
            double h = p.hess_omega(alpha, beta) + q.hess_omega(alpha, beta);
            line_l += w * (da * gb + ff * h);
            line_r += w * (db * ga + ff * h);
        }
        lhs += p.weight * line_l;
        rhs += p.weight * line_r;
    }
    IbpResult res{lhs, rhs, 0.0};
    double scale = std::max(std::abs(lhs), std::abs(rhs));
    res.rel_diff = scale > 0.0 ? std::abs(lhs - rhs) / scale : 0.0;
    return res;
}

RelationCheck check_moment_relation(const GridFunction& psi, const GridFunction& omega, const BumpTestFunction& f1,
                                    const BumpTestFunction& f2, const VerifierOptions& opts) {
    MomentMatrices m1 = compute_AB(psi, omega, f1, opts);
    MomentMatrices m2 = compute_AB(psi, omega, f2, opts);
    const Eigen::MatrixXd& a = m1.A;
    const Eigen::MatrixXd& b = m1.B;
    const Eigen::MatrixXd& at = m2.A;
    const Eigen::MatrixXd& bt = m2.B;
    const Eigen::Index d = a.rows();
    RelationCheck out;
    out.norm_A = a.norm();
    out.norm_B_tilde = bt.norm();
    for (Eigen::Index al = 0; al < d; ++al)
        for (Eigen::Index be = 0; be < d; ++be)
            for (Eigen::Index ga = 0; ga < d; ++ga)
                for (Eigen::Index de = 0; de < d; ++de) {
                    double v = (a(al, ga) * bt(be, de) - at(be, de) * b(al, ga)) +
                               (at(al, de) * b(be, ga) - a(be, ga) * bt(al, de));
                    out.max_abs_violation = std::max(out.max_abs_violation, std::abs(v));
                }
    return out;
}

}  // namespace phinv
