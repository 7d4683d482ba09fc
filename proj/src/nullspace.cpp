#include "phinv/nullspace.hpp"

#include <Eigen/SVD>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "phinv/error.hpp"

namespace phinv {

namespace {

constexpr std::size_t kRowBlock = 2048;

// Upper-triangular R with MᵀM = RᵀR, accumulated over row blocks so the
// dense matrix is never held at once.
Eigen::MatrixXd triangular_factor(const ConstraintMatrix& m) {
    const Eigen::Index cols = static_cast<Eigen::Index>(m.cols());
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(0, cols);
    for (std::size_t start = 0; start < m.rows(); start += kRowBlock) {
        std::size_t end = std::min(m.rows(), start + kRowBlock);
        Eigen::Index height = static_cast<Eigen::Index>(end - start);
        Eigen::MatrixXd stack = Eigen::MatrixXd::Zero(r.rows() + height, cols);
        stack.topRows(r.rows()) = r;
        for (std::size_t row = start; row < end; ++row)
            for (const auto& e : m.row(row))
                stack(r.rows() + static_cast<Eigen::Index>(row - start), e.col) = e.value;
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(stack);
        Eigen::Index keep = std::min(stack.rows(), cols);
        r = qr.matrixQR().topRows(keep).triangularView<Eigen::Upper>();
    }
    return r;
}

InvariantBasis dense_basis(const ConstraintMatrix& m, double sigma_tol) {
    Eigen::MatrixXd r = triangular_factor(m);
    const Eigen::Index cols = static_cast<Eigen::Index>(m.cols());
    if (r.rows() < cols) {
        Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(cols, cols);
        padded.topRows(r.rows()) = r;
        r = std::move(padded);
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullV);
    const Eigen::VectorXd& s = svd.singularValues();  // descending
    const Eigen::MatrixXd& v = svd.matrixV();

    InvariantBasis out;
    out.sigma_tol = sigma_tol;
    out.singular_values.resize(static_cast<std::size_t>(cols));
    for (Eigen::Index i = 0; i < cols; ++i) out.singular_values[static_cast<std::size_t>(i)] = s(cols - 1 - i);
    std::size_t dim = invariant_dimension(out.singular_values, sigma_tol).dimension;
    out.vectors.resize(cols, static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) out.vectors.col(static_cast<Eigen::Index>(i)) = v.col(cols - 1 - static_cast<Eigen::Index>(i));
    return out;
}

Eigen::SparseMatrix<double> to_sparse(const ConstraintMatrix& m) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(m.nonzeros());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (const auto& e : m.row(r)) trip.emplace_back(static_cast<int>(r), static_cast<int>(e.col), e.value);
    Eigen::SparseMatrix<double> s(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
    s.setFromTriplets(trip.begin(), trip.end());
    return s;
}

// Uniform doubles in [-1, 1) from the raw engine output, identical on every
// platform (std::uniform_real_distribution is not).
void fill_random(Eigen::Ref<Eigen::MatrixXd> x, std::mt19937_64& rng) {
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            x(i, j) = 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0;
}

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& y) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
    return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

// Block inverse iteration on MᵀM + μI with Rayleigh-Ritz on MᵀM.
InvariantBasis iterative_basis(const ConstraintMatrix& m, const NullspaceOptions& opts) {
    const Eigen::Index n = static_cast<Eigen::Index>(m.cols());
    Eigen::SparseMatrix<double> a = to_sparse(m);
    Eigen::SparseMatrix<double> gram = (a.transpose() * a).pruned();
    double scale = 0.0;
    for (int k = 0; k < gram.outerSize(); ++k) {
        double col = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(gram, k); it; ++it) col += std::abs(it.value());
        scale = std::max(scale, col);
    }
    if (scale == 0.0) scale = 1.0;
    const double shift = 1e-10 * scale;
    Eigen::SparseMatrix<double> shifted = gram;
    for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) += shift;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(shifted);
    if (solver.info() != Eigen::Success) throw ConvergenceFailure("factorization of the shifted Gram matrix failed");

    const double tol2 = opts.sigma_tol * opts.sigma_tol;
    const double residual_tol = 1e-11 * scale;
    std::mt19937_64 rng(opts.seed);
    Eigen::Index block = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(std::max<std::size_t>(opts.block, 2)));
    Eigen::MatrixXd x(n, block);
    fill_random(x, rng);
    x = orthonormalize(x);

    for (int it = 1; it <= opts.max_iterations; ++it) {
        Eigen::MatrixXd y = solver.solve(x);
        if (solver.info() != Eigen::Success) throw ConvergenceFailure("sparse solve failed");
        Eigen::MatrixXd q = orthonormalize(y);
        Eigen::MatrixXd gq = gram * q;
        Eigen::MatrixXd t = q.transpose() * gq;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (t + t.transpose()));
        x = q * eig.eigenvectors();
        Eigen::MatrixXd gx = gq * eig.eigenvectors();
        const Eigen::VectorXd& theta = eig.eigenvalues();

        Eigen::Index below = 0;
        while (below < block && theta(below) <= tol2) ++below;
        // Vectors below the cut plus the first one above it must be converged.
        Eigen::Index needed = std::min(block, below + 1);
        bool converged = true;
        for (Eigen::Index i = 0; i < needed && converged; ++i)
            converged = (gx.col(i) - theta(i) * x.col(i)).norm() <= residual_tol;
        if (!converged) continue;

        if (below == block && block < n) {
            Eigen::Index grown = std::min<Eigen::Index>(n, 2 * block);
            Eigen::MatrixXd wider(n, grown);
            wider.leftCols(block) = x;
            fill_random(wider.rightCols(grown - block), rng);
            x = orthonormalize(wider);
            block = grown;
            continue;
        }

        InvariantBasis out;
        out.sigma_tol = opts.sigma_tol;
        out.iterative = true;
        out.iterations = it;
        std::vector<double> sigma(static_cast<std::size_t>(needed));
        for (Eigen::Index i = 0; i < needed; ++i) {
            Eigen::VectorXd col = x.col(i);
            std::vector<double> mx = m.multiply(std::span<const double>(col.data(), static_cast<std::size_t>(n)));
            double s = 0.0;
            for (double v : mx) s += v * v;
            sigma[static_cast<std::size_t>(i)] = std::sqrt(s);
        }
        out.singular_values = sigma;
        std::size_t dim = invariant_dimension(out.singular_values, opts.sigma_tol).dimension;
        out.vectors = x.leftCols(static_cast<Eigen::Index>(dim));
        return out;
    }
    throw ConvergenceFailure("inverse iteration did not converge in " + std::to_string(opts.max_iterations) +
                             " iterations");
}

}  // namespace

double default_sigma_tol(const ConstraintMatrix& m, const GridFunction& omega, double epsilon_e) {
    double mean = 0.0;
    for (double v : omega.values) mean += v;
    mean /= static_cast<double>(omega.size());
    double norm = 0.0;
    for (double v : omega.values) norm += (v - mean) * (v - mean);
    norm = std::sqrt(norm);
    double bound = 4.0 * epsilon_e * std::sqrt(static_cast<double>(m.rows()));
    double scale = 0.0;
    for (double v : omega.values) scale = std::max(scale, std::abs(v));
    if (norm <= 1e-12 * std::max(scale, 1.0) * std::sqrt(static_cast<double>(omega.size()))) return bound;
    return bound / norm;
}

InvariantBasis compute_invariant_basis(const ConstraintMatrix& m, const NullspaceOptions& opts) {
    if (m.rows() == 0)
        throw EmptyConstraintSet("constraint matrix has no rows: every grid function is invariant");
    if (!(opts.sigma_tol >= 0.0)) throw ConfigError("sigma_tol must be >= 0");
    if (m.cols() <= opts.dense_cap) return dense_basis(m, opts.sigma_tol);
    return iterative_basis(m, opts);
}

InvariantDimension invariant_dimension(std::span<const double> values, double sigma_tol) {
    InvariantDimension out;
    while (out.dimension < values.size() && values[out.dimension] <= sigma_tol) ++out.dimension;
    if (out.dimension > 0 && out.dimension < values.size()) {
        double lo = values[out.dimension - 1];
        double hi = values[out.dimension];
        out.gap_ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    }
    return out;
}

SubspaceComparison compare_to_affine_span(const InvariantBasis& basis, const GridFunction& omega) {
    const Eigen::Index n = static_cast<Eigen::Index>(omega.size());
    if (basis.vectors.rows() != n && basis.dimension() > 0)
        throw GridMismatch("basis vectors and omega samples differ in length");

    Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(omega.values.data(), n);
    Eigen::VectorXd w_perp = w - Eigen::VectorXd::Constant(n, w.mean());

    SubspaceComparison out;
    out.dimension = basis.dimension();
    out.degenerate_span = w_perp.norm() <= 1e-12 * std::max(w.norm(), 1.0);
    out.reference_dimension = out.degenerate_span ? 1 : 2;

    Eigen::MatrixXd ref(n, static_cast<Eigen::Index>(out.reference_dimension));
    ref.col(0) = ones / std::sqrt(static_cast<double>(n));
    if (!out.degenerate_span) ref.col(1) = w_perp.normalized();

    if (out.dimension == 0) return out;
    const Eigen::MatrixXd& q = basis.vectors;
    auto captured = [&](const Eigen::VectorXd& v) {
        double total = v.squaredNorm();
        if (total == 0.0) return 0.0;
        return std::clamp((q.transpose() * v).squaredNorm() / total, 0.0, 1.0);
    };
    out.contains_constant = captured(ones);
    out.contains_omega = captured(w);
    out.contains_omega_perp = out.degenerate_span ? 0.0 : captured(w_perp);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(q.transpose() * ref);
    const Eigen::VectorXd& cosines = svd.singularValues();  // descending
    for (Eigen::Index i = 0; i < cosines.size(); ++i)
        out.principal_angles.push_back(std::acos(std::clamp(cosines(i), 0.0, 1.0)));
    std::sort(out.principal_angles.begin(), out.principal_angles.end());
    return out;
}

}  // namespace phinv
