#include "phinv/collision.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <string>
#include <thread>

#include "phinv/error.hpp"

namespace phinv {

namespace {

void check_tolerance(double epsilon_e) {
    if (!(epsilon_e >= 0.0) || !std::isfinite(epsilon_e))
        throw ConfigError("energy tolerance must be finite and >= 0");
}

unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Integer coordinates of every grid point, row-major, d per point.
std::vector<int> coordinate_table(const GridSpec& grid) {
    std::vector<int> table(grid.size() * grid.dim());
    for (std::size_t i = 0; i < grid.size(); ++i)
        grid.multi_index(static_cast<PointIndex>(i),
                         std::span<int>(table.data() + i * grid.dim(), static_cast<std::size_t>(grid.dim())));
    return table;
}

// Runs body(i1, out) for every i1 and concatenates the per-i1 outputs in
// ascending i1 order, so the result does not depend on the thread count.
template <class Item, class Body>
std::vector<Item> run_partitioned(std::size_t points, unsigned threads, std::size_t cap, Body body) {
    std::vector<std::vector<Item>> slots(points);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> total{0};
    std::atomic<bool> overflow{false};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        try {
            for (;;) {
                if (overflow.load(std::memory_order_relaxed)) return;
                std::size_t i1 = next.fetch_add(1);
                if (i1 >= points) return;
                body(static_cast<PointIndex>(i1), slots[i1]);
                if (total.fetch_add(slots[i1].size()) + slots[i1].size() > cap) {
                    overflow = true;
                    return;
                }
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            overflow = true;
        }
    };

    unsigned n = std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(points, 1));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    if (overflow)
        throw CapacityExceeded("enumeration produced more than " + std::to_string(cap) + " collisions");

    std::vector<Item> out;
    out.reserve(total.load());
    for (auto& s : slots) out.insert(out.end(), s.begin(), s.end());
    return out;
}

}  // namespace

double default_energy_tolerance(const FourierDispersion& disp, const GridSpec& grid, double eps0) {
    double lipschitz = 0.0;
    std::vector<double> k(grid.dim());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.point(static_cast<PointIndex>(i), k);
        if (disp.omega(k) < eps0) continue;
        lipschitz = std::max(lipschitz, disp.gradient(k, eps0).cwiseAbs().maxCoeff());
    }
    double n = grid.n_per_axis();
    return lipschitz / (n * n);
}

QuadrupleSet enumerate_quadruples(const FourierDispersion& disp, const GridSpec& grid, double epsilon_e,
                                  const EnumerationOptions& opts) {
    return enumerate_quadruples(sample_grid(disp, grid), epsilon_e, opts);
}

QuadrupleSet enumerate_quadruples(const GridFunction& omega, double epsilon_e, const EnumerationOptions& opts) {
    check_tolerance(epsilon_e);
    const GridSpec& grid = omega.spec;
    const int d = grid.dim();
    const int n = grid.n_per_axis();
    const std::size_t points = grid.size();
    const std::vector<int> coords = coordinate_table(grid);
    const std::vector<double>& w = omega.values;

    auto body = [&](PointIndex i1, std::vector<CollisionQuadruple>& out) {
        const int* n1 = &coords[static_cast<std::size_t>(i1) * d];
        for (PointIndex i2 = i1; i2 < points; ++i2) {
            const int* n2 = &coords[static_cast<std::size_t>(i2) * d];
            // Canonical form forces i3 >= i1.
            for (PointIndex i3 = i1; i3 < points; ++i3) {
                const int* n3 = &coords[static_cast<std::size_t>(i3) * d];
                PointIndex i4 = 0;
                for (int j = 0; j < d; ++j) {
                    int c = (n1[j] + n2[j] - n3[j]) % n;
                    if (c < 0) c += n;
                    i4 = i4 * static_cast<PointIndex>(n) + static_cast<PointIndex>(c);
                }
                if (i4 < i3) continue;
                if (i3 == i1 && i4 <= i2) continue;  // trivial or non-canonical
                double r = w[i1] + w[i2] - w[i3] - w[i4];
                if (std::abs(r) <= epsilon_e) out.push_back({i1, i2, i3, i4, r});
            }
        }
    };
    QuadrupleSet qs{grid, epsilon_e, {}};
    qs.quads = run_partitioned<CollisionQuadruple>(points, opts.threads, opts.cap, body);
    return qs;
}

ConstraintMatrix::ConstraintMatrix(const QuadrupleSet& qs) : cols_(qs.grid.size()) {
    row_start_.reserve(qs.quads.size() + 1);
    row_start_.push_back(0);
    entries_.reserve(qs.quads.size() * 4);
    for (const auto& q : qs.quads) {
        std::array<Entry, 4> e{{{q.i1, 1.0}, {q.i2, 1.0}, {q.i3, -1.0}, {q.i4, -1.0}}};
        std::sort(e.begin(), e.end(), [](const Entry& a, const Entry& b) { return a.col < b.col; });
        std::size_t start = entries_.size();
        for (const Entry& x : e) {
            if (entries_.size() > start && entries_.back().col == x.col)
                entries_.back().value += x.value;
            else
                entries_.push_back(x);
        }
        entries_.erase(std::remove_if(entries_.begin() + static_cast<std::ptrdiff_t>(start), entries_.end(),
                                      [](const Entry& x) { return x.value == 0.0; }),
                       entries_.end());
        row_start_.push_back(entries_.size());
    }
}

std::vector<double> ConstraintMatrix::multiply(std::span<const double> x) const {
    if (x.size() != cols_) throw GridMismatch("vector length does not match constraint matrix columns");
    std::vector<double> y(rows());
    for (std::size_t r = 0; r < rows(); ++r) {
        double s = 0.0;
        for (const Entry& e : row(r)) s += e.value * x[e.col];
        y[r] = s;
    }
    return y;
}

ResidualStats residual_stats(const GridFunction& psi, const QuadrupleSet& qs) {
    if (!(psi.spec == qs.grid)) throw GridMismatch("candidate and quadruple set live on different grids");
    ResidualStats st;
    st.count = qs.quads.size();
    st.empty = qs.quads.empty();
    if (st.empty) return st;
    double sum_abs = 0.0, sum_sq = 0.0;
    for (const auto& q : qs.quads) {
        double r = psi[q.i1] + psi[q.i2] - psi[q.i3] - psi[q.i4];
        st.max_abs = std::max(st.max_abs, std::abs(r));
        sum_abs += std::abs(r);
        sum_sq += r * r;
    }
    st.mean_abs = sum_abs / static_cast<double>(st.count);
    st.rms = std::sqrt(sum_sq / static_cast<double>(st.count));
    return st;
}

TripleSet enumerate_3to1(const FourierDispersion& disp, const GridSpec& grid, double epsilon_e,
                         const EnumerationOptions& opts) {
    return enumerate_3to1(sample_grid(disp, grid), epsilon_e, opts);
}

TripleSet enumerate_3to1(const GridFunction& omega, double epsilon_e, const EnumerationOptions& opts) {
    check_tolerance(epsilon_e);
    const GridSpec& grid = omega.spec;
    // k1 + k2 + k3 - k4 = (n1 + n2 + n3 - n4 + 2·offset)/N - 1, so closure on
    // the grid needs 2·offset to be an integer.
    double twice = 2.0 * grid.offset();
    if (std::abs(twice - std::round(twice)) > 1e-12)
        throw ConfigError("3<->1 momentum closure needs grid offset 0 or 1/2");
    const int shift = static_cast<int>(std::round(twice));
    const int d = grid.dim();
    const int n = grid.n_per_axis();
    const std::size_t points = grid.size();
    const std::vector<int> coords = coordinate_table(grid);
    const std::vector<double>& w = omega.values;

    auto body = [&](PointIndex i1, std::vector<CollisionTriple>& out) {
        const int* n1 = &coords[static_cast<std::size_t>(i1) * d];
        for (PointIndex i2 = i1; i2 < points; ++i2) {
            const int* n2 = &coords[static_cast<std::size_t>(i2) * d];
            for (PointIndex i3 = i2; i3 < points; ++i3) {
                const int* n3 = &coords[static_cast<std::size_t>(i3) * d];
                PointIndex i4 = 0;
                for (int j = 0; j < d; ++j) {
                    int c = (n1[j] + n2[j] + n3[j] + shift) % n;
                    i4 = i4 * static_cast<PointIndex>(n) + static_cast<PointIndex>(c);
                }
                double r = w[i1] + w[i2] + w[i3] - w[i4];
                if (std::abs(r) <= epsilon_e) out.push_back({i1, i2, i3, i4, r});
            }
        }
    };
    TripleSet ts{grid, epsilon_e, {}};
    ts.triples = run_partitioned<CollisionTriple>(points, opts.threads, opts.cap, body);
    return ts;
}

ReductionStats check_nonconserving_reduction(const GridFunction& psi, const TripleSet& ts) {
    if (!(psi.spec == ts.grid)) throw GridMismatch("candidate and triple set live on different grids");
    ReductionStats st;
    st.count = ts.triples.size();
    st.empty = ts.triples.empty();
    if (st.empty) return st;
    double sum = 0.0;
    for (const auto& t : ts.triples) {
        double r = psi[t.i1] + psi[t.i2] + psi[t.i3] - psi[t.i4];
        sum += r;
        st.max_abs_residual = std::max(st.max_abs_residual, std::abs(r));
    }
    st.mean_residual = sum / static_cast<double>(st.count);
    return st;
}

}  // namespace phinv
