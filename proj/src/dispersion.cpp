#include "phinv/dispersion.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "phinv/error.hpp"

namespace phinv {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<int> negated(const std::vector<int>& n) {
    std::vector<int> m(n.size());
    std::transform(n.begin(), n.end(), m.begin(), [](int x) { return -x; });
    return m;
}

bool is_zero(const std::vector<int>& n) {
    return std::all_of(n.begin(), n.end(), [](int x) { return x == 0; });
}

std::string format_vector(const std::vector<int>& n) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < n.size(); ++i) os << (i ? "," : "") << n[i];
    os << ']';
    return os.str();
}

// Fractional part in [-1/2, 1/2). Shifting k by an integer that is exactly
// representable alongside k leaves the result bit-identical.
double reduce_cell(double x) { return x - std::floor(x + 0.5); }

}  // namespace

FourierDispersion::FourierDispersion(int dim, Coefficients coeffs) : dim_(dim), coeffs_(std::move(coeffs)) {
    if (dim < 1) throw InvalidDispersion("dispersion dimension must be >= 1");
    for (const auto& [n, g] : coeffs_) {
        if (static_cast<int>(n.size()) != dim)
            throw InvalidDispersion("coefficient " + format_vector(n) + " has wrong dimension");
        if (!std::isfinite(g)) throw InvalidDispersion("coefficient " + format_vector(n) + " is not finite");
        auto it = coeffs_.find(negated(n));
        if (it == coeffs_.end())
            throw InvalidDispersion("coefficient " + format_vector(n) + " has no partner -n");
        if (std::abs(it->second - g) > kNegativeTolerance)
            throw InvalidDispersion("coefficient " + format_vector(n) + " is not symmetric under n -> -n");
    }
    for (const auto& [n, g] : coeffs_) {
        if (is_zero(n)) {
            constant_ = g;
            continue;
        }
        // Keep one representative per ±n pair: the lexicographically larger.
        if (n < negated(n)) continue;
        Term t;
        t.n.assign(n.begin(), n.end());
        t.weight = 2.0 * g;
        pairs_.push_back(std::move(t));
    }

    // Validation lattice including k = 0 and the zone boundary.
    int per_axis = std::clamp(static_cast<int>(std::pow(65536.0, 1.0 / dim)), 2, 32);
    std::size_t total = 1;
    for (int j = 0; j < dim; ++j) total *= static_cast<std::size_t>(per_axis);
    std::vector<double> k(dim);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t r = idx;
        for (int j = dim - 1; j >= 0; --j) {
            k[j] = static_cast<double>(r % per_axis) / per_axis;
            r /= per_axis;
        }
        omega_squared(k);
    }
}

double FourierDispersion::clamp_square(double w2, std::span<const double> k) const {
    if (w2 >= 0.0) return w2;
    if (w2 >= -kNegativeTolerance) return 0.0;
    std::ostringstream os;
    os << "omega^2 = " << w2 << " < 0 at k = (";
    for (std::size_t j = 0; j < k.size(); ++j) os << (j ? "," : "") << k[j];
    os << ')';
    throw InvalidDispersion(os.str());
}

double FourierDispersion::omega_squared(std::span<const double> k) const {
    if (static_cast<int>(k.size()) != dim_) throw InvalidDispersion("wave vector has wrong dimension");
    double sum = constant_;
    for (const Term& t : pairs_) {
        double phase = 0.0;
        for (int j = 0; j < dim_; ++j) phase += reduce_cell(k[j]) * t.n[j];
        sum += t.weight * std::cos(kTwoPi * phase);
    }
    return clamp_square(sum, k);
}

double FourierDispersion::omega(std::span<const double> k) const { return std::sqrt(omega_squared(k)); }

FourierDispersion::SquareJet FourierDispersion::square_jet(std::span<const double> k) const {
    if (static_cast<int>(k.size()) != dim_) throw InvalidDispersion("wave vector has wrong dimension");
    SquareJet jet{constant_, Eigen::VectorXd::Zero(dim_), Eigen::MatrixXd::Zero(dim_, dim_)};
    std::vector<double> red(dim_);
    for (int j = 0; j < dim_; ++j) red[j] = reduce_cell(k[j]);
    for (const Term& t : pairs_) {
        double phase = 0.0;
        for (int j = 0; j < dim_; ++j) phase += red[j] * t.n[j];
        double c = std::cos(kTwoPi * phase);
        double s = std::sin(kTwoPi * phase);
        jet.value += t.weight * c;
        for (int a = 0; a < dim_; ++a) {
            jet.grad(a) -= t.weight * s * kTwoPi * t.n[a];
            for (int b = 0; b < dim_; ++b) jet.hess(a, b) -= t.weight * c * kTwoPi * kTwoPi * t.n[a] * t.n[b];
        }
    }
    jet.value = clamp_square(jet.value, k);
    return jet;
}

namespace {

void require_regular(double w, double eps0, std::span<const double> k) {
    if (w >= eps0) return;
    std::ostringstream os;
    os << "omega = " << w << " < eps0 = " << eps0 << " at k = (";
    for (std::size_t j = 0; j < k.size(); ++j) os << (j ? "," : "") << k[j];
    os << ')';
    throw NearSingularSet(os.str());
}

}  // namespace

Eigen::VectorXd FourierDispersion::gradient(std::span<const double> k, double eps0) const {
    SquareJet jet = square_jet(k);
    double w = std::sqrt(jet.value);
    require_regular(w, eps0, k);
    return jet.grad / (2.0 * w);
}

Eigen::MatrixXd FourierDispersion::hessian(std::span<const double> k, double eps0) const {
    SquareJet jet = square_jet(k);
    double w = std::sqrt(jet.value);
    require_regular(w, eps0, k);
    Eigen::MatrixXd h = jet.hess / (2.0 * w) - (jet.grad * jet.grad.transpose()) / (4.0 * w * w * w);
    Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
    return sym;
}

double FourierDispersion::hessian_determinant(std::span<const double> k, double eps0) const {
    return hessian(k, eps0).determinant();
}

FourierDispersion make_nn(int dim) {
    FourierDispersion::Coefficients c;
    c[std::vector<int>(dim, 0)] = 2.0 * dim;
    for (int j = 0; j < dim; ++j) {
        std::vector<int> e(dim, 0);
        e[j] = 1;
        c[e] = -1.0;
        e[j] = -1;
        c[e] = -1.0;
    }
    return FourierDispersion(dim, std::move(c));
}

FourierDispersion make_nn_gap(int dim, double mass) {
    if (!std::isfinite(mass)) throw InvalidDispersion("gap must be finite");
    FourierDispersion::Coefficients c = make_nn(dim).coefficients();
    c[std::vector<int>(dim, 0)] += mass * mass;
    return FourierDispersion(dim, std::move(c));
}

FourierDispersion make_constant(int dim, double value) {
    if (!(value >= 0.0) || !std::isfinite(value)) throw InvalidDispersion("constant dispersion must be >= 0");
    FourierDispersion::Coefficients c;
    c[std::vector<int>(dim, 0)] = value * value;
    return FourierDispersion(dim, std::move(c));
}

FourierDispersion parse_dispersion_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidDispersion(std::string("coefficient file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw InvalidDispersion("coefficient file must hold a JSON object");
    for (auto it = doc.begin(); it != doc.end(); ++it)
        if (it.key() != "dim" && it.key() != "coeffs")
            throw InvalidDispersion("unknown key \"" + it.key() + "\" in coefficient file");
    if (!doc.contains("dim") || !doc["dim"].is_number_integer())
        throw InvalidDispersion("coefficient file needs an integer \"dim\"");
    int dim = doc["dim"].get<int>();
    if (dim < 1) throw InvalidDispersion("\"dim\" must be >= 1");
    if (!doc.contains("coeffs") || !doc["coeffs"].is_array())
        throw InvalidDispersion("coefficient file needs a \"coeffs\" array");

    FourierDispersion::Coefficients coeffs;
    const auto& list = doc["coeffs"];
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& entry = list[i];
        std::string where = "coeffs[" + std::to_string(i) + "]";
        if (!entry.is_object() || !entry.contains("n") || !entry.contains("gamma"))
            throw InvalidDispersion(where + ": expected {\"n\": [...], \"gamma\": x}");
        const auto& n = entry["n"];
        if (!n.is_array() || n.size() != static_cast<std::size_t>(dim))
            throw InvalidDispersion(where + ": \"n\" must be an array of " + std::to_string(dim) + " integers");
        std::vector<int> key;
        for (const auto& x : n) {
            if (!x.is_number_integer()) throw InvalidDispersion(where + ": \"n\" entries must be integers");
            key.push_back(x.get<int>());
        }
        if (!entry["gamma"].is_number()) throw InvalidDispersion(where + ": \"gamma\" must be a number");
        double g = entry["gamma"].get<double>();
        if (!std::isfinite(g)) throw InvalidDispersion(where + ": \"gamma\" is not finite");
        auto [it, inserted] = coeffs.emplace(key, g);
        if (!inserted && std::abs(it->second - g) > kNegativeTolerance)
            throw InvalidDispersion(where + ": duplicate n " + format_vector(key) + " with a different gamma");
    }
    // Symmetrize: insert missing partners, reject conflicting ones.
    FourierDispersion::Coefficients sym = coeffs;
    for (const auto& [n, g] : coeffs) {
        auto m = negated(n);
        auto it = coeffs.find(m);
        if (it == coeffs.end()) {
            sym[m] = g;
        } else if (std::abs(it->second - g) > kNegativeTolerance) {
            throw InvalidDispersion("gamma(" + format_vector(n) + ") = " + std::to_string(g) + " conflicts with gamma(" +
                                    format_vector(m) + ") = " + std::to_string(it->second));
        }
    }
    return FourierDispersion(dim, std::move(sym));
}

FourierDispersion load_dispersion_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidDispersion("cannot open coefficient file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_dispersion_json(ss.str());
    } catch (const InvalidDispersion& e) {
        throw InvalidDispersion(path + ": " + e.what());
    }
}

FourierDispersion make_model(const std::string& name, int dim) {
    static const std::regex gap_re(R"(^nn-gap\(([^)]+)\)$)");
    static const std::regex const_re(R"(^constant\(([^)]+)\)$)");
    auto number = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != s.size()) throw InvalidDispersion("bad numeric parameter in model \"" + name + "\"");
        return v;
    };
    std::smatch m;
    if (name == "nn") return make_nn(dim);
    if (std::regex_match(name, m, gap_re)) return make_nn_gap(dim, number(m[1].str()));
    if (name == "constant") return make_constant(dim, 1.0);
    if (std::regex_match(name, m, const_re)) return make_constant(dim, number(m[1].str()));
    if (!std::filesystem::exists(name)) throw InvalidDispersion("unknown model \"" + name + "\" (not a built-in, no such file)");
    FourierDispersion d = load_dispersion_file(name);
    if (dim > 0 && d.dim() != dim)
        throw InvalidDispersion(name + ": file has dim " + std::to_string(d.dim()) + " but " + std::to_string(dim) +
                                " was requested");
    return d;
}

GridFunction sample_grid(const FourierDispersion& disp, const GridSpec& grid) {
    if (disp.dim() != grid.dim()) throw GridMismatch("dispersion and grid dimensions differ");
    std::vector<double> values(grid.size());
    std::vector<double> k(grid.dim());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.point(static_cast<PointIndex>(i), k);
        values[i] = disp.omega(k);
    }
    return GridFunction(grid, std::move(values));
}

std::vector<double> hessian_determinants(const FourierDispersion& disp, const GridSpec& grid, double eps0) {
    if (disp.dim() != grid.dim()) throw GridMismatch("dispersion and grid dimensions differ");
    std::vector<double> out(grid.size());
    std::vector<double> k(grid.dim());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.point(static_cast<PointIndex>(i), k);
        if (disp.omega(k) < eps0) {
            out[i] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        out[i] = disp.hessian_determinant(k, eps0);
    }
    return out;
}

DegeneracyProfile degeneracy_profile(const FourierDispersion& disp, const GridSpec& grid,
                                     std::span<const double> deltas, double eps0) {
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        if (!(deltas[i] > 0.0)) throw ConfigError("degeneracy thresholds must be positive");
        if (i > 0 && !(deltas[i] > deltas[i - 1])) throw ConfigError("degeneracy thresholds must be ascending");
    }
    std::vector<double> dets = hessian_determinants(disp, grid, eps0);
    std::size_t excluded = 0;
    std::vector<double> kept;
    kept.reserve(dets.size());
    for (double d : dets) {
        if (std::isnan(d))
            ++excluded;
        else
            kept.push_back(std::abs(d));
    }
    std::sort(kept.begin(), kept.end());

    DegeneracyProfile profile;
    profile.deltas.assign(deltas.begin(), deltas.end());
    profile.excluded_fraction = static_cast<double>(excluded) / static_cast<double>(dets.size());
    for (double delta : deltas) {
        auto below = std::lower_bound(kept.begin(), kept.end(), delta) - kept.begin();
        profile.fractions.push_back(kept.empty() ? 0.0 : static_cast<double>(below) / static_cast<double>(kept.size()));
    }
    return profile;
}

}  // namespace phinv
