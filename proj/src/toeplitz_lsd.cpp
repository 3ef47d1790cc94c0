#include "specmp/toeplitz_lsd.hpp"

#include "specmp/errors.hpp"
#include "specmp/parallel.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace specmp {

namespace {

constexpr double kPi = kTwoPi / 2;

bool same_sign(double a, double b) { return (a < 0.0) == (b < 0.0); }

// Nudges the last weight until left-to-right summation gives exactly 1.
void normalize_exactly(std::vector<LsdAtom>& atoms) {
    for (int attempt = 0; attempt < 64; ++attempt) {
        double sum = 0.0;
        for (const auto& a : atoms) sum += a.weight;
        if (sum == 1.0) return;
        atoms.back().weight += 1.0 - sum;
    }
    double sum = 0.0;
    for (const auto& a : atoms) sum += a.weight;
    for (int attempt = 0; attempt < 8 && sum != 1.0; ++attempt) {
        atoms.back().weight = std::nextafter(atoms.back().weight, sum < 1.0 ? 2.0 : 0.0);
        sum = 0.0;
        for (const auto& a : atoms) sum += a.weight;
    }
}

// 16-point Gauss-Legendre rule on [-1, 1].
struct GaussRule {
    std::array<double, 16> nodes{};
    std::array<double, 16> weights{};

    GaussRule() {
        using Rule = boost::math::quadrature::gauss<double, 16>;
        const auto& x = Rule::abscissa();
        const auto& w = Rule::weights();
        for (std::size_t k = 0; k < 8; ++k) {
            nodes[7 - k] = -x[k];
            weights[7 - k] = w[k];
            nodes[8 + k] = x[k];
            weights[8 + k] = w[k];
        }
    }
};

const GaussRule& gauss_rule() {
    static const GaussRule rule;
    return rule;
}

}  // namespace

bool SupportBounds::degenerate() const noexcept {
    return upper - lower <= 1e-12 * std::max(1.0, std::abs(upper));
}

LevelSetFinder::LevelSetFinder(SpectralDensity f, LevelSetOptions options)
    : f_(std::move(f)), options_(options) {
    if (f_.kind() == SpectralDensity::Kind::kPiecewiseConstant) {
        throw ValidationError("level-set analysis needs a differentiable spectral density");
    }
    if (options_.initial_grid < 16 || options_.max_grid < options_.initial_grid) {
        throw ValidationError("invalid level-set grid options");
    }
    coarse_ = sample(options_.initial_grid);
    fine_ = sample(2 * options_.initial_grid);
    for (double s : fine_.slope) max_slope_ = std::max(max_slope_, std::abs(s));

    // Global extrema: grid scan, then Brent refinement around the best node.
    const auto& v = fine_.value;
    const auto n = fine_.omega.size() - 1;
    const auto imin = static_cast<std::size_t>(std::min_element(v.begin(), v.end() - 1) - v.begin());
    const auto imax = static_cast<std::size_t>(std::max_element(v.begin(), v.end() - 1) - v.begin());
    const double h = kTwoPi / static_cast<double>(n);
    auto refine = [&](std::size_t idx, double sign) {
        const double w0 = fine_.omega[idx];
        auto objective = [&](double w) { return sign * f_.value(w); };
        const auto [wbest, fbest] = boost::math::tools::brent_find_minima(objective, w0 - h, w0 + h, 52);
        if (fbest < sign * v[idx]) return std::pair{wbest, sign * fbest};
        return std::pair{w0, v[idx]};
    };
    const auto [wmin, fmin] = refine(imin, 1.0);
    const auto [wmax, fmax] = refine(imax, -1.0);
    support_ = {fmin, fmax, std::fmod(wmin + kTwoPi, kTwoPi), std::fmod(wmax + kTwoPi, kTwoPi)};

    if (!support_.degenerate()) {
        const double edge_tol = 1e-10 * std::max(1.0, support_.upper);
        auto record = [&](double value) {
            if (value > support_.lower + edge_tol && value < support_.upper - edge_tol) critical_.push_back(value);
        };
        const auto& slope = fine_.slope;
        for (std::size_t k = 0; k < n; ++k) {
            const double s0 = slope[k], s1 = slope[k + 1];
            if (s0 == 0.0) {
                // Extremum exactly on a node; even densities always have them at 0 and pi.
                const double before = slope[(k + n - 1) % n];
                if (before != 0.0 && s1 != 0.0 && !same_sign(before, s1)) record(fine_.value[k]);
                continue;
            }
            if (s1 == 0.0 || same_sign(s0, s1)) continue;
            record(f_.value(bisect_slope(fine_.omega[k], fine_.omega[k + 1])));
        }
        std::sort(critical_.begin(), critical_.end());
        critical_.erase(std::unique(critical_.begin(), critical_.end(),
                                    [&](double a, double b) { return b - a <= edge_tol; }),
                        critical_.end());
    }
}

LevelSetFinder::Grid LevelSetFinder::sample(int n) const {
    Grid g;
    const auto size = static_cast<std::size_t>(n) + 1;
    g.omega.resize(size);
    g.value.resize(size);
    g.slope.resize(size);
    for (std::size_t k = 0; k < size; ++k) {
        g.omega[k] = kTwoPi * static_cast<double>(k) / static_cast<double>(n);
    }
    for (std::size_t k = 0; k + 1 < size; ++k) {
        g.value[k] = f_.value(g.omega[k]);
        g.slope[k] = f_.derivative(g.omega[k]);
    }
    g.value[size - 1] = g.value[0];
    g.slope[size - 1] = g.slope[0];
    return g;
}

double LevelSetFinder::bisect_value(double a, double b, double lambda) const {
    const double sa = f_.value(a) - lambda;
    while (b - a > options_.bisection_tol) {
        const double mid = 0.5 * (a + b);
        if (mid <= a || mid >= b) break;
        const double sm = f_.value(mid) - lambda;
        if (sm == 0.0) return mid;
        if (same_sign(sm, sa)) {
            a = mid;
        } else {
            b = mid;
        }
    }
    return 0.5 * (a + b);
}

double LevelSetFinder::bisect_slope(double a, double b) const {
    const double sa = f_.derivative(a);
    while (b - a > options_.bisection_tol) {
        const double mid = 0.5 * (a + b);
        if (mid <= a || mid >= b) break;
        const double sm = f_.derivative(mid);
        if (sm == 0.0) return mid;
        if (same_sign(sm, sa)) {
            a = mid;
        } else {
            b = mid;
        }
    }
    return 0.5 * (a + b);
}

std::vector<LevelSetFinder::Root> LevelSetFinder::scan(const Grid& grid, double lambda) const {
    std::vector<double> found;
    std::vector<bool> touch;
    const double touch_tol = 1e-12 * std::max(1.0, std::abs(lambda));
    const std::size_t cells = grid.omega.size() - 1;
    for (std::size_t k = 0; k < cells; ++k) {
        const double a = grid.omega[k], b = grid.omega[k + 1];
        const double sa = grid.value[k] - lambda, sb = grid.value[k + 1] - lambda;
        if (sa == 0.0) {
            found.push_back(a);
            touch.push_back(false);
        } else if (sb == 0.0) {
            continue;  // picked up as the left node of the next cell
        } else if (!same_sign(sa, sb)) {
            found.push_back(bisect_value(a, b, lambda));
            touch.push_back(false);
        } else {
            const double d0 = grid.slope[k], d1 = grid.slope[k + 1];
            if (d0 == 0.0 || d1 == 0.0 || same_sign(d0, d1)) continue;
            // A local extremum inside the cell may touch or cross lambda twice.
            const double e = bisect_slope(a, b);
            const double se = f_.value(e) - lambda;
            if (std::abs(se) <= touch_tol) {
                found.push_back(e);
                touch.push_back(true);
            } else if (!same_sign(se, sa)) {
                found.push_back(bisect_value(a, e, lambda));
                touch.push_back(false);
                found.push_back(bisect_value(e, b, lambda));
                touch.push_back(false);
            }
        }
    }
    std::vector<Root> roots;
    roots.reserve(found.size());
    for (std::size_t i = 0; i < found.size(); ++i) {
        double w = found[i];
        if (w >= kTwoPi) w -= kTwoPi;
        const bool flat = touch[i] || std::abs(f_.derivative(w)) < options_.tangential_tol;
        roots.push_back({w, flat});
    }
    std::sort(roots.begin(), roots.end(), [](const Root& x, const Root& y) { return x.omega < y.omega; });
    constexpr double kMerge = 1e-10;
    std::vector<Root> unique;
    for (const auto& r : roots) {
        if (!unique.empty() && r.omega - unique.back().omega <= kMerge) {
            unique.back().tangential = unique.back().tangential || r.tangential;
            continue;
        }
        unique.push_back(r);
    }
    if (unique.size() > 1 && unique.front().omega + kTwoPi - unique.back().omega <= kMerge) {
        unique.front().tangential = unique.front().tangential || unique.back().tangential;
        unique.pop_back();
    }
    return unique;
}

LevelSet LevelSetFinder::roots(double lambda) const {
    auto previous = scan(coarse_, lambda);
    auto current = scan(fine_, lambda);
    int n = 2 * options_.initial_grid;
    while (current.size() != previous.size() && n < options_.max_grid) {
        n *= 2;
        previous = std::move(current);
        current = scan(sample(n), lambda);
    }
    LevelSet set;
    set.lambda = lambda;
    set.tolerance = options_.bisection_tol * max_slope_ + 1e-12 * std::max(1.0, std::abs(lambda));
    for (const auto& r : current) {
        set.roots.push_back(r.omega);
        set.tangential.push_back(r.tangential);
    }
    return set;
}

GammaDensityValue LevelSetFinder::gamma_density(double lambda) const {
    if (support_.degenerate()) {
        throw ValidationError("constant spectral density: the Toeplitz LSD is a single atom");
    }
    if (!(lambda > support_.lower && lambda < support_.upper)) {
        std::ostringstream msg;
        msg << "lambda = " << lambda << " is outside the open support (" << support_.lower << ", "
            << support_.upper << ")";
        throw ValidationError(msg.str());
    }
    const auto set = roots(lambda);
    GammaDensityValue out;
    double sum = 0.0;
    for (std::size_t i = 0; i < set.roots.size(); ++i) {
        if (set.tangential[i]) {
            out.singular = true;
            continue;
        }
        sum += 1.0 / std::abs(f_.derivative(set.roots[i]));
    }
    out.value = sum / kTwoPi;
    return out;
}

double LevelSetFinder::gamma_cdf(double lambda) const {
    if (lambda < support_.lower) return 0.0;
    if (lambda >= support_.upper) return 1.0;
    const auto set = roots(lambda);
    const auto& r = set.roots;
    if (r.empty()) return f_.value(0.0) <= lambda ? 1.0 : 0.0;
    double measure = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double a = r[i];
        const double b = i + 1 < r.size() ? r[i + 1] : r.front() + kTwoPi;
        if (f_.value(0.5 * (a + b)) <= lambda) measure += b - a;
    }
    return std::clamp(measure / kTwoPi, 0.0, 1.0);
}

SupportBounds support_bounds(const SpectralDensity& f) {
    if (const auto* pw = f.piecewise()) {
        SupportBounds b{pw->pieces().front().alpha, pw->pieces().front().alpha, 0.0, 0.0};
        for (const auto& p : pw->pieces()) {
            if (p.alpha < b.lower) b = {p.alpha, b.upper, p.lo, b.argmax};
            if (p.alpha > b.upper) b = {b.lower, p.alpha, b.argmin, p.lo};
        }
        return b;
    }
    return LevelSetFinder(f).support();
}

LevelSet level_set_roots(const SpectralDensity& f, double lambda, const LevelSetOptions& options) {
    return LevelSetFinder(f, options).roots(lambda);
}

GammaDensityValue gamma_density(const SpectralDensity& f, double lambda) {
    if (f.piecewise()) throw ValidationError("piecewise densities have an atomic Toeplitz LSD");
    return LevelSetFinder(f).gamma_density(lambda);
}

double gamma_cdf(const SpectralDensity& f, double lambda) {
    if (const auto* pw = f.piecewise()) {
        double total = 0.0;
        for (const auto& atom : atomic_lsd(*pw).atoms()) {
            if (atom.level <= lambda) total += atom.weight;
        }
        return total;
    }
    return LevelSetFinder(f).gamma_cdf(lambda);
}

GammaLsd GammaLsd::atomic(std::vector<LsdAtom> atoms) {
    if (atoms.empty()) throw ValidationError("atomic LSD needs at least one atom");
    for (const auto& a : atoms) {
        if (!(a.level > 0.0) || !std::isfinite(a.level)) throw ValidationError("atom levels must be positive");
        if (!(a.weight > 0.0)) throw ValidationError("atom weights must be positive");
    }
    std::stable_sort(atoms.begin(), atoms.end(),
                     [](const LsdAtom& x, const LsdAtom& y) { return x.level < y.level; });
    std::vector<LsdAtom> merged;
    for (const auto& a : atoms) {
        if (!merged.empty() && merged.back().level == a.level) {
            merged.back().weight += a.weight;
        } else {
            merged.push_back(a);
        }
    }
    double total = 0.0;
    for (const auto& a : merged) total += a.weight;
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("atom weights must sum to one");
    for (auto& a : merged) a.weight /= total;
    normalize_exactly(merged);

    GammaLsd lsd;
    lsd.kind_ = Kind::kAtomic;
    lsd.lower_ = merged.front().level;
    lsd.upper_ = merged.back().level;
    lsd.nodes_ = std::move(merged);
    return lsd;
}

GammaLsd GammaLsd::absolutely_continuous(std::function<double(double)> density, double lower,
                                         double upper, std::vector<double> breakpoints,
                                         const QuadratureOptions& options) {
    if (!(upper > lower) || !std::isfinite(lower) || !std::isfinite(upper)) {
        throw ValidationError("absolutely continuous LSD needs a finite support with upper > lower");
    }
    if (options.min_panels < 1 || options.max_panels < options.min_panels) {
        throw ValidationError("invalid quadrature options");
    }
    std::vector<double> edges{lower};
    std::sort(breakpoints.begin(), breakpoints.end());
    for (double b : breakpoints) {
        if (b > edges.back() && b < upper) edges.push_back(b);
    }
    edges.push_back(upper);

    const auto& rule = gauss_rule();
    auto build = [&](int panels) {
        std::vector<LsdAtom> nodes;
        nodes.reserve((edges.size() - 1) * static_cast<std::size_t>(panels) * 16);
        std::vector<double> jacobian;
        const double du = (kPi / 2) / panels;
        for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
            const double a = edges[s], width = edges[s + 1] - a;
            for (int p = 0; p < panels; ++p) {
                const double u0 = p * du;
                for (std::size_t k = 0; k < 16; ++k) {
                    const double u = u0 + 0.5 * du * (rule.nodes[k] + 1.0);
                    const double sn = std::sin(u);
                    nodes.push_back({a + width * sn * sn, 0.0});
                    jacobian.push_back(0.5 * du * rule.weights[k] * width * std::sin(2.0 * u));
                }
            }
        }
        std::vector<double> values(nodes.size());
        parallel_for(nodes.size(), [&](std::size_t i) { values[i] = density(nodes[i].level); });
        for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i].weight = values[i] * jacobian[i];
        return nodes;
    };
    auto moments = [](const std::vector<LsdAtom>& nodes) {
        double m0 = 0.0, m1 = 0.0;
        for (const auto& n : nodes) {
            m0 += n.weight;
            m1 += n.weight * n.level;
        }
        return std::pair{m0, m1};
    };

    int panels = options.min_panels;
    auto nodes = build(panels);
    auto [m0, m1] = moments(nodes);
    while (panels < options.max_panels) {
        auto refined = build(2 * panels);
        const auto [r0, r1] = moments(refined);
        panels *= 2;
        nodes = std::move(refined);
        const bool converged = std::abs(r0 - m0) <= options.tol * std::max(1.0, std::abs(r0)) &&
                               std::abs(r1 - m1) <= options.tol * std::max(1.0, std::abs(r1));
        m0 = r0;
        m1 = r1;
        if (converged) break;
    }

    GammaLsd lsd;
    lsd.kind_ = Kind::kAbsContinuous;
    lsd.lower_ = lower;
    lsd.upper_ = upper;
    lsd.breakpoints_.assign(edges.begin() + 1, edges.end() - 1);
    lsd.density_ = std::move(density);
    lsd.nodes_ = std::move(nodes);
    lsd.panels_ = panels;
    return lsd;
}

const std::vector<LsdAtom>& GammaLsd::atoms() const {
    if (kind_ != Kind::kAtomic) throw ValidationError("LSD is absolutely continuous, not atomic");
    return nodes_;
}

double GammaLsd::density(double lambda) const {
    if (kind_ != Kind::kAbsContinuous) throw ValidationError("atomic LSD has no density");
    if (!(lambda > lower_ && lambda < upper_)) return 0.0;
    return density_(lambda);
}

GammaLsd atomic_lsd(const PiecewiseSpectralDensity& f) {
    std::vector<LsdAtom> atoms;
    double total = 0.0;
    for (const auto& p : f.pieces()) total += p.hi - p.lo;
    for (const auto& p : f.pieces()) atoms.push_back({p.alpha, (p.hi - p.lo) / total});
    return GammaLsd::atomic(std::move(atoms));
}

struct GammaLsd::SymbolSamples {
    std::vector<double> level;
    std::vector<double> weight;
};

namespace {

constexpr std::size_t kSymbolIntervals = std::size_t{1} << 16;
constexpr std::size_t kSymbolFirstStride = kSymbolIntervals / 256;

}  // namespace

GammaLsd GammaLsd::from_spectral_density(const SpectralDensity& f, const QuadratureOptions& options) {
    if (const auto* pw = f.piecewise()) return atomic_lsd(*pw);
    if (f.kind() == SpectralDensity::Kind::kFarima && f.fractional_order() > 0.0) {
        throw ValidationError("FARIMA spectral density with d > 0 is unbounded");
    }
    auto finder = std::make_shared<const LevelSetFinder>(f);
    const auto& support = finder->support();
    if (support.degenerate()) return atomic({{support.upper, 1.0}});
    auto density = [finder](double lambda) { return finder->gamma_density(lambda).value; };
    auto lsd = absolutely_continuous(density, support.lower, support.upper, finder->critical_values(), options);

    // Half-period trapezoid nodes in t in [0, 1]. Analytic symbols use w = pi t
    // directly; FARIMA and tabulated symbols are only finitely smooth, so the
    // nodes are graded with w = pi (t - sin(2 pi t) / (2 pi)) towards w = 0, pi.
    const bool graded = f.kind() != SpectralDensity::Kind::kRationalArma;
    auto samples = std::make_shared<SymbolSamples>();
    samples->level.resize(kSymbolIntervals + 1);
    samples->weight.resize(kSymbolIntervals + 1);
    const double h = 1.0 / static_cast<double>(kSymbolIntervals);
    for (std::size_t k = 0; k <= kSymbolIntervals; ++k) {
        const double t = static_cast<double>(k) * h;
        double omega = kPi * t;
        double w = h;
        if (graded) {
            omega = kPi * (t - std::sin(kTwoPi * t) / kTwoPi);
            w = h * (1.0 - std::cos(kTwoPi * t));
        } else if (k == 0 || k == kSymbolIntervals) {
            w = 0.5 * h;
        }
        samples->level[k] = f.value(omega);
        samples->weight[k] = w;
    }
    lsd.symbol_ = std::move(samples);
    return lsd;
}

IntegralTerm GammaLsd::integral_term(std::complex<double> m, double tol) const {
    auto accumulate = [&](double level, double weight, std::complex<double>& t, std::complex<double>& dt) {
        const std::complex<double> denom = 1.0 + level * m;
        const std::complex<double> q = level / denom;
        t += weight * q;
        dt -= weight * q * q;
    };
    IntegralTerm out;
    if (!symbol_) {
        for (const auto& node : nodes_) accumulate(node.level, node.weight, out.value, out.derivative);
        out.nodes = static_cast<int>(nodes_.size());
        return out;
    }
    const auto& level = symbol_->level;
    const auto& weight = symbol_->weight;
    std::complex<double> sum, dsum;
    std::size_t stride = kSymbolFirstStride;
    for (std::size_t k = 0; k <= kSymbolIntervals; k += stride) accumulate(level[k], weight[k], sum, dsum);
    out.value = static_cast<double>(stride) * sum;
    out.derivative = static_cast<double>(stride) * dsum;
    out.error_estimate = std::numeric_limits<double>::infinity();
    while (stride > 1) {
        const std::size_t half = stride / 2;
        for (std::size_t k = half; k <= kSymbolIntervals; k += stride) accumulate(level[k], weight[k], sum, dsum);
        const std::complex<double> refined = static_cast<double>(half) * sum;
        out.error_estimate = std::abs(refined - out.value);
        out.value = refined;
        out.derivative = static_cast<double>(half) * dsum;
        stride = half;
        if (out.error_estimate <= tol * std::max(1.0, std::abs(out.value))) break;
    }
    out.nodes = static_cast<int>(kSymbolIntervals / stride) + 1;
    return out;
}

GammaLsd make_gamma_lsd(const SpectralDensity& f, const QuadratureOptions& options) {
    return GammaLsd::from_spectral_density(f, options);
}

GammaLsd make_gamma_lsd(const LinearProcessModel& model, const QuadratureOptions& options) {
    if (const auto* farima = std::get_if<FarimaModel>(&model); farima && farima->d() > 0.0) {
        throw ValidationError("the limiting distribution requires d < 0 (summable MA coefficients)");
    }
    return make_gamma_lsd(spectral_density(model), options);
}

SupportBounds arma11_support(double phi, double theta) {
    if (!(std::abs(phi) < 1.0)) throw ValidationError("ARMA(1,1) requires |phi| < 1");
    const double at_zero = (1 + theta) * (1 + theta) / ((1 - phi) * (1 - phi));
    const double at_pi = (1 - theta) * (1 - theta) / ((1 + phi) * (1 + phi));
    if (at_zero <= at_pi) return {at_zero, at_pi, 0.0, kPi};
    return {at_pi, at_zero, kPi, 0.0};
}

double arma11_gamma_density(double phi, double theta, double lambda) {
    const auto support = arma11_support(phi, theta);
    const double scale = (theta + phi) * (1 + theta * phi);
    if (scale == 0.0 || support.degenerate()) {
        throw ValidationError("ARMA(1,1) reduces to white noise; the Toeplitz LSD is atomic");
    }
    if (!(lambda > support.lower && lambda < support.upper)) {
        throw ValidationError("lambda outside the open ARMA(1,1) support");
    }
    const double upper_factor = (1 + theta) * (1 + theta) - lambda * (1 - phi) * (1 - phi);
    const double lower_factor = lambda * (1 + phi) * (1 + phi) - (1 - theta) * (1 - theta);
    return std::abs(scale) /
           (kPi * std::abs(theta + phi * lambda) * std::sqrt(std::abs(upper_factor * lower_factor)));
}

}  // namespace specmp
