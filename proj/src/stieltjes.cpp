#include "specmp/stieltjes.hpp"

#include "specmp/errors.hpp"
#include "specmp/parallel.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace specmp {

namespace {

constexpr double kPi = kTwoPi / 2;

bool in_upper_half_plane(Complex m) {
    return m.imag() > 0.0 && std::isfinite(m.real()) && std::isfinite(m.imag());
}

struct Evaluation {
    Complex m;
    Complex t;
    Complex dt;
    Complex f;   // 1/m + z - y T(m)
    double residual = 0.0;
    double quadrature_error = 0.0;
};

struct Attempt {
    bool converged = false;
    Evaluation last;
    int iterations = 0;
    double quadrature_error = 0.0;
};

class FixedPoint {
public:
    FixedPoint(const GammaLsd& lsd, double y, const SolverConfig& config)
        : lsd_(lsd), y_(y), config_(config) {}

    Evaluation evaluate(Complex z, Complex m) const {
        const auto term = lsd_.integral_term(m, config_.quadrature_tol);
        Evaluation e{m, term.value, term.derivative, 1.0 / m + z - y_ * term.value, 0.0, term.error_estimate};
        e.residual = std::abs(e.f);
        return e;
    }

    double scale(Complex z, const Evaluation& e) const {
        return std::max({1.0, std::abs(z), std::abs(1.0 / e.m)});
    }

    Attempt run(Complex z, Complex start, int max_iter) const {
        Attempt out;
        Evaluation e = evaluate(z, in_upper_half_plane(start) ? start : -1.0 / z);
        out.quadrature_error = e.quadrature_error;
        double damping = config_.initial_damping;
        for (int it = 1; it <= max_iter; ++it) {
            out.iterations = it;
            std::optional<Evaluation> next;
            if (config_.newton) {
                const Complex slope = -1.0 / (e.m * e.m) - y_ * e.dt;
                if (std::abs(slope) > 0.0) {
                    // The Newton direction decreases |F|^2; backtrack along it.
                    const Complex direction = -e.f / slope;
                    for (double t = 1.0; t >= 1.0 / 1024 && !next; t *= 0.5) {
                        const Complex candidate = e.m + t * direction;
                        if (!in_upper_half_plane(candidate)) continue;
                        auto ec = evaluate(z, candidate);
                        if (ec.residual < (1.0 - 1e-4 * t) * e.residual) next = ec;
                    }
                }
            }
            if (!next) {
                // The undamped map sends C+ into itself and contracts there; damping
                // only guards against roundoff escapes and residual growth.
                const Complex target = 1.0 / (-z + y_ * e.t);
                std::optional<Evaluation> full;
                for (double beta = damping; beta >= 1.0 / 64; beta *= 0.5) {
                    const Complex candidate = (1.0 - beta) * e.m + beta * target;
                    if (!in_upper_half_plane(candidate)) continue;
                    auto ec = evaluate(z, candidate);
                    if (!full) full = ec;
                    if (ec.residual <= e.residual) {
                        next = ec;
                        damping = std::min(config_.initial_damping, 2.0 * beta);
                        break;
                    }
                }
                if (!next) next = full;
                if (!next) {
                    std::ostringstream msg;
                    msg << "iterate left the upper half plane at z = " << z;
                    throw NumericalError(msg.str());
                }
            }
            const double step = std::abs(next->m - e.m);
            e = *next;
            const bool small_step = step <= config_.tol * std::max(1.0, std::abs(e.m));
            const bool small_residual = e.residual <= config_.residual_tol * scale(z, e);
            if (small_residual && (small_step || e.residual == 0.0)) {
                out.converged = true;
                break;
            }
        }
        out.last = e;
        out.quadrature_error = e.quadrature_error;
        return out;
    }

private:
    const GammaLsd& lsd_;
    double y_;
    SolverConfig config_;
};

Complex arma11_closed_form(double phi, double theta, Complex m) {
    const Complex alpha = 1.0 + phi * phi + m * (1.0 + theta * theta);
    Complex s = std::sqrt(((1 - phi) * (1 - phi) + m * (1 + theta) * (1 + theta)) *
                          ((1 + phi) * (1 + phi) + m * (1 - theta) * (1 - theta)));
    if ((s * std::conj(alpha)).real() < 0.0) s = -s;
    if (theta == 0.0) return 1.0 / s;
    const double k = (theta + phi) * (1 + theta * phi);
    const Complex pole = m * theta - phi;
    const Complex direct_denominator = pole * s;
    const Complex rational_denominator = s * (theta * s + k);
    if (std::abs(direct_denominator) >= std::abs(rational_denominator)) {
        return theta / pole - k / direct_denominator;
    }
    return ((1 + theta * theta) * (theta * alpha + k) - 4 * theta * theta * pole) / rational_denominator;
}

constexpr std::size_t kBlock = 32;

std::size_t block_count(std::size_t n) { return (n + kBlock - 1) / kBlock; }
std::size_t block_begin(std::size_t b) { return b * kBlock; }
std::size_t block_end(std::size_t b, std::size_t n) { return std::min(n, (b + 1) * kBlock); }

// Value at eps = 0 of the polynomial through (eps_k, v_k), by Neville's scheme.
double extrapolate_to_zero(const std::vector<double>& eps, std::vector<double> v) {
    const std::size_t n = eps.size();
    for (std::size_t level = 1; level < n; ++level) {
        for (std::size_t i = 0; i + level < n; ++i) {
            const double a = eps[i], b = eps[i + level];
            v[i] = (b * v[i] - a * v[i + 1]) / (b - a);
        }
    }
    return v[0];
}

}  // namespace

double interval_mass(const GammaLsd& lsd, AspectRatio y, double x0, const SolverConfig& config) {
    if (!(x0 > 0.0)) throw ValidationError("interval_mass needs x0 > 0");
    // F([0, x0]) = -(1/pi) int_0^pi Re(z m(z)) dtheta on z = x0 e^{i theta}.
    using Rule = boost::math::quadrature::gauss<double, 64>;
    const auto& nodes = Rule::abscissa();
    const auto& weights = Rule::weights();
    std::vector<double> theta, weight;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        for (double sign : {-1.0, 1.0}) {
            if (nodes[k] == 0.0 && sign < 0) continue;
            theta.push_back(0.5 * kPi * (1.0 + sign * nodes[k]));
            weight.push_back(0.5 * kPi * weights[k]);
        }
    }
    std::vector<double> values(theta.size());
    parallel_for(theta.size(), [&](std::size_t k) {
        const Complex z = std::polar(x0, theta[k]);
        values[k] = (z * solve_fixed_point(lsd, y, z, config).m).real();
    });
    double sum = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) sum += weight[k] * values[k];
    return std::clamp(-sum / kPi, 0.0, 1.0);
}

AspectRatio::AspectRatio(double y) : y_(y) {
    if (!(y > 0.0) || !std::isfinite(y)) throw ValidationError("aspect ratio y must be finite and > 0");
}

StieltjesSolution solve_fixed_point(const GammaLsd& lsd, AspectRatio y, Complex z, const SolverConfig& config) {
    if (!(z.imag() > 0.0) || !std::isfinite(z.real()) || !std::isfinite(z.imag())) {
        throw ValidationError("solve_fixed_point needs Im z > 0");
    }
    if (config.max_iter < 1 || !(config.initial_damping > 0.0) || config.initial_damping > 1.0) {
        throw ValidationError("invalid solver configuration");
    }
    const FixedPoint solver(lsd, y.value(), config);
    const Complex guess = config.initial_guess.value_or(-1.0 / z);

    StieltjesSolution out;
    out.z = z;
    // Close to the real axis a failed short probe goes straight to continuation.
    constexpr int kProbeIterations = 30;
    const bool probe = z.imag() < 1.0;
    auto attempt = solver.run(z, guess, probe ? std::min(config.max_iter, kProbeIterations) : config.max_iter);
    out.iterations = attempt.iterations;
    out.quadrature_error = attempt.quadrature_error;

    if (!attempt.converged) {
        // Continuation in Im z from a well-conditioned height.
        out.continuation = true;
        const double spread = lsd.upper() * (1.0 + std::sqrt(y.value())) * (1.0 + std::sqrt(y.value()));
        double height = std::max({2.0, 2.0 * z.imag(), 2.0 * spread});
        auto warm = solver.run({z.real(), height}, -1.0 / Complex(z.real(), height), 4 * config.max_iter);
        out.iterations += warm.iterations;
        if (!warm.converged) {
            std::ostringstream msg;
            msg << "Stieltjes solver did not converge at z = " << z << " (residual " << warm.last.residual << ")";
            throw NumericalError(msg.str());
        }
        double ratio = 0.25;
        Complex m = warm.last.m;
        while (height > z.imag()) {
            const double next_height = std::max(z.imag(), height * ratio);
            auto step = solver.run({z.real(), next_height}, m, config.max_iter);
            out.iterations += step.iterations;
            if (step.converged) {
                m = step.last.m;
                height = next_height;
                attempt = step;
                ratio = std::min(0.25, ratio * ratio);
            } else {
                ratio = std::sqrt(ratio);
                if (ratio > 1.0 - 1e-6) {
                    std::ostringstream msg;
                    msg << "Stieltjes solver did not converge at z = " << z << " (residual "
                        << step.last.residual << ")";
                    throw NumericalError(msg.str());
                }
            }
        }
    }

    out.m = attempt.last.m;
    out.residual = attempt.last.residual;
    out.quadrature_error = attempt.quadrature_error;
    if (!in_upper_half_plane(out.m)) {
        std::ostringstream msg;
        msg << "solution left the upper half plane at z = " << z;
        throw NumericalError(msg.str());
    }
    return out;
}

Complex mp_stieltjes(AspectRatio y, Complex z) {
    if (!(z.imag() > 0.0)) throw ValidationError("mp_stieltjes needs Im z > 0");
    const Complex b = z + 1.0 - y.value();
    const Complex root = std::sqrt(b * b - 4.0 * z);
    // Cancellation-free pair of roots q / z and 1 / q.
    const Complex q = -0.5 * (std::real(std::conj(b) * root) >= 0.0 ? b + root : b - root);
    const Complex r1 = q / z;
    const Complex r2 = 1.0 / q;
    return r1.imag() >= r2.imag() ? r1 : r2;
}

Complex arma11_integral_term(double phi, double theta, Complex m) {
    if (!(std::abs(phi) < 1.0)) throw ValidationError("ARMA(1,1) requires |phi| < 1");
    return arma11_closed_form(phi, theta, m);
}

Complex arma11_residual(double phi, double theta, double y, Complex z, Complex m) {
    return 1.0 / m + z - y * arma11_integral_term(phi, theta, m);
}

LimitingDensity invert_to_density(const GammaLsd& lsd, AspectRatio y, const std::vector<double>& grid,
                                  const InversionConfig& config) {
    if (grid.empty()) throw ValidationError("density grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0) || !std::isfinite(grid[i])) throw ValidationError("density grid must be positive");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw ValidationError("density grid must be strictly increasing");
    }
    const auto& eps = config.eps_schedule;
    if (eps.empty()) throw ValidationError("eps schedule is empty");
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0.0)) throw ValidationError("eps schedule entries must be > 0");
        for (std::size_t j = 0; j < i; ++j) {
            if (eps[j] == eps[i]) throw ValidationError("eps schedule entries must be distinct");
        }
    }
    const auto smallest = static_cast<std::size_t>(std::min_element(eps.begin(), eps.end()) - eps.begin());

    struct PointResult {
        double value = 0.0;
        bool clamped = false;
        bool fallback = false;
        int max_iterations = 0;
        int continuation = 0;
        double max_residual = 0.0;
        double max_quadrature_error = 0.0;
    };
    std::vector<PointResult> results(grid.size());
    // The atom at zero contributes exactly -(1 - y) / z to m; its Lorentzian
    // tail is removed before extrapolating.
    const double atom = std::max(0.0, 1.0 - y.value());
    // Blocks of consecutive x are solved in order, each x warm-started from
    // its left neighbour. The layout does not depend on the thread count.
    parallel_for(block_count(grid.size()), [&](std::size_t b) {
        std::optional<Complex> neighbour;
        for (std::size_t i = block_begin(b); i < block_end(b, grid.size()); ++i) {
            auto& r = results[i];
            SolverConfig solver = config.solver;
            if (!solver.initial_guess) solver.initial_guess = neighbour;
            std::vector<double> samples(eps.size());
            for (std::size_t k = 0; k < eps.size(); ++k) {
                StieltjesSolution s;
                try {
                    s = solve_fixed_point(lsd, y, {grid[i], eps[k]}, solver);
                } catch (const NumericalError& e) {
                    std::ostringstream msg;
                    msg << "inversion failed at x = " << grid[i] << ": " << e.what();
                    throw NumericalError(msg.str());
                }
                if (k == 0) neighbour = s.m;
                solver.initial_guess = s.m;
                const double x = grid[i], e = eps[k];
                samples[k] = (s.m.imag() - atom * e / (x * x + e * e)) / kPi;
                r.max_iterations = std::max(r.max_iterations, s.iterations);
                r.continuation += s.continuation ? 1 : 0;
                r.max_residual = std::max(r.max_residual, s.residual);
                r.max_quadrature_error = std::max(r.max_quadrature_error, s.quadrature_error);
            }
            double value = extrapolate_to_zero(eps, samples);
            if (value < -1e-8 || !std::isfinite(value)) {
                value = std::max(0.0, samples[smallest]);
                r.fallback = true;
            } else if (value < 0.0) {
                value = 0.0;
                r.clamped = true;
            }
            r.value = value;
        }
    });

    LimitingDensity out;
    out.grid = grid;
    out.mass_at_zero = std::max(0.0, 1.0 - y.value());
    out.head_mass = interval_mass(lsd, y, grid.front(), config.solver);
    out.values.reserve(grid.size());
    for (const auto& r : results) {
        out.values.push_back(r.value);
        auto& st = out.stats;
        st.solves += static_cast<int>(eps.size());
        st.max_iterations = std::max(st.max_iterations, r.max_iterations);
        st.continuation_solves += r.continuation;
        st.max_residual = std::max(st.max_residual, r.max_residual);
        st.max_quadrature_error = std::max(st.max_quadrature_error, r.max_quadrature_error);
        st.clamped_points += r.clamped ? 1 : 0;
        st.fallback_points += r.fallback ? 1 : 0;
    }
    accumulate_cdf(out);
    return out;
}

namespace {

// Mass of p over [a, x] for x in [a, b], interpolating log p linearly in
// log x when both ends are positive and linearly in sqrt(x) otherwise.
double segment_mass(double a, double b, double pa, double pb, double x) {
    if (x <= a) return 0.0;
    if (pa > 0.0 && pb > 0.0 && pa != pb) {
        const double k = std::log(pb / pa) / std::log(b / a);
        if (std::abs(k + 1.0) > 1e-9) return pa * a / (k + 1.0) * (std::pow(x / a, k + 1.0) - 1.0);
        return pa * a * std::log(x / a);
    }
    if (pa == pb) return pa * (x - a);
    const double s0 = std::sqrt(a), s1 = std::sqrt(b), s = std::sqrt(x);
    const double q0 = 2.0 * s0 * pa;
    const double qs = q0 + (s - s0) / (s1 - s0) * (2.0 * s1 * pb - q0);
    return 0.5 * (s - s0) * (q0 + qs);
}

// Continuous mass of p over [0, x] for x <= grid[0]. The total over
// [0, grid[0]] is head_mass when known; p ~ x^{-a} with a from the first
// two nodes (clamped to [0, 0.95]) supplies the shape and the fallback.
double hard_edge_mass(const LimitingDensity& d, double x) {
    const double x0 = d.grid[0], p0 = d.values[0];
    double a = 0.5;
    if (p0 > 0.0 && d.grid.size() > 1 && d.values[1] > 0.0) {
        a = std::clamp(-std::log(d.values[1] / p0) / std::log(d.grid[1] / x0), 0.0, 0.95);
    }
    const double total = d.head_mass ? std::max(0.0, *d.head_mass - d.mass_at_zero) : x0 * p0 / (1.0 - a);
    return total * std::pow(x / x0, 1.0 - a);
}

}  // namespace

void accumulate_cdf(LimitingDensity& density) {
    const auto& x = density.grid;
    const auto& p = density.values;
    if (x.size() != p.size() || x.empty()) throw ValidationError("density grid and values differ in size");
    density.cumulative.resize(x.size());
    double total = density.mass_at_zero + hard_edge_mass(density, x[0]);
    density.cumulative[0] = total;
    for (std::size_t i = 1; i < x.size(); ++i) {
        total += segment_mass(x[i - 1], x[i], p[i - 1], p[i], x[i]);
        density.cumulative[i] = total;
    }
}

double lsd_cdf(const LimitingDensity& density, double x) {
    if (density.cumulative.size() != density.grid.size()) {
        LimitingDensity copy = density;
        accumulate_cdf(copy);
        return lsd_cdf(copy, x);
    }
    const auto& g = density.grid;
    const auto& c = density.cumulative;
    if (x < 0.0) return 0.0;
    if (x >= g.back()) return c.back();
    if (x <= g.front()) return density.mass_at_zero + hard_edge_mass(density, x);
    const auto hi = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), x) - g.begin());
    const std::size_t lo = hi - 1;
    return c[lo] + segment_mass(g[lo], g[hi], density.values[lo], density.values[hi], x);
}

double support_estimate(const GammaLsd& lsd, AspectRatio y, const SolverConfig& config) {
    const double top = lsd.upper() * (1.0 + std::sqrt(y.value())) * (1.0 + std::sqrt(y.value()));
    const double range = 1.1 * top;
    constexpr std::size_t kScan = 400;
    std::vector<double> density(kScan + 1, 0.0);
    parallel_for(block_count(kScan + 1), [&](std::size_t b) {
        SolverConfig solver = config;
        for (std::size_t k = block_begin(b); k < block_end(b, kScan + 1); ++k) {
            const double x = range * static_cast<double>(k) / static_cast<double>(kScan);
            StieltjesSolution s;
            try {
                s = solve_fixed_point(lsd, y, {x, 1e-6}, solver);
            } catch (const NumericalError& e) {
                std::ostringstream msg;
                msg << "support scan failed at x = " << x << ": " << e.what();
                throw NumericalError(msg.str());
            }
            density[k] = s.m.imag() / kPi;
            solver.initial_guess = s.m;
        }
    });
    for (std::size_t k = kScan + 1; k-- > 0;) {
        if (density[k] > 1e-5) return range * static_cast<double>(std::min(k + 1, kScan)) / kScan;
    }
    return top;
}

std::vector<double> sqrt_spaced_grid(double lo, double hi, int points) {
    if (points < 2) throw ValidationError("density grid needs at least 2 points");
    if (!(lo > 0.0) || !(hi > lo)) throw ValidationError("density grid needs 0 < lo < hi");
    const double a = std::sqrt(lo), b = std::sqrt(hi);
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        const double s = a + (b - a) * i / (points - 1);
        grid[static_cast<std::size_t>(i)] = s * s;
    }
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

std::vector<double> default_density_grid(const GammaLsd& lsd, AspectRatio y, int points,
                                         const SolverConfig& config) {
    if (points < 2) throw ValidationError("density grid needs at least 2 points");
    return sqrt_spaced_grid(0.001, std::max(1.05 * support_estimate(lsd, y, config), 0.002), points);
}

}  // namespace specmp
