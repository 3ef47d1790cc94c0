#pragma once

#include "specmp/toeplitz_lsd.hpp"

#include <complex>
#include <optional>
#include <vector>

namespace specmp {

using Complex = std::complex<double>;

/// y = lim n/p.
class AspectRatio {
public:
    /// @throws ValidationError unless y is finite and positive.
    explicit AspectRatio(double y);
    [[nodiscard]] double value() const noexcept { return y_; }

private:
    double y_;
};

struct SolverConfig {
    double tol = 1e-12;            // relative step size at convergence
    double residual_tol = 1e-10;   // relative to max(1, |z|, |1/m|)
    int max_iter = 200;            // per attempt, before falling back to continuation
    double initial_damping = 1.0;
    bool newton = true;
    double quadrature_tol = 1e-13;
    std::optional<Complex> initial_guess;
};

struct StieltjesSolution {
    Complex z;
    Complex m;
    double residual = 0.0;   // |1/m + z - y T(m)|
    int iterations = 0;
    bool continuation = false;
    double quadrature_error = 0.0;
};

/**
 * @brief Solves 1/m = -z + y T(m), T(m) = int lambda / (1 + lambda m) dF^Gamma.
 *
 * Damped fixed-point iteration m <- (1 - b) m + b / (-z + y T(m)) with
 * Newton acceleration; a Newton step is kept only if it stays in C+ and
 * lowers the residual. If the direct attempt does not converge, the
 * solution is continued from height max(2, 2 Im z, 2 lambda_+ (1 + sqrt y)^2)
 * above Re z down to z, where the iteration contracts strongly.
 *
 * @throws ValidationError if Im z <= 0.
 * @throws NumericalError on non-convergence or escape from C+.
 */
[[nodiscard]] StieltjesSolution solve_fixed_point(const GammaLsd& lsd, AspectRatio y, Complex z,
                                                  const SolverConfig& config = {});

/// C+ root of z m^2 + (z + 1 - y) m + 1 = 0 (Marchenko-Pastur).
[[nodiscard]] Complex mp_stieltjes(AspectRatio y, Complex z);

/**
 * Closed form of T(m) for ARMA(1,1), X_t = phi X_{t-1} + Z_t + theta Z_{t-1}:
 *
 *   T(m) = theta / (m theta - phi) - (theta + phi)(1 + theta phi) / ((m theta - phi) S),
 *   S^2  = [(1 - phi)^2 + m (1 + theta)^2] [(1 + phi)^2 + m (1 - theta)^2].
 *
 * The branch of S is the one with Re(S conj(1 + phi^2 + m (1 + theta^2))) > 0,
 * which is the continuation of the large-|z| branch over C+. Near
 * m theta = phi the equivalent rationalized form is used.
 */
[[nodiscard]] Complex arma11_integral_term(double phi, double theta, Complex m);

/// 1/m + z - y T(m) with T from arma11_integral_term.
[[nodiscard]] Complex arma11_residual(double phi, double theta, double y, Complex z, Complex m);

struct InversionStats {
    int solves = 0;
    int max_iterations = 0;
    int continuation_solves = 0;
    double max_residual = 0.0;
    double max_quadrature_error = 0.0;
    int clamped_points = 0;       // tiny negatives set to zero
    int fallback_points = 0;      // extrapolation rejected, smallest-eps value used
};

/// Tabulated density of the LSD of p^{-1} X X^T plus its atom at zero.
struct LimitingDensity {
    std::vector<double> grid;
    std::vector<double> values;
    double mass_at_zero = 0.0;
    std::optional<double> head_mass;  // F([0, grid[0]]), atom included
    std::vector<double> cumulative;   // F([0, grid[i]])
    InversionStats stats;
};

struct InversionConfig {
    std::vector<double> eps_schedule{1e-6, 5e-7, 2.5e-7};
    SolverConfig solver;
};

/**
 * @brief Stieltjes-Perron inversion p(x) = lim (1/pi) Im m(x + i eps).
 *
 * Solves at every eps of the schedule (warm-started) and extrapolates the
 * values polynomially to eps = 0. Results in [-1e-8, 0) are set to zero;
 * if extrapolation gives anything more negative the raw value at the
 * smallest eps is used instead.
 *
 * @throws ValidationError for a non-increasing grid, x <= 0 or a bad schedule.
 * @throws NumericalError naming the first x where the solver failed.
 */
[[nodiscard]] LimitingDensity invert_to_density(const GammaLsd& lsd, AspectRatio y,
                                                const std::vector<double>& grid,
                                                const InversionConfig& config = {});

/**
 * F([0, x0]) including the atom at zero, from the contour identity
 * F([0, x0]) = -(1/pi) int_0^pi Re(z m(z)) dtheta, z = x0 e^{i theta},
 * evaluated with 64-point Gauss-Legendre. Needs no knowledge of how p
 * behaves near zero.
 */
[[nodiscard]] double interval_mass(const GammaLsd& lsd, AspectRatio y, double x0, const SolverConfig& config = {});

/**
 * Cumulative distribution from the tabulated density. Between nodes p is
 * interpolated as a power law (log-log linear), or linearly in sqrt(x) where
 * one end is zero. The mass of [0, grid[0]] is head_mass when set, spread
 * as c x^{1-a} with the exponent a of the first two nodes; without
 * head_mass that power law also gives the total. Values past the grid hold
 * the last cumulative value.
 */
[[nodiscard]] double lsd_cdf(const LimitingDensity& density, double x);

/// Fills density.cumulative; invert_to_density already does this.
void accumulate_cdf(LimitingDensity& density);

/// Upper end of the support: last x on a scan of [0, 1.1 lambda_+ (1 + sqrt y)^2]
/// where Im m(x + i eps) / pi exceeds 1e-5.
[[nodiscard]] double support_estimate(const GammaLsd& lsd, AspectRatio y, const SolverConfig& config = {});

/// `points` values on [lo, hi] equally spaced in sqrt(x), endpoints exact.
[[nodiscard]] std::vector<double> sqrt_spaced_grid(double lo, double hi, int points);

/// `points` x values on [0.001, 1.05 support_estimate], equally spaced in
/// sqrt(x) so that hard edges at zero are resolved.
[[nodiscard]] std::vector<double> default_density_grid(const GammaLsd& lsd, AspectRatio y, int points = 512,
                                                       const SolverConfig& config = {});

}  // namespace specmp
