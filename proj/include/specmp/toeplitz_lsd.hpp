#pragma once

#include "specmp/linear_process.hpp"
#include "specmp/model_spec.hpp"

#include <complex>
#include <functional>
#include <memory>
#include <vector>

namespace specmp {

struct SupportBounds {
    double lower = 0.0;
    double upper = 0.0;
    double argmin = 0.0;
    double argmax = 0.0;

    /// Constant spectral density (the LSD of Gamma is a single atom).
    [[nodiscard]] bool degenerate() const noexcept;
};

struct LevelSetOptions {
    int initial_grid = 4096;   // doubled until the root count is stable
    int max_grid = 1 << 20;
    double bisection_tol = 1e-12;
    double tangential_tol = 1e-8;  // |f'| below this marks a tangential root
};

/// Solutions of f(w) = lambda on [0, 2pi), 0 and 2pi identified.
struct LevelSet {
    double lambda = 0.0;
    std::vector<double> roots;      // sorted
    std::vector<bool> tangential;   // parallel to roots
    double tolerance = 0.0;         // bound on |f(root) - lambda|
};

/// Density value of F^Gamma; `singular` is set when a tangential root
/// contributes (the density diverges there and the value omits it).
struct GammaDensityValue {
    double value = 0.0;
    bool singular = false;
};

/**
 * @brief Level-set machinery for one smooth spectral density.
 *
 * Samples f and f' once on uniform grids of N and 2N points; every query
 * then only scans for sign changes and refines by bisection. Immutable after
 * construction and safe to share between threads.
 */
class LevelSetFinder {
public:
    /// @throws ValidationError for piecewise-constant densities.
    explicit LevelSetFinder(SpectralDensity f, LevelSetOptions options = {});

    [[nodiscard]] const SpectralDensity& density() const noexcept { return f_; }
    [[nodiscard]] const SupportBounds& support() const noexcept { return support_; }

    [[nodiscard]] LevelSet roots(double lambda) const;

    /// g(lambda) = (1/2pi) sum_{f(w)=lambda} 1/|f'(w)|, lambda strictly inside the support.
    [[nodiscard]] GammaDensityValue gamma_density(double lambda) const;

    /// Leb{w : f(w) <= lambda} / 2pi.
    [[nodiscard]] double gamma_cdf(double lambda) const;

    /// Values of f at interior local extrema; g has integrable
    /// singularities there.
    [[nodiscard]] const std::vector<double>& critical_values() const noexcept { return critical_; }

private:
    struct Grid {
        std::vector<double> omega;
        std::vector<double> value;
        std::vector<double> slope;
    };
    struct Root {
        double omega;
        bool tangential;
    };

    [[nodiscard]] Grid sample(int n) const;
    [[nodiscard]] std::vector<Root> scan(const Grid& grid, double lambda) const;
    [[nodiscard]] double bisect_value(double a, double b, double lambda) const;
    [[nodiscard]] double bisect_slope(double a, double b) const;

    SpectralDensity f_;
    LevelSetOptions options_;
    Grid coarse_;
    Grid fine_;
    SupportBounds support_;
    std::vector<double> critical_;
    double max_slope_ = 0.0;
};

[[nodiscard]] SupportBounds support_bounds(const SpectralDensity& f);
[[nodiscard]] LevelSet level_set_roots(const SpectralDensity& f, double lambda,
                                       const LevelSetOptions& options = {});
/// @throws ValidationError outside the open support or for constant f.
[[nodiscard]] GammaDensityValue gamma_density(const SpectralDensity& f, double lambda);
[[nodiscard]] double gamma_cdf(const SpectralDensity& f, double lambda);

struct LsdAtom {
    double level;
    double weight;
};

/// T(m) = integral of lambda / (1 + lambda m) against the LSD, and dT/dm.
struct IntegralTerm {
    std::complex<double> value;
    std::complex<double> derivative;
    double error_estimate = 0.0;
    int nodes = 0;
};

struct QuadratureOptions {
    int min_panels = 64;   // Gauss-Legendre panels per smooth sub-interval
    int max_panels = 512;
    double tol = 1e-12;
};

/**
 * @brief Limiting spectral distribution of the Toeplitz matrix (gamma(i-j)).
 *
 * Either absolutely continuous with a density on (lower, upper), or a finite
 * set of atoms. Both variants expose a discretization of the measure as
 * weighted nodes, which is what the Stieltjes solver integrates against:
 * the atoms themselves, or a composite Gauss-Legendre rule in the variable
 * u with lambda = a + (b - a) sin^2(u) on each smooth sub-interval [a, b].
 * The substitution removes the inverse square-root singularities of g at
 * band edges and interior critical values.
 */
class GammaLsd {
public:
    enum class Kind { kAbsContinuous, kAtomic };

    /// Sorts by level, merges equal levels and makes the weights sum to
    /// exactly one (left-to-right summation).
    static GammaLsd atomic(std::vector<LsdAtom> atoms);

    static GammaLsd absolutely_continuous(std::function<double(double)> density, double lower,
                                          double upper, std::vector<double> breakpoints = {},
                                          const QuadratureOptions& options = {});

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] bool is_atomic() const noexcept { return kind_ == Kind::kAtomic; }
    [[nodiscard]] double lower() const noexcept { return lower_; }
    [[nodiscard]] double upper() const noexcept { return upper_; }
    [[nodiscard]] const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }

    /// Atomic variant only.
    [[nodiscard]] const std::vector<LsdAtom>& atoms() const;

    /// Absolutely continuous variant only; zero outside (lower, upper).
    [[nodiscard]] double density(double lambda) const;

    /// Smooth spectral density: absolutely continuous LSD plus the symbol
    /// samples used by integral_term(). Constant densities become one atom.
    static GammaLsd from_spectral_density(const SpectralDensity& f, const QuadratureOptions& options = {});

    [[nodiscard]] const std::vector<LsdAtom>& discretization() const noexcept { return nodes_; }
    [[nodiscard]] int quadrature_panels() const noexcept { return panels_; }

    /**
     * Evaluates T(m) for Im m > 0. Atomic LSDs and bare densities sum over
     * discretization(). When built from a spectral density f the integral
     * is taken in the frequency domain, (1/2pi) int f/(1 + f m) dw, with a
     * nested trapezoid rule refined until successive levels agree to `tol`.
     * The integrand is periodic and analytic for ARMA symbols, so this
     * converges geometrically even close to the real axis.
     */
    [[nodiscard]] IntegralTerm integral_term(std::complex<double> m, double tol = 1e-13) const;

private:
    struct SymbolSamples;

    GammaLsd() = default;

    Kind kind_ = Kind::kAtomic;
    double lower_ = 0.0;
    double upper_ = 0.0;
    std::vector<double> breakpoints_;
    std::function<double(double)> density_;
    std::vector<LsdAtom> nodes_;
    int panels_ = 0;
    std::shared_ptr<const SymbolSamples> symbol_;
};

/// Atoms (alpha_j, |A_j| / 2pi) of a piecewise-constant density.
[[nodiscard]] GammaLsd atomic_lsd(const PiecewiseSpectralDensity& f);

/// Routes constant densities to a single atom, everything else to the
/// absolutely continuous variant backed by a LevelSetFinder.
[[nodiscard]] GammaLsd make_gamma_lsd(const SpectralDensity& f, const QuadratureOptions& options = {});

/// @throws ValidationError for FARIMA models with d > 0.
[[nodiscard]] GammaLsd make_gamma_lsd(const LinearProcessModel& model,
                                      const QuadratureOptions& options = {});

/// Support (lambda_-, lambda_+) of the ARMA(1,1) Toeplitz LSD,
/// X_t = phi X_{t-1} + Z_t + theta Z_{t-1}.
[[nodiscard]] SupportBounds arma11_support(double phi, double theta);

/**
 * @brief Closed-form Toeplitz LSD density of ARMA(1,1),
 *
 *   g(l) = |(theta+phi)(1+theta phi)| /
 *          (pi |theta + phi l| sqrt([(1+theta)^2 - l(1-phi)^2][l(1+phi)^2 - (1-theta)^2]))
 *
 * @throws ValidationError if |phi| >= 1, the model is white noise after
 *         cancellation, or lambda is outside the open support.
 */
[[nodiscard]] double arma11_gamma_density(double phi, double theta, double lambda);

}  // namespace specmp
