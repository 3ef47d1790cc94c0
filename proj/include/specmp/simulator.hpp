#pragma once

#include "specmp/model_spec.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace specmp {

/// Innovation distributions; all have mean 0 and variance 1.
enum class InnovationLaw { kNormal, kRademacher, kUniform };

[[nodiscard]] InnovationLaw parse_innovation_law(const std::string& name);
[[nodiscard]] std::string to_string(InnovationLaw law);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SimulationPlan {
    int p = 0;
    double y = 1.0;
    LinearProcessModel model;
    InnovationLaw law = InnovationLaw::kNormal;
    double mu = 0.0;
    bool center = false;
    std::uint64_t seed = 0;
    int replicates = 1;

    /// n = round(y p).
    [[nodiscard]] int n() const;
    /// FARIMA with d > 0: coefficients are not summable and no LSD applies.
    [[nodiscard]] bool long_memory() const;
    /// @throws ValidationError if p < 1, n < 1, replicates < 1, or the
    /// model has no MA representation here.
    void validate() const;
};

/// MA coefficients used by the simulator: horizon max(1000, n), of which
/// c_0..c_n enter the convolution.
[[nodiscard]] std::vector<double> simulation_coefficients(const SimulationPlan& plan);

/**
 * p x 2n innovations for one replicate. Column k holds Z_{i, k + 1 - n},
 * t = 1 - n..n. Row i is drawn from its own generator seeded by
 * (seed, replicate, i), so rows do not depend on each other or on the
 * thread layout.
 */
[[nodiscard]] RowMatrix draw_innovations(const SimulationPlan& plan, int replicate);

/**
 * X_{i,t} = mu + sum_{j=0}^{n} c_j Z_{i,t-j} for t = 1..n, where the
 * innovation block has 2n columns as in draw_innovations and coeffs holds
 * c_0, c_1, ... (entries past index n are ignored).
 */
[[nodiscard]] RowMatrix convolve_rows(const RowMatrix& innovations, const std::vector<double>& coeffs, double mu);

[[nodiscard]] RowMatrix simulate_matrix(const SimulationPlan& plan, int replicate);

struct EmpiricalSpectrum {
    std::vector<double> eigenvalues;   // ascending, >= 0
    double trace = 0.0;                // p^{-1} sum X_{it}^2 after centering
};

/**
 * Eigenvalues of p^{-1} X X^T. With `center` every column first has the row
 * mean vector (average over t) subtracted. Eigenvalues with magnitude at most
 * 1e-9 max(1, |lambda_max|) are set to exactly zero.
 *
 * @throws NumericalError if the eigensolver fails or a clearly negative
 *         eigenvalue appears.
 */
[[nodiscard]] EmpiricalSpectrum sample_cov_eigenvalues(const RowMatrix& x, bool center);

/// Fraction of eigenvalues <= x.
[[nodiscard]] double ecdf(const EmpiricalSpectrum& spectrum, double x);

/// sup over jump points of |ECDF - F| on both sides of each jump.
[[nodiscard]] double ks_distance(const EmpiricalSpectrum& spectrum, const std::function<double(double)>& cdf);

/// Two-sample Kolmogorov distance between spectra.
[[nodiscard]] double ks_distance(const EmpiricalSpectrum& a, const EmpiricalSpectrum& b);

struct Histogram {
    std::vector<double> edges;       // bins + 1
    std::vector<double> densities;   // bar heights; bar areas sum to the non-atom mass fraction
    double zero_atom = 0.0;          // fraction of eigenvalues at 0 when separated
};

/**
 * Density-normalized histogram on [lo, hi]. With separate_zero_atom,
 * eigenvalues below 1e-9 max(1, lambda_max) are reported in zero_atom and not binned; the
 * bars then integrate to 1 - zero_atom. Values outside [lo, hi] are
 * dropped (the bars integrate to the binned fraction).
 */
[[nodiscard]] Histogram histogram(const EmpiricalSpectrum& spectrum, int bins, double lo, double hi,
                                  bool separate_zero_atom = false);

/// |sum of eigenvalues - trace| / max(1, trace).
[[nodiscard]] double trace_check(const EmpiricalSpectrum& spectrum);

struct ReplicateResult {
    int replicate = 0;
    std::uint64_t seed = 0;
    EmpiricalSpectrum spectrum;
};

/// Runs every replicate; results are ordered by replicate index.
[[nodiscard]] std::vector<ReplicateResult> run_simulation(const SimulationPlan& plan);

}  // namespace specmp
