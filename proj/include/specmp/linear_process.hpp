#pragma once

#include <optional>
#include <span>
#include <vector>

namespace specmp {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/**
 * @brief Causal ARMA(p,q) model in difference-equation form
 *
 *     X_t + a_1 X_{t-1} + ... + a_p X_{t-p} = Z_t + b_1 Z_{t-1} + ... + b_q Z_{t-q}
 *
 * The stored autoregressive coefficients always follow this convention
 * (a_k). The familiar recursion X_t = phi_1 X_{t-1} + ... + Z_t + ... is
 * available through from_recursion(), which stores a_k = -phi_k.
 *
 * Construction checks that every zero of 1 + a_1 z + ... + a_p z^p lies
 * strictly outside the closed unit disk.
 */
class ArmaModel {
public:
    /// White noise (p = q = 0).
    ArmaModel() = default;

    /// @throws ValidationError if the AR polynomial has a zero with |z| <= 1.
    static ArmaModel from_polynomials(std::vector<double> ar, std::vector<double> ma);

    /// phi/theta convention: X_t = sum phi_k X_{t-k} + Z_t + sum theta_k Z_{t-k}.
    static ArmaModel from_recursion(const std::vector<double>& phi, std::vector<double> theta);

    [[nodiscard]] const std::vector<double>& ar() const noexcept { return ar_; }
    [[nodiscard]] const std::vector<double>& ma() const noexcept { return ma_; }
    [[nodiscard]] bool is_white_noise() const noexcept { return ar_.empty() && ma_.empty(); }

    /// Smallest modulus among the zeros of the AR polynomial (+inf for p = 0).
    [[nodiscard]] double min_ar_root_modulus() const;

private:
    ArmaModel(std::vector<double> ar, std::vector<double> ma);

    std::vector<double> ar_;
    std::vector<double> ma_;
};

/// ARMA model fractionally integrated by (1 - B)^{-d}.
class FarimaModel {
public:
    /// @throws ValidationError unless d lies in (-1/2, 1/2).
    FarimaModel(ArmaModel arma, double d);

    [[nodiscard]] const ArmaModel& arma() const noexcept { return arma_; }
    [[nodiscard]] double d() const noexcept { return d_; }

    /// Coefficients are summable with polynomial decay only for d < 0;
    /// limiting-distribution computations require it.
    [[nodiscard]] bool has_summable_decay() const noexcept { return d_ <= 0.0; }

private:
    ArmaModel arma_;
    double d_;
};

/// One constant piece of a piecewise spectral density on the half-open
/// interval [lo, hi).
struct SpectralPiece {
    double lo;
    double hi;
    double alpha;
};

/// Piecewise-constant spectral density. Pieces are sorted and must form a
/// partition of [0, 2pi] with strictly positive levels.
class PiecewiseSpectralDensity {
public:
    /// @throws ValidationError for gaps, overlaps, or non-positive levels.
    explicit PiecewiseSpectralDensity(std::vector<SpectralPiece> pieces);

    [[nodiscard]] const std::vector<SpectralPiece>& pieces() const noexcept { return pieces_; }
    [[nodiscard]] double value(double omega) const;
    [[nodiscard]] bool is_constant() const noexcept;

private:
    std::vector<SpectralPiece> pieces_;
};

/// Truncated MA(infinity) coefficients c_0..c_J together with a decay
/// bound |c_j| <= C (j+1)^{-1-delta}.
struct MaCoefficients {
    std::vector<double> coeffs;
    double decay_exponent = 1.0;  // delta
    double decay_constant = 1.0;  // C

    [[nodiscard]] int horizon() const noexcept { return static_cast<int>(coeffs.size()) - 1; }
};

/**
 * @brief Power-series coefficients of b(z)/a(z), truncated at lag `horizon`.
 *
 * The fitted bound uses delta = 1 (valid for any geometric decay) and the
 * smallest C that covers every stored coefficient.
 */
[[nodiscard]] MaCoefficients ma_coefficients(const ArmaModel& model, int horizon);

/**
 * @brief MA coefficients of a FARIMA model.
 *
 * The fractional filter psi_j = psi_{j-1} (j - 1 + d) / j is convolved with
 * the ARMA expansion. The bound uses delta = -d, matching the (j+1)^{d-1}
 * decay; for d >= 0 the returned delta is not positive and the summability
 * condition fails.
 */
[[nodiscard]] MaCoefficients ma_coefficients(const FarimaModel& model, int horizon);

/// Fractional integration weights psi_0..psi_J of (1 - z)^{-d}.
[[nodiscard]] std::vector<double> fractional_weights(double d, int horizon);

/// gamma(h) = sum_j c_j c_{j+|h|} over the stored coefficients.
[[nodiscard]] double autocovariance(const MaCoefficients& coeffs, int lag);

/// Result of checking a stored decay bound against the coefficients.
struct DecayReport {
    bool holds = true;
    std::optional<int> first_violation;  // smallest offending j
    double max_ratio = 0.0;              // max_j |c_j| (j+1)^{1+delta} / C
    // Envelope of |c_j| (j+1)^{1-d} over j >= 1 (FARIMA only).
    std::optional<double> k1;
    std::optional<double> k2;
};

[[nodiscard]] DecayReport decay_check(const MaCoefficients& coeffs);

/// Adds the FARIMA envelope constants K1, K2 for the given d.
[[nodiscard]] DecayReport decay_check(const MaCoefficients& coeffs, double d);

/**
 * @brief Spectral density f on [0, 2pi] with its derivative.
 *
 * Rational and FARIMA densities are stored as trigonometric polynomials
 *
 *     f(w) = (r_0 + 2 sum r_h cos(h w)) / (s_0 + 2 sum s_h cos(h w)) * (4 sin^2(w/2))^{-d}
 *
 * where r and s are the coefficient autocorrelations of b and a, so f and
 * f' are exact closed forms and f(w) = f(2pi - w) holds by construction.
 */
class SpectralDensity {
public:
    enum class Kind { kRationalArma, kFarima, kPiecewiseConstant, kTabulated };

    static SpectralDensity from_arma(const ArmaModel& model);
    static SpectralDensity from_farima(const FarimaModel& model);
    static SpectralDensity from_piecewise(PiecewiseSpectralDensity pieces);

    /**
     * @brief Periodic C^1 cubic Hermite interpolant of samples f(2 pi k / N),
     * k = 0..N-1, with central-difference slopes.
     *
     * Level-set assumptions are not verified for tabulated data.
     */
    static SpectralDensity tabulated(std::vector<double> samples);

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] double value(double omega) const;
    [[nodiscard]] double derivative(double omega) const;

    /// Piecewise-constant description, when kind() == kPiecewiseConstant.
    [[nodiscard]] const PiecewiseSpectralDensity* piecewise() const noexcept {
        return piecewise_ ? &*piecewise_ : nullptr;
    }

    [[nodiscard]] double fractional_order() const noexcept { return d_; }

private:
    SpectralDensity() = default;

    Kind kind_ = Kind::kRationalArma;
    std::vector<double> numerator_;    // r_0, r_1, ...
    std::vector<double> denominator_;  // s_0, s_1, ...
    double d_ = 0.0;
    std::optional<PiecewiseSpectralDensity> piecewise_;
    std::vector<double> samples_;
    std::vector<double> slopes_;
};

/// Autocorrelation r_h = sum_k p_k p_{k+h} of (1, coeffs...).
[[nodiscard]] std::vector<double> polynomial_autocorrelation(std::span<const double> coeffs);

}  // namespace specmp
