#include "specmp/linear_process.hpp"

#include "specmp/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace specmp {

namespace {

std::vector<double> trim_trailing_zeros(std::vector<double> v) {
    while (!v.empty() && v.back() == 0.0) v.pop_back();
    return v;
}

// Largest modulus among the zeros of z^p + a_1 z^{p-1} + ... + a_p, i.e. the
// reciprocals of the zeros of 1 + a_1 z + ... + a_p z^p.
double reciprocal_root_radius(const std::vector<double>& ar) {
    const auto p = static_cast<Eigen::Index>(ar.size());
    if (p == 0) return 0.0;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index k = 0; k < p; ++k) companion(0, k) = -ar[static_cast<std::size_t>(k)];
    for (Eigen::Index k = 1; k < p; ++k) companion(k, k - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("AR root computation failed");
    }
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

double wrap_angle(double omega) {
    double w = std::fmod(omega, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    if (w >= kTwoPi) w = 0.0;
    return w;
}

// Evaluates r_0 + 2 sum_h r_h cos(h w) and its w-derivative via Chebyshev
// recurrences in x = cos w.
struct TrigValue {
    double value;
    double derivative;
};

TrigValue eval_cosine_series(const std::vector<double>& r, double cos_w, double sin_w) {
    double value = r[0];
    double dsum = 0.0;  // sum h r_h U_{h-1}(x)
    double t_prev = 1.0, t_cur = cos_w;
    double u_prev = 0.0, u_cur = 1.0;  // U_{-1}, U_0
    for (std::size_t h = 1; h < r.size(); ++h) {
        value += 2.0 * r[h] * t_cur;
        dsum += static_cast<double>(h) * r[h] * u_cur;
        const double t_next = 2.0 * cos_w * t_cur - t_prev;
        const double u_next = 2.0 * cos_w * u_cur - u_prev;
        t_prev = t_cur;
        t_cur = t_next;
        u_prev = u_cur;
        u_cur = u_next;
    }
    return {value, -2.0 * sin_w * dsum};
}

}  // namespace

ArmaModel::ArmaModel(std::vector<double> ar, std::vector<double> ma)
    : ar_(std::move(ar)), ma_(std::move(ma)) {}

ArmaModel ArmaModel::from_polynomials(std::vector<double> ar, std::vector<double> ma) {
    for (double v : ar) {
        if (!std::isfinite(v)) throw ValidationError("AR coefficients must be finite");
    }
    for (double v : ma) {
        if (!std::isfinite(v)) throw ValidationError("MA coefficients must be finite");
    }
    ar = trim_trailing_zeros(std::move(ar));
    ma = trim_trailing_zeros(std::move(ma));
    const double radius = reciprocal_root_radius(ar);
    if (radius >= 1.0 - 1e-12) {
        std::ostringstream msg;
        msg << "AR polynomial has a zero inside or on the unit circle (|z| = " << 1.0 / radius
            << "); the process is not causal";
        throw ValidationError(msg.str());
    }
    return ArmaModel(std::move(ar), std::move(ma));
}

ArmaModel ArmaModel::from_recursion(const std::vector<double>& phi, std::vector<double> theta) {
    std::vector<double> ar(phi.size());
    std::transform(phi.begin(), phi.end(), ar.begin(), [](double v) { return -v; });
    return from_polynomials(std::move(ar), std::move(theta));
}

double ArmaModel::min_ar_root_modulus() const {
    const double radius = reciprocal_root_radius(ar_);
    return radius == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / radius;
}

FarimaModel::FarimaModel(ArmaModel arma, double d) : arma_(std::move(arma)), d_(d) {
    if (!(d > -0.5 && d < 0.5)) {
        throw ValidationError("fractional order d must lie in (-1/2, 1/2), got " + std::to_string(d));
    }
}

PiecewiseSpectralDensity::PiecewiseSpectralDensity(std::vector<SpectralPiece> pieces)
    : pieces_(std::move(pieces)) {
    if (pieces_.empty()) throw ValidationError("piecewise density needs at least one piece");
    std::sort(pieces_.begin(), pieces_.end(),
              [](const SpectralPiece& a, const SpectralPiece& b) { return a.lo < b.lo; });
    constexpr double kTol = 1e-9;
    for (const auto& piece : pieces_) {
        if (!(piece.alpha > 0.0) || !std::isfinite(piece.alpha)) {
            throw ValidationError("piecewise levels must be positive and finite");
        }
        if (!(piece.hi > piece.lo)) throw ValidationError("piece interval must have hi > lo");
    }
    if (std::abs(pieces_.front().lo) > kTol || std::abs(pieces_.back().hi - kTwoPi) > kTol) {
        throw ValidationError("pieces must cover [0, 2pi]");
    }
    for (std::size_t k = 1; k < pieces_.size(); ++k) {
        if (std::abs(pieces_[k].lo - pieces_[k - 1].hi) > kTol) {
            throw ValidationError("pieces must be contiguous and non-overlapping");
        }
    }
}

double PiecewiseSpectralDensity::value(double omega) const {
    const double w = wrap_angle(omega);
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), w,
                               [](double x, const SpectralPiece& p) { return x < p.lo; });
    if (it == pieces_.begin()) return pieces_.front().alpha;
    return std::prev(it)->alpha;
}

bool PiecewiseSpectralDensity::is_constant() const noexcept {
    return std::all_of(pieces_.begin(), pieces_.end(),
                       [&](const SpectralPiece& p) { return p.alpha == pieces_.front().alpha; });
}

std::vector<double> polynomial_autocorrelation(std::span<const double> coeffs) {
    std::vector<double> full(coeffs.size() + 1);
    full[0] = 1.0;
    std::copy(coeffs.begin(), coeffs.end(), full.begin() + 1);
    std::vector<double> r(full.size(), 0.0);
    for (std::size_t h = 0; h < full.size(); ++h) {
        for (std::size_t k = 0; k + h < full.size(); ++k) r[h] += full[k] * full[k + h];
    }
    return r;
}

namespace {

double fit_decay_constant(const std::vector<double>& c, double delta) {
    double constant = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
        constant = std::max(constant, std::abs(c[j]) * std::pow(static_cast<double>(j + 1), 1.0 + delta));
    }
    return constant > 0.0 ? constant : 1.0;
}

std::vector<double> arma_expansion(const ArmaModel& model, int horizon) {
    const auto& a = model.ar();
    const auto& b = model.ma();
    std::vector<double> c(static_cast<std::size_t>(horizon) + 1, 0.0);
    c[0] = 1.0;
    for (std::size_t j = 1; j < c.size(); ++j) {
        double v = j <= b.size() ? b[j - 1] : 0.0;
        for (std::size_t k = 1; k <= std::min(j, a.size()); ++k) v -= a[k - 1] * c[j - k];
        c[j] = v;
    }
    return c;
}

}  // namespace

MaCoefficients ma_coefficients(const ArmaModel& model, int horizon) {
    if (horizon < 1) throw ValidationError("MA horizon must be >= 1");
    MaCoefficients out;
    out.coeffs = arma_expansion(model, horizon);
    out.decay_exponent = 1.0;
    out.decay_constant = fit_decay_constant(out.coeffs, out.decay_exponent);
    return out;
}

std::vector<double> fractional_weights(double d, int horizon) {
    std::vector<double> psi(static_cast<std::size_t>(horizon) + 1);
    psi[0] = 1.0;
    for (std::size_t j = 1; j < psi.size(); ++j) {
        const auto jd = static_cast<double>(j);
        psi[j] = psi[j - 1] * (jd - 1.0 + d) / jd;
    }
    return psi;
}

MaCoefficients ma_coefficients(const FarimaModel& model, int horizon) {
    if (horizon < 1) throw ValidationError("MA horizon must be >= 1");
    const auto psi = fractional_weights(model.d(), horizon);
    MaCoefficients out;
    if (model.arma().is_white_noise()) {
        out.coeffs = psi;
    } else {
        const auto arma = arma_expansion(model.arma(), horizon);
        // The ARMA part decays geometrically; skip its underflowed tail.
        std::size_t support = arma.size();
        while (support > 1 && arma[support - 1] == 0.0) --support;
        out.coeffs.assign(psi.size(), 0.0);
        for (std::size_t j = 0; j < psi.size(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k <= std::min(j, support - 1); ++k) acc += arma[k] * psi[j - k];
            out.coeffs[j] = acc;
        }
    }
    out.decay_exponent = model.d() == 0.0 ? 1.0 : -model.d();
    out.decay_constant = fit_decay_constant(out.coeffs, out.decay_exponent);
    return out;
}

double autocovariance(const MaCoefficients& coeffs, int lag) {
    const auto h = static_cast<std::size_t>(std::abs(lag));
    const auto& c = coeffs.coeffs;
    if (h >= c.size()) {
        if (h == c.size()) return 0.0;
        throw ValidationError("autocovariance lag exceeds the coefficient horizon");
    }
    double acc = 0.0;
    for (std::size_t j = 0; j + h < c.size(); ++j) acc += c[j] * c[j + h];
    return acc;
}

DecayReport decay_check(const MaCoefficients& coeffs) {
    DecayReport report;
    const double delta = coeffs.decay_exponent;
    const double constant = coeffs.decay_constant;
    for (std::size_t j = 0; j < coeffs.coeffs.size(); ++j) {
        const double bound = constant * std::pow(static_cast<double>(j + 1), -1.0 - delta);
        const double mag = std::abs(coeffs.coeffs[j]);
        report.max_ratio = std::max(report.max_ratio, mag / bound);
        if (mag > bound * (1.0 + 1e-12) && !report.first_violation) {
            report.first_violation = static_cast<int>(j);
            report.holds = false;
        }
    }
    if (!(delta > 0.0)) report.holds = false;
    return report;
}

DecayReport decay_check(const MaCoefficients& coeffs, double d) {
    DecayReport report = decay_check(coeffs);
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t j = 1; j < coeffs.coeffs.size(); ++j) {
        const double scaled = std::abs(coeffs.coeffs[j]) * std::pow(static_cast<double>(j + 1), 1.0 - d);
        lo = std::min(lo, scaled);
        hi = std::max(hi, scaled);
    }
    if (coeffs.coeffs.size() > 1) {
        report.k1 = lo;
        report.k2 = hi;
    }
    return report;
}

SpectralDensity SpectralDensity::from_arma(const ArmaModel& model) {
    SpectralDensity f;
    f.kind_ = Kind::kRationalArma;
    f.numerator_ = polynomial_autocorrelation(model.ma());
    f.denominator_ = polynomial_autocorrelation(model.ar());
    return f;
}

SpectralDensity SpectralDensity::from_farima(const FarimaModel& model) {
    SpectralDensity f = from_arma(model.arma());
    if (model.d() != 0.0) {
        f.kind_ = Kind::kFarima;
        f.d_ = model.d();
    }
    return f;
}

SpectralDensity SpectralDensity::from_piecewise(PiecewiseSpectralDensity pieces) {
    SpectralDensity f;
    f.kind_ = Kind::kPiecewiseConstant;
    f.piecewise_ = std::move(pieces);
    return f;
}

SpectralDensity SpectralDensity::tabulated(std::vector<double> samples) {
    if (samples.size() < 4) throw ValidationError("tabulated density needs at least 4 samples");
    for (double v : samples) {
        if (!std::isfinite(v) || v < 0.0) throw ValidationError("tabulated density must be finite and >= 0");
    }
    SpectralDensity f;
    f.kind_ = Kind::kTabulated;
    const std::size_t n = samples.size();
    const double h = kTwoPi / static_cast<double>(n);
    f.slopes_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        f.slopes_[k] = (samples[(k + 1) % n] - samples[(k + n - 1) % n]) / (2.0 * h);
    }
    f.samples_ = std::move(samples);
    return f;
}

double SpectralDensity::value(double omega) const {
    switch (kind_) {
        case Kind::kPiecewiseConstant:
            return piecewise_->value(omega);
        case Kind::kTabulated: {
            const std::size_t n = samples_.size();
            const double h = kTwoPi / static_cast<double>(n);
            const double w = wrap_angle(omega);
            const auto k = std::min(static_cast<std::size_t>(w / h), n - 1);
            const double t = (w - static_cast<double>(k) * h) / h;
            const double y0 = samples_[k], y1 = samples_[(k + 1) % n];
            const double m0 = slopes_[k] * h, m1 = slopes_[(k + 1) % n] * h;
            const double t2 = t * t, t3 = t2 * t;
            return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * y1 +
                   (t3 - t2) * m1;
        }
        case Kind::kRationalArma:
        case Kind::kFarima:
            break;
    }
    double w = wrap_angle(omega);
    if (w > kTwoPi / 2) w = kTwoPi - w;
    const double c = std::cos(w), s = std::sin(w);
    const auto num = eval_cosine_series(numerator_, c, s);
    const auto den = eval_cosine_series(denominator_, c, s);
    double f = std::max(num.value, 0.0) / den.value;
    if (kind_ == Kind::kFarima) {
        if (w == 0.0) return d_ < 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        const double half = std::sin(w / 2);
        f *= std::pow(4.0 * half * half, -d_);
    }
    return f;
}

double SpectralDensity::derivative(double omega) const {
    switch (kind_) {
        case Kind::kPiecewiseConstant:
            return 0.0;
        case Kind::kTabulated: {
            const std::size_t n = samples_.size();
            const double h = kTwoPi / static_cast<double>(n);
            const double w = wrap_angle(omega);
            const auto k = std::min(static_cast<std::size_t>(w / h), n - 1);
            const double t = (w - static_cast<double>(k) * h) / h;
            const double y0 = samples_[k], y1 = samples_[(k + 1) % n];
            const double m0 = slopes_[k] * h, m1 = slopes_[(k + 1) % n] * h;
            const double t2 = t * t;
            const double dt = (6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0 +
                              (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * m1;
            return dt / h;
        }
        case Kind::kRationalArma:
        case Kind::kFarima:
            break;
    }
    double w = wrap_angle(omega);
    double sign = 1.0;
    if (w > kTwoPi / 2) {
        w = kTwoPi - w;
        sign = -1.0;
    }
    const double c = std::cos(w), s = std::sin(w);
    const auto num = eval_cosine_series(numerator_, c, s);
    const auto den = eval_cosine_series(denominator_, c, s);
    const double ratio = std::max(num.value, 0.0) / den.value;
    double dratio = (num.derivative * den.value - num.value * den.derivative) / (den.value * den.value);
    if (kind_ == Kind::kFarima) {
        // (4 sin^2(w/2))^{-d} has a cusp at w = 0; report the symmetric value 0.
        if (w == 0.0) return 0.0;
        const double half = std::sin(w / 2);
        const double factor = std::pow(4.0 * half * half, -d_);
        const double cot_half = std::cos(w / 2) / half;
        dratio = dratio * factor + ratio * factor * (-d_) * cot_half;
    }
    return sign * dratio;
}

}  // namespace specmp
