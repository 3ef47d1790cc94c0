#include "specmp/simulator.hpp"

#include "specmp/errors.hpp"
#include "specmp/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace specmp {

InnovationLaw parse_innovation_law(const std::string& name) {
    if (name == "normal") return InnovationLaw::kNormal;
    if (name == "rademacher") return InnovationLaw::kRademacher;
    if (name == "uniform") return InnovationLaw::kUniform;
    throw ValidationError("unknown innovation law \"" + name + "\" (normal, rademacher, uniform)");
}

std::string to_string(InnovationLaw law) {
    switch (law) {
        case InnovationLaw::kNormal: return "normal";
        case InnovationLaw::kRademacher: return "rademacher";
        case InnovationLaw::kUniform: return "uniform";
    }
    return "normal";
}

int SimulationPlan::n() const { return static_cast<int>(std::lround(y * p)); }

bool SimulationPlan::long_memory() const {
    const auto* farima = std::get_if<FarimaModel>(&model);
    return farima != nullptr && farima->d() > 0.0;
}

void SimulationPlan::validate() const {
    if (p < 1) throw ValidationError("p must be >= 1");
    if (!(y > 0.0) || !std::isfinite(y)) throw ValidationError("y must be finite and > 0");
    if (n() < 1) throw ValidationError("n = round(y p) must be >= 1");
    if (replicates < 1) throw ValidationError("replicates must be >= 1");
    if (!std::isfinite(mu)) throw ValidationError("mu must be finite");
    if (const auto* pw = std::get_if<PiecewiseSpectralDensity>(&model); pw && !pw->is_constant()) {
        throw ValidationError("simulation of multi-level piecewise densities is not supported");
    }
}

std::vector<double> simulation_coefficients(const SimulationPlan& plan) {
    plan.validate();
    const int n = plan.n();
    auto coeffs = ma_coefficients(plan.model, std::max(1000, n)).coeffs;
    coeffs.resize(static_cast<std::size_t>(n) + 1);
    return coeffs;
}

namespace {

std::mt19937_64 row_generator(std::uint64_t seed, int replicate, int row) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(row)};
    return std::mt19937_64(seq);
}

template <class Dist>
void fill_row(double* out, std::size_t count, std::mt19937_64& gen, Dist dist) {
    for (std::size_t k = 0; k < count; ++k) out[k] = dist(gen);
}

}  // namespace

RowMatrix draw_innovations(const SimulationPlan& plan, int replicate) {
    plan.validate();
    const auto cols = static_cast<std::size_t>(2 * plan.n());
    RowMatrix z(plan.p, static_cast<Eigen::Index>(cols));
    parallel_for(static_cast<std::size_t>(plan.p), [&](std::size_t i) {
        auto gen = row_generator(plan.seed, replicate, static_cast<int>(i));
        double* row = z.data() + i * cols;
        switch (plan.law) {
            case InnovationLaw::kNormal:
                fill_row(row, cols, gen, std::normal_distribution<double>(0.0, 1.0));
                break;
            case InnovationLaw::kRademacher: {
                std::bernoulli_distribution coin(0.5);
                fill_row(row, cols, gen, [&](std::mt19937_64& g) { return coin(g) ? 1.0 : -1.0; });
                break;
            }
            case InnovationLaw::kUniform: {
                const double a = std::sqrt(3.0);
                fill_row(row, cols, gen, std::uniform_real_distribution<double>(-a, a));
                break;
            }
        }
    });
    return z;
}

RowMatrix convolve_rows(const RowMatrix& innovations, const std::vector<double>& coeffs, double mu) {
    if (innovations.cols() % 2 != 0 || innovations.cols() == 0) {
        throw ValidationError("innovation block must have 2n columns");
    }
    if (coeffs.empty()) throw ValidationError("coefficient vector is empty");
    const Eigen::Index n = innovations.cols() / 2;
    // Lags beyond n are cut; exact-zero tails (underflowed geometric decay) are skipped.
    std::size_t taps = std::min(coeffs.size(), static_cast<std::size_t>(n) + 1);
    while (taps > 1 && coeffs[taps - 1] == 0.0) --taps;

    RowMatrix x(innovations.rows(), n);
    const auto un = static_cast<std::size_t>(n);
    parallel_for(static_cast<std::size_t>(innovations.rows()), [&](std::size_t i) {
        const double* z = innovations.data() + i * 2 * un;
        double* out = x.data() + i * un;
        std::fill(out, out + un, mu);
        // X_t (t = 1..n) sits at out[t-1]; Z_{t-j} sits at z[t - j + n - 1].
        for (std::size_t j = 0; j < taps; ++j) {
            const double c = coeffs[j];
            if (c == 0.0) continue;
            const double* src = z + un - j;
            for (std::size_t t = 0; t < un; ++t) out[t] += c * src[t];
        }
    });
    return x;
}

RowMatrix simulate_matrix(const SimulationPlan& plan, int replicate) {
    return convolve_rows(draw_innovations(plan, replicate), simulation_coefficients(plan), plan.mu);
}

EmpiricalSpectrum sample_cov_eigenvalues(const RowMatrix& x, bool center) {
    const Eigen::Index p = x.rows();
    if (p == 0 || x.cols() == 0) throw ValidationError("data matrix is empty");
    if (!x.allFinite()) throw NumericalError("data matrix contains non-finite entries");
    Eigen::MatrixXd data = x;
    if (center) data.colwise() -= data.rowwise().mean();

    EmpiricalSpectrum out;
    out.trace = data.squaredNorm() / static_cast<double>(p);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p, p);
    s.selfadjointView<Eigen::Lower>().rankUpdate(data, 1.0 / static_cast<double>(p));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "symmetric eigensolver failed for a " << p << "x" << p << " matrix (trace " << out.trace << ")";
        throw NumericalError(msg.str());
    }
    const Eigen::VectorXd& ev = solver.eigenvalues();
    const double floor = -1e-9 * std::max(1.0, std::abs(ev.maxCoeff()));
    out.eigenvalues.resize(static_cast<std::size_t>(p));
    for (Eigen::Index k = 0; k < p; ++k) {
        double v = ev[k];
        if (v < floor) {
            std::ostringstream msg;
            msg << "sample covariance has a negative eigenvalue " << v;
            throw NumericalError(msg.str());
        }
        // Rank-deficient spectra carry roundoff of either sign at zero.
        out.eigenvalues[static_cast<std::size_t>(k)] = std::abs(v) <= -floor ? 0.0 : v;
    }
    std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
    return out;
}

double ecdf(const EmpiricalSpectrum& spectrum, double x) {
    const auto& ev = spectrum.eigenvalues;
    if (ev.empty()) return 0.0;
    const auto count = std::upper_bound(ev.begin(), ev.end(), x) - ev.begin();
    return static_cast<double>(count) / static_cast<double>(ev.size());
}

double ks_distance(const EmpiricalSpectrum& spectrum, const std::function<double(double)>& cdf) {
    const auto& ev = spectrum.eigenvalues;
    const double p = static_cast<double>(ev.size());
    double worst = 0.0;
    std::size_t i = 0;
    while (i < ev.size()) {
        std::size_t j = i;
        while (j < ev.size() && ev[j] == ev[i]) ++j;
        const double f = cdf(ev[i]);
        const double before = static_cast<double>(i) / p;
        const double after = static_cast<double>(j) / p;
        worst = std::max({worst, std::abs(after - f), std::abs(before - f)});
        i = j;
    }
    return worst;
}

double ks_distance(const EmpiricalSpectrum& a, const EmpiricalSpectrum& b) {
    std::vector<double> points = a.eigenvalues;
    points.insert(points.end(), b.eigenvalues.begin(), b.eigenvalues.end());
    double worst = 0.0;
    for (double x : points) worst = std::max(worst, std::abs(ecdf(a, x) - ecdf(b, x)));
    return worst;
}

Histogram histogram(const EmpiricalSpectrum& spectrum, int bins, double lo, double hi, bool separate_zero_atom) {
    if (bins < 1) throw ValidationError("histogram needs at least one bin");
    if (!(hi > lo)) throw ValidationError("histogram range must have hi > lo");
    Histogram h;
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int k = 0; k <= bins; ++k) h.edges[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / bins;
    h.densities.assign(static_cast<std::size_t>(bins), 0.0);
    const auto& ev = spectrum.eigenvalues;
    if (ev.empty()) return h;
    const double total = static_cast<double>(ev.size());
    const double width = (hi - lo) / bins;
    const double zero_tol = 1e-9 * std::max(1.0, ev.back());
    std::size_t zeros = 0;
    for (double v : ev) {
        if (separate_zero_atom && v <= zero_tol) {
            ++zeros;
            continue;
        }
        if (v < lo || v > hi) continue;
        auto k = static_cast<std::size_t>((v - lo) / width);
        k = std::min(k, static_cast<std::size_t>(bins) - 1);
        h.densities[k] += 1.0;
    }
    for (auto& d : h.densities) d /= total * width;
    h.zero_atom = static_cast<double>(zeros) / total;
    return h;
}

double trace_check(const EmpiricalSpectrum& spectrum) {
    double sum = 0.0;
    for (double v : spectrum.eigenvalues) sum += v;
    return std::abs(sum - spectrum.trace) / std::max(1.0, spectrum.trace);
}

std::vector<ReplicateResult> run_simulation(const SimulationPlan& plan) {
    plan.validate();
    const auto coeffs = simulation_coefficients(plan);
    std::vector<ReplicateResult> out;
    out.reserve(static_cast<std::size_t>(plan.replicates));
    for (int r = 0; r < plan.replicates; ++r) {
        const auto x = convolve_rows(draw_innovations(plan, r), coeffs, plan.mu);
        out.push_back({r, plan.seed, sample_cov_eigenvalues(x, plan.center)});
    }
    return out;
}

}  // namespace specmp
