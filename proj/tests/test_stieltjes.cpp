#include "specmp/errors.hpp"
#include "specmp/model_spec.hpp"
#include "specmp/stieltjes.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

using namespace specmp;

namespace {

constexpr double kPi = std::numbers::pi;

using Poly = std::vector<Complex>;  // ascending powers

Poly multiply(const Poly& a, const Poly& b) {
    Poly out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

Poly add(Poly a, const Poly& b) {
    if (a.size() < b.size()) a.resize(b.size(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
    return a;
}

// Roots as eigenvalues of the companion matrix.
std::vector<Complex> polynomial_roots(Poly c) {
    while (std::abs(c.back()) == 0.0) c.pop_back();
    const auto n = static_cast<Eigen::Index>(c.size()) - 1;
    Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(n, n);
    for (Eigen::Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) companion(i, n - 1) = -c[static_cast<std::size_t>(i)] / c.back();
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(companion, false);
    return {es.eigenvalues().data(), es.eigenvalues().data() + n};
}

// Clears denominators in 1/m = -z + y sum w_j a_j / (1 + a_j m):
// P(m) (1 + z m) - y m sum_j w_j a_j prod_{k != j} (1 + a_k m) = 0.
std::vector<Complex> upper_roots(const std::vector<LsdAtom>& atoms, double y, Complex z) {
    Poly prod{1.0};
    for (const auto& a : atoms) prod = multiply(prod, {1.0, a.level});
    Poly eq = multiply(prod, {1.0, z});
    for (std::size_t j = 0; j < atoms.size(); ++j) {
        Poly term{0.0, -y * atoms[j].weight * atoms[j].level};
        for (std::size_t k = 0; k < atoms.size(); ++k)
            if (k != j) term = multiply(term, {1.0, atoms[k].level});
        eq = add(eq, term);
    }
    std::vector<Complex> out;
    for (Complex r : polynomial_roots(eq))
        if (r.imag() > 0.0) out.push_back(r);
    return out;
}

GammaLsd arma_lsd(double phi, double theta) {
    return make_gamma_lsd(SpectralDensity::from_arma(ArmaModel::from_recursion({phi}, {theta})));
}

double mp_density(double y, double x) {
    const double lo = (1 - std::sqrt(y)) * (1 - std::sqrt(y));
    const double hi = (1 + std::sqrt(y)) * (1 + std::sqrt(y));
    if (x <= lo || x >= hi) return 0.0;
    return std::sqrt((hi - x) * (x - lo)) / (2 * kPi * x);
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(AspectRatio, Validates) {
    EXPECT_THROW(AspectRatio(0.0), ValidationError);
    EXPECT_THROW(AspectRatio(-1.0), ValidationError);
    EXPECT_THROW(AspectRatio(std::numeric_limits<double>::infinity()), ValidationError);
    EXPECT_EQ(AspectRatio(3.0).value(), 3.0);
}

TEST(MpStieltjes, QuadraticOracle) {
    const Complex m = mp_stieltjes(AspectRatio(1.0), {0.0, 1.0});
    const auto roots = upper_roots({{1.0, 1.0}}, 1.0, {0.0, 1.0});
    ASSERT_EQ(roots.size(), 1u);
    EXPECT_LE(std::abs(m - roots[0]), 1e-14);
    EXPECT_NEAR(m.real(), 0.30025, 1e-5);
    EXPECT_NEAR(m.imag(), 0.62481, 1e-5);
}

TEST(MpStieltjes, LargeZAsymptotics) {
    // m = -1/z - y/z^2 + O(|z|^-3); the leading term alone is within 2e-3 only when y <= 2.
    const Complex z(0.0, 1000.0);
    for (double y : {0.5, 1.0, 3.0}) {
        const Complex m = mp_stieltjes(AspectRatio(y), z);
        if (y <= 2.0) {
            EXPECT_LE(std::abs(m + 1.0 / z), 2e-3 * std::abs(1.0 / z));
        }
        EXPECT_LE(std::abs(m + 1.0 / z + y / (z * z)), 4.0 * (1 + y) * (1 + y) / std::pow(std::abs(z), 3));
    }
}

TEST(MpStieltjes, RejectsRealAxis) { EXPECT_THROW((void)mp_stieltjes(AspectRatio(1.0), {1.0, 0.0}), ValidationError); }

TEST(SolveFixedPoint, SingleAtomMatchesQuadratic) {
    const auto lsd = GammaLsd::atomic({{1.0, 1.0}});
    const auto s = solve_fixed_point(lsd, AspectRatio(1.0), {0.0, 1.0});
    EXPECT_NEAR(s.m.real(), 0.30025, 1e-5);
    EXPECT_NEAR(s.m.imag(), 0.62481, 1e-5);
    EXPECT_LE(s.residual, 1e-10);
    EXPECT_GT(s.iterations, 0);
}

TEST(SolveFixedPoint, TwoAtomsMatchCubicRoot) {
    const std::vector<LsdAtom> atoms{{1.0, 0.5}, {2.0, 0.5}};
    const Complex z(1.0, 1.0);
    const auto roots = upper_roots(atoms, 1.0, z);
    ASSERT_EQ(roots.size(), 1u);
    const auto s = solve_fixed_point(GammaLsd::atomic(atoms), AspectRatio(1.0), z);
    EXPECT_LE(std::abs(s.m - roots[0]), 1e-10);
}

TEST(SolveFixedPoint, AtomicMatchesPolynomialAcrossPlane) {
    const std::vector<LsdAtom> atoms{{0.5, 0.2}, {1.0, 0.3}, {4.0, 0.5}};
    const auto lsd = GammaLsd::atomic(atoms);
    for (double y : {0.5, 2.0}) {
        for (double x : {-1.0, 0.3, 1.5, 4.0, 9.0}) {
            for (double v : {1.0, 0.1, 0.01}) {
                const Complex z(x, v);
                const auto s = solve_fixed_point(lsd, AspectRatio(y), z);
                const auto roots = upper_roots(atoms, y, z);
                double best = std::numeric_limits<double>::infinity();
                for (Complex r : roots) best = std::min(best, std::abs(r - s.m));
                EXPECT_LE(best, 1e-8 * std::max(1.0, std::abs(s.m))) << z << " y=" << y;
            }
        }
    }
}

TEST(SolveFixedPoint, LargeZAsymptotics) {
    const Complex z(0.0, 1000.0);
    for (const auto& lsd : {GammaLsd::atomic({{1.0, 1.0}}), arma_lsd(0.5, 1.0), arma_lsd(0.0, 0.5)}) {
        double gamma0 = 0.0;
        for (const auto& node : lsd.discretization()) gamma0 += node.weight * node.level;
        for (double y : {0.5, 1.0, 3.0}) {
            const auto s = solve_fixed_point(lsd, AspectRatio(y), z);
            const double mean = y * gamma0;
            if (mean <= 2.0) {
                EXPECT_LE(std::abs(s.m + 1.0 / z), 2e-3 * std::abs(1.0 / z)) << y;
            }
            const double c = 4.0 * (1 + mean) * (1 + mean) * (1 + lsd.upper());
            EXPECT_LE(std::abs(s.m + 1.0 / z + mean / (z * z)), c / std::pow(std::abs(z), 3)) << y;
        }
    }
}

TEST(SolveFixedPoint, RejectsBadInput) {
    const auto lsd = GammaLsd::atomic({{1.0, 1.0}});
    EXPECT_THROW((void)solve_fixed_point(lsd, AspectRatio(1.0), {1.0, 0.0}), ValidationError);
    EXPECT_THROW((void)solve_fixed_point(lsd, AspectRatio(1.0), {1.0, -1.0}), ValidationError);
    SolverConfig bad;
    bad.max_iter = 0;
    EXPECT_THROW((void)solve_fixed_point(lsd, AspectRatio(1.0), {1.0, 1.0}, bad), ValidationError);
}

TEST(SolveFixedPoint, SingleAtomEqualsMp) {
    const auto lsd = atomic_lsd(PiecewiseSpectralDensity({{0.0, kTwoPi, 1.0}}));
    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> re(-1.0, 6.0), logim(-2.0, 1.0);
    for (double y : {0.5, 1.0, 3.0}) {
        for (int k = 0; k < 30; ++k) {
            const Complex z(re(gen), std::pow(10.0, logim(gen)));
            const auto s = solve_fixed_point(lsd, AspectRatio(y), z);
            EXPECT_LE(std::abs(s.m - mp_stieltjes(AspectRatio(y), z)), 1e-10) << z;
        }
    }
}

TEST(Arma11Residual, GeneralSolverZeroesClosedForm) {
    const auto lsd = arma_lsd(0.5, 1.0);
    const Complex z(1.0, 0.1);
    const auto s = solve_fixed_point(lsd, AspectRatio(3.0), z);
    EXPECT_LE(std::abs(arma11_residual(0.5, 1.0, 3.0, z, s.m)), 1e-6);
}

TEST(Arma11Residual, WhiteNoiseReducesToMp) {
    for (Complex z : {Complex(0.5, 0.2), Complex(2.0, 1.0), Complex(-1.0, 0.01)}) {
        const Complex m = mp_stieltjes(AspectRatio(2.0), z);
        EXPECT_LE(std::abs(arma11_residual(0.0, 0.0, 2.0, z, m)), 1e-12);
    }
}

TEST(Arma11Residual, RejectsNonSolution) {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(0.05, 2.0);
    for (int k = 0; k < 20; ++k) {
        const Complex m(u(gen) - 1.0, u(gen));
        EXPECT_GT(std::abs(arma11_residual(0.5, 1.0, 3.0, {1.0, 0.1}, m)), 1e-3);
    }
}

TEST(Arma11Residual, BranchIsContinuousAcrossPlane) {
    // The closed form must agree with the frequency-domain integral on all of C+.
    const auto lsd = arma_lsd(-0.6, 0.8);
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> re(-3.0, 3.0), logim(-3.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        const Complex m(re(gen), std::pow(10.0, logim(gen)));
        const Complex exact = arma11_integral_term(-0.6, 0.8, m);
        EXPECT_LE(std::abs(lsd.integral_term(m).value - exact), 1e-9 * std::max(1.0, std::abs(exact))) << m;
    }
}

TEST(SolverProperty, UniqueFromTwoInitialGuesses) {
    std::vector<GammaLsd> models{GammaLsd::atomic({{1.0, 1.0}}), GammaLsd::atomic({{1.0, 0.5}, {2.0, 0.5}}),
                                 arma_lsd(0.5, 1.0), arma_lsd(-0.4, 0.3),
                                 make_gamma_lsd(LinearProcessModel{FarimaModel(ArmaModel{}, -0.25)})};
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> re(-1.0, 6.0), logim(-2.0, 0.5), logy(-1.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        const auto& lsd = models[static_cast<std::size_t>(k) % models.size()];
        const Complex z(re(gen), std::pow(10.0, logim(gen)));
        const AspectRatio y(std::pow(3.0, logy(gen)));
        SolverConfig a, b;
        a.initial_guess = -1.0 / z;
        b.initial_guess = Complex(0.0, 1.0);
        const auto sa = solve_fixed_point(lsd, y, z, a);
        const auto sb = solve_fixed_point(lsd, y, z, b);
        EXPECT_GT(sa.m.imag(), 0.0);
        EXPECT_GT(sb.m.imag(), 0.0);
        EXPECT_LE(std::abs(sa.m - sb.m), 1e-8) << "case " << k << " z=" << z << " y=" << y.value();
    }
}

TEST(SolverProperty, ImaginaryPartPositiveAlongVerticalLines) {
    const auto lsd = arma_lsd(0.5, 1.0);
    for (double x : {0.01, 0.5, 2.0, 10.0, 40.0}) {
        for (double eps : {1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
            const auto s = solve_fixed_point(lsd, AspectRatio(3.0), {x, eps});
            EXPECT_GT(s.m.imag(), 0.0) << x << " " << eps;
            // Im(z m) >= 0 as well for a measure on [0, inf).
            EXPECT_GE((Complex(x, eps) * s.m).imag(), -1e-10) << x << " " << eps;
        }
    }
}

TEST(InvertToDensity, MpPointValues) {
    const auto lsd = GammaLsd::atomic({{1.0, 1.0}});
    const auto d = invert_to_density(lsd, AspectRatio(1.0), {2.0, 5.0});
    EXPECT_NEAR(d.values[0], 1.0 / (2 * kPi), 1e-4);
    EXPECT_LE(d.values[1], 1e-4);
    EXPECT_GE(d.values[1], 0.0);
    EXPECT_EQ(d.mass_at_zero, 0.0);
}

TEST(InvertToDensity, MpCurve) {
    const auto lsd = GammaLsd::atomic({{1.0, 1.0}});
    for (double y : {0.5, 1.0, 3.0}) {
        const auto grid = default_density_grid(lsd, AspectRatio(y), 256);
        const auto d = invert_to_density(lsd, AspectRatio(y), grid);
        EXPECT_NEAR(d.mass_at_zero, std::max(0.0, 1.0 - y), 1e-15);
        for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(d.values[i], mp_density(y, grid[i]), 1e-3) << grid[i];
        EXPECT_NEAR(d.cumulative.back(), 1.0, 1e-3);
    }
}

TEST(InvertToDensity, RejectsBadGrid) {
    const auto lsd = GammaLsd::atomic({{1.0, 1.0}});
    EXPECT_THROW((void)invert_to_density(lsd, AspectRatio(1.0), {}), ValidationError);
    EXPECT_THROW((void)invert_to_density(lsd, AspectRatio(1.0), {1.0, 1.0}), ValidationError);
    EXPECT_THROW((void)invert_to_density(lsd, AspectRatio(1.0), {0.0, 1.0}), ValidationError);
    InversionConfig cfg;
    cfg.eps_schedule = {1e-3, -1e-3};
    EXPECT_THROW((void)invert_to_density(lsd, AspectRatio(1.0), {1.0}, cfg), ValidationError);
}

TEST(LsdCdf, MpValues) {
    const auto lsd = GammaLsd::atomic({{1.0, 1.0}});
    auto d = invert_to_density(lsd, AspectRatio(1.0), default_density_grid(lsd, AspectRatio(1.0)));
    EXPECT_EQ(lsd_cdf(d, 0.0), d.mass_at_zero);
    EXPECT_NEAR(lsd_cdf(d, 4.0), 1.0, 2e-3);
    // Closed form of the integral of the y = 1 density over (0, 1].
    EXPECT_NEAR(lsd_cdf(d, 1.0), (2 * kPi / 3 + std::sqrt(3.0)) / (2 * kPi), 2e-3);
    double previous = 0.0;
    for (int k = 0; k <= 500; ++k) {
        const double v = lsd_cdf(d, 4.3 * k / 500.0);
        EXPECT_GE(v, previous);
        previous = v;
    }
}

TEST(LsdCdf, AtomAtZeroForSmallAspectRatio) {
    const auto lsd = GammaLsd::atomic({{1.0, 1.0}});
    auto d = invert_to_density(lsd, AspectRatio(0.5), default_density_grid(lsd, AspectRatio(0.5)));
    EXPECT_NEAR(lsd_cdf(d, 0.0), 0.5, 1e-12);
    EXPECT_NEAR(lsd_cdf(d, 0.05), 0.5, 1e-6);
    EXPECT_NEAR(lsd_cdf(d, 3.0), 1.0, 1e-3);
}

TEST(IntervalMass, MatchesClosedFormCdf) {
    const auto lsd = GammaLsd::atomic({{1.0, 1.0}});
    EXPECT_NEAR(interval_mass(lsd, AspectRatio(1.0), 1.0), (2 * kPi / 3 + std::sqrt(3.0)) / (2 * kPi), 1e-8);
    EXPECT_NEAR(interval_mass(lsd, AspectRatio(0.5), 0.05), 0.5, 1e-8);
}

TEST(DensityProperty, MassConservationForShippedModels) {
    const std::filesystem::path dir(SPECMP_MODELS_DIR);
    int checked = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto model = parse_model_spec(read_file(entry.path()));
        const auto lsd = make_gamma_lsd(model);
        for (double y : {0.5, 1.0, 3.0}) {
            const auto d = invert_to_density(lsd, AspectRatio(y), default_density_grid(lsd, AspectRatio(y)));
            const double total = d.cumulative.back();
            EXPECT_GE(total, 0.997) << entry.path().filename() << " y=" << y;
            EXPECT_LE(total, 1.003) << entry.path().filename() << " y=" << y;
            EXPECT_NEAR(d.mass_at_zero, std::max(0.0, 1.0 - y), 1e-15);
            ++checked;
        }
    }
    EXPECT_GE(checked, 18);
}

TEST(DensityProperty, TrapezoidMassForBoundedDensities) {
    // Away from the hard edge at zero the plain trapezoid rule is enough.
    for (auto [lsd, y] : {std::pair{GammaLsd::atomic({{1.0, 1.0}}), 0.5}, std::pair{arma_lsd(0.5, 0.0), 0.5}}) {
        const auto grid = default_density_grid(lsd, AspectRatio(y), 2048);
        const auto d = invert_to_density(lsd, AspectRatio(y), grid);
        double sum = 0.0;
        for (std::size_t i = 1; i < grid.size(); ++i) sum += 0.5 * (d.values[i] + d.values[i - 1]) * (grid[i] - grid[i - 1]);
        EXPECT_NEAR(sum + d.mass_at_zero, 1.0, 1e-3);
    }
}
