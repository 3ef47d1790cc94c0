#include "specmp/errors.hpp"
#include "specmp/stieltjes.hpp"
#include "specmp/toeplitz_lsd.hpp"

#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace specmp;

namespace {

constexpr double kPi = std::numbers::pi;

SpectralDensity arma11(double phi, double theta) {
    return SpectralDensity::from_arma(ArmaModel::from_recursion({phi}, {theta}));
}

// lambda = lo + (hi - lo)(1 - cos t)/2 cancels the inverse square-root edges, so
// the integrand is bounded. Cancellation in g right at an edge still leaves
// errors around 1e-8 in the integral.
template <class G>
double integrate_over(G g, double lo, double hi) {
    const double half = 0.5 * (hi - lo);
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double t) {
            const double u = std::sin(0.5 * t);
            return g(lo + 2.0 * half * u * u) * half * std::sin(t);
        },
        0.0, kPi, 10, 1e-10);
}

double integrate_closed_form(double phi, double theta) {
    const auto s = arma11_support(phi, theta);
    return integrate_over([&](double l) { return arma11_gamma_density(phi, theta, l); }, s.lower, s.upper);
}

}  // namespace

TEST(SupportBounds, Arma11) {
    const auto s = support_bounds(arma11(0.5, 1.0));
    EXPECT_NEAR(s.lower, 0.0, 1e-12);
    EXPECT_NEAR(s.upper, 16.0, 1e-10);
    EXPECT_FALSE(s.degenerate());
}

TEST(SupportBounds, Ar1) {
    const auto s = support_bounds(arma11(0.5, 0.0));
    EXPECT_NEAR(s.lower, 4.0 / 9.0, 1e-12);
    EXPECT_NEAR(s.upper, 4.0, 1e-12);
    EXPECT_NEAR(s.argmin, kPi, 1e-6);
}

TEST(SupportBounds, WhiteNoiseIsDegenerate) {
    const auto s = support_bounds(SpectralDensity::from_arma(ArmaModel{}));
    EXPECT_EQ(s.lower, 1.0);
    EXPECT_EQ(s.upper, 1.0);
    EXPECT_TRUE(s.degenerate());
    const auto lsd = make_gamma_lsd(SpectralDensity::from_arma(ArmaModel{}));
    ASSERT_TRUE(lsd.is_atomic());
    ASSERT_EQ(lsd.atoms().size(), 1u);
    EXPECT_EQ(lsd.atoms()[0].level, 1.0);
    EXPECT_EQ(lsd.atoms()[0].weight, 1.0);
}

TEST(SupportBounds, ClosedFormEndpoints) {
    for (double phi : {-0.8, -0.4, 0.0, 0.4, 0.8}) {
        for (double theta : {-0.8, -0.4, 0.4, 0.8}) {
            const auto s = support_bounds(arma11(phi, theta));
            const auto c = arma11_support(phi, theta);
            EXPECT_NEAR(s.lower, c.lower, 1e-10 * std::max(1.0, c.upper));
            EXPECT_NEAR(s.upper, c.upper, 1e-10 * std::max(1.0, c.upper));
        }
    }
}

TEST(LevelSet, Ma1MidLevel) {
    const auto ls = level_set_roots(arma11(0.0, 1.0), 2.0);
    ASSERT_EQ(ls.roots.size(), 2u);
    EXPECT_NEAR(ls.roots[0], kPi / 2, 1e-12);
    EXPECT_NEAR(ls.roots[1], 3 * kPi / 2, 1e-12);
    EXPECT_FALSE(ls.tangential[0]);
    EXPECT_FALSE(ls.tangential[1]);
}

TEST(LevelSet, Ma1MaximumIsSingleTangentialRoot) {
    const auto ls = level_set_roots(arma11(0.0, 1.0), 4.0);
    ASSERT_EQ(ls.roots.size(), 1u);
    EXPECT_NEAR(std::min(ls.roots[0], kTwoPi - ls.roots[0]), 0.0, 1e-6);
    EXPECT_TRUE(ls.tangential[0]);
}

TEST(LevelSet, Ar1MatchesArccos) {
    const auto ls = level_set_roots(arma11(0.5, 0.0), 1.0);
    ASSERT_EQ(ls.roots.size(), 2u);
    EXPECT_NEAR(ls.roots[0], std::acos(0.25), 1e-11);
    EXPECT_NEAR(ls.roots[1], kTwoPi - std::acos(0.25), 1e-11);
    EXPECT_NEAR(ls.roots[0], 1.31812, 1e-5);
    EXPECT_NEAR(ls.roots[1], 4.96507, 1e-5);
}

TEST(LevelSet, RootsSatisfyLevelEquation) {
    // AR(2) with complex AR roots has an interior peak, so some levels have four roots.
    const auto f = SpectralDensity::from_arma(ArmaModel::from_recursion({0.5, -0.8}, {0.3}));
    const LevelSetFinder finder(f);
    const auto& s = finder.support();
    std::size_t most = 0;
    for (int k = 1; k < 40; ++k) {
        const double lambda = s.lower + (s.upper - s.lower) * k / 40.0;
        const auto ls = finder.roots(lambda);
        most = std::max(most, ls.roots.size());
        EXPECT_TRUE(std::is_sorted(ls.roots.begin(), ls.roots.end()));
        for (double w : ls.roots) EXPECT_LE(std::abs(f.value(w) - lambda), std::max(ls.tolerance, 1e-9));
    }
    EXPECT_EQ(most, 4u);
    EXPECT_FALSE(finder.critical_values().empty());
}

TEST(GammaDensity, Ma1Center) {
    const auto g = gamma_density(arma11(0.0, 1.0), 2.0);
    EXPECT_FALSE(g.singular);
    EXPECT_NEAR(g.value, 1.0 / (2 * kPi), 1e-12);
    EXPECT_NEAR(g.value, 0.159155, 1e-6);
}

TEST(GammaDensity, Ar1MatchesClosedForm) {
    const auto g = gamma_density(arma11(0.5, 0.0), 1.0);
    EXPECT_NEAR(g.value, arma11_gamma_density(0.5, 0.0, 1.0), 1e-10);
}

TEST(GammaDensity, RejectsDegenerateOrOutsideSupport) {
    EXPECT_THROW((void)gamma_density(SpectralDensity::from_arma(ArmaModel{}), 1.0), ValidationError);
    EXPECT_THROW((void)gamma_density(arma11(0.5, 0.0), 5.0), ValidationError);
}

TEST(GammaCdf, Ma1Half) { EXPECT_NEAR(gamma_cdf(arma11(0.0, 1.0), 2.0), 0.5, 1e-12); }

TEST(GammaCdf, ExactOutsideSupport) {
    const auto f = arma11(0.5, 1.0);
    EXPECT_EQ(gamma_cdf(f, 16.0), 1.0);
    EXPECT_EQ(gamma_cdf(f, 100.0), 1.0);
    EXPECT_EQ(gamma_cdf(f, -1.0), 0.0);
}

TEST(GammaCdf, Ar1AgreesWithArccosAndQuadrature) {
    const auto f = arma11(0.5, 0.0);
    const double expected = (kTwoPi - 2 * std::acos(0.25)) / kTwoPi;
    EXPECT_NEAR(gamma_cdf(f, 1.0), expected, 1e-12);
    EXPECT_NEAR(expected, 0.58043, 1e-5);
    const LevelSetFinder finder(f);
    const double integral = integrate_over([&](double l) { return finder.gamma_density(l).value; }, 4.0 / 9.0, 1.0);
    EXPECT_NEAR(integral, expected, 1e-7);
}

TEST(GammaProperty, CdfDerivativeIsDensity) {
    for (auto f : {arma11(0.5, 1.0), arma11(-0.3, 0.6),
                   SpectralDensity::from_arma(ArmaModel::from_recursion({0.5, -0.8}, {0.3}))}) {
        const LevelSetFinder finder(f);
        const auto& s = finder.support();
        const double h = 1e-5 * (s.upper - s.lower);
        for (int k = 1; k <= 50; ++k) {
            const double lambda = s.lower + (s.upper - s.lower) * k / 51.0;
            const auto g = finder.gamma_density(lambda);
            if (g.singular) continue;
            const double fd = (finder.gamma_cdf(lambda + h) - finder.gamma_cdf(lambda - h)) / (2 * h);
            EXPECT_NEAR(fd, g.value, 1e-4 * std::max(1.0, g.value)) << lambda;
        }
    }
}

TEST(GammaProperty, GenericMatchesClosedForm) {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> coef(-0.9, 0.9);
    for (int trial = 0; trial < 20; ++trial) {
        const double phi = coef(gen), theta = coef(gen);
        const LevelSetFinder finder(arma11(phi, theta));
        const auto s = arma11_support(phi, theta);
        double worst = 0.0;
        for (int k = 1; k < 100; ++k) {
            const double lambda = s.lower + (s.upper - s.lower) * (0.02 + 0.96 * k / 100.0);
            worst = std::max(worst, std::abs(finder.gamma_density(lambda).value -
                                             arma11_gamma_density(phi, theta, lambda)));
        }
        EXPECT_LE(worst, 1e-8) << phi << " " << theta;
    }
}

TEST(GammaProperty, ClosedFormIntegratesToOne) {
    for (double phi : {-0.8, -0.4, 0.0, 0.4, 0.8}) {
        for (double theta : {-0.8, -0.4, 0.0, 0.4, 0.8}) {
            if (phi + theta == 0.0) continue;  // cancels to white noise
            EXPECT_NEAR(integrate_closed_form(phi, theta), 1.0, 1e-6) << phi << " " << theta;
        }
    }
}

TEST(GammaProperty, LsdQuadratureIntegratesToOne) {
    for (double phi : {-0.8, 0.0, 0.8}) {
        for (double theta : {-0.8, 0.4}) {
            const auto lsd = make_gamma_lsd(arma11(phi, theta));
            double mass = 0.0, mean = 0.0;
            for (const auto& node : lsd.discretization()) {
                mass += node.weight;
                mean += node.weight * node.level;
            }
            EXPECT_NEAR(mass, 1.0, 1e-6);
            // The mean of F^Gamma is gamma(0).
            const auto c = ma_coefficients(ArmaModel::from_recursion({phi}, {theta}), 2000);
            EXPECT_NEAR(mean, autocovariance(c, 0), 1e-6);
        }
    }
}

TEST(Arma11ClosedForm, PrintedVersusCorrectedNormalization) {
    // Without the factor |(theta + phi)(1 + theta phi)| the closed form only
    // integrates to one when that factor is one; the ratio is exactly it.
    auto printed = [](double phi, double theta, double l) {
        return 1.0 / (kPi * std::abs(theta + phi * l) *
                      std::sqrt(((1 + theta) * (1 + theta) - l * (1 - phi) * (1 - phi)) *
                                (l * (1 + phi) * (1 + phi) - (1 - theta) * (1 - theta))));
    };
    for (auto [phi, theta] : {std::pair{0.5, 0.0}, std::pair{0.5, 1.0}, std::pair{-0.3, 0.6}}) {
        const auto s = arma11_support(phi, theta);
        const double l = 0.5 * (s.lower + s.upper);
        EXPECT_NEAR(arma11_gamma_density(phi, theta, l) / printed(phi, theta, l),
                    std::abs((theta + phi) * (1 + theta * phi)), 1e-12);
    }
    EXPECT_NEAR(arma11_gamma_density(0.0, 1.0, 2.0), 1.0 / (2 * kPi), 1e-14);
}

TEST(Arma11ClosedForm, AgreesWithGenericAr1) {
    EXPECT_NEAR(arma11_gamma_density(0.5, 0.0, 1.0), gamma_density(arma11(0.5, 0.0), 1.0).value, 1e-10);
}

TEST(Arma11ClosedForm, DivergesAtUpperEdge) {
    // Inverse square-root rate: g(16 - gap) sqrt(gap) settles to a constant.
    auto scaled = [](double gap) { return arma11_gamma_density(0.5, 1.0, 16.0 - gap) * std::sqrt(gap); };
    EXPECT_GT(arma11_gamma_density(0.5, 1.0, 16.0 - 1e-8), arma11_gamma_density(0.5, 1.0, 16.0 - 1e-4));
    EXPECT_NEAR(scaled(1e-6), scaled(1e-8), 1e-3 * scaled(1e-8));
}

TEST(Arma11ClosedForm, RejectsDomainViolations) {
    EXPECT_THROW((void)arma11_gamma_density(0.0, 0.0, 1.0), ValidationError);
    EXPECT_THROW((void)arma11_gamma_density(1.0, 0.5, 1.0), ValidationError);
    EXPECT_THROW((void)arma11_gamma_density(0.5, 1.0, 17.0), ValidationError);
}

TEST(AtomicLsd, SinglePiece) {
    const auto lsd = atomic_lsd(PiecewiseSpectralDensity({{0, kTwoPi, 1.0}}));
    ASSERT_EQ(lsd.atoms().size(), 1u);
    EXPECT_EQ(lsd.atoms()[0].level, 1.0);
    EXPECT_EQ(lsd.atoms()[0].weight, 1.0);
}

TEST(AtomicLsd, TwoHalves) {
    const auto lsd = atomic_lsd(PiecewiseSpectralDensity({{0, kPi, 1.0}, {kPi, kTwoPi, 2.0}}));
    ASSERT_EQ(lsd.atoms().size(), 2u);
    EXPECT_EQ(lsd.atoms()[0].level, 1.0);
    EXPECT_NEAR(lsd.atoms()[0].weight, 0.5, 1e-15);
    EXPECT_EQ(lsd.atoms()[1].level, 2.0);
    EXPECT_NEAR(lsd.atoms()[1].weight, 0.5, 1e-15);
    EXPECT_EQ(lsd.atoms()[0].weight + lsd.atoms()[1].weight, 1.0);
}

TEST(AtomicLsd, MergesEqualLevels) {
    const auto lsd = atomic_lsd(PiecewiseSpectralDensity(
        {{0, kPi / 2, 3.0}, {kPi / 2, kPi, 1.0}, {kPi, 3 * kPi / 2, 3.0}, {3 * kPi / 2, kTwoPi, 1.0}}));
    ASSERT_EQ(lsd.atoms().size(), 2u);
    EXPECT_EQ(lsd.atoms()[0].level, 1.0);
    EXPECT_NEAR(lsd.atoms()[0].weight, 0.5, 1e-15);
    EXPECT_EQ(lsd.atoms()[1].level, 3.0);
    EXPECT_NEAR(lsd.atoms()[1].weight, 0.5, 1e-15);
}

TEST(AtomicLsd, WeightsSumExactlyToOne) {
    std::vector<SpectralPiece> pieces;
    const int k = 7;
    for (int j = 0; j < k; ++j) pieces.push_back({kTwoPi * j / k, kTwoPi * (j + 1) / k, 1.0 + j % 3});
    const auto lsd = atomic_lsd(PiecewiseSpectralDensity(pieces));
    double sum = 0.0;
    for (const auto& a : lsd.atoms()) sum += a.weight;
    EXPECT_EQ(sum, 1.0);
    EXPECT_TRUE(std::is_sorted(lsd.atoms().begin(), lsd.atoms().end(),
                               [](const LsdAtom& a, const LsdAtom& b) { return a.level < b.level; }));
}

TEST(AtomicLsd, RejectsNonPartition) {
    EXPECT_THROW(PiecewiseSpectralDensity({{0, 1.0, 1.0}, {2.0, kTwoPi, 2.0}}), ValidationError);
}

TEST(GammaLsd, FarimaSupportStartsAtZero) {
    const FarimaModel model(ArmaModel{}, -0.25);
    const auto lsd = make_gamma_lsd(LinearProcessModel{model});
    EXPECT_FALSE(lsd.is_atomic());
    EXPECT_NEAR(lsd.lower(), 0.0, 1e-12);
    EXPECT_NEAR(lsd.upper(), std::sqrt(2.0), 1e-10);
    double mass = 0.0;
    for (const auto& node : lsd.discretization()) mass += node.weight;
    EXPECT_NEAR(mass, 1.0, 1e-6);
    EXPECT_THROW((void)make_gamma_lsd(LinearProcessModel{FarimaModel(ArmaModel{}, 0.25)}), ValidationError);
}

TEST(GammaLsd, IntegralTermAgreesWithClosedForm) {
    const auto lsd = make_gamma_lsd(arma11(0.5, 1.0));
    for (Complex m : {Complex(0.3, 1.0), Complex(-0.2, 0.05), Complex(1.0, 0.01), Complex(-0.05, 0.2)}) {
        const auto t = lsd.integral_term(m);
        const Complex exact = arma11_integral_term(0.5, 1.0, m);
        EXPECT_LE(std::abs(t.value - exact), 1e-10 * std::max(1.0, std::abs(exact))) << m;
        // Derivative against a central difference in m.
        const Complex h(1e-6 * std::abs(m), 0.0);
        const Complex fd = (lsd.integral_term(m + h).value - lsd.integral_term(m - h).value) / (2.0 * h);
        EXPECT_LE(std::abs(t.derivative - fd), 1e-5 * std::max(1.0, std::abs(fd))) << m;
    }
}

TEST(GammaLsd, AtomicIntegralTermIsFiniteSum) {
    const auto lsd = GammaLsd::atomic({{2.0, 0.5}, {1.0, 0.5}});
    const Complex m(0.1, 0.4);
    const Complex expected = 0.5 * 1.0 / (1.0 + m) + 0.5 * 2.0 / (1.0 + 2.0 * m);
    EXPECT_LE(std::abs(lsd.integral_term(m).value - expected), 1e-15);
}

TEST(Szego, ToeplitzSpectrumMatchesGammaCdf) {
    const int n = 512;
    const auto c = ma_coefficients(ArmaModel::from_recursion({}, {0.5}), 1);
    Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = std::max(0, i - 1); j <= std::min(n - 1, i + 1); ++j) gamma(i, j) = autocovariance(c, i - j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma, Eigen::EigenvaluesOnly);
    std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + n);
    std::sort(ev.begin(), ev.end());
    const LevelSetFinder finder(arma11(0.0, 0.5));
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        const double f = finder.gamma_cdf(ev[static_cast<std::size_t>(i)]);
        ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
    }
    EXPECT_LE(ks, 0.05);
}
