#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "medsens/quadrature.hpp"

using namespace medsens;

namespace {

// analytic Gaussian moments: int x^k e^{-x^2} dx = Gamma((k+1)/2) for even k
double gaussian_moment(int k) {
    if (k % 2 == 1) return 0.0;
    return std::tgamma((k + 1) / 2.0);
}

double integrate_monomial(const QuadratureRule& rule, int k) {
    double acc = 0.0;
    for (int i = 0; i < rule.order; ++i) {
        acc += rule.weights[i] * std::pow(rule.nodes[i], k);
    }
    return acc;
}

}  // namespace

TEST_CASE("closed forms for tiny orders") {
    QuadratureRule one = gauss_hermite_rule(1);
    CHECK(one.nodes[0] == 0.0);
    CHECK(one.weights[0] == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-15));

    QuadratureRule two = gauss_hermite_rule(2);
    CHECK(two.nodes[0] == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-14));
    CHECK(two.nodes[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
    CHECK(two.weights[0] == doctest::Approx(std::sqrt(M_PI) / 2.0).epsilon(1e-14));
    CHECK(two.weights[1] == doctest::Approx(std::sqrt(M_PI) / 2.0).epsilon(1e-14));
}

TEST_CASE("order 10 matches the reference rule") {
    // nodes/weights frozen from an independent implementation
    const double ref_nodes[10] = {
        -3.4361591188377374, -2.5327316742327897, -1.7566836492998819,
        -1.0366108297895136, -0.3429013272237046, 0.3429013272237046,
        1.0366108297895136,  1.7566836492998819,  2.5327316742327897,
        3.4361591188377374};
    const double ref_weights[10] = {
        7.6404328552327460e-06, 1.3436457467812350e-03, 3.3874394455481086e-02,
        2.4013861108231460e-01, 6.1086263373532579e-01, 6.1086263373532579e-01,
        2.4013861108231460e-01, 3.3874394455481086e-02, 1.3436457467812350e-03,
        7.6404328552327460e-06};
    QuadratureRule rule = gauss_hermite_rule(10);
    for (int i = 0; i < 10; ++i) {
        CHECK(rule.nodes[i] == doctest::Approx(ref_nodes[i]).epsilon(1e-12));
        CHECK(rule.weights[i] == doctest::Approx(ref_weights[i]).epsilon(1e-11));
    }
    // x^4 moment: 3 sqrt(pi) / 4
    CHECK(integrate_monomial(rule, 4) ==
          doctest::Approx(3.0 * std::sqrt(M_PI) / 4.0).epsilon(1e-10));
}

TEST_CASE("rule invariants across orders") {
    for (int order : {1, 2, 3, 5, 10, 17, 32, 64}) {
        QuadratureRule rule = gauss_hermite_rule(order);
        REQUIRE(static_cast<int>(rule.nodes.size()) == order);
        double wsum = 0.0;
        for (int i = 0; i < order; ++i) {
            if (i > 0) CHECK(rule.nodes[i] > rule.nodes[i - 1]);
            CHECK(rule.nodes[i] == doctest::Approx(-rule.nodes[order - 1 - i]).epsilon(1e-12));
            CHECK(rule.weights[i] > 0.0);
            wsum += rule.weights[i];
        }
        CHECK(wsum == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-10));
    }
}

TEST_CASE("exactness for monomials up to degree 2n-1") {
    for (int order : {2, 5, 10, 20, 40}) {
        QuadratureRule rule = gauss_hermite_rule(order);
        for (int k = 0; k <= 2 * order - 1; ++k) {
            double expect = gaussian_moment(k);
            double got = integrate_monomial(rule, k);
            if (expect == 0.0) {
                CHECK(std::fabs(got) < 1e-10 * gaussian_moment(k - 1 < 0 ? 0 : k - 1 + 1));
            } else {
                CHECK(got == doctest::Approx(expect).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("order bounds") {
    CHECK_THROWS_AS(gauss_hermite_rule(0), std::invalid_argument);
    CHECK_THROWS_AS(gauss_hermite_rule(65), std::invalid_argument);
    CHECK_NOTHROW(gauss_hermite_rule(64));
}
