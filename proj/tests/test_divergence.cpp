#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "g2dm/divergence.hpp"
#include "g2dm/errors.hpp"

using namespace g2dm;

namespace {

FeatureSet gaussian_blob(std::size_t n, double cx, double cy, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    FeatureSet out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({cx + d(rng), cy + d(rng)});
    return out;
}

EstimatorConfig fast_estimator() {
    EstimatorConfig cfg;
    cfg.epochs = 60;
    cfg.cap_per_domain = 200;
    return cfg;
}

}  // namespace

TEST_CASE("identical distributions score near zero") {
    const auto p = gaussian_blob(300, 0.0, 0.0, 1);
    const auto q = gaussian_blob(300, 0.0, 0.0, 2);
    const auto result = proxy_a_distance(p, q, fast_estimator());
    CHECK(result.distance <= 0.15);
    CHECK(result.error >= 0.35);
}

TEST_CASE("well-separated distributions score near the maximum") {
    const auto p = gaussian_blob(300, 0.0, 0.0, 3);
    const auto q = gaussian_blob(300, 30.0, 30.0, 4);
    const auto result = proxy_a_distance(p, q, fast_estimator());
    CHECK(result.distance >= 1.8);
    CHECK(result.error <= 0.05);
}

TEST_CASE("estimates are clamped into [0, 2] and clamps counted") {
    const auto p = gaussian_blob(60, 0.0, 0.0, 5);
    const auto q = gaussian_blob(60, 0.0, 0.0, 6);
    const auto result = proxy_a_distance(p, q, fast_estimator());
    CHECK(result.distance >= 0.0);
    CHECK(result.distance <= 2.0);
    CHECK(result.clamp_events >= 0);
}

TEST_CASE("too few samples for the fold count is an error") {
    const auto p = gaussian_blob(3, 0.0, 0.0, 7);
    const auto q = gaussian_blob(3, 1.0, 1.0, 8);
    CHECK_THROWS_AS(proxy_a_distance(p, q, fast_estimator()), std::invalid_argument);
}

TEST_CASE("pairwise matrix is symmetric with a zero diagonal") {
    std::vector<FeatureSet> domains = {gaussian_blob(120, 0.0, 0.0, 10),
                                       gaussian_blob(120, 2.0, 0.0, 11),
                                       gaussian_blob(120, 8.0, 8.0, 12)};
    const auto m = pairwise_matrix(domains, fast_estimator());
    REQUIRE(m.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(m.at(i, i) == 0.0);
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(m.at(i, j) == m.at(j, i));  // exact, shared estimate per pair
            CHECK(m.at(i, j) >= 0.0);
            CHECK(m.at(i, j) <= 2.0);
        }
    }
    // the distant domain should dominate the off-diagonal
    CHECK(m.max_offdiag() == m.at(0, 2));
    CHECK(m.mean_offdiag() <= m.max_offdiag());
}

TEST_CASE("ova decomposition sums pairwise terms back exactly") {
    ModelConfig mc;
    mc.input_dim = 2;
    mc.encoder_hidden = {6, 4};
    mc.discriminator_hidden = {5};
    mc.projection_size = 3;
    const auto bundle = ModelBundle::init(mc, 3, 21);

    Rng rng(31);
    std::normal_distribution<double> d;
    std::vector<Tensor> encoded;
    for (int k = 0; k < 3; ++k) {
        Tensor z({10, 4});
        for (double& v : z.values) v = d(rng);
        encoded.push_back(std::move(z));
    }
    const auto result = ova_decomposition_check(encoded, bundle.discriminators);
    REQUIRE(result.ova_loss.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(std::abs(result.residual[k]) <= 1e-9);
        CHECK(result.pairwise_sum[k] == doctest::Approx(result.ova_loss[k]).epsilon(1e-12));
    }
    CHECK(result.max_residual <= 1e-9);
}

TEST_CASE("ova decomposition requires balanced groups") {
    ModelConfig mc;
    mc.encoder_hidden = {4, 4};
    const auto bundle = ModelBundle::init(mc, 2, 1);
    std::vector<Tensor> encoded = {Tensor({4, 4}), Tensor({6, 4})};
    CHECK_THROWS_AS(ova_decomposition_check(encoded, bundle.discriminators),
                    std::invalid_argument);
}

TEST_CASE("mixtures of close sources stay inside the estimated hull") {
    std::vector<DomainSpec> specs(3);
    for (int d = 0; d < 3; ++d) {
        specs[static_cast<std::size_t>(d)].id = d;
        specs[static_cast<std::size_t>(d)].angle_deg = 5.0 * d;
        specs[static_cast<std::size_t>(d)].noise_scale = 0.1;
    }
    EstimatorConfig est = fast_estimator();
    Rng rng(41);
    const auto report = hull_bound_check(specs, 8, est, est.noise_bound, 250, rng);
    CHECK(report.total == 8);
    CHECK(report.fraction >= 0.9);
    CHECK(report.epsilon_hat >= 0.0);
}

TEST_CASE("heatmap delta reports entrywise differences") {
    DivergenceMatrix a, b;
    a.labels = b.labels = {"d0", "d1"};
    a.values = {0.0, 1.0, 1.0, 0.0};
    b.values = {0.0, 0.4, 0.4, 0.0};
    const auto delta = heatmap_delta(a, b);
    CHECK(delta.delta[1] == doctest::Approx(0.6));
    CHECK(delta.fraction_positive == doctest::Approx(1.0));
    CHECK(delta.mean_delta == doctest::Approx(0.6));
    DivergenceMatrix c;
    c.labels = {"d0"};
    c.values = {0.0};
    CHECK_THROWS_AS(heatmap_delta(a, c), std::invalid_argument);
}

TEST_CASE("encoded features go through the bundle encoder") {
    ModelConfig mc;
    mc.input_dim = 2;
    mc.encoder_hidden = {5, 3};
    const auto bundle = ModelBundle::init(mc, 0, 2);
    const auto raw = gaussian_blob(7, 0.0, 0.0, 50);
    const auto enc = encode_features(bundle, raw);
    REQUIRE(enc.size() == 7);
    CHECK(enc[0].size() == 3);
}
