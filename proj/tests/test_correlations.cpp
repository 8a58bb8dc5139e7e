#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <utility>
#include <vector>

#include "pathmeasure/correlations.hpp"

using namespace pathmeasure;

namespace {

CollisionModel box_model() {
    CollisionModel model;
    model.heavy_mass = 1000.0;
    model.light_mass = 1.0;
    model.speed = 1.0;
    model.heavy_profile = BoxProfile{0.0, 0.5};
    model.light_profile = BoxProfile{0.0, 0.5};
    model.window_start = -5.0;
    model.window_end = 5.0;
    model.validate();
    return model;
}

CollisionModel gaussian_model() {
    CollisionModel model;
    model.heavy_mass = 500.0;
    model.light_mass = 1.0;
    model.speed = 2.0;
    model.heavy_profile = TruncatedGaussian{0.0, 0.2, 0.6};
    model.light_profile = TruncatedGaussian{0.0, 0.3, 0.9};
    model.window_start = -4.0;
    model.window_end = 4.0;
    model.validate();
    return model;
}

constexpr double t_pre = -8.0;
constexpr double t_post = 8.0;

} // namespace

TEST_CASE("collision flow of the worked launches", "[correlations]") {
    const CollisionModel model = box_model();
    // Pre-collision free flight.
    FlowState s = collision_flow(model, 0.0, -1.0, 0.5);
    CHECK(s.light_position == Catch::Approx(-0.5).margin(1e-15));
    CHECK(s.momentum_sign == +1);
    // Reflected flight after the hit at t* = 1.
    s = collision_flow(model, 0.0, -1.0, 2.0);
    CHECK(s.light_position == Catch::Approx(-1.0).margin(1e-15));
    CHECK(s.momentum_sign == -1);
    // At the collision instant the light particle sits on the heavy one.
    s = collision_flow(model, 0.0, -1.0, 1.0);
    CHECK(s.light_position == Catch::Approx(0.0).margin(1e-15));
    CHECK_THROWS_AS(collision_flow(model, 0.0, 0.5, 0.1), std::domain_error);
}

TEST_CASE("flow map composes and inverts through the collision", "[correlations]") {
    const CollisionModel model = box_model();
    FlowState s;
    s.heavy_position = 0.2;
    s.light_position = -3.0;
    s.momentum_sign = +1;
    const FlowState fwd = propagate_state(model, s, 7.0);
    CHECK(fwd.momentum_sign == -1);
    CHECK(fwd.light_position == Catch::Approx(2.0 * 0.2 + 3.0 - 7.0).margin(1e-12));
    const FlowState back = propagate_state(model, fwd, -7.0);
    CHECK(back.momentum_sign == +1);
    CHECK(back.light_position == Catch::Approx(s.light_position).margin(1e-12));
}

TEST_CASE("density domain checks", "[correlations]") {
    const CollisionModel model = box_model();
    CHECK_THROWS_AS(
        collision_density(model, CorrelationFamily::post_only, 0.0, 0.0, 0.0, CollisionStage::pre),
        std::domain_error);
    CHECK_THROWS_AS(collision_density(model, CorrelationFamily::post_only, 0.0, 0.0, t_pre,
                                      CollisionStage::post),
                    std::domain_error);
    CHECK_NOTHROW(collision_density(model, CorrelationFamily::post_only, 0.0, t_pre, t_pre,
                                    CollisionStage::pre));
}

TEST_CASE("the pre-collision product form factorizes", "[correlations]") {
    const CollisionModel model = box_model();
    // value(x1, x2) = rho1(x1) g(x2) with g independent of x1.
    const double x2 = t_pre + 0.2; // inside the drifting light support
    const double g0 =
        collision_density(model, CorrelationFamily::post_only, 0.0, x2, t_pre, CollisionStage::pre) /
        profile_value(model.heavy_profile, 0.0);
    for (double x1 : {-0.4, -0.1, 0.3}) {
        const double value = collision_density(model, CorrelationFamily::post_only, x1, x2, t_pre,
                                               CollisionStage::pre);
        CHECK(value == Catch::Approx(profile_value(model.heavy_profile, x1) * g0).margin(1e-12));
    }
}

TEST_CASE("the preinteractive family tracks the heavy position", "[correlations]") {
    const CollisionModel model = box_model();
    // Support of the x2 slice shifts by 2*delta when x1 shifts by delta.
    const double delta = 0.21;
    const double x1_a = -0.25, x1_b = x1_a + delta;
    const double x2_a = 2.0 * x1_a + model.speed * t_pre + 0.1;
    const double a = collision_density(model, CorrelationFamily::pre_only, x1_a, x2_a, t_pre,
                                       CollisionStage::pre);
    const double b = collision_density(model, CorrelationFamily::pre_only, x1_b,
                                       x2_a + 2.0 * delta, t_pre, CollisionStage::pre);
    REQUIRE(a > 0.0);
    CHECK(a == Catch::Approx(b).margin(1e-12)); // equal box heights
}

TEST_CASE("post equals pre at the flow-map preimage", "[correlations]") {
    const CollisionModel model = box_model();
    for (double x1 : {-0.3, 0.0, 0.4}) {
        for (double offset : {-0.35, 0.0, 0.3}) {
            const double x2_pre = model.speed * t_pre + offset;
            FlowState s;
            s.heavy_position = x1;
            s.light_position = x2_pre;
            s.momentum_sign = +1;
            const FlowState moved = propagate_state(model, s, t_post - t_pre);
            REQUIRE(moved.momentum_sign == -1);
            const double pre = collision_density(model, CorrelationFamily::post_only, x1, x2_pre,
                                                 t_pre, CollisionStage::pre);
            const double post = collision_density(model, CorrelationFamily::post_only, x1,
                                                  moved.light_position, t_post,
                                                  CollisionStage::post);
            CHECK(pre == Catch::Approx(post).margin(1e-12));
        }
    }
}

TEST_CASE("Liouville transport residuals vanish", "[correlations]") {
    for (const CollisionModel& model : {box_model(), gaussian_model()}) {
        for (CorrelationFamily family : {CorrelationFamily::post_only, CorrelationFamily::pre_only,
                                         CorrelationFamily::pre_post}) {
            const auto pts_pre = support_sample_points(model, family, t_pre, 10000);
            const auto pts_post = support_sample_points(model, family, t_post, 10000);
            // pre -> pre stays on the free stretch.
            CHECK(liouville_residual(model, family, pts_pre, t_pre, 1.5) <= 1e-12);
            // post -> post likewise.
            CHECK(liouville_residual(model, family, pts_post, t_post, 3.0) <= 1e-12);
            // pre -> post crosses the collision; this is the arbiter that
            // pins the reflected branch of the flow map.
            CHECK(liouville_residual(model, family, pts_pre, t_pre, t_post - t_pre) <= 1e-12);
        }
    }
}

TEST_CASE("covariance signature matrix", "[correlations]") {
    const CollisionModel model = box_model();
    const double threshold = 1e-3;
    using F = CorrelationFamily;
    struct Row {
        F family;
        bool pre_positive, post_positive;
    };
    const Row expected[] = {
        {F::post_only, false, true},
        {F::pre_only, true, false},
        {F::pre_post, true, true},
    };
    for (const Row& row : expected) {
        const double pre = correlation_statistic(model, row.family, CollisionStage::pre, t_pre);
        const double post = correlation_statistic(model, row.family, CollisionStage::post, t_post);
        if (row.pre_positive)
            CHECK(pre > threshold);
        else
            CHECK(std::abs(pre) < 1e-12);
        if (row.post_positive)
            CHECK(post > threshold);
        else
            CHECK(std::abs(post) < 1e-12);
    }
}

TEST_CASE("preinteractive covariance equals twice the heavy variance", "[correlations]") {
    // Unit box heavy profile: Var = 1/12, covariance = 1/6.
    const CollisionModel model = box_model();
    const double cov =
        correlation_statistic(model, CorrelationFamily::pre_only, CollisionStage::pre, t_pre);
    CHECK(cov == Catch::Approx(1.0 / 6.0).margin(1e-4));
    // The dependence is removed by the collision.
    const double post =
        correlation_statistic(model, CorrelationFamily::pre_only, CollisionStage::post, t_post);
    CHECK(std::abs(post) < 1e-12);
}

TEST_CASE("each family stays normalized and keeps the heavy marginal", "[correlations]") {
    for (const CollisionModel& model : {box_model(), gaussian_model()}) {
        for (CorrelationFamily family : {CorrelationFamily::post_only, CorrelationFamily::pre_only,
                                         CorrelationFamily::pre_post}) {
            for (auto [stage, t] : {std::pair{CollisionStage::pre, t_pre},
                                    std::pair{CollisionStage::post, t_post}}) {
                CHECK(density_normalization(model, family, stage, t) ==
                      Catch::Approx(1.0).margin(1e-12));
                for (double x1 : {-0.2, 0.0, 0.35})
                    CHECK(heavy_marginal(model, family, stage, t, x1) ==
                          Catch::Approx(profile_value(model.heavy_profile, x1)).margin(1e-12));
            }
        }
    }
}

TEST_CASE("model validation catches bad ensembles", "[correlations]") {
    CollisionModel model = box_model();
    model.heavy_mass = 50.0; // ratio below threshold
    CHECK_THROWS_AS(model.validate(), std::domain_error);

    model = box_model();
    model.window_start = -0.4; // collisions spill outside the window
    CHECK_THROWS_AS(model.validate(), std::domain_error);

    model = box_model();
    model.speed = -1.0;
    CHECK_THROWS_AS(model.validate(), std::domain_error);
}
