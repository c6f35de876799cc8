#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "aimm/errors.hpp"
#include "aimm/rng.hpp"
#include "aimm/trainer.hpp"

#include "support/finite_diff.hpp"

using namespace aimm;
using namespace aimm::testsupport;

namespace {

Batch random_batch(int batch_size, int input_dim, int num_classes, Rng& rng) {
    Batch b;
    b.batch_size = batch_size;
    b.input_dim = input_dim;
    for (int s = 0; s < batch_size; ++s) {
        for (int i = 0; i < input_dim; ++i) {
            b.inputs.push_back(rng.next_gaussian());
        }
        b.labels.push_back(static_cast<int>(
            rng.next_index(static_cast<std::size_t>(num_classes))));
    }
    return b;
}

// Perturbs biases too, so the gradient check is not run at the special
// all-zero bias point.
ParamVector jittered_init(const ModelSpec& spec, Rng& rng) {
    ParamVector theta = init_model(spec);
    for (double& v : theta.values) v += 0.1 * rng.next_gaussian();
    return theta;
}

} // namespace

TEST_CASE("param_count and layout sizes") {
    ModelSpec spec{4, {8, 5}, 3, 0};
    CHECK(spec.param_count() == (4 + 1) * 8 + (8 + 1) * 5 + (5 + 1) * 3);

    ModelSpec linear{4, {}, 3, 0};
    CHECK(linear.param_count() == (4 + 1) * 3);
    CHECK(init_model(linear).dim() == 15);
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS((ModelSpec{0, {}, 2, 0}.validate()), ValidationError);
    CHECK_THROWS_AS((ModelSpec{3, {}, 1, 0}.validate()), ValidationError);
    CHECK_THROWS_AS((ModelSpec{3, {0}, 2, 0}.validate()), ValidationError);
}

TEST_CASE("init is deterministic in the seed, bounded, biases zero") {
    ModelSpec spec{6, {7}, 3, 11};
    ParamVector a = init_model(spec);
    ParamVector b = init_model(spec);
    CHECK(a.values == b.values);

    ModelSpec other = spec;
    other.seed = 12;
    CHECK(init_model(other).values != a.values);

    // First layer weights within +-sqrt(6/(6+7)), its biases exactly zero.
    double bound1 = std::sqrt(6.0 / (6 + 7));
    for (int i = 0; i < 6 * 7; ++i) {
        CHECK(std::abs(a.values[static_cast<std::size_t>(i)]) <= bound1);
    }
    for (int i = 0; i < 7; ++i) {
        CHECK(a.values[static_cast<std::size_t>(6 * 7 + i)] == 0.0);
    }
    // Output layer biases are the last num_classes entries.
    for (int i = 0; i < 3; ++i) {
        CHECK(a.values[a.dim() - 1 - static_cast<std::size_t>(i)] == 0.0);
    }
}

TEST_CASE("analytic gradient matches central finite differences") {
    struct Config {
        int input;
        std::vector<int> hidden;
        int classes;
        int batch;
    };
    const std::vector<Config> configs = {
        {3, {}, 2, 1},  {3, {}, 3, 4},    {4, {5}, 2, 2},  {4, {5}, 3, 5},
        {5, {4}, 4, 3}, {6, {5, 4}, 3, 2}, {5, {6, 3}, 2, 4},
        {4, {4, 4}, 4, 3}, {2, {8}, 2, 6}, {6, {3, 3, 3}, 3, 2},
        {3, {2}, 5, 4}, {7, {}, 4, 3},
    };

    Rng rng(2024);
    double worst = 0.0;
    for (std::size_t c = 0; c < configs.size(); ++c) {
        const Config& cf = configs[c];
        ModelSpec spec{cf.input, cf.hidden, cf.classes, 100 + c};
        ParamVector theta = jittered_init(spec, rng);
        Batch batch = random_batch(cf.batch, cf.input, cf.classes, rng);

        auto [loss, analytic] = loss_and_grad(theta, spec, batch);
        CHECK(std::isfinite(loss));
        TaskVector numeric = fd_gradient(theta, spec, batch, 1.0e-5);
        double err = max_relative_error(analytic, numeric);
        INFO("config " << c << " rel err " << err);
        CHECK(err < 1.0e-4);
        worst = std::max(worst, err);
    }
    MESSAGE("worst relative error: " << worst);
}

TEST_CASE("loss_only agrees with loss_and_grad") {
    Rng rng(5);
    ModelSpec spec{5, {6}, 3, 77};
    ParamVector theta = jittered_init(spec, rng);
    Batch batch = random_batch(7, 5, 3, rng);
    auto [loss, grad] = loss_and_grad(theta, spec, batch);
    (void)grad;
    CHECK(loss_only(theta, spec, batch) ==
          doctest::Approx(loss).epsilon(1e-12));
}

TEST_CASE("softmax stays finite under extreme logits") {
    ModelSpec spec{3, {}, 2, 1};
    ParamVector theta = init_model(spec);
    for (double& v : theta.values) v *= 500.0;
    Batch b;
    b.batch_size = 2;
    b.input_dim = 3;
    b.inputs = {50.0, -40.0, 30.0, -25.0, 60.0, -10.0};
    b.labels = {0, 1};
    auto [loss, grad] = loss_and_grad(theta, spec, b);
    CHECK(std::isfinite(loss));
    for (double g : grad.deltas) CHECK(std::isfinite(g));
}

TEST_CASE("convex single-layer training drives the loss down") {
    Rng rng(8);
    ModelSpec spec{4, {}, 2, 3};
    ParamVector theta = init_model(spec);
    Batch batch;
    batch.batch_size = 8;
    batch.input_dim = 4;
    for (int s = 0; s < 8; ++s) {
        int label = s % 2;
        for (int i = 0; i < 4; ++i) {
            double mean = (label == 0 ? 1.0 : -1.0);
            batch.inputs.push_back(mean + 0.1 * rng.next_gaussian());
        }
        batch.labels.push_back(label);
    }
    double first = loss_and_grad(theta, spec, batch).first;
    for (int step = 0; step < 200; ++step) {
        auto [loss, grad] = loss_and_grad(theta, spec, batch);
        (void)loss;
        theta = sgd_step(theta, grad, 0.2);
    }
    double last = loss_and_grad(theta, spec, batch).first;
    CHECK(last < 0.5 * first);
    CHECK(last < 0.1);
}

TEST_CASE("sgd_step applies theta minus lr times grad") {
    ParamVector theta{{1.0, -2.0}};
    TaskVector grad{{0.5, -1.0}};
    ParamVector out = sgd_step(theta, grad, 0.1);
    CHECK(out.values[0] == doctest::Approx(0.95));
    CHECK(out.values[1] == doctest::Approx(-1.9));
    CHECK_THROWS_AS(sgd_step(theta, TaskVector{{1.0}}, 0.1), StructuralError);

    TaskVector huge{{1.0e308, 0.0}};
    CHECK_THROWS_AS(sgd_step(theta, huge, 1.0e10), DivergenceError);
}

TEST_CASE("probe measures the incoming parameters and changes nothing") {
    Rng rng(13);
    ModelSpec spec{5, {6}, 3, 21};
    ParamVector theta = jittered_init(spec, rng);
    Batch train = random_batch(6, 5, 3, rng);
    Batch probe = random_batch(4, 5, 3, rng);

    auto [with_probe, rep1] =
        train_step_with_probe(theta, spec, train, probe, 0.05);
    auto [without_probe, rep2] =
        train_step_with_probe(theta, spec, train, std::nullopt, 0.05);

    CHECK(with_probe.values == without_probe.values);
    CHECK(rep1.new_loss == rep2.new_loss);
    CHECK(rep1.grad_norm == rep2.grad_norm);
    REQUIRE(rep1.mem_loss.has_value());
    CHECK(!rep2.mem_loss.has_value());
    // Same code path, same inputs: bitwise equal.
    CHECK(*rep1.mem_loss == loss_only(theta, spec, probe));
    CHECK(rep1.grad_norm > 0.0);
    // The report's training loss is measured before the update.
    CHECK(rep1.new_loss ==
          doctest::Approx(loss_only(theta, spec, train)).epsilon(1e-12));
}

TEST_CASE("evaluate_accuracy counts argmax hits, ties to lowest class") {
    // All-zero single layer: every logit ties, so everything predicts class 0.
    ModelSpec spec{2, {}, 3, 0};
    ParamVector zeros;
    zeros.values.assign(static_cast<std::size_t>(spec.param_count()), 0.0);
    std::vector<Sample> data = {{{1.0, 2.0}, 0}, {{0.5, -1.0}, 1},
                                {{0.0, 0.0}, 2}, {{3.0, 3.0}, 0}};
    CHECK(evaluate_accuracy(zeros, spec, data) == doctest::Approx(0.5));

    // Hand-built perfect separator: logit_c = x_c.
    ModelSpec ident{2, {}, 2, 0};
    ParamVector w;
    w.values = {1.0, 0.0, 0.0, 1.0, 0.0, 0.0}; // W rows then biases
    std::vector<Sample> sep = {{{2.0, 0.0}, 0}, {{0.0, 2.0}, 1},
                               {{5.0, 1.0}, 0}};
    CHECK(evaluate_accuracy(w, ident, sep) == doctest::Approx(1.0));
}

TEST_CASE("batch validation rejects malformed batches") {
    Batch b;
    b.batch_size = 2;
    b.input_dim = 2;
    b.inputs = {1.0, 2.0, 3.0, 4.0};
    b.labels = {0, 1};
    CHECK_NOTHROW(b.validate(2));

    Batch wrong_shape = b;
    wrong_shape.inputs.pop_back();
    CHECK_THROWS_AS(wrong_shape.validate(2), StructuralError);

    Batch bad_label = b;
    bad_label.labels[1] = 2;
    CHECK_THROWS_AS(bad_label.validate(2), ValidationError);

    Batch bad_input = b;
    bad_input.inputs[0] = std::nan("");
    CHECK_THROWS_AS(bad_input.validate(2), ValidationError);

    ModelSpec spec{3, {}, 2, 0};
    ParamVector theta = init_model(spec);
    CHECK_THROWS_AS(loss_and_grad(theta, spec, b), StructuralError);
}

TEST_CASE("make_batch from pool respects indices and catches bad ones") {
    std::vector<Sample> pool = {{{1.0}, 0}, {{2.0}, 1}, {{3.0}, 0}};
    std::vector<std::size_t> idx = {2, 0};
    Batch b = make_batch(pool, idx);
    CHECK(b.batch_size == 2);
    CHECK((b.inputs == std::vector<double>{3.0, 1.0}));
    CHECK((b.labels == std::vector<int>{0, 0}));

    std::vector<std::size_t> oob = {3};
    CHECK_THROWS_AS(make_batch(pool, oob), StructuralError);
    CHECK_THROWS_AS(make_batch(pool, std::vector<std::size_t>{}),
                    ValidationError);
}
