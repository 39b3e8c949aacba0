#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "g2dm/domains.hpp"
#include "g2dm/errors.hpp"
#include "g2dm/training.hpp"

using namespace g2dm;

namespace {

std::vector<Dataset> toy_sources(int n_sources, int n, std::uint64_t seed) {
    std::vector<Dataset> out;
    for (int d = 0; d < n_sources; ++d) {
        DomainSpec spec;
        spec.id = d;
        spec.angle_deg = 20.0 * d;
        spec.noise_scale = 0.1;
        Rng rng(seed + static_cast<std::uint64_t>(d));
        out.push_back(sample_examples(spec, n, rng));
    }
    return out;
}

SourceBatch toy_batch(const std::vector<Dataset>& sources, int m) {
    SourceBatch batch;
    batch.num_sources = static_cast<int>(sources.size());
    batch.per_source = m;
    const std::size_t d = sources[0][0].features.size();
    batch.x = Tensor({sources.size() * static_cast<std::size_t>(m), d});
    std::size_t row = 0;
    for (std::size_t s = 0; s < sources.size(); ++s) {
        for (int i = 0; i < m; ++i, ++row) {
            const auto& ex = sources[s][static_cast<std::size_t>(i)];
            for (std::size_t k = 0; k < d; ++k) batch.x.at(row, k) = ex.features[k];
            batch.labels.push_back(ex.label);
            batch.domains.push_back(static_cast<int>(s));
        }
    }
    return batch;
}

TrainConfig toy_config() {
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_per_domain = 8;
    cfg.model.input_dim = 2;
    cfg.model.encoder_hidden = {8, 4};
    cfg.model.discriminator_hidden = {4};
    cfg.model.projection_size = 4;
    return cfg;
}

bool same_params(const Mlp& a, const Mlp& b) {
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].w.values != b.layers[l].w.values) return false;
        if (a.layers[l].b.values != b.layers[l].b.values) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("hypervolume aggregate matches the closed form for equal losses") {
    // eta = slack*l, each gap = (slack-1)*l
    const double l = 0.7, slack = 2.5;
    const double expected = -3.0 * std::log((slack - 1.0) * l);
    CHECK(hypervolume_aggregate({l, l, l}, slack) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("hypervolume gradient weights the worst loss hardest") {
    const std::vector<double> base = {0.3, 0.6, 0.9};
    const double h = 1e-7;
    std::vector<double> grad;
    for (std::size_t k = 0; k < base.size(); ++k) {
        auto up = base, down = base;
        up[k] += h;
        down[k] -= h;
        // freeze eta at the unperturbed nadir so only the direct term moves
        const double eta = 2.5 * 0.9;
        auto v = [&](const std::vector<double>& ls) {
            double out = 0.0;
            for (double x : ls) out -= std::log(eta - x);
            return out;
        };
        grad.push_back((v(up) - v(down)) / (2 * h));
    }
    CHECK(grad[0] < grad[1]);
    CHECK(grad[1] < grad[2]);
    // analytic weights 1/(eta - l_k)
    for (std::size_t k = 0; k < base.size(); ++k) {
        CHECK(grad[k] == doctest::Approx(1.0 / (2.5 * 0.9 - base[k])).epsilon(1e-5));
    }
}

TEST_CASE("for equal losses both aggregations point in the same direction") {
    // sum gradient is (1,1,1); hypervolume gradient is w*(1,1,1) with w > 0
    const std::vector<double> losses = {0.5, 0.5, 0.5};
    const double eta = 2.5 * 0.5;
    const double w = 1.0 / (eta - 0.5);
    CHECK(w > 0.0);
    // proportionality means identical normalized direction
    for (int k = 0; k < 3; ++k) {
        CHECK(w / (3.0 * w) == doctest::Approx(1.0 / 3.0));
    }
}

TEST_CASE("hypervolume rejects degenerate inputs") {
    CHECK_THROWS_AS(hypervolume_aggregate({1.0, 0.5}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(hypervolume_aggregate({-0.1}, 2.5), std::invalid_argument);
    CHECK_THROWS_AS(hypervolume_aggregate({}, 2.5), std::invalid_argument);
    // all-zero losses hit the nadir floor instead of log(0)
    CHECK(std::isfinite(hypervolume_aggregate({0.0, 0.0}, 2.5)));
}

TEST_CASE("aggregation names round-trip") {
    CHECK(aggregation_from_string("sum") == Aggregation::kSum);
    CHECK(aggregation_from_string("hypervolume") == Aggregation::kHypervolume);
    CHECK(aggregation_to_string(Aggregation::kHypervolume) == "hypervolume");
    CHECK_THROWS_AS(aggregation_from_string("max"), std::invalid_argument);
}

TEST_CASE("each update touches only its own parameter group") {
    const auto sources = toy_sources(3, 32, 2);
    TrainConfig cfg = toy_config();
    ModelBundle bundle = ModelBundle::init(cfg.model, 3, cfg.seed);
    Trainer trainer(bundle, cfg, 3, false);
    const SourceBatch batch = toy_batch(sources, 8);

    const ModelBundle before = trainer.bundle();
    trainer.discriminator_update(batch);
    CHECK(same_params(trainer.bundle().encoder, before.encoder));
    CHECK(same_params(trainer.bundle().classifier, before.classifier));
    bool disc_moved = false;
    for (std::size_t k = 0; k < 3; ++k) {
        if (!same_params(trainer.bundle().discriminators[k].net, before.discriminators[k].net)) {
            disc_moved = true;
        }
        CHECK(trainer.bundle().discriminators[k].projection.matrix.values ==
              before.discriminators[k].projection.matrix.values);
    }
    CHECK(disc_moved);

    const ModelBundle after_disc = trainer.bundle();
    trainer.classifier_update(batch);
    CHECK(same_params(trainer.bundle().encoder, after_disc.encoder));
    CHECK_FALSE(same_params(trainer.bundle().classifier, after_disc.classifier));
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(same_params(trainer.bundle().discriminators[k].net, after_disc.discriminators[k].net));
    }

    const ModelBundle after_cls = trainer.bundle();
    trainer.encoder_update(batch);
    CHECK_FALSE(same_params(trainer.bundle().encoder, after_cls.encoder));
    CHECK(same_params(trainer.bundle().classifier, after_cls.classifier));
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(same_params(trainer.bundle().discriminators[k].net, after_cls.discriminators[k].net));
    }
}

TEST_CASE("unbalanced batches are rejected") {
    const auto sources = toy_sources(3, 32, 2);
    TrainConfig cfg = toy_config();
    Trainer trainer(ModelBundle::init(cfg.model, 3, cfg.seed), cfg, 3, false);
    SourceBatch batch = toy_batch(sources, 8);
    batch.domains[0] = 1;
    CHECK_THROWS_AS(trainer.classifier_update(batch), std::invalid_argument);
}

TEST_CASE("a small classifier step lowers the task loss") {
    const auto sources = toy_sources(2, 32, 5);
    TrainConfig cfg = toy_config();
    cfg.lr_classifier = 1e-3;
    cfg.warmup_iters = 1;
    cfg.warmup_threshold = 1.0;  // flat schedule: full rate from the start
    cfg.momentum = 0.0;
    Trainer trainer(ModelBundle::init(cfg.model, 2, cfg.seed), cfg, 2, false);
    const SourceBatch batch = toy_batch(sources, 8);
    const double before = trainer.classifier_update(batch);
    const double after = trainer.classifier_update(batch);
    CHECK(after < before);
}

TEST_CASE("a pure adversarial encoder step raises the discriminator losses") {
    const auto sources = toy_sources(2, 32, 5);
    TrainConfig cfg = toy_config();
    cfg.alpha = 0.0;  // encoder optimizes only the adversarial term
    cfg.lr_classifier = 1e-3;
    cfg.warmup_iters = 1;
    cfg.warmup_threshold = 1.0;  // flat schedule: full rate from the start
    cfg.momentum = 0.0;
    Trainer trainer(ModelBundle::init(cfg.model, 2, cfg.seed), cfg, 2, false);
    const SourceBatch batch = toy_batch(sources, 8);
    // measure discriminator losses before/after an encoder step without
    // letting the discriminators move: snapshot, probe, restore
    auto probe = [&]() {
        Trainer frozen(trainer.bundle(), cfg, 2, false);
        const auto losses = frozen.discriminator_update(batch);
        double total = 0.0;
        for (double l : losses) total += l;
        return total;
    };
    const double before = probe();
    trainer.encoder_update(batch);
    const double after = probe();
    CHECK(after > before);
}

TEST_CASE("warm-up holds the encoder rate at the floor initially") {
    TrainConfig cfg = toy_config();
    cfg.warmup_iters = 100;
    cfg.warmup_threshold = 1e-3;
    Trainer trainer(ModelBundle::init(cfg.model, 2, cfg.seed), cfg, 2, false);
    CHECK(trainer.effective_lr_c() == doctest::Approx(cfg.lr_classifier * 1e-3));
    for (int i = 0; i < 100; ++i) trainer.advance_iteration();
    CHECK(trainer.effective_lr_c() == doctest::Approx(cfg.lr_classifier));
}

TEST_CASE("erm and alpha=1 g2dm with frozen discriminators coincide bitwise") {
    const auto sources = toy_sources(3, 48, 9);
    std::vector<Dataset> train_sets, val_sets;
    for (const auto& src : sources) {
        Rng rng(17);
        auto parts = split(src, {0.8, 0.2}, rng);
        train_sets.push_back(parts[0]);
        val_sets.push_back(parts[1]);
    }
    TrainConfig cfg = toy_config();
    cfg.epochs = 3;
    cfg.alpha = 1.0;
    cfg.lr_discriminator = 0.0;
    const TrainResult erm = train_erm(train_sets, val_sets, cfg);
    const TrainResult adv = train_g2dm(train_sets, val_sets, cfg);
    CHECK(same_params(erm.bundle.encoder, adv.bundle.encoder));
    CHECK(same_params(erm.bundle.classifier, adv.bundle.classifier));
    REQUIRE(erm.history.size() == adv.history.size());
    for (std::size_t e = 0; e < erm.history.size(); ++e) {
        CHECK(erm.history[e].train_loss == adv.history[e].train_loss);
    }
}

TEST_CASE("histories log per-epoch metrics and optional unseen accuracy") {
    const auto sources = toy_sources(2, 40, 3);
    std::vector<Dataset> train_sets, val_sets;
    for (const auto& src : sources) {
        Rng rng(23);
        auto parts = split(src, {0.8, 0.2}, rng);
        train_sets.push_back(parts[0]);
        val_sets.push_back(parts[1]);
    }
    DomainSpec unseen_spec;
    unseen_spec.angle_deg = 40.0;
    Rng urng(77);
    const Dataset unseen = sample_examples(unseen_spec, 30, urng);

    TrainConfig cfg = toy_config();
    cfg.epochs = 2;
    cfg.keep_snapshots = true;
    const TrainResult result = train_g2dm(train_sets, val_sets, cfg, &unseen);
    REQUIRE(result.history.size() == 2);
    CHECK(result.snapshots.size() == 2);
    for (const auto& rec : result.history) {
        CHECK(rec.source_val_acc.size() == 2);
        CHECK(rec.disc_loss.size() == 2);
        REQUIRE(rec.unseen_acc.has_value());
        CHECK(*rec.unseen_acc >= 0.0);
        CHECK(*rec.unseen_acc <= 1.0);
    }
    const TrainResult no_unseen = train_g2dm(train_sets, val_sets, cfg);
    CHECK_FALSE(no_unseen.history[0].unseen_acc.has_value());
}

TEST_CASE("training is deterministic for a fixed seed") {
    const auto sources = toy_sources(2, 40, 3);
    std::vector<Dataset> train_sets, val_sets;
    for (const auto& src : sources) {
        Rng rng(23);
        auto parts = split(src, {0.8, 0.2}, rng);
        train_sets.push_back(parts[0]);
        val_sets.push_back(parts[1]);
    }
    TrainConfig cfg = toy_config();
    const TrainResult a = train_g2dm(train_sets, val_sets, cfg);
    const TrainResult b = train_g2dm(train_sets, val_sets, cfg);
    CHECK(same_params(a.bundle.encoder, b.bundle.encoder));
    for (std::size_t e = 0; e < a.history.size(); ++e) {
        CHECK(a.history[e].train_loss == b.history[e].train_loss);
    }
}

TEST_CASE("config validation rejects out-of-range values") {
    TrainConfig cfg = toy_config();
    cfg.alpha = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = toy_config();
    cfg.lr_classifier = -0.1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = toy_config();
    cfg.nadir_slack = 1.0;  // must leave a gap above the worst loss
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = toy_config();
    cfg.lr_classifier = 0.0;  // explicitly allowed: freezes the group
    cfg.validate();
}

TEST_CASE("hypervolume mode trains without numeric errors") {
    const auto sources = toy_sources(3, 32, 13);
    std::vector<Dataset> train_sets, val_sets;
    for (const auto& src : sources) {
        Rng rng(29);
        auto parts = split(src, {0.8, 0.2}, rng);
        train_sets.push_back(parts[0]);
        val_sets.push_back(parts[1]);
    }
    TrainConfig cfg = toy_config();
    cfg.aggregation = Aggregation::kHypervolume;
    const TrainResult result = train_g2dm(train_sets, val_sets, cfg);
    CHECK(result.history.size() == 2);
    for (const auto& rec : result.history) CHECK(std::isfinite(rec.train_loss));
}
