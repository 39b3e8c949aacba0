#include "g2dm/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace g2dm {

using nlohmann::json;

Aggregation aggregation_from_string(const std::string& s) {
    if (s == "sum") return Aggregation::kSum;
    if (s == "hypervolume") return Aggregation::kHypervolume;
    throw std::invalid_argument("unknown aggregation mode: " + s);
}

std::string aggregation_to_string(Aggregation a) {
    return a == Aggregation::kSum ? "sum" : "hypervolume";
}

void TrainConfig::validate() const {
    if (lr_classifier < 0.0 || lr_discriminator < 0.0) {
        throw std::invalid_argument("learning rates must be non-negative");
    }
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("alpha must be in [0,1]");
    if (batch_per_domain < 1) throw std::invalid_argument("batch_per_domain must be >= 1");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (warmup_iters < 1) throw std::invalid_argument("warmup_iters must be >= 1");
    if (warmup_threshold <= 0.0 || warmup_threshold > 1.0) {
        throw std::invalid_argument("warmup_threshold must be in (0,1]");
    }
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must be in [0,1)");
    if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
    if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
        throw std::invalid_argument("label_smoothing must be in [0,1)");
    }
    if (nadir_slack <= 1.0) throw std::invalid_argument("nadir_slack must be > 1");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (decay_factor <= 0.0 || decay_factor >= 1.0) {
        throw std::invalid_argument("decay_factor must be in (0,1)");
    }
}

double hypervolume_aggregate(const std::vector<double>& losses, double slack) {
    if (losses.empty()) throw std::invalid_argument("hypervolume_aggregate: no losses");
    if (slack <= 1.0) throw std::invalid_argument("hypervolume_aggregate: slack must be > 1");
    double mx = 0.0;
    for (double l : losses) {
        if (l < 0.0) throw std::invalid_argument("hypervolume_aggregate: negative loss");
        mx = std::max(mx, l);
    }
    const double nadir = std::max(slack * mx, 1e-8);
    double v = 0.0;
    for (double l : losses) {
        if (l >= nadir) throw NumericError("hypervolume_aggregate: loss reaches nadir point");
        v -= std::log(nadir - l);
    }
    return v;
}

Trainer::Trainer(ModelBundle bundle, TrainConfig cfg, int num_sources, bool erm_mode)
    : bundle_(std::move(bundle)),
      cfg_(std::move(cfg)),
      num_sources_(num_sources),
      erm_mode_(erm_mode),
      opt_encoder_(cfg_.momentum, cfg_.weight_decay),
      opt_classifier_(cfg_.momentum, cfg_.weight_decay) {
    cfg_.validate();
    opt_encoder_.state().lr = cfg_.lr_classifier;
    opt_classifier_.state().lr = cfg_.lr_classifier;
    if (!erm_mode_) {
        if (static_cast<int>(bundle_.discriminators.size()) != num_sources_) {
            throw std::invalid_argument("trainer: one discriminator per source required");
        }
        for (int k = 0; k < num_sources_; ++k) {
            opt_discriminators_.emplace_back(cfg_.momentum, cfg_.weight_decay);
            opt_discriminators_.back().state().lr = cfg_.lr_discriminator;
        }
        if (num_sources_ == 1) {
            std::cerr << "warning: single source domain, discriminator sees only positive "
                         "labels; divergence signal is vacuous\n";
        }
    }
}

double Trainer::effective_lr_c() const {
    return warmup_lr(iteration_, cfg_.warmup_iters, opt_encoder_.state().lr,
                     cfg_.warmup_threshold);
}

void Trainer::check_batch(const SourceBatch& batch) const {
    const std::size_t n = batch.x.rows();
    if (batch.labels.size() != n || batch.domains.size() != n) {
        throw DimensionError("batch label/domain count mismatch");
    }
    if (batch.num_sources != num_sources_) {
        throw std::invalid_argument("batch source count does not match trainer");
    }
    std::vector<int> counts(static_cast<std::size_t>(num_sources_), 0);
    for (int d : batch.domains) {
        if (d < 0 || d >= num_sources_) throw std::invalid_argument("batch domain index out of range");
        ++counts[static_cast<std::size_t>(d)];
    }
    for (int c : counts) {
        if (c != batch.per_source) throw std::invalid_argument("unbalanced batch");
    }
}

std::vector<double> Trainer::discriminator_update(const SourceBatch& batch) {
    if (erm_mode_) return {};
    check_batch(batch);
    const Tensor z = encode(bundle_, batch.x);
    std::vector<double> losses;
    for (int k = 0; k < num_sources_; ++k) {
        auto& disc = bundle_.discriminators[static_cast<std::size_t>(k)];
        Tape tape;
        Tape::VarId h = tape.leaf(z, false);
        if (disc.has_projection()) {
            h = tape.matmul(h, tape.leaf(disc.projection.matrix, false));
        }
        MlpVars vars = mlp_forward(tape, disc.net, h, true);
        const Tensor labels = ova_labels(batch.domains, k, num_sources_);
        const Tape::VarId loss = tape.bce_logits(vars.out, labels);
        losses.push_back(tape.value(loss).item());
        tape.backward(loss);
        std::vector<Tensor> grads;
        for (Tape::VarId id : vars.param_ids) grads.push_back(tape.grad(id));
        opt_discriminators_[static_cast<std::size_t>(k)].step(disc.net.params(), grads,
                                                              cfg_.lr_discriminator);
    }
    return losses;
}

double Trainer::classifier_update(const SourceBatch& batch) {
    check_batch(batch);
    const Tensor z = encode(bundle_, batch.x);
    Tape tape;
    MlpVars vars = mlp_forward(tape, bundle_.classifier, tape.leaf(z, false), true);
    const Tensor targets =
        smoothed_targets(batch.labels, bundle_.config.num_classes, cfg_.label_smoothing);
    const Tape::VarId loss = tape.softmax_cross_entropy(vars.out, targets);
    const double loss_value = tape.value(loss).item();
    tape.backward(loss);
    std::vector<Tensor> grads;
    for (Tape::VarId id : vars.param_ids) grads.push_back(tape.grad(id));
    opt_classifier_.step(bundle_.classifier.params(), grads, effective_lr_c());
    return loss_value;
}

double Trainer::encoder_update(const SourceBatch& batch) {
    check_batch(batch);
    Tape tape;
    MlpVars enc = mlp_forward(tape, bundle_.encoder, tape.leaf(batch.x, false), true);

    const Tensor targets =
        smoothed_targets(batch.labels, bundle_.config.num_classes, cfg_.label_smoothing);
    MlpVars cls = mlp_forward(tape, bundle_.classifier, enc.out, false);
    const Tape::VarId task_loss = tape.softmax_cross_entropy(cls.out, targets);

    Tape::VarId total;
    if (erm_mode_ || cfg_.alpha == 1.0) {
        total = task_loss;
    } else {
        // Adversarial term. Sum mode descends -sum_k L_k (ascending the
        // discriminator losses). Hypervolume mode aggregates the confusion
        // losses (binary cross-entropy against flipped domain labels) with a
        // constant nadir point, prioritizing the worst-confused
        // discriminator.
        Tape::VarId adv = 0;
        bool have_adv = false;
        std::vector<Tape::VarId> disc_losses;
        std::vector<Tape::VarId> confusion_losses;
        for (int k = 0; k < num_sources_; ++k) {
            const auto& disc = bundle_.discriminators[static_cast<std::size_t>(k)];
            Tape::VarId h = enc.out;
            if (disc.has_projection()) {
                h = tape.matmul(h, tape.leaf(disc.projection.matrix, false));
            }
            MlpVars dv = mlp_forward(tape, disc.net, h, false);
            Tensor labels = ova_labels(batch.domains, k, num_sources_);
            if (cfg_.aggregation == Aggregation::kSum) {
                disc_losses.push_back(tape.bce_logits(dv.out, labels));
            } else {
                for (double& y : labels.values) y = 1.0 - y;
                confusion_losses.push_back(tape.bce_logits(dv.out, labels));
            }
        }
        if (cfg_.aggregation == Aggregation::kSum) {
            for (Tape::VarId l : disc_losses) {
                adv = have_adv ? tape.add(adv, l) : l;
                have_adv = true;
            }
            adv = tape.scale(adv, -1.0);
        } else {
            std::vector<double> values;
            for (Tape::VarId c : confusion_losses) values.push_back(tape.value(c).item());
            double mx = *std::max_element(values.begin(), values.end());
            const double nadir = std::max(cfg_.nadir_slack * mx, 1e-8);
            for (std::size_t k = 0; k < confusion_losses.size(); ++k) {
                if (values[k] >= nadir) {
                    throw NumericError("hypervolume: confusion loss reaches nadir point");
                }
                const Tape::VarId gap =
                    tape.add_const(tape.scale(confusion_losses[k], -1.0), nadir);
                const Tape::VarId term = tape.scale(tape.log_(gap), -1.0);
                adv = have_adv ? tape.add(adv, term) : term;
                have_adv = true;
            }
        }
        if (cfg_.alpha == 0.0) {
            total = adv;
        } else {
            total = tape.add(tape.scale(task_loss, cfg_.alpha), tape.scale(adv, 1.0 - cfg_.alpha));
        }
    }

    const double total_value = tape.value(total).item();
    tape.backward(total);
    std::vector<Tensor> grads;
    for (Tape::VarId id : enc.param_ids) grads.push_back(tape.grad(id));
    opt_encoder_.step(bundle_.encoder.params(), grads, effective_lr_c());
    return total_value;
}

void Trainer::end_epoch(double epoch_metric) {
    opt_encoder_.plateau_decay(epoch_metric, cfg_.patience, cfg_.decay_factor);
    opt_classifier_.plateau_decay(epoch_metric, cfg_.patience, cfg_.decay_factor);
}

namespace {

// Per-source cursor over a reshuffled index permutation; smaller sources
// recycle within an epoch.
struct SourceCursor {
    std::vector<std::size_t> perm;
    std::size_t pos = 0;

    void refill(std::size_t n, Rng& rng) {
        perm.resize(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        pos = 0;
    }

    std::size_t next(Rng& rng) {
        if (pos >= perm.size()) refill(perm.size(), rng);
        return perm[pos++];
    }
};

SourceBatch make_batch(const std::vector<Dataset>& sources, std::vector<SourceCursor>& cursors,
                       int m, Rng& rng) {
    const std::size_t ns = sources.size();
    const std::size_t dim = sources.front().front().features.size();
    SourceBatch batch;
    batch.num_sources = static_cast<int>(ns);
    batch.per_source = m;
    batch.x = Tensor({ns * static_cast<std::size_t>(m), dim});
    std::size_t row = 0;
    for (std::size_t s = 0; s < ns; ++s) {
        for (int i = 0; i < m; ++i, ++row) {
            const LabeledExample& ex = sources[s][cursors[s].next(rng)];
            std::copy(ex.features.begin(), ex.features.end(),
                      batch.x.values.begin() + static_cast<std::ptrdiff_t>(row * dim));
            batch.labels.push_back(ex.label);
            batch.domains.push_back(static_cast<int>(s));
        }
    }
    return batch;
}

TrainResult run_training(const std::vector<Dataset>& train_by_source,
                         const std::vector<Dataset>& val_by_source, const TrainConfig& cfg,
                         const Dataset* unseen, bool erm_mode) {
    cfg.validate();
    if (train_by_source.empty()) throw std::invalid_argument("no source domains given");
    // a single source is allowed but the adversarial signal degenerates; the
    // trainer warns when it is constructed
    for (const auto& ds : train_by_source) {
        if (ds.empty()) throw std::invalid_argument("empty source training set");
    }
    const std::size_t dim = train_by_source.front().front().features.size();
    if (cfg.model.input_dim != dim) {
        throw DimensionError("model input_dim does not match data dimension");
    }
    const int ns = static_cast<int>(train_by_source.size());

    ModelBundle bundle =
        ModelBundle::init(cfg.model, erm_mode ? 0 : static_cast<std::size_t>(ns), cfg.seed);
    Trainer trainer(std::move(bundle), cfg, ns, erm_mode);

    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<SourceCursor> cursors(static_cast<std::size_t>(ns));
    std::size_t largest = 0;
    for (std::size_t s = 0; s < train_by_source.size(); ++s) {
        cursors[s].refill(train_by_source[s].size(), rng);
        largest = std::max(largest, train_by_source[s].size());
    }
    const long iters_per_epoch = static_cast<long>(
        (largest + static_cast<std::size_t>(cfg.batch_per_domain) - 1) /
        static_cast<std::size_t>(cfg.batch_per_domain));

    TrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double task_loss_sum = 0.0;
        std::vector<double> disc_loss_sum(static_cast<std::size_t>(ns), 0.0);
        for (long it = 0; it < iters_per_epoch; ++it) {
            const SourceBatch batch =
                make_batch(train_by_source, cursors, cfg.batch_per_domain, rng);
            if (!erm_mode) {
                const std::vector<double> dl = trainer.discriminator_update(batch);
                for (std::size_t k = 0; k < dl.size(); ++k) disc_loss_sum[k] += dl[k];
            }
            task_loss_sum += trainer.classifier_update(batch);
            trainer.encoder_update(batch);
            trainer.advance_iteration();
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = task_loss_sum / static_cast<double>(iters_per_epoch);
        for (std::size_t k = 0; !erm_mode && k < disc_loss_sum.size(); ++k) {
            rec.disc_loss.push_back(disc_loss_sum[k] / static_cast<double>(iters_per_epoch));
        }
        for (const auto& val : val_by_source) {
            rec.source_val_acc.push_back(val.empty() ? 0.0 : accuracy(trainer.bundle(), val));
        }
        if (unseen != nullptr && !unseen->empty()) {
            rec.unseen_acc = accuracy(trainer.bundle(), *unseen);
        }
        rec.lr_encoder = trainer.effective_lr_c();
        rec.lr_discriminator = erm_mode ? 0.0 : cfg.lr_discriminator;
        result.history.push_back(std::move(rec));
        if (cfg.keep_snapshots) result.snapshots.push_back(trainer.bundle());

        trainer.end_epoch(result.history.back().train_loss);
    }
    result.bundle = trainer.bundle();
    return result;
}

}  // namespace

TrainResult train_g2dm(const std::vector<Dataset>& train_by_source,
                       const std::vector<Dataset>& val_by_source, const TrainConfig& cfg,
                       const Dataset* unseen) {
    return run_training(train_by_source, val_by_source, cfg, unseen, false);
}

TrainResult train_erm(const std::vector<Dataset>& train_by_source,
                      const std::vector<Dataset>& val_by_source, const TrainConfig& cfg,
                      const Dataset* unseen) {
    return run_training(train_by_source, val_by_source, cfg, unseen, true);
}

void save_history_jsonl(const MetricHistory& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write history: " + path);
    for (const auto& rec : history) {
        json j{{"epoch", rec.epoch},
               {"train_loss", rec.train_loss},
               {"source_val_acc", rec.source_val_acc},
               {"disc_loss", rec.disc_loss},
               {"lr_encoder", rec.lr_encoder},
               {"lr_discriminator", rec.lr_discriminator}};
        if (rec.unseen_acc) j["unseen_acc"] = *rec.unseen_acc;
        out << j.dump() << "\n";
    }
}

}  // namespace g2dm
