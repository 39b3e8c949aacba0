#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "g2dm/domains.hpp"
#include "g2dm/models.hpp"
#include "g2dm/optim.hpp"

namespace g2dm {

enum class Aggregation { kSum, kHypervolume };

Aggregation aggregation_from_string(const std::string& s);
std::string aggregation_to_string(Aggregation a);

struct TrainConfig {
    double lr_classifier = 0.01;      // beta_C, also drives the encoder
    double lr_discriminator = 0.005;  // beta_D
    double alpha = 0.8;
    int batch_per_domain = 64;  // m
    int epochs = 30;
    long warmup_iters = 1;       // nw
    double warmup_threshold = 1e-4;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double label_smoothing = 0.0;
    Aggregation aggregation = Aggregation::kSum;
    double nadir_slack = 2.5;
    int patience = 25;
    double decay_factor = 0.5;
    std::uint64_t seed = 1;
    bool keep_snapshots = false;  // retain a bundle copy per epoch
    ModelConfig model;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    std::vector<double> source_val_acc;
    std::vector<double> disc_loss;
    std::optional<double> unseen_acc;
    double lr_encoder = 0.0;
    double lr_discriminator = 0.0;
};

using MetricHistory = std::vector<EpochRecord>;

void save_history_jsonl(const MetricHistory& history, const std::string& path);

// Negative log hypervolume of the slack-adjusted gaps to the nadir point
// eta = slack*max(losses), floored at a small positive constant.
double hypervolume_aggregate(const std::vector<double>& losses, double slack);

// Balanced minibatch: exactly m examples per source, source index in
// `domains` (positions in the source list, not DomainSpec ids).
struct SourceBatch {
    Tensor x;
    std::vector<int> labels;
    std::vector<int> domains;
    int num_sources = 0;
    int per_source = 0;
};

// Owns the bundle and optimizer state for one run; exposes the three
// alternating updates so they can be exercised in isolation.
class Trainer {
  public:
    Trainer(ModelBundle bundle, TrainConfig cfg, int num_sources, bool erm_mode);

    // One step per discriminator on its one-vs-all binary cross-entropy. The
    // encoder output is treated as a constant. Returns the pre-step losses.
    std::vector<double> discriminator_update(const SourceBatch& batch);

    // One step on the smoothed task cross-entropy, classifier head only.
    // Returns the pre-step loss.
    double classifier_update(const SourceBatch& batch);

    // One step through the encoder on alpha*L_C + (1-alpha)*A with A the
    // adversarial aggregate; discriminator and classifier parameters are
    // constants. Returns the pre-step total loss.
    double encoder_update(const SourceBatch& batch);

    void end_epoch(double epoch_metric);

    double effective_lr_c() const;

    ModelBundle& bundle() { return bundle_; }
    const ModelBundle& bundle() const { return bundle_; }
    long iteration() const { return iteration_; }
    void advance_iteration() { ++iteration_; }

  private:
    void check_batch(const SourceBatch& batch) const;

    ModelBundle bundle_;
    TrainConfig cfg_;
    int num_sources_;
    bool erm_mode_;
    long iteration_ = 0;
    SgdMomentum opt_encoder_;
    SgdMomentum opt_classifier_;
    std::vector<SgdMomentum> opt_discriminators_;
};

struct TrainResult {
    ModelBundle bundle;
    MetricHistory history;
    std::vector<ModelBundle> snapshots;  // per epoch, when requested
};

// Algorithm: per iteration, one balanced minibatch per source, then
// discriminator, classifier and encoder updates in that order. Epoch length
// is ceil(largest source / m); smaller sources recycle with reshuffling.
// Unseen data, when given, is only evaluated for logging.
TrainResult train_g2dm(const std::vector<Dataset>& train_by_source,
                       const std::vector<Dataset>& val_by_source, const TrainConfig& cfg,
                       const Dataset* unseen = nullptr);

// Same architecture, optimizer and batch sequence with the adversarial
// machinery removed.
TrainResult train_erm(const std::vector<Dataset>& train_by_source,
                      const std::vector<Dataset>& val_by_source, const TrainConfig& cfg,
                      const Dataset* unseen = nullptr);

}  // namespace g2dm
