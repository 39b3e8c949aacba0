#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "g2dm/domains.hpp"
#include "g2dm/models.hpp"

namespace g2dm {

using FeatureSet = std::vector<std::vector<double>>;

// Domain-classifier backend for proxy A-distance estimation: a shallow
// network trained by the engine. hidden = 0 degrades to logistic regression.
struct EstimatorConfig {
    int folds = 5;
    int cap_per_domain = 500;
    std::size_t hidden = 16;
    int epochs = 100;
    double lr = 0.2;
    double momentum = 0.9;
    double noise_bound = 0.15;  // calibrated same-distribution tolerance
    std::uint64_t seed = 7;
};

struct ProxyResult {
    double distance = 0.0;  // max(0, 2(1-2*err)) in [0,2]
    double error = 0.0;     // cross-validated domain classification error
    int clamp_events = 0;
};

ProxyResult proxy_a_distance(const FeatureSet& sample_p, const FeatureSet& sample_q,
                             const EstimatorConfig& cfg);

struct DivergenceMatrix {
    std::vector<std::string> labels;
    std::vector<double> values;  // n x n, diagonal fixed at 0
    double noise_tolerance = 0.0;
    int clamp_events = 0;

    std::size_t size() const { return labels.size(); }
    double at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
    double max_offdiag() const;
    double mean_offdiag() const;
};

// Entry (i,j) from a single shared-fold estimate per unordered pair, so the
// matrix is exactly symmetric. When a bundle is given, features are encoded
// first.
DivergenceMatrix pairwise_matrix(const std::vector<FeatureSet>& by_domain,
                                 const EstimatorConfig& cfg,
                                 const ModelBundle* bundle = nullptr);

FeatureSet features_of(const Dataset& data);
FeatureSet encode_features(const ModelBundle& bundle, const FeatureSet& raw);

struct DecompositionResult {
    std::vector<double> ova_loss;      // per k
    std::vector<double> pairwise_sum;  // per k
    std::vector<double> residual;      // per k
    double max_residual = 0.0;
};

// One-vs-all loss vs the explicit sum of its pairwise groupings; batches must
// be balanced or the weighting breaks.
DecompositionResult ova_decomposition_check(const std::vector<Tensor>& encoded_by_domain,
                                            const std::vector<DomainDiscriminator>& discs);

struct HullCheckReport {
    double epsilon_hat = 0.0;
    int satisfied = 0;
    int total = 0;
    double fraction = 0.0;
    std::vector<double> divergences;
};

// Monte Carlo check that mixtures of the sources stay within eps_hat + tau of
// each other in estimated divergence.
HullCheckReport hull_bound_check(const std::vector<DomainSpec>& domains, int n_pairs,
                                 const EstimatorConfig& cfg, double tau, int n_per_sample,
                                 Rng& rng);

struct BoundAudit {
    std::vector<double> pi_star;
    double gamma_hat = 0.0;
    double epsilon_hat = 0.0;
    double lambda_hat = 0.0;
    std::vector<double> source_risks;
    double lhs = 0.0;  // empirical unseen risk of the audited model
    double rhs = 0.0;  // sum_i pi*_i R_S^i + (gamma+eps)/2 + lambda
    bool privileged = true;  // uses labeled unseen data by construction
};

struct AuditConfig {
    double grid_resolution = 0.1;
    int refinements = 200;
    EstimatorConfig coarse;  // pi* search
    EstimatorConfig fine;    // final gamma and epsilon estimates
    int lambda_epochs = 200;
    double lambda_lr = 0.1;
    int mixture_sample_size = 500;
    std::uint64_t seed = 11;
};

BoundAudit bound_audit(const std::vector<Dataset>& sources, const Dataset& unseen,
                       const ModelBundle& bundle, const AuditConfig& cfg);

struct HeatmapDelta {
    std::vector<std::string> labels;
    std::vector<double> delta;  // erm - g2dm, entrywise
    double fraction_positive = 0.0;
    double mean_delta = 0.0;
};

HeatmapDelta heatmap_delta(const DivergenceMatrix& erm, const DivergenceMatrix& g2dm);

}  // namespace g2dm
