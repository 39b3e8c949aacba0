#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "g2dm/tensor.hpp"

namespace g2dm {

using Rng = std::mt19937_64;

// Built-in synthetic families. Every family draws a latent point and its
// label first; the per-domain transform then acts on features only, so the
// labeling function is identical across domains by construction.
enum class Family { kTwoMoons, kGaussianClasses, kCovShiftGaussians };

Family family_from_string(const std::string& s);
std::string family_to_string(Family f);

// One domain: a base family plus the feature transform that distinguishes it
// from its siblings. x' = cov_scale * R(angle) * x + translation + noise*eps.
struct DomainSpec {
    int id = 0;
    Family family = Family::kTwoMoons;
    double angle_deg = 0.0;
    std::vector<double> translation;  // empty means zero
    double noise_scale = 0.0;
    double cov_scale = 1.0;
    // base-distribution parameters (shared across domains of one meta)
    int dim = 2;
    int num_classes = 2;
    double class_sep = 2.0;
};

struct LabeledExample {
    std::vector<double> features;
    int label = 0;
    int domain = 0;
};

using Dataset = std::vector<LabeledExample>;

// Simplex weights over N_S source domains.
struct MixtureWeights {
    std::vector<double> pi;
};

// Checks non-negativity and sum-to-one within 1e-9.
void validate_simplex(const std::vector<double>& pi);

// Weighted collection of domains sharing one labeling function.
struct MetaDistribution {
    std::vector<DomainSpec> domains;
    std::vector<double> weights;

    void validate() const;
};

int sample_domain(const MetaDistribution& meta, Rng& rng);

Dataset sample_examples(const DomainSpec& spec, int n, Rng& rng);

// Draws each example by first picking a component per pi. Origin indices are
// recorded in LabeledExample::domain.
Dataset sample_mixture(const std::vector<DomainSpec>& domains, const MixtureWeights& pi, int n,
                       Rng& rng);

// Renders an already-drawn latent point under the spec's transform. Exposed
// so the covariate-shift invariant can be asserted directly.
std::vector<double> apply_transform(const DomainSpec& spec, const std::vector<double>& latent,
                                    Rng& rng);
void latent_sample(const DomainSpec& spec, Rng& rng, std::vector<double>& latent, int& label);

// CSV schema: header `domain,label,f0,...,fD-1`.
std::vector<Dataset> load_csv(const std::string& path);
void save_csv(const std::string& path, const std::vector<Dataset>& by_domain);

// Stratified (by domain and class) disjoint partitions. fractions must be
// positive and sum to <= 1.
std::vector<Dataset> split(const Dataset& data, const std::vector<double>& fractions, Rng& rng);

// Conveniences for handing datasets to the engine.
Tensor features_tensor(const Dataset& data);
std::vector<int> labels_of(const Dataset& data);

}  // namespace g2dm
