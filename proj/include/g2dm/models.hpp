#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "g2dm/domains.hpp"
#include "g2dm/tape.hpp"
#include "g2dm/tensor.hpp"

namespace g2dm {

struct Linear {
    Tensor w;  // (in, out)
    Tensor b;  // (out)
};

// Fully connected stack; rectifier between layers, linear output.
struct Mlp {
    std::vector<Linear> layers;

    static Mlp init(const std::vector<std::size_t>& widths, Rng& rng);

    std::size_t in_dim() const { return layers.front().w.shape[0]; }
    std::size_t out_dim() const { return layers.back().w.shape[1]; }

    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;
};

// Records leaf ids so gradients can be read back after backward().
struct MlpVars {
    std::vector<Tape::VarId> param_ids;  // w0, b0, w1, b1, ...
    Tape::VarId out = 0;
};

MlpVars mlp_forward(Tape& tape, const Mlp& net, Tape::VarId x, bool trainable);

// Plain (tape-free) evaluation for inference paths.
Tensor mlp_eval(const Mlp& net, const Tensor& x);

// Frozen linear map z -> z*P with every output-unit weight vector normalized
// to unit L2 norm.
struct RandomProjection {
    Tensor matrix;  // (d, p)
    std::uint64_t seed = 0;

    static RandomProjection init(std::size_t d, std::size_t p, std::uint64_t seed);
};

// One-vs-all domain discriminator: frozen projection in front of a trainable
// stack ending in a single logit. With p == 0 the projection is absent.
struct DomainDiscriminator {
    RandomProjection projection;  // empty matrix when disabled
    Mlp net;

    bool has_projection() const { return !projection.matrix.values.empty(); }
};

struct ModelConfig {
    std::size_t input_dim = 2;
    std::size_t num_classes = 2;
    std::vector<std::size_t> encoder_hidden = {64, 32};  // last entry is d
    std::vector<std::size_t> discriminator_hidden = {32, 16};
    std::size_t projection_size = 64;  // 0 disables the projection layer
};

struct ModelBundle {
    ModelConfig config;
    Mlp encoder;
    Mlp classifier;
    std::vector<DomainDiscriminator> discriminators;

    static ModelBundle init(const ModelConfig& cfg, std::size_t num_sources,
                            std::uint64_t seed);

    std::size_t encoded_dim() const { return encoder.out_dim(); }
};

struct BundleOutput {
    Tensor class_logits;               // (n, C)
    std::vector<Tensor> domain_logits; // per discriminator, (n, 1)
    Tensor encoded;                    // (n, d)
};

BundleOutput forward_bundle(const ModelBundle& bundle, const Tensor& x);

Tensor encode(const ModelBundle& bundle, const Tensor& x);

// target = (1-ls)*onehot + ls/C, evaluated through the engine's stable
// softmax cross-entropy.
Tensor smoothed_targets(const std::vector<int>& labels, std::size_t num_classes, double ls);
double smoothed_cross_entropy(const Tensor& logits, const std::vector<int>& labels, double ls);

// 1 where domain index == k, else 0.
Tensor ova_labels(const std::vector<int>& domain_indices, int k, int num_sources);

// 0-1 accuracy of the classifier head over encoded inputs.
double accuracy(const ModelBundle& bundle, const Dataset& data);

// Versioned JSON checkpoint; round-trips exactly.
void save_checkpoint(const ModelBundle& bundle, const std::string& path);
ModelBundle load_checkpoint(const std::string& path);

}  // namespace g2dm
