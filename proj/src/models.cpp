#include "g2dm/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace g2dm {

using nlohmann::json;

Mlp Mlp::init(const std::vector<std::size_t>& widths, Rng& rng) {
    if (widths.size() < 2) throw std::invalid_argument("Mlp::init needs >= 2 widths");
    Mlp net;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        Linear lin;
        lin.w = Tensor({widths[l], widths[l + 1]});
        lin.b = Tensor({widths[l + 1]});
        const double scale = std::sqrt(2.0 / static_cast<double>(widths[l]));
        for (double& v : lin.w.values) v = scale * gauss(rng);
        net.layers.push_back(std::move(lin));
    }
    return net;
}

std::vector<Tensor*> Mlp::params() {
    std::vector<Tensor*> out;
    for (auto& l : layers) {
        out.push_back(&l.w);
        out.push_back(&l.b);
    }
    return out;
}

std::vector<const Tensor*> Mlp::params() const {
    std::vector<const Tensor*> out;
    for (const auto& l : layers) {
        out.push_back(&l.w);
        out.push_back(&l.b);
    }
    return out;
}

MlpVars mlp_forward(Tape& tape, const Mlp& net, Tape::VarId x, bool trainable) {
    MlpVars vars;
    Tape::VarId h = x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Tape::VarId w = tape.leaf(net.layers[l].w, trainable);
        const Tape::VarId b = tape.leaf(net.layers[l].b, trainable);
        vars.param_ids.push_back(w);
        vars.param_ids.push_back(b);
        h = tape.add_row(tape.matmul(h, w), b);
        if (l + 1 < net.layers.size()) h = tape.relu(h);
    }
    vars.out = h;
    return vars;
}

Tensor mlp_eval(const Mlp& net, const Tensor& x) {
    Tape tape;
    return tape.value(mlp_forward(tape, net, tape.leaf(x, false), false).out);
}

RandomProjection RandomProjection::init(std::size_t d, std::size_t p, std::uint64_t seed) {
    if (d < 1 || p < 1) throw std::invalid_argument("projection dims must be >= 1");
    RandomProjection proj;
    proj.seed = seed;
    proj.matrix = Tensor({d, p});
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& v : proj.matrix.values) v = gauss(rng);
    for (std::size_t j = 0; j < p; ++j) {
        double norm = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double v = proj.matrix.values[i * p + j];
            norm += v * v;
        }
        norm = std::sqrt(norm);
        if (norm < 1e-30) norm = 1.0;
        for (std::size_t i = 0; i < d; ++i) proj.matrix.values[i * p + j] /= norm;
    }
    return proj;
}

ModelBundle ModelBundle::init(const ModelConfig& cfg, std::size_t num_sources,
                              std::uint64_t seed) {
    ModelBundle bundle;
    bundle.config = cfg;
    Rng rng(seed);

    std::vector<std::size_t> enc_widths = {cfg.input_dim};
    enc_widths.insert(enc_widths.end(), cfg.encoder_hidden.begin(), cfg.encoder_hidden.end());
    bundle.encoder = Mlp::init(enc_widths, rng);

    const std::size_t d = enc_widths.back();
    bundle.classifier = Mlp::init({d, cfg.num_classes}, rng);

    for (std::size_t k = 0; k < num_sources; ++k) {
        DomainDiscriminator disc;
        std::size_t disc_in = d;
        if (cfg.projection_size > 0) {
            disc.projection = RandomProjection::init(d, cfg.projection_size, rng());
            disc_in = cfg.projection_size;
        }
        std::vector<std::size_t> widths = {disc_in};
        widths.insert(widths.end(), cfg.discriminator_hidden.begin(),
                      cfg.discriminator_hidden.end());
        widths.push_back(1);
        disc.net = Mlp::init(widths, rng);
        bundle.discriminators.push_back(std::move(disc));
    }
    return bundle;
}

BundleOutput forward_bundle(const ModelBundle& bundle, const Tensor& x) {
    if (x.shape.size() != 2 || x.shape[1] != bundle.encoder.in_dim()) {
        throw DimensionError("forward_bundle: input dimension mismatch");
    }
    BundleOutput out;
    out.encoded = mlp_eval(bundle.encoder, x);
    out.class_logits = mlp_eval(bundle.classifier, out.encoded);
    for (const auto& disc : bundle.discriminators) {
        Tensor h = out.encoded;
        if (disc.has_projection()) {
            Tape tape;
            h = tape.value(tape.matmul(tape.leaf(h, false), tape.leaf(disc.projection.matrix, false)));
        }
        out.domain_logits.push_back(mlp_eval(disc.net, h));
    }
    return out;
}

Tensor encode(const ModelBundle& bundle, const Tensor& x) {
    return mlp_eval(bundle.encoder, x);
}

Tensor smoothed_targets(const std::vector<int>& labels, std::size_t num_classes, double ls) {
    if (ls < 0.0 || ls >= 1.0) throw std::invalid_argument("label smoothing must be in [0,1)");
    Tensor t({labels.size(), num_classes});
    const double off = ls / static_cast<double>(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
            throw std::invalid_argument("class label out of range");
        }
        for (std::size_t c = 0; c < num_classes; ++c) t.values[i * num_classes + c] = off;
        t.values[i * num_classes + static_cast<std::size_t>(labels[i])] += 1.0 - ls;
    }
    return t;
}

double smoothed_cross_entropy(const Tensor& logits, const std::vector<int>& labels, double ls) {
    Tape tape;
    const Tensor targets = smoothed_targets(labels, logits.shape[1], ls);
    return tape.value(tape.softmax_cross_entropy(tape.leaf(logits, false), targets)).item();
}

Tensor ova_labels(const std::vector<int>& domain_indices, int k, int num_sources) {
    if (k < 0 || k >= num_sources) throw std::invalid_argument("ova_labels: k out of range");
    Tensor t({domain_indices.size()});
    for (std::size_t i = 0; i < domain_indices.size(); ++i) {
        if (domain_indices[i] < 0 || domain_indices[i] >= num_sources) {
            throw std::invalid_argument("ova_labels: domain index out of range");
        }
        t.values[i] = domain_indices[i] == k ? 1.0 : 0.0;
    }
    return t;
}

double accuracy(const ModelBundle& bundle, const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("accuracy: empty dataset");
    const Tensor logits = mlp_eval(bundle.classifier, encode(bundle, features_tensor(data)));
    const std::size_t c = logits.shape[1];
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j)
            if (logits.values[i * c + j] > logits.values[i * c + best]) best = j;
        if (static_cast<int>(best) == data[i].label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

json tensor_to_json(const Tensor& t) {
    return json{{"shape", t.shape}, {"values", t.values}};
}

Tensor tensor_from_json(const json& j) {
    return Tensor(j.at("shape").get<std::vector<std::size_t>>(),
                  j.at("values").get<std::vector<double>>());
}

json mlp_to_json(const Mlp& net) {
    json layers = json::array();
    for (const auto& l : net.layers) {
        layers.push_back(json{{"w", tensor_to_json(l.w)}, {"b", tensor_to_json(l.b)}});
    }
    return layers;
}

Mlp mlp_from_json(const json& j) {
    Mlp net;
    for (const auto& l : j) {
        net.layers.push_back(Linear{tensor_from_json(l.at("w")), tensor_from_json(l.at("b"))});
    }
    return net;
}

}  // namespace

void save_checkpoint(const ModelBundle& bundle, const std::string& path) {
    json j;
    j["format"] = "g2dm-checkpoint";
    j["version"] = 1;
    j["config"] = {{"input_dim", bundle.config.input_dim},
                   {"num_classes", bundle.config.num_classes},
                   {"encoder_hidden", bundle.config.encoder_hidden},
                   {"discriminator_hidden", bundle.config.discriminator_hidden},
                   {"projection_size", bundle.config.projection_size}};
    j["encoder"] = mlp_to_json(bundle.encoder);
    j["classifier"] = mlp_to_json(bundle.classifier);
    json discs = json::array();
    for (const auto& d : bundle.discriminators) {
        json dj;
        dj["net"] = mlp_to_json(d.net);
        dj["projection_seed"] = d.projection.seed;
        dj["projection"] = tensor_to_json(d.projection.matrix);
        discs.push_back(std::move(dj));
    }
    j["discriminators"] = std::move(discs);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump(2) << "\n";
}

ModelBundle load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (j.value("format", "") != "g2dm-checkpoint" || j.value("version", 0) != 1) {
        throw ParseError(path + ": unrecognized checkpoint format");
    }
    ModelBundle bundle;
    const json& c = j.at("config");
    bundle.config.input_dim = c.at("input_dim").get<std::size_t>();
    bundle.config.num_classes = c.at("num_classes").get<std::size_t>();
    bundle.config.encoder_hidden = c.at("encoder_hidden").get<std::vector<std::size_t>>();
    bundle.config.discriminator_hidden =
        c.at("discriminator_hidden").get<std::vector<std::size_t>>();
    bundle.config.projection_size = c.at("projection_size").get<std::size_t>();
    bundle.encoder = mlp_from_json(j.at("encoder"));
    bundle.classifier = mlp_from_json(j.at("classifier"));
    for (const auto& dj : j.at("discriminators")) {
        DomainDiscriminator disc;
        disc.net = mlp_from_json(dj.at("net"));
        disc.projection.seed = dj.at("projection_seed").get<std::uint64_t>();
        disc.projection.matrix = tensor_from_json(dj.at("projection"));
        bundle.discriminators.push_back(std::move(disc));
    }
    return bundle;
}

}  // namespace g2dm
