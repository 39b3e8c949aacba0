#include "g2dm/domains.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace g2dm {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kSimplexTol = 1e-9;
}  // namespace

Family family_from_string(const std::string& s) {
    if (s == "moons") return Family::kTwoMoons;
    if (s == "gauss_classes") return Family::kGaussianClasses;
    if (s == "cov_shift") return Family::kCovShiftGaussians;
    throw std::invalid_argument("unknown family id: " + s);
}

std::string family_to_string(Family f) {
    switch (f) {
        case Family::kTwoMoons: return "moons";
        case Family::kGaussianClasses: return "gauss_classes";
        case Family::kCovShiftGaussians: return "cov_shift";
    }
    throw std::invalid_argument("unknown family enum");
}

void validate_simplex(const std::vector<double>& pi) {
    if (pi.empty()) throw std::invalid_argument("empty mixture weights");
    double sum = 0.0;
    for (double w : pi) {
        if (w < -kSimplexTol || w > 1.0 + kSimplexTol) {
            throw std::invalid_argument("mixture weight outside [0,1]");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > kSimplexTol) {
        throw std::invalid_argument("mixture weights do not sum to 1");
    }
}

void MetaDistribution::validate() const {
    if (domains.empty()) throw std::invalid_argument("meta-distribution with no domains");
    if (weights.size() != domains.size()) {
        throw std::invalid_argument("meta-distribution weight/domain count mismatch");
    }
    validate_simplex(weights);
}

int sample_domain(const MetaDistribution& meta, Rng& rng) {
    meta.validate();
    const double total = std::accumulate(meta.weights.begin(), meta.weights.end(), 0.0);
    if (total <= 0.0) throw std::invalid_argument("degenerate meta-distribution weights");
    std::uniform_real_distribution<double> u(0.0, total);
    double r = u(rng);
    for (std::size_t i = 0; i < meta.weights.size(); ++i) {
        r -= meta.weights[i];
        if (r <= 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(meta.weights.size()) - 1;
}

void latent_sample(const DomainSpec& spec, Rng& rng, std::vector<double>& latent, int& label) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    switch (spec.family) {
        case Family::kTwoMoons: {
            label = unif(rng) < 0.5 ? 0 : 1;
            const double t = unif(rng) * kPi;
            latent.assign(2, 0.0);
            if (label == 0) {
                latent[0] = std::cos(t);
                latent[1] = std::sin(t);
            } else {
                latent[0] = 1.0 - std::cos(t);
                latent[1] = 0.5 - std::sin(t);
            }
            break;
        }
        case Family::kGaussianClasses: {
            if (spec.dim < 2) throw std::invalid_argument("gauss_classes requires dim >= 2");
            label = static_cast<int>(unif(rng) * spec.num_classes);
            label = std::min(label, spec.num_classes - 1);
            latent.assign(static_cast<std::size_t>(spec.dim), 0.0);
            const double theta = 2.0 * kPi * label / spec.num_classes;
            latent[0] = spec.class_sep * std::cos(theta);
            latent[1] = spec.class_sep * std::sin(theta);
            for (double& v : latent) v += gauss(rng);
            break;
        }
        case Family::kCovShiftGaussians: {
            label = unif(rng) < 0.5 ? 0 : 1;
            latent.assign(static_cast<std::size_t>(spec.dim), 0.0);
            latent[0] = (label == 0 ? -1.0 : 1.0) * spec.class_sep;
            for (double& v : latent) v += gauss(rng);
            break;
        }
    }
}

std::vector<double> apply_transform(const DomainSpec& spec, const std::vector<double>& latent,
                                    Rng& rng) {
    std::vector<double> x = latent;
    for (double& v : x) v *= spec.cov_scale;
    if (x.size() >= 2) {
        const double a = spec.angle_deg * kPi / 180.0;
        const double c = std::cos(a), s = std::sin(a);
        const double x0 = x[0], x1 = x[1];
        x[0] = c * x0 - s * x1;
        x[1] = s * x0 + c * x1;
    }
    for (std::size_t i = 0; i < spec.translation.size() && i < x.size(); ++i) {
        x[i] += spec.translation[i];
    }
    if (spec.noise_scale > 0.0) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (double& v : x) v += spec.noise_scale * gauss(rng);
    }
    return x;
}

Dataset sample_examples(const DomainSpec& spec, int n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("sample_examples: n must be >= 1");
    Dataset out;
    out.reserve(static_cast<std::size_t>(n));
    std::vector<double> latent;
    int label = 0;
    for (int i = 0; i < n; ++i) {
        latent_sample(spec, rng, latent, label);
        LabeledExample ex;
        ex.features = apply_transform(spec, latent, rng);
        ex.label = label;
        ex.domain = spec.id;
        out.push_back(std::move(ex));
    }
    return out;
}

Dataset sample_mixture(const std::vector<DomainSpec>& domains, const MixtureWeights& pi, int n,
                       Rng& rng) {
    if (pi.pi.size() != domains.size()) {
        throw std::invalid_argument("sample_mixture: |pi| must equal |domains|");
    }
    validate_simplex(pi.pi);
    MetaDistribution meta{domains, pi.pi};
    Dataset out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int k = sample_domain(meta, rng);
        Dataset one = sample_examples(domains[static_cast<std::size_t>(k)], 1, rng);
        one[0].domain = static_cast<int>(k);
        out.push_back(std::move(one[0]));
    }
    return out;
}

std::vector<Dataset> load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    if (header.size() < 3 || header[0] != "domain" || header[1] != "label") {
        throw ParseError(path + ": line 1: header must start with 'domain,label'");
    }
    const std::size_t dim = header.size() - 2;
    for (std::size_t i = 0; i < dim; ++i) {
        if (header[i + 2] != "f" + std::to_string(i)) {
            throw ParseError(path + ": line 1: expected column f" + std::to_string(i));
        }
    }

    std::map<int, Dataset> groups;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != header.size()) {
            throw ParseError(path + ": line " + std::to_string(lineno) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(cells.size()));
        }
        LabeledExample ex;
        try {
            std::size_t pos = 0;
            ex.domain = std::stoi(cells[0], &pos);
            if (pos != cells[0].size()) throw std::invalid_argument("domain");
            ex.label = std::stoi(cells[1], &pos);
            if (pos != cells[1].size()) throw std::invalid_argument("label");
            for (std::size_t i = 0; i < dim; ++i) {
                ex.features.push_back(std::stod(cells[i + 2], &pos));
                if (pos != cells[i + 2].size()) throw std::invalid_argument("feature");
            }
        } catch (const std::exception&) {
            throw ParseError(path + ": line " + std::to_string(lineno) +
                             ": non-numeric field");
        }
        groups[ex.domain].push_back(std::move(ex));
    }
    std::vector<Dataset> out;
    out.reserve(groups.size());
    for (auto& [id, ds] : groups) out.push_back(std::move(ds));
    return out;
}

void save_csv(const std::string& path, const std::vector<Dataset>& by_domain) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    std::size_t dim = 0;
    for (const auto& ds : by_domain)
        if (!ds.empty()) dim = ds.front().features.size();
    out << "domain,label";
    for (std::size_t i = 0; i < dim; ++i) out << ",f" << i;
    out << "\n";
    out.precision(17);
    for (const auto& ds : by_domain) {
        for (const auto& ex : ds) {
            out << ex.domain << "," << ex.label;
            for (double f : ex.features) out << "," << f;
            out << "\n";
        }
    }
}

std::vector<Dataset> split(const Dataset& data, const std::vector<double>& fractions, Rng& rng) {
    if (fractions.empty()) throw std::invalid_argument("split: no fractions given");
    double sum = 0.0;
    for (double f : fractions) {
        if (f <= 0.0) throw std::invalid_argument("split: fractions must be positive");
        sum += f;
    }
    if (sum > 1.0 + 1e-9) throw std::invalid_argument("split: fractions sum above 1");

    // (domain, class) cells, shuffled independently, then proportionally
    // allocated. Remainders go to the earliest partitions.
    std::map<std::pair<int, int>, std::vector<std::size_t>> cells;
    for (std::size_t i = 0; i < data.size(); ++i) {
        cells[{data[i].domain, data[i].label}].push_back(i);
    }
    const std::size_t parts = fractions.size();
    std::vector<Dataset> out(parts);
    for (auto& [key, idx] : cells) {
        if (idx.size() < parts) {
            throw std::invalid_argument("split: cell (domain " + std::to_string(key.first) +
                                        ", class " + std::to_string(key.second) +
                                        ") smaller than partition count");
        }
        std::shuffle(idx.begin(), idx.end(), rng);
        std::size_t cursor = 0;
        std::vector<std::size_t> take(parts);
        std::size_t assigned = 0;
        for (std::size_t p = 0; p < parts; ++p) {
            take[p] = static_cast<std::size_t>(fractions[p] * static_cast<double>(idx.size()));
            assigned += take[p];
        }
        // hand leftover slots (from flooring) to partitions in order, only up
        // to the requested total fraction of the cell
        std::size_t target_total =
            static_cast<std::size_t>(std::round(sum * static_cast<double>(idx.size())));
        for (std::size_t p = 0; assigned < target_total; p = (p + 1) % parts) {
            ++take[p];
            ++assigned;
        }
        for (std::size_t p = 0; p < parts; ++p) {
            for (std::size_t j = 0; j < take[p] && cursor < idx.size(); ++j, ++cursor) {
                out[p].push_back(data[idx[cursor]]);
            }
        }
    }
    return out;
}

Tensor features_tensor(const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("features_tensor: empty dataset");
    const std::size_t n = data.size();
    const std::size_t d = data.front().features.size();
    Tensor t({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        if (data[i].features.size() != d) {
            throw DimensionError("inconsistent feature dimension in dataset");
        }
        for (std::size_t j = 0; j < d; ++j) t.values[i * d + j] = data[i].features[j];
    }
    return t;
}

std::vector<int> labels_of(const Dataset& data) {
    std::vector<int> out;
    out.reserve(data.size());
    for (const auto& ex : data) out.push_back(ex.label);
    return out;
}

}  // namespace g2dm
