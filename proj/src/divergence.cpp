#include "g2dm/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "g2dm/optim.hpp"
#include "g2dm/tape.hpp"

namespace g2dm {

namespace {

Tensor to_tensor(const FeatureSet& rows) {
    if (rows.empty()) throw std::invalid_argument("empty feature set");
    const std::size_t n = rows.size(), d = rows.front().size();
    Tensor t({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != d) throw DimensionError("ragged feature set");
        std::copy(rows[i].begin(), rows[i].end(), t.values.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    return t;
}

// Full-batch heavy-ball training of a binary head on 0/1 labels.
Mlp train_binary_classifier(const Tensor& x, const Tensor& labels, const EstimatorConfig& cfg,
                            Rng& rng) {
    std::vector<std::size_t> widths = {x.shape[1]};
    if (cfg.hidden > 0) widths.push_back(cfg.hidden);
    widths.push_back(1);
    Mlp net = Mlp::init(widths, rng);
    SgdMomentum opt(cfg.momentum, 0.0);
    for (int e = 0; e < cfg.epochs; ++e) {
        Tape tape;
        MlpVars vars = mlp_forward(tape, net, tape.leaf(x, false), true);
        const Tape::VarId loss = tape.bce_logits(vars.out, labels);
        tape.backward(loss);
        std::vector<Tensor> grads;
        for (Tape::VarId id : vars.param_ids) grads.push_back(tape.grad(id));
        opt.step(net.params(), grads, cfg.lr);
    }
    return net;
}

double binary_error(const Mlp& net, const Tensor& x, const Tensor& labels) {
    const Tensor logits = mlp_eval(net, x);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const int pred = logits.values[i] > 0.0 ? 1 : 0;
        if (pred != static_cast<int>(labels.values[i])) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(logits.size());
}

std::vector<std::size_t> capped_shuffled_indices(std::size_t total, std::size_t cap, Rng& rng) {
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    if (idx.size() > cap) idx.resize(cap);
    return idx;
}

std::vector<double> dirichlet_flat(std::size_t k, Rng& rng) {
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> pi(k);
    double sum = 0.0;
    for (double& v : pi) {
        v = expo(rng);
        sum += v;
    }
    for (double& v : pi) v /= sum;
    return pi;
}

void simplex_grid_rec(std::size_t dims, std::size_t pos, long remaining, long steps,
                      std::vector<double>& current, std::vector<std::vector<double>>& out) {
    if (pos + 1 == dims) {
        current[pos] = static_cast<double>(remaining) / static_cast<double>(steps);
        out.push_back(current);
        return;
    }
    for (long v = 0; v <= remaining; ++v) {
        current[pos] = static_cast<double>(v) / static_cast<double>(steps);
        simplex_grid_rec(dims, pos + 1, remaining - v, steps, current, out);
    }
}

std::vector<std::vector<double>> simplex_grid(std::size_t dims, double resolution) {
    if (resolution <= 0.0 || resolution > 1.0) {
        throw std::invalid_argument("simplex grid resolution must give >= 2 points per axis");
    }
    const long steps = std::lround(1.0 / resolution);
    std::vector<std::vector<double>> out;
    std::vector<double> current(dims, 0.0);
    simplex_grid_rec(dims, 0, steps, steps, current, out);
    return out;
}

double per_sample_bce(double logit, double y) {
    return std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::abs(logit)));
}

Tensor discriminator_logits(const DomainDiscriminator& disc, const Tensor& z) {
    Tensor h = z;
    if (disc.has_projection()) {
        Tape tape;
        h = tape.value(tape.matmul(tape.leaf(z, false), tape.leaf(disc.projection.matrix, false)));
    }
    return mlp_eval(disc.net, h);
}

}  // namespace

ProxyResult proxy_a_distance(const FeatureSet& sample_p, const FeatureSet& sample_q,
                             const EstimatorConfig& cfg) {
    if (sample_p.empty() || sample_q.empty()) {
        throw std::invalid_argument("proxy_a_distance: empty sample");
    }
    if (sample_p.front().size() != sample_q.front().size()) {
        throw DimensionError("proxy_a_distance: feature dimension mismatch");
    }
    Rng rng(cfg.seed);
    const std::size_t n = std::min({sample_p.size(), sample_q.size(),
                                    static_cast<std::size_t>(cfg.cap_per_domain)});
    if (n < static_cast<std::size_t>(cfg.folds)) {
        throw std::invalid_argument("proxy_a_distance: sample smaller than fold count");
    }
    const auto ip = capped_shuffled_indices(sample_p.size(), n, rng);
    const auto iq = capped_shuffled_indices(sample_q.size(), n, rng);

    const std::size_t d = sample_p.front().size();
    double err_sum = 0.0;
    for (int f = 0; f < cfg.folds; ++f) {
        FeatureSet train_x, test_x;
        std::vector<double> train_y, test_y;
        for (std::size_t i = 0; i < n; ++i) {
            const bool held = static_cast<int>(i) % cfg.folds == f;
            (held ? test_x : train_x).push_back(sample_p[ip[i]]);
            (held ? test_y : train_y).push_back(1.0);
            (held ? test_x : train_x).push_back(sample_q[iq[i]]);
            (held ? test_y : train_y).push_back(0.0);
        }
        (void)d;
        const Tensor xt = to_tensor(train_x);
        const Tensor yt({train_y.size()}, train_y);
        Rng fold_rng(cfg.seed + 0x5bd1e995u * static_cast<std::uint64_t>(f + 1));
        const Mlp net = train_binary_classifier(xt, yt, cfg, fold_rng);
        err_sum += binary_error(net, to_tensor(test_x), Tensor({test_y.size()}, test_y));
    }
    ProxyResult res;
    res.error = err_sum / static_cast<double>(cfg.folds);
    const double raw = 2.0 * (1.0 - 2.0 * res.error);
    res.distance = raw;
    if (raw < 0.0) {
        res.distance = 0.0;
        res.clamp_events = 1;
    } else if (raw > 2.0) {
        res.distance = 2.0;
        res.clamp_events = 1;
    }
    return res;
}

double DivergenceMatrix::max_offdiag() const {
    double mx = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
        for (std::size_t j = 0; j < size(); ++j)
            if (i != j) mx = std::max(mx, at(i, j));
    return mx;
}

double DivergenceMatrix::mean_offdiag() const {
    if (size() < 2) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
        for (std::size_t j = 0; j < size(); ++j)
            if (i != j) sum += at(i, j);
    return sum / static_cast<double>(size() * (size() - 1));
}

FeatureSet features_of(const Dataset& data) {
    FeatureSet out;
    out.reserve(data.size());
    for (const auto& ex : data) out.push_back(ex.features);
    return out;
}

FeatureSet encode_features(const ModelBundle& bundle, const FeatureSet& raw) {
    const Tensor z = encode(bundle, to_tensor(raw));
    FeatureSet out(raw.size());
    const std::size_t d = z.shape[1];
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i].assign(z.values.begin() + static_cast<std::ptrdiff_t>(i * d),
                      z.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    }
    return out;
}

DivergenceMatrix pairwise_matrix(const std::vector<FeatureSet>& by_domain,
                                 const EstimatorConfig& cfg, const ModelBundle* bundle) {
    if (by_domain.size() < 2) throw std::invalid_argument("pairwise_matrix: need >= 2 domains");
    std::vector<FeatureSet> feats;
    feats.reserve(by_domain.size());
    for (const auto& fs : by_domain) {
        feats.push_back(bundle != nullptr ? encode_features(*bundle, fs) : fs);
    }
    const std::size_t n = feats.size();
    DivergenceMatrix m;
    m.values.assign(n * n, 0.0);
    m.noise_tolerance = cfg.noise_bound;
    for (std::size_t i = 0; i < n; ++i) m.labels.push_back("d" + std::to_string(i));
    std::size_t pair = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j, ++pair) {
            EstimatorConfig pc = cfg;
            pc.seed = cfg.seed + 1000003 * pair;
            const ProxyResult r = proxy_a_distance(feats[i], feats[j], pc);
            m.values[i * n + j] = r.distance;
            m.values[j * n + i] = r.distance;
            m.clamp_events += r.clamp_events;
        }
    }
    return m;
}

DecompositionResult ova_decomposition_check(const std::vector<Tensor>& encoded_by_domain,
                                            const std::vector<DomainDiscriminator>& discs) {
    const std::size_t ns = encoded_by_domain.size();
    if (ns < 2) throw std::invalid_argument("decomposition check needs >= 2 domains");
    if (discs.size() != ns) throw std::invalid_argument("one discriminator per domain required");
    const std::size_t m = encoded_by_domain.front().rows();
    for (const auto& t : encoded_by_domain) {
        if (t.rows() != m) throw std::invalid_argument("unbalanced batches in decomposition check");
    }

    DecompositionResult res;
    for (std::size_t k = 0; k < ns; ++k) {
        // per-sample losses of D_k over each domain's batch
        std::vector<std::vector<double>> losses_pos(ns), losses_neg(ns);
        for (std::size_t l = 0; l < ns; ++l) {
            const Tensor logits = discriminator_logits(discs[k], encoded_by_domain[l]);
            for (std::size_t i = 0; i < m; ++i) {
                losses_pos[l].push_back(per_sample_bce(logits.values[i], 1.0));
                losses_neg[l].push_back(per_sample_bce(logits.values[i], 0.0));
            }
        }
        const double total_count = static_cast<double>(ns * m);
        double ova = 0.0;
        for (std::size_t l = 0; l < ns; ++l) {
            const auto& per = l == k ? losses_pos[l] : losses_neg[l];
            ova += std::accumulate(per.begin(), per.end(), 0.0);
        }
        ova /= total_count;

        // each pairwise term takes an equal 1/(ns-1) share of the positive sum
        const double pos_sum =
            std::accumulate(losses_pos[k].begin(), losses_pos[k].end(), 0.0);
        double pairwise = 0.0;
        for (std::size_t l = 0; l < ns; ++l) {
            if (l == k) continue;
            const double neg_sum =
                std::accumulate(losses_neg[l].begin(), losses_neg[l].end(), 0.0);
            pairwise += (pos_sum / static_cast<double>(ns - 1) + neg_sum) / total_count;
        }
        res.ova_loss.push_back(ova);
        res.pairwise_sum.push_back(pairwise);
        res.residual.push_back(std::abs(ova - pairwise));
        res.max_residual = std::max(res.max_residual, res.residual.back());
    }
    return res;
}

HullCheckReport hull_bound_check(const std::vector<DomainSpec>& domains, int n_pairs,
                                 const EstimatorConfig& cfg, double tau, int n_per_sample,
                                 Rng& rng) {
    if (domains.size() < 2) throw std::invalid_argument("hull_bound_check: need >= 2 domains");
    std::vector<FeatureSet> pure;
    for (const auto& spec : domains) {
        pure.push_back(features_of(sample_examples(spec, n_per_sample, rng)));
    }
    HullCheckReport report;
    report.epsilon_hat = pairwise_matrix(pure, cfg).max_offdiag();
    report.total = n_pairs;
    for (int p = 0; p < n_pairs; ++p) {
        const MixtureWeights pi{dirichlet_flat(domains.size(), rng)};
        const MixtureWeights pi2{dirichlet_flat(domains.size(), rng)};
        const FeatureSet a = features_of(sample_mixture(domains, pi, n_per_sample, rng));
        const FeatureSet b = features_of(sample_mixture(domains, pi2, n_per_sample, rng));
        EstimatorConfig pc = cfg;
        pc.seed = cfg.seed + 7919 * static_cast<std::uint64_t>(p + 1);
        const double d = proxy_a_distance(a, b, pc).distance;
        report.divergences.push_back(d);
        if (d <= report.epsilon_hat + tau) ++report.satisfied;
    }
    report.fraction = static_cast<double>(report.satisfied) / static_cast<double>(n_pairs);
    return report;
}

namespace {

Dataset resample_mixture(const std::vector<Dataset>& sources, const std::vector<double>& pi,
                         int n, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Dataset out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double r = u(rng);
        std::size_t comp = pi.size() - 1;
        for (std::size_t s = 0; s < pi.size(); ++s) {
            r -= pi[s];
            if (r <= 0.0) {
                comp = s;
                break;
            }
        }
        const Dataset& src = sources[comp];
        std::uniform_int_distribution<std::size_t> pick(0, src.size() - 1);
        out.push_back(src[pick(rng)]);
    }
    return out;
}

// Fresh hypothesis from the same head class, trained on pooled labeled data;
// returns summed 0-1 risks on the two parts.
double estimate_lambda(const FeatureSet& mix_z, const std::vector<int>& mix_y,
                       const FeatureSet& unseen_z, const std::vector<int>& unseen_y,
                       std::size_t num_classes, const AuditConfig& cfg, Rng& rng) {
    FeatureSet pooled = mix_z;
    pooled.insert(pooled.end(), unseen_z.begin(), unseen_z.end());
    std::vector<int> labels = mix_y;
    labels.insert(labels.end(), unseen_y.begin(), unseen_y.end());
    const Tensor x = to_tensor(pooled);
    const Tensor targets = smoothed_targets(labels, num_classes, 0.0);

    Mlp head = Mlp::init({x.shape[1], num_classes}, rng);
    SgdMomentum opt(0.9, 0.0);
    for (int e = 0; e < cfg.lambda_epochs; ++e) {
        Tape tape;
        MlpVars vars = mlp_forward(tape, head, tape.leaf(x, false), true);
        const Tape::VarId loss = tape.softmax_cross_entropy(vars.out, targets);
        tape.backward(loss);
        std::vector<Tensor> grads;
        for (Tape::VarId id : vars.param_ids) grads.push_back(tape.grad(id));
        opt.step(head.params(), grads, cfg.lambda_lr);
    }

    auto zero_one = [&](const FeatureSet& z, const std::vector<int>& y) {
        const Tensor logits = mlp_eval(head, to_tensor(z));
        const std::size_t c = logits.shape[1];
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < c; ++j)
                if (logits.values[i * c + j] > logits.values[i * c + best]) best = j;
            if (static_cast<int>(best) != y[i]) ++wrong;
        }
        return static_cast<double>(wrong) / static_cast<double>(z.size());
    };
    return zero_one(mix_z, mix_y) + zero_one(unseen_z, unseen_y);
}

}  // namespace

BoundAudit bound_audit(const std::vector<Dataset>& sources, const Dataset& unseen,
                       const ModelBundle& bundle, const AuditConfig& cfg) {
    if (sources.size() < 2) throw std::invalid_argument("bound_audit: need >= 2 sources");
    if (unseen.empty()) throw std::invalid_argument("bound_audit: labeled unseen data required");
    const std::vector<std::vector<double>> grid =
        simplex_grid(sources.size(), cfg.grid_resolution);

    Rng rng(cfg.seed);
    std::vector<FeatureSet> src_z;
    for (const auto& s : sources) {
        if (s.empty()) throw std::invalid_argument("bound_audit: empty source");
        src_z.push_back(encode_features(bundle, features_of(s)));
    }
    const FeatureSet unseen_z = encode_features(bundle, features_of(unseen));

    BoundAudit audit;
    audit.epsilon_hat = pairwise_matrix(src_z, cfg.fine).max_offdiag();

    auto mixture_z = [&](const std::vector<double>& pi, Rng& r) {
        FeatureSet out;
        out.reserve(static_cast<std::size_t>(cfg.mixture_sample_size));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < cfg.mixture_sample_size; ++i) {
            double x = u(r);
            std::size_t comp = pi.size() - 1;
            for (std::size_t s = 0; s < pi.size(); ++s) {
                x -= pi[s];
                if (x <= 0.0) {
                    comp = s;
                    break;
                }
            }
            std::uniform_int_distribution<std::size_t> pick(0, src_z[comp].size() - 1);
            out.push_back(src_z[comp][pick(r)]);
        }
        return out;
    };

    auto estimate_gap = [&](const std::vector<double>& pi, const EstimatorConfig& ec,
                            std::uint64_t salt) {
        Rng r(cfg.seed ^ salt);
        EstimatorConfig pc = ec;
        pc.seed = cfg.seed + salt;
        return proxy_a_distance(mixture_z(pi, r), unseen_z, pc).distance;
    };

    // coarse grid search for pi*, then Dirichlet refinements blended toward
    // the best grid point
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_pi;
    std::uint64_t salt = 1;
    for (const auto& pi : grid) {
        const double d = estimate_gap(pi, cfg.coarse, salt++);
        if (d < best) {
            best = d;
            best_pi = pi;
        }
    }
    for (int rfn = 0; rfn < cfg.refinements; ++rfn) {
        std::vector<double> pi = dirichlet_flat(sources.size(), rng);
        for (std::size_t i = 0; i < pi.size(); ++i) pi[i] = 0.5 * best_pi[i] + 0.5 * pi[i];
        const double d = estimate_gap(pi, cfg.coarse, salt++);
        if (d < best) {
            best = d;
            best_pi = pi;
        }
    }
    audit.pi_star = best_pi;
    audit.gamma_hat = estimate_gap(best_pi, cfg.fine, salt++);

    // lambda: fresh head on pooled mixture(pi*)+unseen labeled data
    Rng mix_rng(cfg.seed ^ 0xa5a5a5a5ULL);
    const Dataset mix_sample =
        resample_mixture(sources, best_pi, cfg.mixture_sample_size, mix_rng);
    const FeatureSet mix_z = encode_features(bundle, features_of(mix_sample));
    audit.lambda_hat = estimate_lambda(mix_z, labels_of(mix_sample), unseen_z, labels_of(unseen),
                                       bundle.config.num_classes, cfg, mix_rng);

    for (const auto& s : sources) audit.source_risks.push_back(1.0 - accuracy(bundle, s));
    audit.lhs = 1.0 - accuracy(bundle, unseen);
    double weighted_risk = 0.0;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        weighted_risk += best_pi[i] * audit.source_risks[i];
    }
    audit.rhs = weighted_risk + 0.5 * (audit.gamma_hat + audit.epsilon_hat) + audit.lambda_hat;
    return audit;
}

HeatmapDelta heatmap_delta(const DivergenceMatrix& erm, const DivergenceMatrix& g2dm) {
    if (erm.labels != g2dm.labels) {
        throw std::invalid_argument("heatmap_delta: domain label mismatch");
    }
    HeatmapDelta out;
    out.labels = erm.labels;
    const std::size_t n = erm.size();
    out.delta.assign(n * n, 0.0);
    int positive = 0, offdiag = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double d = erm.at(i, j) - g2dm.at(i, j);
            out.delta[i * n + j] = d;
            sum += d;
            ++offdiag;
            if (d > 0.0) ++positive;
        }
    }
    out.fraction_positive = offdiag > 0 ? static_cast<double>(positive) / offdiag : 0.0;
    out.mean_delta = offdiag > 0 ? sum / offdiag : 0.0;
    return out;
}

}  // namespace g2dm
