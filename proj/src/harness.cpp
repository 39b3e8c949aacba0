#include "g2dm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace g2dm {

using nlohmann::json;

namespace {
constexpr const char* kCodeVersion = "0.1.0";

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string join_list(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += items[i];
    }
    return out;
}

template <typename T>
std::string join_numeric(const std::vector<T>& v) {
    std::vector<std::string> items;
    for (const T& x : v) {
        std::ostringstream os;
        os << x;
        items.push_back(os.str());
    }
    return join_list(items);
}

int num_classes_of(const std::vector<Dataset>& by_domain) {
    int mx = 0;
    for (const auto& ds : by_domain)
        for (const auto& ex : ds) mx = std::max(mx, ex.label);
    return mx + 1;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw std::invalid_argument("at least one seed required");
    if (criteria.empty()) throw std::invalid_argument("at least one criterion required");
    if (val_fraction <= 0.0 || val_fraction >= 1.0) {
        throw std::invalid_argument("val_fraction must be in (0,1)");
    }
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (csv_path.empty() && angles.size() < 2) {
        throw std::invalid_argument("need at least 2 domains");
    }
    train.validate();
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        const auto b = line.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t");
        line = line.substr(b, e - b + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(path + ": line " + std::to_string(lineno) + ": expected key=value");
        }
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        const auto ke = key.find_last_not_of(" \t");
        key = key.substr(0, ke + 1);
        const auto vb = val.find_first_not_of(" \t");
        val = vb == std::string::npos ? "" : val.substr(vb);
        kv[key] = val;
    }
    return kv;
}

std::string config_hash(const std::map<std::string, std::string>& kv) {
    // std::map iterates sorted, so key order in the source file is irrelevant
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [k, v] : kv) {
        mix(k);
        mix("=");
        mix(v);
        mix("\n");
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

void apply_config(ExperimentConfig& cfg, const std::map<std::string, std::string>& kv) {
    auto as_double = [](const std::string& v) {
        try {
            std::size_t used = 0;
            const double out = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return out;
        } catch (const std::exception&) {
            throw ParseError("not a number: " + v);
        }
    };
    auto as_int = [](const std::string& v) {
        try {
            std::size_t used = 0;
            const int out = std::stoi(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return out;
        } catch (const std::exception&) {
            throw ParseError("not an integer: " + v);
        }
    };
    auto as_u64 = [](const std::string& v) {
        try {
            std::size_t used = 0;
            const std::uint64_t out = std::stoull(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return out;
        } catch (const std::exception&) {
            throw ParseError("not an unsigned integer: " + v);
        }
    };
    for (const auto& [key, val] : kv) {
        try {
            if (key == "family") cfg.family = val;
            else if (key == "angles") {
                cfg.angles.clear();
                for (const auto& s : split_list(val)) cfg.angles.push_back(as_double(s));
            } else if (key == "noise") cfg.noise = as_double(val);
            else if (key == "per_domain_n") cfg.per_domain_n = as_int(val);
            else if (key == "data_seed") cfg.data_seed = as_u64(val);
            else if (key == "csv_path") cfg.csv_path = val;
            else if (key == "unseen_index") cfg.unseen_index = as_int(val);
            else if (key == "val_fraction") cfg.val_fraction = as_double(val);
            else if (key == "seeds") {
                cfg.seeds.clear();
                for (const auto& s : split_list(val)) cfg.seeds.push_back(as_u64(s));
            } else if (key == "criteria") cfg.criteria = split_list(val);
            else if (key == "run_erm") cfg.run_erm = val == "1" || val == "true";
            else if (key == "out_dir") cfg.out_dir = val;
            else if (key == "workers") cfg.workers = as_int(val);
            else if (key == "lr_classifier") cfg.train.lr_classifier = as_double(val);
            else if (key == "lr_discriminator") cfg.train.lr_discriminator = as_double(val);
            else if (key == "alpha") cfg.train.alpha = as_double(val);
            else if (key == "batch_per_domain") cfg.train.batch_per_domain = as_int(val);
            else if (key == "epochs") cfg.train.epochs = as_int(val);
            else if (key == "warmup_iters") cfg.train.warmup_iters = as_int(val);
            else if (key == "warmup_threshold") cfg.train.warmup_threshold = as_double(val);
            else if (key == "momentum") cfg.train.momentum = as_double(val);
            else if (key == "weight_decay") cfg.train.weight_decay = as_double(val);
            else if (key == "label_smoothing") cfg.train.label_smoothing = as_double(val);
            else if (key == "aggregation") cfg.train.aggregation = aggregation_from_string(val);
            else if (key == "nadir_slack") cfg.train.nadir_slack = as_double(val);
            else if (key == "patience") cfg.train.patience = as_int(val);
            else if (key == "decay_factor") cfg.train.decay_factor = as_double(val);
            else if (key == "encoder_hidden") {
                cfg.train.model.encoder_hidden.clear();
                for (const auto& s : split_list(val)) {
                    cfg.train.model.encoder_hidden.push_back(static_cast<std::size_t>(as_int(s)));
                }
            } else if (key == "discriminator_hidden") {
                cfg.train.model.discriminator_hidden.clear();
                for (const auto& s : split_list(val)) {
                    cfg.train.model.discriminator_hidden.push_back(
                        static_cast<std::size_t>(as_int(s)));
                }
            } else if (key == "projection_size") {
                cfg.train.model.projection_size = static_cast<std::size_t>(as_int(val));
            } else {
                throw std::invalid_argument("unknown config key: " + key);
            }
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw ParseError("bad value for config key '" + key + "': " + val);
        }
    }
}

std::map<std::string, std::string> config_to_map(const ExperimentConfig& cfg) {
    std::map<std::string, std::string> kv;
    auto num = [](double v) {
        std::ostringstream os;
        os << v;
        return os.str();
    };
    kv["family"] = cfg.family;
    kv["angles"] = join_numeric(cfg.angles);
    kv["noise"] = num(cfg.noise);
    kv["per_domain_n"] = std::to_string(cfg.per_domain_n);
    kv["data_seed"] = std::to_string(cfg.data_seed);
    kv["csv_path"] = cfg.csv_path;
    kv["unseen_index"] = std::to_string(cfg.unseen_index);
    kv["val_fraction"] = num(cfg.val_fraction);
    kv["seeds"] = join_numeric(cfg.seeds);
    kv["criteria"] = join_list(cfg.criteria);
    kv["run_erm"] = cfg.run_erm ? "1" : "0";
    kv["workers"] = std::to_string(cfg.workers);
    kv["lr_classifier"] = num(cfg.train.lr_classifier);
    kv["lr_discriminator"] = num(cfg.train.lr_discriminator);
    kv["alpha"] = num(cfg.train.alpha);
    kv["batch_per_domain"] = std::to_string(cfg.train.batch_per_domain);
    kv["epochs"] = std::to_string(cfg.train.epochs);
    kv["warmup_iters"] = std::to_string(cfg.train.warmup_iters);
    kv["warmup_threshold"] = num(cfg.train.warmup_threshold);
    kv["momentum"] = num(cfg.train.momentum);
    kv["weight_decay"] = num(cfg.train.weight_decay);
    kv["label_smoothing"] = num(cfg.train.label_smoothing);
    kv["aggregation"] = aggregation_to_string(cfg.train.aggregation);
    kv["nadir_slack"] = num(cfg.train.nadir_slack);
    kv["patience"] = std::to_string(cfg.train.patience);
    kv["decay_factor"] = num(cfg.train.decay_factor);
    kv["encoder_hidden"] = join_numeric(cfg.train.model.encoder_hidden);
    kv["discriminator_hidden"] = join_numeric(cfg.train.model.discriminator_hidden);
    kv["projection_size"] = std::to_string(cfg.train.model.projection_size);
    return kv;
}

std::vector<DomainSpec> build_domain_specs(const ExperimentConfig& cfg) {
    const Family family = family_from_string(cfg.family);
    std::vector<DomainSpec> specs;
    for (std::size_t i = 0; i < cfg.angles.size(); ++i) {
        DomainSpec spec;
        spec.id = static_cast<int>(i);
        spec.family = family;
        spec.noise_scale = cfg.noise;
        if (family == Family::kCovShiftGaussians) {
            spec.cov_scale = cfg.angles[i];  // domain parameter is the covariance scale
            spec.dim = 4;
        } else {
            spec.angle_deg = cfg.angles[i];
        }
        if (family == Family::kGaussianClasses) {
            spec.dim = 4;
            spec.num_classes = 3;
        }
        specs.push_back(spec);
    }
    return specs;
}

std::vector<Dataset> build_domain_data(const ExperimentConfig& cfg) {
    if (!cfg.csv_path.empty()) return load_csv(cfg.csv_path);
    const auto specs = build_domain_specs(cfg);
    std::vector<Dataset> out;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        Rng rng(cfg.data_seed + 7919 * i);
        Dataset ds = sample_examples(specs[i], cfg.per_domain_n, rng);
        for (auto& ex : ds) ex.domain = static_cast<int>(i);
        out.push_back(std::move(ds));
    }
    return out;
}

std::pair<int, double> select_by_criterion(const MetricHistory& history,
                                           const std::string& criterion) {
    if (history.empty()) throw std::invalid_argument("select_by_criterion: empty history");
    int best_epoch = 0;
    double best_value = 0.0;
    bool maximize = true;
    auto metric = [&](const EpochRecord& rec) -> double {
        if (criterion == "source_acc") {
            if (rec.source_val_acc.empty()) {
                throw std::invalid_argument("criterion source_acc requires validation metrics");
            }
            return std::accumulate(rec.source_val_acc.begin(), rec.source_val_acc.end(), 0.0) /
                   static_cast<double>(rec.source_val_acc.size());
        }
        if (criterion == "source_loss") return rec.train_loss;
        if (criterion == "unseen_acc") {
            if (!rec.unseen_acc) {
                throw std::invalid_argument("criterion unseen_acc requires logged unseen metrics");
            }
            return *rec.unseen_acc;
        }
        throw std::invalid_argument("unknown criterion: " + criterion);
    };
    maximize = criterion != "source_loss";
    best_value = metric(history.front());
    for (std::size_t e = 1; e < history.size(); ++e) {
        const double v = metric(history[e]);
        // strict comparison: ties keep the earliest epoch
        if ((maximize && v > best_value) || (!maximize && v < best_value)) {
            best_value = v;
            best_epoch = static_cast<int>(e);
        }
    }
    return {best_epoch, best_value};
}

namespace {

struct RunSpec {
    int unseen = 0;
    std::uint64_t seed = 0;
    std::string method;
};

RunRecord execute_run(const ExperimentConfig& cfg, const std::vector<Dataset>& data,
                      const RunSpec& spec) {
    std::vector<Dataset> train_sets, val_sets;
    for (std::size_t d = 0; d < data.size(); ++d) {
        if (static_cast<int>(d) == spec.unseen) continue;
        Rng rng(spec.seed * 1000003 + 17 * d);
        auto parts = split(data[d], {1.0 - cfg.val_fraction, cfg.val_fraction}, rng);
        train_sets.push_back(std::move(parts[0]));
        val_sets.push_back(std::move(parts[1]));
    }
    const Dataset& unseen = data[static_cast<std::size_t>(spec.unseen)];

    TrainConfig tc = cfg.train;
    tc.seed = spec.seed;
    tc.model.input_dim = data.front().front().features.size();
    tc.model.num_classes = static_cast<std::size_t>(num_classes_of(data));

    const TrainResult result = spec.method == "erm"
                                   ? train_erm(train_sets, val_sets, tc, &unseen)
                                   : train_g2dm(train_sets, val_sets, tc, &unseen);

    RunRecord rec;
    rec.unseen_domain = spec.unseen;
    rec.seed = spec.seed;
    rec.method = spec.method;
    for (const auto& criterion : cfg.criteria) {
        const auto [epoch, value] = select_by_criterion(result.history, criterion);
        (void)value;
        const auto& at = result.history[static_cast<std::size_t>(epoch)];
        if (!at.unseen_acc) throw std::invalid_argument("unseen accuracy missing from history");
        rec.criterion_epoch[criterion] = epoch;
        rec.criterion_acc[criterion] = *at.unseen_acc;
    }
    return rec;
}

void aggregate(ExperimentResult& result, const std::vector<std::string>& criteria) {
    // mean over seeds per (method, criterion, domain), then mean over domains
    std::map<std::string, std::map<std::string, std::map<int, std::vector<double>>>> acc;
    for (const auto& run : result.runs) {
        for (const auto& [criterion, value] : run.criterion_acc) {
            acc[run.method][criterion][run.unseen_domain].push_back(value);
        }
    }
    for (const auto& [method, per_crit] : acc) {
        for (const auto& criterion : criteria) {
            const auto it = per_crit.find(criterion);
            if (it == per_crit.end()) continue;
            double overall = 0.0;
            for (const auto& [domain, values] : it->second) {
                const double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                                    static_cast<double>(values.size());
                result.mean_by_domain[method][criterion][domain] = mean;
                overall += mean;
            }
            result.overall_mean[method][criterion] =
                overall / static_cast<double>(it->second.size());
        }
    }
}

}  // namespace

ExperimentResult leave_one_domain_out(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::vector<Dataset> data = build_domain_data(cfg);
    if (data.size() < 3) {
        throw std::invalid_argument("leave-one-domain-out requires >= 3 domains");
    }
    std::vector<RunSpec> jobs;
    for (std::size_t u = 0; u < data.size(); ++u) {
        for (std::uint64_t seed : cfg.seeds) {
            jobs.push_back({static_cast<int>(u), seed, "g2dm"});
            if (cfg.run_erm) jobs.push_back({static_cast<int>(u), seed, "erm"});
        }
    }

    ExperimentResult result;
    result.runs.resize(jobs.size());
    const std::size_t workers = static_cast<std::size_t>(cfg.workers);
    for (std::size_t start = 0; start < jobs.size(); start += workers) {
        std::vector<std::future<RunRecord>> futs;
        const std::size_t end = std::min(start + workers, jobs.size());
        for (std::size_t i = start; i < end; ++i) {
            futs.push_back(std::async(std::launch::async, [&, i] {
                return execute_run(cfg, data, jobs[i]);
            }));
        }
        for (std::size_t i = start; i < end; ++i) result.runs[i] = futs[i - start].get();
    }

    aggregate(result, cfg.criteria);
    result.config_hash = config_hash(config_to_map(cfg));
    result.code_version = kCodeVersion;
    return result;
}

double estimate_meta_risk(const ModelBundle& bundle, const MetaDistribution& meta, int n,
                          Rng& rng) {
    if (n < 1) throw std::invalid_argument("estimate_meta_risk: n must be >= 1");
    meta.validate();
    Dataset sample;
    sample.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int k = sample_domain(meta, rng);
        sample.push_back(sample_examples(meta.domains[static_cast<std::size_t>(k)], 1, rng)[0]);
    }
    return 1.0 - accuracy(bundle, sample);
}

AblationResult source_ablation(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::vector<Dataset> data = build_domain_data(cfg);
    const int unseen_idx =
        cfg.unseen_index >= 0 ? cfg.unseen_index : static_cast<int>(data.size()) - 1;
    std::vector<int> source_ids;
    for (std::size_t d = 0; d < data.size(); ++d) {
        if (static_cast<int>(d) != unseen_idx) source_ids.push_back(static_cast<int>(d));
    }
    if (source_ids.size() < 3) {
        throw std::invalid_argument("source ablation requires >= 3 sources");
    }

    auto run_subset = [&](const std::vector<int>& subset) {
        double total = 0.0;
        for (std::uint64_t seed : cfg.seeds) {
            std::vector<Dataset> train_sets, val_sets;
            for (int d : subset) {
                Rng rng(seed * 1000003 + 17 * static_cast<std::uint64_t>(d));
                auto parts =
                    split(data[static_cast<std::size_t>(d)], {1.0 - cfg.val_fraction, cfg.val_fraction}, rng);
                train_sets.push_back(std::move(parts[0]));
                val_sets.push_back(std::move(parts[1]));
            }
            TrainConfig tc = cfg.train;
            tc.seed = seed;
            tc.model.input_dim = data.front().front().features.size();
            tc.model.num_classes = static_cast<std::size_t>(num_classes_of(data));
            const Dataset& unseen = data[static_cast<std::size_t>(unseen_idx)];
            const TrainResult r = train_g2dm(train_sets, val_sets, tc, &unseen);
            const auto [epoch, value] = select_by_criterion(r.history, cfg.criteria.front());
            (void)value;
            total += *r.history[static_cast<std::size_t>(epoch)].unseen_acc;
        }
        return total / static_cast<double>(cfg.seeds.size());
    };

    AblationResult result;
    for (std::size_t drop = 0; drop < source_ids.size(); ++drop) {
        std::vector<int> subset;
        for (std::size_t i = 0; i < source_ids.size(); ++i) {
            if (i != drop) subset.push_back(source_ids[i]);
        }
        result.rows.push_back({subset, run_subset(subset)});
    }
    result.rows.push_back({source_ids, run_subset(source_ids)});
    result.config_hash = config_hash(config_to_map(cfg));
    return result;
}

SweepResult rp_size_sweep(const ExperimentConfig& cfg, const std::vector<std::size_t>& sizes) {
    cfg.validate();
    if (sizes.empty()) throw std::invalid_argument("rp_size_sweep: sizes list is empty");
    const std::vector<Dataset> data = build_domain_data(cfg);
    const int unseen_idx =
        cfg.unseen_index >= 0 ? cfg.unseen_index : static_cast<int>(data.size()) - 1;

    SweepResult result;
    for (std::size_t size : sizes) {
        double total = 0.0;
        for (std::uint64_t seed : cfg.seeds) {
            std::vector<Dataset> train_sets, val_sets;
            for (std::size_t d = 0; d < data.size(); ++d) {
                if (static_cast<int>(d) == unseen_idx) continue;
                Rng rng(seed * 1000003 + 17 * d);
                auto parts = split(data[d], {1.0 - cfg.val_fraction, cfg.val_fraction}, rng);
                train_sets.push_back(std::move(parts[0]));
                val_sets.push_back(std::move(parts[1]));
            }
            TrainConfig tc = cfg.train;
            tc.seed = seed;
            tc.model.input_dim = data.front().front().features.size();
            tc.model.num_classes = static_cast<std::size_t>(num_classes_of(data));
            tc.model.projection_size = size;
            const Dataset& unseen = data[static_cast<std::size_t>(unseen_idx)];
            const TrainResult r = train_g2dm(train_sets, val_sets, tc, &unseen);
            const auto [epoch, value] = select_by_criterion(r.history, cfg.criteria.front());
            (void)value;
            total += *r.history[static_cast<std::size_t>(epoch)].unseen_acc;
        }
        result.rows.push_back({size, total / static_cast<double>(cfg.seeds.size())});
    }
    result.config_hash = config_hash(config_to_map(cfg));
    return result;
}

namespace {

json result_to_json(const ExperimentResult& result) {
    json j;
    j["config_hash"] = result.config_hash;
    j["code_version"] = result.code_version;
    json runs = json::array();
    for (const auto& run : result.runs) {
        runs.push_back(json{{"unseen_domain", run.unseen_domain},
                            {"seed", run.seed},
                            {"method", run.method},
                            {"criterion_acc", run.criterion_acc},
                            {"criterion_epoch", run.criterion_epoch}});
    }
    j["runs"] = std::move(runs);
    json means;
    for (const auto& [method, per_crit] : result.mean_by_domain) {
        for (const auto& [criterion, per_domain] : per_crit) {
            for (const auto& [domain, mean] : per_domain) {
                means[method][criterion][std::to_string(domain)] = mean;
            }
        }
    }
    j["mean_by_domain"] = std::move(means);
    j["overall_mean"] = result.overall_mean;
    return j;
}

}  // namespace

void emit_report(const ExperimentResult& result, const std::string& dir,
                 const std::vector<std::string>& formats) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    for (const auto& format : formats) {
        if (format == "json") {
            const std::string path = dir + "/result.json";
            std::ofstream out(path);
            if (!out) throw std::runtime_error("cannot write " + path);
            out << result_to_json(result).dump(2) << "\n";
        } else if (format == "csv") {
            const std::string path = dir + "/result.csv";
            std::ofstream out(path);
            if (!out) throw std::runtime_error("cannot write " + path);
            out << "unseen_domain,seed,method,criterion,epoch,accuracy\n";
            out.precision(17);
            for (const auto& run : result.runs) {
                for (const auto& [criterion, value] : run.criterion_acc) {
                    out << run.unseen_domain << "," << run.seed << "," << run.method << ","
                        << criterion << "," << run.criterion_epoch.at(criterion) << "," << value
                        << "\n";
                }
            }
            for (const auto& [method, per_crit] : result.overall_mean) {
                for (const auto& [criterion, mean] : per_crit) {
                    out << "all,mean," << method << "," << criterion << ",-1," << mean << "\n";
                }
            }
        } else {
            throw std::invalid_argument("unknown report format: " + format);
        }
    }
}

ExperimentResult load_report(const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in) throw std::runtime_error("cannot read " + json_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(json_path + ": " + e.what());
    }
    ExperimentResult result;
    result.config_hash = j.value("config_hash", "");
    result.code_version = j.value("code_version", "");
    for (const auto& rj : j.at("runs")) {
        RunRecord run;
        run.unseen_domain = rj.at("unseen_domain").get<int>();
        run.seed = rj.at("seed").get<std::uint64_t>();
        run.method = rj.at("method").get<std::string>();
        run.criterion_acc = rj.at("criterion_acc").get<std::map<std::string, double>>();
        run.criterion_epoch = rj.at("criterion_epoch").get<std::map<std::string, int>>();
        result.runs.push_back(std::move(run));
    }
    if (j.contains("mean_by_domain")) {
        for (const auto& [method, per_crit] : j.at("mean_by_domain").items()) {
            for (const auto& [criterion, per_domain] : per_crit.items()) {
                for (const auto& [domain, mean] : per_domain.items()) {
                    result.mean_by_domain[method][criterion][std::stoi(domain)] =
                        mean.get<double>();
                }
            }
        }
    }
    if (j.contains("overall_mean")) {
        result.overall_mean =
            j.at("overall_mean").get<std::map<std::string, std::map<std::string, double>>>();
    }
    return result;
}

void write_matrix_csv(const std::vector<std::string>& labels, const std::vector<double>& values,
                      const std::string& path) {
    const std::size_t n = labels.size();
    if (values.size() != n * n) throw DimensionError("matrix csv: size mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    out << "domain";
    for (const auto& l : labels) out << "," << l;
    out << "\n";
    for (std::size_t i = 0; i < n; ++i) {
        out << labels[i];
        for (std::size_t j = 0; j < n; ++j) out << "," << values[i * n + j];
        out << "\n";
    }
}

}  // namespace g2dm
