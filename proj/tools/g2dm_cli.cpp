#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "g2dm/divergence.hpp"
#include "g2dm/errors.hpp"
#include "g2dm/harness.hpp"
#include "g2dm/models.hpp"
#include "g2dm/training.hpp"

namespace {

using nlohmann::json;
using namespace g2dm;

struct GlobalArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::optional<int> workers;
};

ExperimentConfig make_config(const GlobalArgs& args) {
    ExperimentConfig cfg;
    if (!args.config_path.empty()) apply_config(cfg, parse_config_file(args.config_path));
    if (args.seed) cfg.seeds = {*args.seed};
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (args.workers) cfg.workers = *args.workers;
    return cfg;
}

void write_json(const json& j, const std::string& path) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream out(path);
    if (!out) throw std::ios_base::failure("cannot write " + path);
    out << j.dump(2) << "\n";
}

int unseen_of(const ExperimentConfig& cfg, std::size_t n_domains) {
    const int idx =
        cfg.unseen_index >= 0 ? cfg.unseen_index : static_cast<int>(n_domains) - 1;
    if (idx < 0 || idx >= static_cast<int>(n_domains)) {
        throw std::invalid_argument("unseen_index out of range");
    }
    return idx;
}

// Train a single g2dm run with the configured unseen domain held out.
TrainResult single_run(const ExperimentConfig& cfg, const std::vector<Dataset>& data,
                       std::vector<Dataset>* sources_out = nullptr,
                       const Dataset** unseen_out = nullptr) {
    const int unseen_idx = unseen_of(cfg, data.size());
    std::vector<Dataset> train_sets, val_sets;
    const std::uint64_t seed = cfg.seeds.front();
    for (std::size_t d = 0; d < data.size(); ++d) {
        if (static_cast<int>(d) == unseen_idx) continue;
        Rng rng(seed * 1000003 + 17 * d);
        auto parts = split(data[d], {1.0 - cfg.val_fraction, cfg.val_fraction}, rng);
        train_sets.push_back(std::move(parts[0]));
        val_sets.push_back(std::move(parts[1]));
        if (sources_out) sources_out->push_back(data[d]);
    }
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    tc.model.input_dim = data.front().front().features.size();
    int mx = 0;
    for (const auto& ds : data)
        for (const auto& ex : ds) mx = std::max(mx, ex.label);
    tc.model.num_classes = static_cast<std::size_t>(mx + 1);
    const Dataset& unseen = data[static_cast<std::size_t>(unseen_idx)];
    if (unseen_out) *unseen_out = &data[static_cast<std::size_t>(unseen_idx)];
    return train_g2dm(train_sets, val_sets, tc, &unseen);
}

int cmd_train(const ExperimentConfig& cfg) {
    const auto data = build_domain_data(cfg);
    const TrainResult result = single_run(cfg, data);
    std::filesystem::create_directories(cfg.out_dir);
    save_history_jsonl(result.history, cfg.out_dir + "/history.jsonl");
    save_checkpoint(result.bundle, cfg.out_dir + "/checkpoint.json");
    json summary;
    summary["config_hash"] = config_hash(config_to_map(cfg));
    summary["epochs"] = result.history.size();
    summary["final_train_loss"] = result.history.back().train_loss;
    if (result.history.back().unseen_acc) {
        summary["final_unseen_acc"] = *result.history.back().unseen_acc;
    }
    for (const auto& criterion : cfg.criteria) {
        const auto [epoch, value] = select_by_criterion(result.history, criterion);
        summary["criteria"][criterion] = {{"epoch", epoch}, {"value", value}};
    }
    write_json(summary, cfg.out_dir + "/train_summary.json");
    std::cout << "train: " << result.history.size() << " epochs, summary in " << cfg.out_dir
              << "\n";
    return 0;
}

int cmd_loo(const ExperimentConfig& cfg) {
    const ExperimentResult result = leave_one_domain_out(cfg);
    emit_report(result, cfg.out_dir, {"json", "csv"});
    for (const auto& [method, per_crit] : result.overall_mean) {
        for (const auto& [criterion, mean] : per_crit) {
            std::cout << method << " " << criterion << " mean unseen acc " << mean << "\n";
        }
    }
    return 0;
}

int cmd_divergence(const ExperimentConfig& cfg, const std::string& checkpoint) {
    const auto data = build_domain_data(cfg);
    std::vector<FeatureSet> by_domain;
    for (const auto& ds : data) by_domain.push_back(features_of(ds));
    EstimatorConfig est;
    est.seed = cfg.seeds.front();
    ModelBundle bundle;
    const ModelBundle* bundle_ptr = nullptr;
    if (!checkpoint.empty()) {
        bundle = load_checkpoint(checkpoint);
        bundle_ptr = &bundle;
    }
    const DivergenceMatrix matrix = pairwise_matrix(by_domain, est, bundle_ptr);
    std::filesystem::create_directories(cfg.out_dir);
    write_matrix_csv(matrix.labels, matrix.values, cfg.out_dir + "/divergence.csv");
    json j;
    j["labels"] = matrix.labels;
    j["values"] = matrix.values;
    j["encoded"] = bundle_ptr != nullptr;
    j["clamp_events"] = matrix.clamp_events;
    j["max_offdiag"] = matrix.max_offdiag();
    j["mean_offdiag"] = matrix.mean_offdiag();
    write_json(j, cfg.out_dir + "/divergence.json");
    std::cout << "divergence: max off-diagonal " << matrix.max_offdiag() << "\n";
    return 0;
}

int cmd_audit(const ExperimentConfig& cfg, const std::string& checkpoint, int hull_pairs) {
    const auto data = build_domain_data(cfg);
    std::vector<Dataset> sources;
    const Dataset* unseen = nullptr;
    ModelBundle bundle;
    if (!checkpoint.empty()) {
        bundle = load_checkpoint(checkpoint);
        const int unseen_idx = unseen_of(cfg, data.size());
        for (std::size_t d = 0; d < data.size(); ++d) {
            if (static_cast<int>(d) != unseen_idx) sources.push_back(data[d]);
        }
        unseen = &data[static_cast<std::size_t>(unseen_idx)];
    } else {
        TrainResult trained = single_run(cfg, data, &sources, &unseen);
        bundle = std::move(trained.bundle);
    }

    AuditConfig acfg;
    acfg.seed = cfg.seeds.front();
    const BoundAudit audit = bound_audit(sources, *unseen, bundle, acfg);

    json j;
    j["pi_star"] = audit.pi_star;
    j["gamma_hat"] = audit.gamma_hat;
    j["epsilon_hat"] = audit.epsilon_hat;
    j["lambda_hat"] = audit.lambda_hat;
    j["source_risks"] = audit.source_risks;
    j["lhs"] = audit.lhs;
    j["rhs"] = audit.rhs;
    j["holds"] = audit.lhs <= audit.rhs;
    j["privileged"] = audit.privileged;

    if (hull_pairs > 0) {
        const auto specs = build_domain_specs(cfg);
        std::vector<DomainSpec> source_specs;
        const int unseen_idx = unseen_of(cfg, specs.size());
        for (std::size_t d = 0; d < specs.size(); ++d) {
            if (static_cast<int>(d) != unseen_idx) source_specs.push_back(specs[d]);
        }
        EstimatorConfig est;
        est.seed = cfg.seeds.front();
        Rng rng(cfg.seeds.front() + 31);
        const HullCheckReport hull =
            hull_bound_check(source_specs, hull_pairs, est, est.noise_bound, 400, rng);
        j["hull"] = {{"epsilon_hat", hull.epsilon_hat},
                     {"satisfied", hull.satisfied},
                     {"total", hull.total},
                     {"fraction", hull.fraction}};
    }
    write_json(j, cfg.out_dir + "/audit.json");
    std::cout << "audit: lhs " << audit.lhs << " rhs " << audit.rhs
              << (audit.lhs <= audit.rhs ? " (bound holds)" : " (bound violated)") << "\n";
    return 0;
}

int cmd_ablate(const ExperimentConfig& cfg) {
    const AblationResult result = source_ablation(cfg);
    json rows = json::array();
    for (const auto& row : result.rows) {
        rows.push_back(json{{"sources", row.source_subset}, {"unseen_acc", row.mean_unseen_acc}});
    }
    json j;
    j["rows"] = std::move(rows);
    j["config_hash"] = result.config_hash;
    write_json(j, cfg.out_dir + "/ablation.json");
    for (const auto& row : result.rows) {
        std::cout << "sources={";
        for (std::size_t i = 0; i < row.source_subset.size(); ++i) {
            std::cout << (i ? "," : "") << row.source_subset[i];
        }
        std::cout << "} unseen acc " << row.mean_unseen_acc << "\n";
    }
    return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, const std::vector<std::size_t>& sizes) {
    const SweepResult result = rp_size_sweep(cfg, sizes);
    json rows = json::array();
    for (const auto& row : result.rows) {
        rows.push_back(
            json{{"projection_size", row.projection_size}, {"unseen_acc", row.mean_unseen_acc}});
    }
    json j;
    j["rows"] = std::move(rows);
    j["config_hash"] = result.config_hash;
    write_json(j, cfg.out_dir + "/rp_sweep.json");
    for (const auto& row : result.rows) {
        std::cout << "p=" << row.projection_size << " unseen acc " << row.mean_unseen_acc << "\n";
    }
    return 0;
}

int cmd_report(const ExperimentConfig& cfg, const std::string& in_path) {
    const ExperimentResult result = load_report(in_path);
    emit_report(result, cfg.out_dir, {"json", "csv"});
    std::cout << "report: " << result.runs.size() << " runs (config " << result.config_hash
              << ", version " << result.code_version << ")\n";
    for (const auto& [method, per_crit] : result.overall_mean) {
        for (const auto& [criterion, mean] : per_crit) {
            std::cout << "  " << method << " " << criterion << " mean " << mean << "\n";
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"g2dm: adversarial distribution matching across source domains"};
    app.require_subcommand(1);

    GlobalArgs args;
    std::uint64_t seed_opt = 0;
    int workers_opt = 0;
    app.add_option("--config", args.config_path, "flat key=value config file");
    auto* seed_flag = app.add_option("--seed", seed_opt, "override: single seed");
    app.add_option("--out", args.out_dir, "output directory");
    auto* workers_flag = app.add_option("--workers", workers_opt, "parallel runs");

    auto* train = app.add_subcommand("train", "single training run");
    auto* loo = app.add_subcommand("loo", "leave-one-domain-out protocol");
    auto* divergence = app.add_subcommand("divergence", "pairwise divergence matrix");
    auto* audit = app.add_subcommand("audit", "mixture and bound checks");
    auto* ablate = app.add_subcommand("ablate-sources", "drop-one-source ablation");
    auto* sweep = app.add_subcommand("sweep-rp", "projection size sweep");
    auto* report = app.add_subcommand("report", "re-render a stored result");

    std::string checkpoint;
    divergence->add_option("--checkpoint", checkpoint, "encode features with this model");
    audit->add_option("--checkpoint", checkpoint, "audit this model instead of training");
    int hull_pairs = 20;
    audit->add_option("--hull-pairs", hull_pairs, "mixture pairs for the hull check (0 skips)");
    std::string sizes_arg = "8,16,32,64,128";
    sweep->add_option("--sizes", sizes_arg, "comma-separated projection sizes");
    std::string report_in;
    report->add_option("--in", report_in, "result JSON to load")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "argument-error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*seed_flag) args.seed = seed_opt;
        if (*workers_flag) args.workers = workers_opt;
        ExperimentConfig cfg = make_config(args);
        cfg.validate();
        if (*train) return cmd_train(cfg);
        if (*loo) return cmd_loo(cfg);
        if (*divergence) return cmd_divergence(cfg, checkpoint);
        if (*audit) return cmd_audit(cfg, checkpoint, hull_pairs);
        if (*ablate) return cmd_ablate(cfg);
        if (*sweep) {
            std::vector<std::size_t> sizes;
            std::stringstream ss(sizes_arg);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (!item.empty()) sizes.push_back(static_cast<std::size_t>(std::stoul(item)));
            }
            return cmd_sweep(cfg, sizes);
        }
        if (*report) return cmd_report(cfg, report_in);
        std::cerr << "argument-error: no subcommand\n";
        return 2;
    } catch (const g2dm::DimensionError& e) {
        std::cerr << "dimension-error: " << e.what() << "\n";
        return 3;
    } catch (const g2dm::NumericError& e) {
        std::cerr << "numeric-error: " << e.what() << "\n";
        return 4;
    } catch (const g2dm::ParseError& e) {
        std::cerr << "parse-error: " << e.what() << "\n";
        return 5;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "io-error: " << e.what() << "\n";
        return 6;
    } catch (const std::invalid_argument& e) {
        std::cerr << "argument-error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "io-error: " << e.what() << "\n";
        return 6;
    }
}
