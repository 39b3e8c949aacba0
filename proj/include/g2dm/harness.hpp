#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "g2dm/divergence.hpp"
#include "g2dm/domains.hpp"
#include "g2dm/training.hpp"

namespace g2dm {

// Full experiment description: dataset source, protocol, and the training
// recipe shared by every run.
struct ExperimentConfig {
    // builtin dataset (ignored when csv_path is set)
    std::string family = "moons";
    std::vector<double> angles = {0.0, 15.0, 30.0, 45.0};
    double noise = 0.1;
    int per_domain_n = 600;
    std::uint64_t data_seed = 12345;
    std::string csv_path;

    int unseen_index = -1;  // single-run commands; -1 means last domain
    double val_fraction = 0.2;

    TrainConfig train;
    std::vector<std::uint64_t> seeds = {1, 10, 100};
    std::vector<std::string> criteria = {"source_acc", "source_loss", "unseen_acc"};
    bool run_erm = true;
    std::string out_dir = "out";
    int workers = 1;

    void validate() const;
};

// Flat key=value config file support ('#' comments, blank lines ignored).
std::map<std::string, std::string> parse_config_file(const std::string& path);
void apply_config(ExperimentConfig& cfg, const std::map<std::string, std::string>& kv);
// FNV-1a over sorted key=value pairs; reordering keys cannot change it.
std::string config_hash(const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> config_to_map(const ExperimentConfig& cfg);

// Per-domain datasets for the configured builtin family (or CSV).
std::vector<Dataset> build_domain_data(const ExperimentConfig& cfg);
std::vector<DomainSpec> build_domain_specs(const ExperimentConfig& cfg);

struct RunRecord {
    int unseen_domain = 0;
    std::uint64_t seed = 0;
    std::string method;  // "g2dm" or "erm"
    std::map<std::string, double> criterion_acc;
    std::map<std::string, int> criterion_epoch;
};

struct ExperimentResult {
    std::vector<RunRecord> runs;
    // (method, criterion) -> per unseen-domain mean, plus overall average
    std::map<std::string, std::map<std::string, std::map<int, double>>> mean_by_domain;
    std::map<std::string, std::map<std::string, double>> overall_mean;
    std::string config_hash;
    std::string code_version;
};

std::pair<int, double> select_by_criterion(const MetricHistory& history,
                                           const std::string& criterion);

ExperimentResult leave_one_domain_out(const ExperimentConfig& cfg);

double estimate_meta_risk(const ModelBundle& bundle, const MetaDistribution& meta, int n,
                          Rng& rng);

struct AblationRow {
    std::vector<int> source_subset;
    double mean_unseen_acc = 0.0;
};

struct AblationResult {
    std::vector<AblationRow> rows;  // subsets first, full-source row last
    std::string config_hash;
};

AblationResult source_ablation(const ExperimentConfig& cfg);

struct SweepRow {
    std::size_t projection_size = 0;
    double mean_unseen_acc = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::string config_hash;
};

SweepResult rp_size_sweep(const ExperimentConfig& cfg, const std::vector<std::size_t>& sizes);

// JSON (full fidelity) + CSV (flat rows). formats: subset of {"json","csv"}.
void emit_report(const ExperimentResult& result, const std::string& dir,
                 const std::vector<std::string>& formats);
ExperimentResult load_report(const std::string& json_path);
void write_matrix_csv(const std::vector<std::string>& labels, const std::vector<double>& values,
                      const std::string& path);

}  // namespace g2dm
