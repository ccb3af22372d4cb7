#pragma once

#include "pigrid/attacks.hpp"
#include "pigrid/piconvae.hpp"
#include "pigrid/scoring.hpp"
#include "pigrid/telemetry.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace pigrid::harness {

// FNV-1a over the file bytes; used for manifest/replay verification
std::uint64_t file_checksum(const std::string& path);
std::string checksum_hex(std::uint64_t checksum);

struct CampaignOptions {
    attacks::AttackKind kind = attacks::AttackKind::Combined;
    double alpha_min = 0.01;
    double alpha_max = 0.05;
    double fixed_magnitude = -1.0; // < 0: draw uniformly in [alpha_min, alpha_max]
    telemetry::Channel channel = telemetry::Channel::I;
    std::size_t count = 40;
    attacks::TargetMode mode = attacks::TargetMode::Random;
    std::uint64_t seed = 1;
};

void to_json(nlohmann::json& j, const CampaignOptions& c);
void from_json(const nlohmann::json& j, CampaignOptions& c);

struct ScoringOptions {
    double quantile = 0.995;
    scoring::Aggregation aggregation = scoring::Aggregation::Mean;
    double physics_weight = 1000.0;
};

void to_json(nlohmann::json& j, const ScoringOptions& s);
void from_json(const nlohmann::json& j, ScoringOptions& s);

struct DetectionResult {
    std::vector<double> scores; // one per test timestep
    std::vector<bool> verdicts;
    std::vector<bool> labels;
    double threshold = 0.0;
    scoring::Metrics metrics;
};

// Full detection pipeline on a physical-unit series with assigned splits:
// inject the campaign into the test region, score validation (clean) and test
// (attacked) regions with the model, threshold, evaluate.
DetectionResult run_detection(piconvae::Model& model, const telemetry::SeriesSet& series,
                              const CampaignOptions& campaign, const ScoringOptions& sopt);

// ------------------------------------------------------------------ commands
// Every command writes its outputs plus a manifest.json into out_dir; the
// manifest records the effective config, kernel backend, and input/output
// checksums, and is sufficient to re-run the command bit-identically.

struct GenerateResult {
    std::string dataset_path;
    std::string manifest_path;
};
GenerateResult cmd_generate(const telemetry::GeneratorConfig& cfg, const std::string& out_dir);

struct InjectResult {
    std::string dataset_path; // attacked copy
    std::string labels_path;
    std::string manifest_path;
};
InjectResult cmd_inject(const std::string& dataset, const CampaignOptions& campaign,
                        const std::string& out_dir);

struct TrainResult {
    std::string checkpoint_path;
    std::string losses_path;
    std::string manifest_path;
    piconvae::TrainReport report;
};
TrainResult cmd_train(const std::string& dataset, const piconvae::ModelConfig& cfg,
                      const std::string& out_dir);

struct DetectCmdResult {
    std::string scores_path;
    std::string metrics_path;
    std::string manifest_path;
    DetectionResult detection;
};
DetectCmdResult cmd_detect(const std::string& checkpoint, const std::string& dataset,
                           const CampaignOptions& campaign, const ScoringOptions& sopt,
                           const std::string& out_dir);

struct EvaluateCmdResult {
    std::string metrics_path;
    std::string manifest_path;
    scoring::Metrics metrics;
};
EvaluateCmdResult cmd_evaluate(const std::string& scores_csv, const std::string& out_dir);

struct SweepRow {
    double alpha = 0.0;
    scoring::Metrics metrics;
};
struct SweepCmdResult {
    std::string sweep_path;
    std::string manifest_path;
    std::vector<SweepRow> rows;
};
SweepCmdResult cmd_sweep(const std::string& checkpoint, const std::string& dataset,
                         const CampaignOptions& campaign, const ScoringOptions& sopt, double grid_lo,
                         double grid_hi, std::size_t grid_steps, const std::string& out_dir);

struct ReplayResult {
    std::string manifest_path;
    bool checksums_match = false;
    std::vector<std::string> mismatches;
};
// Re-runs the command recorded in a manifest into out_dir and compares the
// checksums of the produced outputs against the recorded ones.
ReplayResult cmd_replay(const std::string& manifest, const std::string& out_dir);

// key-value metrics text block (also used by tests)
std::string format_metrics(const scoring::Metrics& m, double threshold);

} // namespace pigrid::harness
