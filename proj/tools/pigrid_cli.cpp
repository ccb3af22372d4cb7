#include "pigrid/errors.hpp"
#include "pigrid/harness.hpp"
#include "pigrid/kernels.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <string>

using nlohmann::json;
using namespace pigrid;

namespace {

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw UsageError("config file '" + path + "' is not valid JSON");
    return j;
}

template <typename T>
T section(const json& cfg, const char* key) {
    T value{};
    if (cfg.contains(key)) cfg.at(key).get_to(value);
    return value;
}

struct CampaignFlags {
    std::string kind, channel, mode;
    double alpha_min = -1.0, alpha_max = -1.0, alpha = -1.0;
    std::int64_t count = -1, seed = -1;

    void attach(CLI::App* cmd) {
        cmd->add_option("--attack-kind", kind, "additive | deductive | combined");
        cmd->add_option("--attack-channel", channel, "targeted channel (v,i,theta,delta,p,q)");
        cmd->add_option("--attack-mode", mode, "target placement: random | contiguous");
        cmd->add_option("--alpha-min", alpha_min, "minimum |alpha|");
        cmd->add_option("--alpha-max", alpha_max, "maximum |alpha|");
        cmd->add_option("--alpha", alpha, "pin |alpha| to one magnitude");
        cmd->add_option("--attack-count", count, "number of attacked samples");
        cmd->add_option("--attack-seed", seed, "campaign RNG seed");
    }

    void apply(harness::CampaignOptions& c) const {
        if (!kind.empty()) c.kind = attacks::kind_from_name(kind);
        if (!channel.empty()) c.channel = telemetry::channel_from_name(channel);
        if (!mode.empty()) {
            if (mode == "random")
                c.mode = attacks::TargetMode::Random;
            else if (mode == "contiguous")
                c.mode = attacks::TargetMode::Contiguous;
            else
                throw UsageError("unknown target mode '" + mode + "'");
        }
        if (alpha_min >= 0) c.alpha_min = alpha_min;
        if (alpha_max >= 0) c.alpha_max = alpha_max;
        if (alpha >= 0) c.fixed_magnitude = alpha;
        if (count >= 0) c.count = static_cast<std::size_t>(count);
        if (seed >= 0) c.seed = static_cast<std::uint64_t>(seed);
    }
};

struct ScoringFlags {
    double quantile = -1.0;
    double physics_weight = -1.0;
    std::string aggregation;

    void attach(CLI::App* cmd) {
        cmd->add_option("--quantile", quantile, "clean-validation quantile for the threshold");
        cmd->add_option("--aggregation", aggregation, "overlapping-window reduction: mean | median");
        cmd->add_option("--physics-weight", physics_weight, "weight of the physics term in the aggregate");
    }

    void apply(harness::ScoringOptions& s) const {
        if (quantile >= 0) s.quantile = quantile;
        if (physics_weight >= 0) s.physics_weight = physics_weight;
        if (!aggregation.empty()) {
            if (aggregation == "mean")
                s.aggregation = scoring::Aggregation::Mean;
            else if (aggregation == "median")
                s.aggregation = scoring::Aggregation::Median;
            else
                throw UsageError("unknown aggregation '" + aggregation + "'");
        }
    }
};

int run(int argc, char** argv) {
    CLI::App app{"physics-informed autoencoder pipeline for power-grid attack detection"};
    app.require_subcommand(1);

    std::string config_path;
    std::string kernels_flag;
    app.add_option("--config", config_path, "JSON config file (sections: generator, model, campaign, scoring)");
    app.add_option("--kernels", kernels_flag, "force a kernel backend: scalar | avx2 | neon");

    std::string out_dir = "out";
    app.add_option("--out", out_dir, "output directory")->capture_default_str();

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic Kirchhoff-consistent dataset");
    std::int64_t gen_length = -1, gen_seed = -1;
    gen->add_option("--length", gen_length, "number of 1-minute samples");
    gen->add_option("--seed", gen_seed, "generator RNG seed");

    // inject
    auto* inj = app.add_subcommand("inject", "inject a false-data campaign into the test split");
    std::string inj_dataset;
    inj->add_option("--dataset", inj_dataset, "input dataset CSV")->required();
    CampaignFlags inj_campaign;
    inj_campaign.attach(inj);

    // train
    auto* trn = app.add_subcommand("train", "train a model and save a checkpoint");
    std::string trn_dataset;
    trn->add_option("--dataset", trn_dataset, "training dataset CSV")->required();
    std::int64_t trn_epochs = -1, trn_seed = -1;
    bool trn_baseline = false, trn_joint = false;
    trn->add_option("--epochs", trn_epochs, "maximum training epochs");
    trn->add_option("--seed", trn_seed, "model RNG seed");
    trn->add_flag("--baseline", trn_baseline, "disable the physics loss (plain ConvAE)");
    trn->add_flag("--joint", trn_joint, "joint update instead of alternating encoder/decoder steps");

    // detect
    auto* det = app.add_subcommand("detect", "inject, score, threshold, and evaluate");
    std::string det_checkpoint, det_dataset;
    det->add_option("--checkpoint", det_checkpoint, "trained model checkpoint")->required();
    det->add_option("--dataset", det_dataset, "clean dataset CSV")->required();
    CampaignFlags det_campaign;
    det_campaign.attach(det);
    ScoringFlags det_scoring;
    det_scoring.attach(det);

    // evaluate
    auto* evl = app.add_subcommand("evaluate", "recompute metrics from a scores CSV");
    std::string evl_scores;
    evl->add_option("--scores", evl_scores, "scores CSV from a detect run")->required();

    // sweep
    auto* swp = app.add_subcommand("sweep", "detection metrics across attack magnitudes");
    std::string swp_checkpoint, swp_dataset;
    swp->add_option("--checkpoint", swp_checkpoint, "trained model checkpoint")->required();
    swp->add_option("--dataset", swp_dataset, "clean dataset CSV")->required();
    double swp_lo = 0.01, swp_hi = 0.05;
    std::size_t swp_steps = 5;
    swp->add_option("--grid-lo", swp_lo, "lowest |alpha|")->capture_default_str();
    swp->add_option("--grid-hi", swp_hi, "highest |alpha|")->capture_default_str();
    swp->add_option("--grid-steps", swp_steps, "number of magnitude levels")->capture_default_str();
    CampaignFlags swp_campaign;
    swp_campaign.attach(swp);
    ScoringFlags swp_scoring;
    swp_scoring.attach(swp);

    // replay
    auto* rpl = app.add_subcommand("replay", "re-run a recorded manifest and compare output checksums");
    std::string rpl_manifest;
    rpl->add_option("--manifest", rpl_manifest, "manifest.json from a previous run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (!kernels_flag.empty()) kernels::set_backend(kernels::backend_from_name(kernels_flag));
    const json cfg = load_config_file(config_path);

    if (gen->parsed()) {
        auto gcfg = section<telemetry::GeneratorConfig>(cfg, "generator");
        if (gen_length >= 0) gcfg.length = static_cast<std::size_t>(gen_length);
        if (gen_seed >= 0) gcfg.seed = static_cast<std::uint64_t>(gen_seed);
        auto r = harness::cmd_generate(gcfg, out_dir);
        std::printf("wrote %s\n", r.dataset_path.c_str());
    } else if (inj->parsed()) {
        auto campaign = section<harness::CampaignOptions>(cfg, "campaign");
        inj_campaign.apply(campaign);
        auto r = harness::cmd_inject(inj_dataset, campaign, out_dir);
        std::printf("wrote %s and %s\n", r.dataset_path.c_str(), r.labels_path.c_str());
    } else if (trn->parsed()) {
        auto mcfg = section<piconvae::ModelConfig>(cfg, "model");
        if (trn_epochs >= 0) mcfg.epochs = static_cast<std::size_t>(trn_epochs);
        if (trn_seed >= 0) mcfg.seed = static_cast<std::uint64_t>(trn_seed);
        if (trn_baseline) mcfg.physics_enabled = false;
        if (trn_joint) mcfg.alternating = false;
        auto r = harness::cmd_train(trn_dataset, mcfg, out_dir);
        const auto& rep = r.report;
        std::printf("trained %zu epochs (best val loss %.6g at epoch %zu, stopped: %s)\n",
                    rep.epochs.size(), rep.best_val_loss,
                    rep.epochs.empty() ? std::size_t{0} : rep.epochs[rep.best_epoch].epoch,
                    rep.stop_reason.c_str());
        std::printf("wrote %s\n", r.checkpoint_path.c_str());
    } else if (det->parsed()) {
        auto campaign = section<harness::CampaignOptions>(cfg, "campaign");
        det_campaign.apply(campaign);
        auto sopt = section<harness::ScoringOptions>(cfg, "scoring");
        det_scoring.apply(sopt);
        auto r = harness::cmd_detect(det_checkpoint, det_dataset, campaign, sopt, out_dir);
        std::fputs(harness::format_metrics(r.detection.metrics, r.detection.threshold).c_str(), stdout);
    } else if (evl->parsed()) {
        auto r = harness::cmd_evaluate(evl_scores, out_dir);
        std::fputs(harness::format_metrics(r.metrics, 0.0).c_str(), stdout);
    } else if (swp->parsed()) {
        auto campaign = section<harness::CampaignOptions>(cfg, "campaign");
        swp_campaign.apply(campaign);
        auto sopt = section<harness::ScoringOptions>(cfg, "scoring");
        swp_scoring.apply(sopt);
        auto r = harness::cmd_sweep(swp_checkpoint, swp_dataset, campaign, sopt, swp_lo, swp_hi,
                                    swp_steps, out_dir);
        for (const auto& row : r.rows)
            std::printf("alpha=%.4g  recall=%.4f  precision=%.4f  f1=%.4f\n", row.alpha,
                        row.metrics.rec, row.metrics.prec, row.metrics.f1);
        std::printf("wrote %s\n", r.sweep_path.c_str());
    } else if (rpl->parsed()) {
        auto r = harness::cmd_replay(rpl_manifest, out_dir);
        if (r.checksums_match) {
            std::printf("replay ok: all output checksums match\n");
        } else {
            std::printf("replay MISMATCH:\n");
            for (const auto& name : r.mismatches) std::printf("  %s\n", name.c_str());
            return 2;
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
