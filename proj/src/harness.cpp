#include "pigrid/harness.hpp"

#include "pigrid/errors.hpp"
#include "pigrid/kernels.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pigrid::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "' for checksum");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    return h;
}

std::string checksum_hex(std::uint64_t checksum) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(checksum));
    return buf;
}

void to_json(json& j, const CampaignOptions& c) {
    j = json{{"kind", attacks::kind_name(c.kind)},
             {"alpha_min", c.alpha_min},
             {"alpha_max", c.alpha_max},
             {"fixed_magnitude", c.fixed_magnitude},
             {"channel", telemetry::channel_name(c.channel)},
             {"count", c.count},
             {"mode", c.mode == attacks::TargetMode::Random ? "random" : "contiguous"},
             {"seed", c.seed}};
}

void from_json(const json& j, CampaignOptions& c) {
    if (j.contains("kind")) c.kind = attacks::kind_from_name(j.at("kind"));
    c.alpha_min = j.value("alpha_min", c.alpha_min);
    c.alpha_max = j.value("alpha_max", c.alpha_max);
    c.fixed_magnitude = j.value("fixed_magnitude", c.fixed_magnitude);
    if (j.contains("channel")) c.channel = telemetry::channel_from_name(j.at("channel"));
    c.count = j.value("count", c.count);
    if (j.contains("mode")) {
        const std::string mode = j.at("mode");
        if (mode == "random")
            c.mode = attacks::TargetMode::Random;
        else if (mode == "contiguous")
            c.mode = attacks::TargetMode::Contiguous;
        else
            throw UsageError("unknown target mode '" + mode + "'");
    }
    c.seed = j.value("seed", c.seed);
}

void to_json(json& j, const ScoringOptions& s) {
    j = json{{"quantile", s.quantile},
             {"aggregation", s.aggregation == scoring::Aggregation::Mean ? "mean" : "median"},
             {"physics_weight", s.physics_weight}};
}

void from_json(const json& j, ScoringOptions& s) {
    s.quantile = j.value("quantile", s.quantile);
    s.physics_weight = j.value("physics_weight", s.physics_weight);
    if (j.contains("aggregation")) {
        const std::string agg = j.at("aggregation");
        if (agg == "mean")
            s.aggregation = scoring::Aggregation::Mean;
        else if (agg == "median")
            s.aggregation = scoring::Aggregation::Median;
        else
            throw UsageError("unknown aggregation '" + agg + "'");
    }
}

namespace {

telemetry::SeriesSet slice_series(const telemetry::SeriesSet& s, std::size_t begin, std::size_t end) {
    telemetry::SeriesSet out;
    out.frames.assign(s.frames.begin() + static_cast<std::ptrdiff_t>(begin),
                      s.frames.begin() + static_cast<std::ptrdiff_t>(end));
    out.channel_min = s.channel_min;
    out.channel_max = s.channel_max;
    out.minmax_fitted = s.minmax_fitted;
    return out;
}

Tensor frames_to_matrix(const telemetry::SeriesSet& s) {
    Tensor out({s.size(), telemetry::kChannels});
    for (std::size_t t = 0; t < s.size(); ++t)
        for (std::size_t c = 0; c < telemetry::kChannels; ++c) out.at2(t, c) = s.frames[t].get(c);
    return out;
}

// eval-mode reconstruction of every window, batched
Tensor reconstruct_windows(piconvae::Model& model, const Tensor& windows) {
    const std::size_t count = windows.dim(0), W = windows.dim(1), C = windows.dim(2);
    const std::size_t bs = model.config().batch_size;
    Tensor out({count, W, C});
    for (std::size_t start = 0; start < count; start += bs) {
        const std::size_t n = std::min(bs, count - start);
        Tensor batch({n, W, C});
        std::copy_n(windows.data.begin() + static_cast<std::ptrdiff_t>(start * W * C), n * W * C,
                    batch.data.begin());
        Tensor xhat = model.forward(batch, neural::Mode::Eval);
        std::copy_n(xhat.data.begin(), n * W * C,
                    out.data.begin() + static_cast<std::ptrdiff_t>(start * W * C));
    }
    return out;
}

// Per-timestep aggregate anomaly scores of one physical-unit segment. The
// first `context` frames are lead-in from the preceding split: they keep the
// scored region away from window-coverage and conv-padding edge artifacts and
// are trimmed from the returned scores.
std::vector<double> score_segment(piconvae::Model& model, const telemetry::SeriesSet& segment,
                                  const ScoringOptions& sopt, std::size_t context = 0) {
    telemetry::SeriesSet seg = segment;
    seg.channel_min = model.channel_min();
    seg.channel_max = model.channel_max();
    seg.minmax_fitted = true;
    telemetry::SeriesSet norm = telemetry::apply_minmax(seg);

    telemetry::WindowBatch batch = telemetry::windowize(norm, model.config().window, 1);
    Tensor windows_hat = reconstruct_windows(model, batch.windows);
    Tensor xhat = scoring::aggregate_windows(windows_hat, batch.origin, seg.size(), sopt.aggregation);
    Tensor x = frames_to_matrix(norm);
    Tensor pointwise = scoring::pointwise_scores(x, xhat);
    Tensor physics = scoring::physics_scores(seg.frames);
    std::vector<double> scores = scoring::aggregate_scores(pointwise, physics, sopt.physics_weight);
    scores.erase(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(context));
    return scores;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

std::string write_manifest(const std::string& out_dir, const std::string& command,
                           const json& config, const json& inputs,
                           const std::vector<std::string>& output_files) {
    json m;
    m["format"] = "pigrid-manifest-v1";
    m["command"] = command;
    m["kernel_backend"] = kernels::backend_name(kernels::active_backend());
    m["config"] = config;
    m["inputs"] = inputs;
    json outputs = json::object();
    for (const std::string& f : output_files)
        outputs[fs::path(f).filename().string()] = checksum_hex(file_checksum(f));
    m["outputs"] = outputs;
    const std::string path = join(out_dir, "manifest.json");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest '" + path + "'");
    out << m.dump(2) << "\n";
    return path;
}

json input_entry(const std::string& path) {
    return json{{"path", path}, {"checksum", checksum_hex(file_checksum(path))}};
}

telemetry::SeriesSet load_dataset(const std::string& path) {
    std::vector<std::string> warnings;
    telemetry::SeriesSet s = telemetry::ingest_csv(path, &warnings);
    for (const std::string& w : warnings) std::fprintf(stderr, "warning: %s: %s\n", path.c_str(), w.c_str());
    return s;
}

} // namespace

std::string format_metrics(const scoring::Metrics& m, double threshold) {
    std::ostringstream out;
    out << "tp = " << m.tp << "\n"
        << "tn = " << m.tn << "\n"
        << "fp = " << m.fp << "\n"
        << "fn = " << m.fn << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", m.acc);
    out << "accuracy = " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", m.prec);
    out << "precision = " << buf << (m.prec_defined ? "" : " (undefined: no positive verdicts)") << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", m.rec);
    out << "recall = " << buf << (m.rec_defined ? "" : " (undefined: no positive labels)") << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", m.f1);
    out << "f1 = " << buf << (m.f1_defined ? "" : " (undefined)") << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", threshold);
    out << "threshold = " << buf << "\n";
    return out.str();
}

DetectionResult run_detection(piconvae::Model& model, const telemetry::SeriesSet& series,
                              const CampaignOptions& campaign, const ScoringOptions& sopt) {
    if (!model.has_normalization())
        throw DataError("checkpoint carries no normalization constants; cannot score");
    const std::size_t n = series.size();
    const std::size_t W = model.config().window;
    if (series.val_end == 0 || series.val_end >= n)
        throw DataError("series has no test split");
    if (series.train_end < W || series.val_end - series.train_end < W || n - series.val_end < W)
        throw DataError("splits shorter than one window");

    attacks::AttackCampaign ac;
    ac.kind = campaign.kind;
    ac.alpha_min = campaign.alpha_min;
    ac.alpha_max = campaign.alpha_max;
    ac.fixed_magnitude = campaign.fixed_magnitude;
    ac.channel = campaign.channel;
    ac.seed = campaign.seed;
    ac.target_indices = attacks::schedule_targets(series.test_len(), campaign.count, campaign.seed,
                                                  campaign.mode, series.val_end);
    attacks::InjectionResult injected = attacks::inject(series, ac);

    DetectionResult result;
    result.labels = injected.labels;

    const std::size_t context = W - 1; // lead-in from the preceding split
    telemetry::SeriesSet val_seg = slice_series(series, series.train_end - context, series.val_end);
    std::vector<double> val_scores = score_segment(model, val_seg, sopt, context);
    result.threshold = scoring::threshold_from_validation(val_scores, sopt.quantile);

    // the lead-in frames come from the clean validation split
    telemetry::SeriesSet test_seg = slice_series(injected.series, series.val_end - context, n);
    result.scores = score_segment(model, test_seg, sopt, context);
    result.verdicts = scoring::apply_threshold(result.scores, result.threshold);
    result.metrics = scoring::evaluate(result.verdicts, result.labels);
    return result;
}

GenerateResult cmd_generate(const telemetry::GeneratorConfig& cfg, const std::string& out_dir) {
    ensure_dir(out_dir);
    telemetry::SeriesSet s = telemetry::generate_synthetic(cfg);
    GenerateResult r;
    r.dataset_path = join(out_dir, "dataset.csv");
    telemetry::export_csv(s, r.dataset_path);
    r.manifest_path =
        write_manifest(out_dir, "generate", json{{"generator", cfg}}, json::object(), {r.dataset_path});
    return r;
}

InjectResult cmd_inject(const std::string& dataset, const CampaignOptions& campaign,
                        const std::string& out_dir) {
    ensure_dir(out_dir);
    telemetry::SeriesSet s = load_dataset(dataset);

    attacks::AttackCampaign ac;
    ac.kind = campaign.kind;
    ac.alpha_min = campaign.alpha_min;
    ac.alpha_max = campaign.alpha_max;
    ac.fixed_magnitude = campaign.fixed_magnitude;
    ac.channel = campaign.channel;
    ac.seed = campaign.seed;
    ac.target_indices =
        attacks::schedule_targets(s.test_len(), campaign.count, campaign.seed, campaign.mode, s.val_end);
    attacks::InjectionResult injected = attacks::inject(s, ac);

    InjectResult r;
    r.dataset_path = join(out_dir, "attacked.csv");
    telemetry::export_csv(injected.series, r.dataset_path);
    r.labels_path = join(out_dir, "labels.csv");
    {
        std::ofstream out(r.labels_path);
        if (!out) throw DataError("cannot write '" + r.labels_path + "'");
        out << "t,label\n";
        for (std::size_t i = 0; i < injected.labels.size(); ++i)
            out << (s.val_end + i) << "," << (injected.labels[i] ? 1 : 0) << "\n";
    }
    r.manifest_path = write_manifest(out_dir, "inject", json{{"campaign", campaign}},
                                     json{{"dataset", input_entry(dataset)}},
                                     {r.dataset_path, r.labels_path});
    return r;
}

TrainResult cmd_train(const std::string& dataset, const piconvae::ModelConfig& cfg,
                      const std::string& out_dir) {
    ensure_dir(out_dir);
    telemetry::SeriesSet s = load_dataset(dataset);
    telemetry::fit_minmax(s, 0, s.train_end);
    telemetry::SeriesSet norm = telemetry::apply_minmax(s);

    telemetry::SeriesSet train_seg = slice_series(norm, 0, s.train_end);
    telemetry::SeriesSet val_seg = slice_series(norm, s.train_end, s.val_end);
    telemetry::WindowBatch train_windows = telemetry::windowize(train_seg, cfg.window, 1);
    telemetry::WindowBatch val_windows = telemetry::windowize(val_seg, cfg.window, 1);

    piconvae::Model model(cfg);
    model.set_normalization(s.channel_min, s.channel_max);
    TrainResult r;
    r.report = model.train(train_windows.windows, val_windows.windows);

    r.checkpoint_path = join(out_dir, "model.ckpt");
    model.save_checkpoint(r.checkpoint_path);

    r.losses_path = join(out_dir, "losses.csv");
    {
        std::ofstream out(r.losses_path);
        if (!out) throw DataError("cannot write '" + r.losses_path + "'");
        out << "epoch,train_total,train_ae,train_phy_p,train_phy_q,val_total,val_ae,val_phy_p,val_phy_q\n";
        char buf[512];
        for (const auto& e : r.report.epochs) {
            if (cfg.physics_enabled) {
                std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                              e.epoch, e.train_total, e.train_ae, e.train_phy_p, e.train_phy_q,
                              e.val_total, e.val_ae, e.val_phy_p, e.val_phy_q);
            } else {
                // baseline run: physics columns intentionally empty
                std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,,,%.17g,%.17g,,\n", e.epoch,
                              e.train_total, e.train_ae, e.val_total, e.val_ae);
            }
            out << buf;
        }
    }

    json config{{"model", cfg}};
    json summary{{"best_epoch", r.report.epochs.empty() ? 0 : r.report.epochs[r.report.best_epoch].epoch},
                 {"best_val_loss", r.report.best_val_loss},
                 {"stop_reason", r.report.stop_reason},
                 {"epochs_run", r.report.epochs.size()}};
    config["result"] = summary;
    r.manifest_path = write_manifest(out_dir, "train", config,
                                     json{{"dataset", input_entry(dataset)}},
                                     {r.checkpoint_path, r.losses_path});
    return r;
}

DetectCmdResult cmd_detect(const std::string& checkpoint, const std::string& dataset,
                           const CampaignOptions& campaign, const ScoringOptions& sopt,
                           const std::string& out_dir) {
    ensure_dir(out_dir);
    piconvae::Model model = piconvae::Model::load_checkpoint(checkpoint);
    telemetry::SeriesSet s = load_dataset(dataset);

    DetectCmdResult r;
    r.detection = run_detection(model, s, campaign, sopt);

    r.scores_path = join(out_dir, "scores.csv");
    {
        std::ofstream out(r.scores_path);
        if (!out) throw DataError("cannot write '" + r.scores_path + "'");
        out << "t,score,verdict,label\n";
        char buf[128];
        for (std::size_t i = 0; i < r.detection.scores.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%d,%d\n", s.val_end + i, r.detection.scores[i],
                          r.detection.verdicts[i] ? 1 : 0, r.detection.labels[i] ? 1 : 0);
            out << buf;
        }
    }
    r.metrics_path = join(out_dir, "metrics.txt");
    {
        std::ofstream out(r.metrics_path);
        if (!out) throw DataError("cannot write '" + r.metrics_path + "'");
        out << format_metrics(r.detection.metrics, r.detection.threshold);
    }
    r.manifest_path = write_manifest(
        out_dir, "detect", json{{"campaign", campaign}, {"scoring", sopt}},
        json{{"checkpoint", input_entry(checkpoint)}, {"dataset", input_entry(dataset)}},
        {r.scores_path, r.metrics_path});
    return r;
}

EvaluateCmdResult cmd_evaluate(const std::string& scores_csv, const std::string& out_dir) {
    ensure_dir(out_dir);
    std::ifstream in(scores_csv);
    if (!in) throw DataError("cannot open '" + scores_csv + "'");
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,score,verdict,label", 0) != 0)
        throw DataError("'" + scores_csv + "': expected header t,score,verdict,label");
    std::vector<bool> verdicts, labels;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 4)
            throw DataError("'" + scores_csv + "' row " + std::to_string(row) + ": expected 4 columns");
        verdicts.push_back(cells[2] != "0");
        labels.push_back(cells[3] != "0");
    }
    if (verdicts.empty()) throw DataError("'" + scores_csv + "': no data rows");

    EvaluateCmdResult r;
    r.metrics = scoring::evaluate(verdicts, labels);
    r.metrics_path = join(out_dir, "metrics.txt");
    {
        std::ofstream out(r.metrics_path);
        if (!out) throw DataError("cannot write '" + r.metrics_path + "'");
        out << format_metrics(r.metrics, 0.0);
    }
    r.manifest_path = write_manifest(out_dir, "evaluate", json::object(),
                                     json{{"scores", input_entry(scores_csv)}}, {r.metrics_path});
    return r;
}

SweepCmdResult cmd_sweep(const std::string& checkpoint, const std::string& dataset,
                         const CampaignOptions& campaign, const ScoringOptions& sopt, double grid_lo,
                         double grid_hi, std::size_t grid_steps, const std::string& out_dir) {
    ensure_dir(out_dir);
    piconvae::Model model = piconvae::Model::load_checkpoint(checkpoint);
    telemetry::SeriesSet s = load_dataset(dataset);
    std::vector<double> grid = attacks::magnitude_grid(grid_lo, grid_hi, grid_steps);

    SweepCmdResult r;
    json levels = json::array();
    for (double alpha : grid) {
        CampaignOptions level = campaign;
        level.fixed_magnitude = alpha; // only the magnitude varies across levels
        DetectionResult det = run_detection(model, s, level, sopt);
        r.rows.push_back(SweepRow{alpha, det.metrics});
        levels.push_back(json{{"campaign", level}});
    }

    r.sweep_path = join(out_dir, "sweep.csv");
    {
        std::ofstream out(r.sweep_path);
        if (!out) throw DataError("cannot write '" + r.sweep_path + "'");
        out << "alpha,acc,prec,rec,f1\n";
        char buf[160];
        for (const SweepRow& row : r.rows) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n", row.alpha,
                          row.metrics.acc, row.metrics.prec, row.metrics.rec, row.metrics.f1);
            out << buf;
        }
    }
    r.manifest_path = write_manifest(
        out_dir, "sweep",
        json{{"campaign", campaign},
             {"scoring", sopt},
             {"grid", {{"lo", grid_lo}, {"hi", grid_hi}, {"steps", grid_steps}}},
             {"levels", levels}},
        json{{"checkpoint", input_entry(checkpoint)}, {"dataset", input_entry(dataset)}},
        {r.sweep_path});
    return r;
}

ReplayResult cmd_replay(const std::string& manifest, const std::string& out_dir) {
    std::ifstream in(manifest);
    if (!in) throw DataError("cannot open manifest '" + manifest + "'");
    json m = json::parse(in, nullptr, false);
    if (m.is_discarded()) throw DataError("'" + manifest + "': not valid JSON");
    if (m.value("format", "") != "pigrid-manifest-v1")
        throw DataError("'" + manifest + "': not a pigrid manifest");

    // the recorded backend must be reproduced for bit-identical arithmetic
    kernels::set_backend(kernels::backend_from_name(m.at("kernel_backend")));

    const auto verify_input = [&](const json& entry) {
        const std::string path = entry.at("path");
        const std::string recorded = entry.at("checksum");
        const std::string actual = checksum_hex(file_checksum(path));
        if (recorded != actual)
            throw DataError("input '" + path + "' changed since the original run (checksum " + actual +
                            " != " + recorded + ")");
        return path;
    };

    const std::string command = m.at("command");
    const json& config = m.at("config");
    std::string new_manifest;
    if (command == "generate") {
        new_manifest = cmd_generate(config.at("generator").get<telemetry::GeneratorConfig>(), out_dir)
                           .manifest_path;
    } else if (command == "inject") {
        new_manifest = cmd_inject(verify_input(m.at("inputs").at("dataset")),
                                  config.at("campaign").get<CampaignOptions>(), out_dir)
                           .manifest_path;
    } else if (command == "train") {
        new_manifest = cmd_train(verify_input(m.at("inputs").at("dataset")),
                                 config.at("model").get<piconvae::ModelConfig>(), out_dir)
                           .manifest_path;
    } else if (command == "detect") {
        new_manifest = cmd_detect(verify_input(m.at("inputs").at("checkpoint")),
                                  verify_input(m.at("inputs").at("dataset")),
                                  config.at("campaign").get<CampaignOptions>(),
                                  config.at("scoring").get<ScoringOptions>(), out_dir)
                           .manifest_path;
    } else if (command == "evaluate") {
        new_manifest = cmd_evaluate(verify_input(m.at("inputs").at("scores")), out_dir).manifest_path;
    } else if (command == "sweep") {
        const json& grid = config.at("grid");
        new_manifest = cmd_sweep(verify_input(m.at("inputs").at("checkpoint")),
                                 verify_input(m.at("inputs").at("dataset")),
                                 config.at("campaign").get<CampaignOptions>(),
                                 config.at("scoring").get<ScoringOptions>(), grid.at("lo"),
                                 grid.at("hi"), grid.at("steps"), out_dir)
                           .manifest_path;
    } else {
        throw DataError("manifest command '" + command + "' cannot be replayed");
    }

    std::ifstream nin(new_manifest);
    json nm = json::parse(nin);
    ReplayResult r;
    r.manifest_path = new_manifest;
    r.checksums_match = true;
    for (const auto& [name, checksum] : m.at("outputs").items()) {
        const auto it = nm.at("outputs").find(name);
        if (it == nm.at("outputs").end() || it->get<std::string>() != checksum.get<std::string>()) {
            r.checksums_match = false;
            r.mismatches.push_back(name);
        }
    }
    return r;
}

} // namespace pigrid::harness
