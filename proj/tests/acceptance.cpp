// Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.
#include "pigrid/harness.hpp"
#include "pigrid/kernels.hpp"
#include "pigrid/neural.hpp"
#include "pigrid/piconvae.hpp"
#include "pigrid/scoring.hpp"
#include "pigrid/telemetry.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

using namespace pigrid;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("%s  criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

piconvae::ModelConfig tiny_config() {
    piconvae::ModelConfig cfg;
    cfg.enc_filters = {8, 4};
    cfg.bottleneck = 6;
    cfg.dropout = 0.0;
    cfg.batch_size = 16;
    cfg.seed = 13;
    return cfg;
}

struct NormalizedData {
    telemetry::SeriesSet series;
    Tensor train_windows, val_windows;
};

NormalizedData make_data(std::size_t length, std::uint64_t seed, std::size_t window) {
    NormalizedData d;
    telemetry::GeneratorConfig g;
    g.length = length;
    g.seed = seed;
    d.series = telemetry::generate_synthetic(g);
    telemetry::fit_minmax(d.series, 0, d.series.train_end);
    telemetry::SeriesSet norm = telemetry::apply_minmax(d.series);
    telemetry::SeriesSet tr = norm, va = norm;
    tr.frames.assign(norm.frames.begin(),
                     norm.frames.begin() + static_cast<std::ptrdiff_t>(d.series.train_end));
    va.frames.assign(norm.frames.begin() + static_cast<std::ptrdiff_t>(d.series.train_end),
                     norm.frames.begin() + static_cast<std::ptrdiff_t>(d.series.val_end));
    d.train_windows = telemetry::windowize(tr, window, 1).windows;
    d.val_windows = telemetry::windowize(va, window, 1).windows;
    return d;
}

// ---------------------------------------------------------------- criterion 1
void criterion_gradient_fidelity() {
    const auto t0 = std::chrono::steady_clock::now();
    NormalizedData d = make_data(160, 2, 16);
    piconvae::Model m(tiny_config());
    m.set_normalization(d.series.channel_min, d.series.channel_max);

    Tensor batch({4, 16, 6});
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = d.train_windows[i];

    m.forward(batch, neural::Mode::Train); // seed batchnorm statistics
    m.set_freeze_batchnorm(true);

    auto params = m.all_params();
    auto loss_fn = [&]() {
        Tensor xhat = m.forward(batch, neural::Mode::Train);
        return m.loss_total(batch, xhat).total;
    };
    auto compute_grads = [&]() {
        for (auto* p : params) p->grad.fill(0.0);
        Tensor xhat = m.forward(batch, neural::Mode::Train);
        m.backward(m.loss_gradient(batch, xhat));
        const double c = m.config().alpha_data * 2.0 * m.config().lambda_reg;
        for (auto* p : params)
            if (p->is_weight)
                for (std::size_t i = 0; i < p->value.size(); ++i) p->grad[i] += c * p->value[i];
    };
    neural::GradCheckReport r = neural::grad_check(loss_fn, compute_grads, params, 1e-5);

    double linear_worst = 0.0;
    for (const auto& b : r.blocks) {
        const bool linear = b.name.find("conv") != std::string::npos ||
                            b.name.find("fc") != std::string::npos ||
                            b.name.find("head") != std::string::npos;
        if (linear) linear_worst = std::max(linear_worst, b.max_rel_err);
    }
    const double elapsed = seconds_since(t0);
    const bool pass = r.max_rel_err < 1e-4 && linear_worst < 1e-6 && elapsed < 60.0;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "gradient fidelity: max rel err %.3g (tol 1e-4, worst block %s), linear %.3g "
                  "(tol 1e-6), %.1fs (limit 60s)",
                  r.max_rel_err, r.worst_block.c_str(), linear_worst, elapsed);
    report(1, pass, buf);
}

// ---------------------------------------------------------------- criterion 2
void criterion_physics_identities() {
    NormalizedData d = make_data(400, 5, 16);
    piconvae::Model m(tiny_config());
    m.set_normalization(d.series.channel_min, d.series.channel_max);

    Tensor batch({8, 16, 6});
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = d.train_windows[i];
    auto [lp, lq] = m.loss_physics(batch);

    Tensor scores = scoring::physics_scores(d.series.frames);
    double score_max = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) score_max = std::max(score_max, scores[i]);

    Rng rng(31);
    Tensor x({3, 4, 12}), W({5, 4, 5}), y({3, 5, 12}), b({5});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < W.size(); ++i) W[i] = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = rng.uniform(-1.0, 1.0);
    Tensor cx = neural::conv1d_forward(x, W, b);
    Tensor ay = neural::conv1d_grad_input(y, W);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < cx.size(); ++i) lhs += cx[i] * y[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * ay[i];
    const double adjoint_err = std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));

    const bool pass = lp <= 1e-16 && lq <= 1e-16 && score_max <= 1e-16 && adjoint_err <= 1e-10;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "physics identities: L_PhyP %.3g, L_PhyQ %.3g, max a_phy %.3g (tol 1e-16), "
                  "adjoint err %.3g (tol 1e-10)",
                  lp, lq, score_max, adjoint_err);
    report(2, pass, buf);
}

// ---------------------------------------------------------------- criterion 3
void criterion_baseline_equivalence(const std::string& work) {
    NormalizedData d = make_data(400, 7, 16);

    // alpha_phys = 0: total reduces to the data term bitwise
    piconvae::ModelConfig cfg = tiny_config();
    cfg.alpha_phys = 0.0;
    piconvae::Model m(cfg);
    m.set_normalization(d.series.channel_min, d.series.channel_max);
    Tensor batch({6, 16, 6});
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = d.train_windows[i];
    Tensor xhat = m.forward(batch, neural::Mode::Train);
    piconvae::LossBreakdown l = m.loss_total(batch, xhat);
    const bool bitwise = (l.total == cfg.alpha_data * l.ae);

    // ConvAE vs PIConvAE manifests: configs differ only in the physics flag
    telemetry::GeneratorConfig g;
    g.length = 400;
    g.seed = 7;
    harness::GenerateResult gen = harness::cmd_generate(g, work + "/c3_gen");
    piconvae::ModelConfig pic = tiny_config();
    pic.epochs = 2;
    piconvae::ModelConfig conv = pic;
    conv.physics_enabled = false;
    harness::TrainResult tp = harness::cmd_train(gen.dataset_path, pic, work + "/c3_pi");
    harness::TrainResult tc = harness::cmd_train(gen.dataset_path, conv, work + "/c3_conv");

    nlohmann::json mp, mc;
    std::ifstream(tp.manifest_path) >> mp;
    std::ifstream(tc.manifest_path) >> mc;
    std::vector<std::string> diffs;
    for (const auto& [key, value] : mp.at("config").at("model").items())
        if (mc.at("config").at("model").at(key) != value) diffs.push_back(key);
    const bool manifest_ok = diffs.size() == 1 && diffs[0] == "physics_enabled";

    const bool pass = bitwise && manifest_ok;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "baseline equivalence: alpha_phy=0 total==ae bitwise %s; manifest config diff %s",
                  bitwise ? "yes" : "NO", manifest_ok ? "= {physics_enabled}" : "unexpected");
    report(3, pass, buf);
}

// ---------------------------------------------------------------- criterion 4
void criterion_metric_ratios() {
    auto f1_for = [](std::size_t tp, std::size_t fn) {
        std::vector<bool> verdicts, labels;
        for (std::size_t i = 0; i < tp; ++i) { verdicts.push_back(true); labels.push_back(true); }
        for (std::size_t i = 0; i < fn; ++i) { verdicts.push_back(false); labels.push_back(true); }
        for (std::size_t i = 0; i < 100; ++i) { verdicts.push_back(false); labels.push_back(false); }
        return scoring::evaluate(verdicts, labels);
    };
    scoring::Metrics a = f1_for(39, 1); // Prec 1.0, Rec 0.975
    scoring::Metrics b = f1_for(38, 2); // Prec 1.0, Rec 0.95
    const double err_a = std::abs(a.f1 * 100.0 - 98.73);
    const double err_b = std::abs(b.f1 * 100.0 - 97.44);
    const bool pass = a.prec == 1.0 && a.rec == 0.975 && err_a <= 0.005 && b.prec == 1.0 &&
                      b.rec == 0.95 && err_b <= 0.005;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "metric ratios: F1(1.0, 0.975) = %.4f%% (target 98.73 +/- 0.005pp), "
                  "F1(1.0, 0.95) = %.4f%% (target 97.44 +/- 0.005pp)",
                  a.f1 * 100.0, b.f1 * 100.0);
    report(4, pass, buf);
}

// --------------------------------------------------------- criteria 5, 7, 9
struct DeskScale {
    std::string dataset_path;
    std::string checkpoint_path;
};

DeskScale criterion_desk_scale_detection(const std::string& work) {
    const auto t0 = std::chrono::steady_clock::now();

    telemetry::GeneratorConfig g; // the default 10080-sample dataset
    harness::GenerateResult gen = harness::cmd_generate(g, work + "/c5_gen");

    piconvae::ModelConfig cfg; // full architecture
    cfg.epochs = 45;           // converged well before this on the default dataset
    harness::TrainResult tr = harness::cmd_train(gen.dataset_path, cfg, work + "/c5_train");

    harness::CampaignOptions campaign; // combined +/-, random targets, channel I
    campaign.alpha_min = 0.02;
    campaign.alpha_max = 0.05;
    campaign.count = 150;
    harness::ScoringOptions sopt; // default quantile 0.995
    harness::DetectCmdResult det =
        harness::cmd_detect(tr.checkpoint_path, gen.dataset_path, campaign, sopt, work + "/c5_detect");

    const auto& m = det.detection.metrics;
    const double elapsed = seconds_since(t0);
    const bool pass = m.prec >= 0.95 && m.rec >= 0.90 && m.f1 >= 0.92 && elapsed <= 900.0;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "desk-scale detection: prec %.4f (>=0.95), rec %.4f (>=0.90), f1 %.4f (>=0.92), "
                  "%.0fs (limit 900s)",
                  m.prec, m.rec, m.f1, elapsed);
    report(5, pass, buf);
    return {gen.dataset_path, tr.checkpoint_path};
}

// ---------------------------------------------------------------- criterion 6
void criterion_convergence_speed() {
    const std::size_t window = 16;
    NormalizedData d = make_data(600, 7, window);

    // capacity-constrained setup: the physics gradient steers the small model
    // out of the poor basin the data term alone crawls through
    piconvae::ModelConfig cfg;
    cfg.enc_filters = {16, 8};
    cfg.bottleneck = 4;
    cfg.dropout = 0.0;
    cfg.seed = 2;
    cfg.epochs = 120;
    cfg.patience = 120; // fixed budget on both sides
    piconvae::Model pi(cfg);
    pi.set_normalization(d.series.channel_min, d.series.channel_max);
    piconvae::TrainReport rp = pi.train(d.train_windows, d.val_windows);

    piconvae::ModelConfig base = cfg;
    base.physics_enabled = false;
    base.alternating = false; // conventional joint training
    piconvae::Model conv(base);
    conv.set_normalization(d.series.channel_min, d.series.channel_max);
    piconvae::TrainReport rc = conv.train(d.train_windows, d.val_windows);

    // epochs-to-threshold on validation reconstruction error (the ae term)
    double conv_best = rc.epochs[0].val_ae;
    for (const auto& e : rc.epochs) conv_best = std::min(conv_best, e.val_ae);
    std::size_t conv_best_epoch = rc.epochs.size();
    for (const auto& e : rc.epochs)
        if (e.val_ae == conv_best) { conv_best_epoch = e.epoch + 1; break; }
    std::size_t pi_reach_epoch = 0; // first epoch where PIConvAE matches it
    for (const auto& e : rp.epochs)
        if (e.val_ae <= conv_best) { pi_reach_epoch = e.epoch + 1; break; }

    const bool reached = pi_reach_epoch > 0;
    const bool pass =
        reached && static_cast<double>(pi_reach_epoch) <= 0.5 * static_cast<double>(conv_best_epoch);
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "convergence speed: ConvAE best val recon %.3g at epoch %zu; PIConvAE reached it "
                  "at epoch %s (need <= %.1f)",
                  conv_best, conv_best_epoch, reached ? std::to_string(pi_reach_epoch).c_str() : "never",
                  0.5 * static_cast<double>(conv_best_epoch));
    report(6, pass, buf);
}

// ---------------------------------------------------------------- criterion 7
void criterion_magnitude_sweep(const DeskScale& ds, const std::string& work) {
    harness::CampaignOptions campaign;
    campaign.count = 150;
    harness::ScoringOptions sopt;
    harness::SweepCmdResult sweep = harness::cmd_sweep(ds.checkpoint_path, ds.dataset_path, campaign,
                                                       sopt, 0.01, 0.05, 5, work + "/c7_sweep");

    bool trend_ok = true;
    int inversions = 0;
    for (std::size_t k = 1; k < sweep.rows.size(); ++k) {
        const double drop = sweep.rows[k - 1].metrics.rec - sweep.rows[k].metrics.rec;
        if (drop > 0.0) {
            ++inversions;
            if (drop > 0.02) trend_ok = false;
        }
    }
    if (inversions > 1) trend_ok = false;
    bool high_alpha_ok = true;
    for (const auto& row : sweep.rows)
        if (row.alpha >= 0.03 && row.metrics.rec < 0.9) high_alpha_ok = false;

    const bool pass = trend_ok && high_alpha_ok;
    std::string recs;
    for (const auto& row : sweep.rows) {
        char r[32];
        std::snprintf(r, sizeof(r), " %.2f", row.metrics.rec);
        recs += r;
    }
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "magnitude sweep: recall by alpha 1..5%% =%s (one inversion <= 2pp allowed, "
                  "recall >= 0.9 at alpha >= 3%%)",
                  recs.c_str());
    report(7, pass, buf);
}

// ---------------------------------------------------------------- criterion 8
void criterion_determinism(const std::string& work) {
    telemetry::GeneratorConfig g;
    g.length = 600;
    g.seed = 9;
    harness::GenerateResult gen = harness::cmd_generate(g, work + "/c8_gen");
    harness::CampaignOptions c;
    c.count = 20;
    harness::InjectResult inj = harness::cmd_inject(gen.dataset_path, c, work + "/c8_inj");
    piconvae::ModelConfig mc = tiny_config();
    mc.epochs = 2;
    harness::TrainResult trn = harness::cmd_train(gen.dataset_path, mc, work + "/c8_trn");

    harness::ReplayResult r1 = harness::cmd_replay(gen.manifest_path, work + "/c8_replay_gen");
    harness::ReplayResult r2 = harness::cmd_replay(inj.manifest_path, work + "/c8_replay_inj");
    harness::ReplayResult r3 = harness::cmd_replay(trn.manifest_path, work + "/c8_replay_trn");

    const bool pass = r1.checksums_match && r2.checksums_match && r3.checksums_match;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "determinism: replay checksums match for generate %s, inject %s, train %s",
                  r1.checksums_match ? "yes" : "NO", r2.checksums_match ? "yes" : "NO",
                  r3.checksums_match ? "yes" : "NO");
    report(8, pass, buf);
}

// ---------------------------------------------------------------- criterion 9
void criterion_clean_false_positives(const DeskScale& ds) {
    piconvae::Model model = piconvae::Model::load_checkpoint(ds.checkpoint_path);
    telemetry::SeriesSet s = telemetry::ingest_csv(ds.dataset_path);
    harness::CampaignOptions campaign;
    campaign.count = 0; // no attacks
    harness::ScoringOptions sopt;
    harness::DetectionResult det = harness::run_detection(model, s, campaign, sopt);

    const double n = static_cast<double>(det.verdicts.size());
    const double fp_rate = static_cast<double>(det.metrics.fp) / n;
    const double q = 1.0 - sopt.quantile; // design rate 0.005
    const double bound = q + 3.0 * std::sqrt(q * (1.0 - q) / n);
    const bool pass = fp_rate <= bound;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "clean false-positive bound: fp rate %.5f (= %zu / %zu) <= %.5f (0.005 + 3 sigma)",
                  fp_rate, det.metrics.fp, det.verdicts.size(), bound);
    report(9, pass, buf);
}

} // namespace

int main() {
    const std::string work =
        (fs::temp_directory_path() / ("pigrid_acceptance_" + std::to_string(::getpid()))).string();
    fs::remove_all(work);
    fs::create_directories(work);

    std::printf("kernel backend: %s\n", kernels::backend_name(kernels::active_backend()).c_str());

    criterion_gradient_fidelity();
    criterion_physics_identities();
    criterion_baseline_equivalence(work);
    criterion_metric_ratios();
    DeskScale ds = criterion_desk_scale_detection(work);
    criterion_convergence_speed();
    criterion_magnitude_sweep(ds, work);
    criterion_determinism(work);
    criterion_clean_false_positives(ds);

    fs::remove_all(work);
    if (failures) std::printf("%d criterion(s) FAILED\n", failures);
    else std::printf("all 9 criteria passed\n");
    return failures == 0 ? 0 : 1;
}
