// Command-line front end: train single cells, run flossing pretraining,
// measure Lyapunov spectra, run the full figure sweep, regenerate plots
// from CSV outputs, and smoke-test the pipeline.

#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include <rnnlab/rnnlab.hpp>

namespace fs = std::filesystem;
using namespace rnnlab;

namespace {

ExperimentConfig base_config(const std::string& config_path, const std::string& task,
                             const std::string& trace, int iters) {
    ExperimentConfig cfg =
        config_path.empty() ? ExperimentConfig{} : load_experiment_config(config_path);
    if (!task.empty()) cfg.task = task_defaults(task_id_from_string(task));
    if (!trace.empty()) cfg.trace = trace_mode_from_string(trace);
    if (iters > 0) cfg.iters = iters;
    return cfg;
}

void write_single_curve(const std::string& path, const std::string& rule, double gain, double lr,
                        uint64_t seed, const std::vector<double>& losses) {
    CsvWriter w(path, {"iteration", "rule", "gain", "lr", "seed", "loss"});
    for (size_t it = 0; it < losses.size(); ++it)
        w.row({std::to_string(it), rule, format_double(gain), format_double(lr),
               std::to_string(seed), format_double(losses[it])});
}

int cmd_train(const std::string& config_path, const std::string& task, const std::string& rule,
              const std::string& trace, double gain, double lr, uint64_t seed, int iters,
              const std::string& out) {
    ExperimentConfig cfg = base_config(config_path, task, trace, iters);
    TrainResult r = train(cfg, rule_from_string(rule), gain, lr, seed);

    fs::create_directories(out);
    write_single_curve(out + "/curve.csv", rule, gain, lr, seed, r.losses);
    save_checkpoint(out + "/final.ckpt", r.params, seed, gain);
    const double final_loss = final_window_mean(r.losses, cfg.iters, r.failed);
    nlohmann::json summary = {{"rule", rule},     {"task", to_string(cfg.task.task)},
                              {"gain", gain},     {"lr", lr},
                              {"seed", seed},     {"iters", cfg.iters},
                              {"failed", r.failed}, {"final_loss", final_loss}};
    std::ofstream(out + "/summary.json") << summary.dump(2) << "\n";
    std::printf("train %s %s gain=%g lr=%g seed=%llu: final loss %.6g%s\n", rule.c_str(),
                to_string(cfg.task.task).c_str(), gain, lr,
                static_cast<unsigned long long>(seed), final_loss,
                r.failed ? " (FAILED)" : "");
    return r.failed ? 1 : 0;
}

int cmd_floss(const std::string& config_path, const std::string& task, double gain, uint64_t seed,
              int iters, const std::string& out) {
    ExperimentConfig cfg = base_config(config_path, task, "", -1);
    if (iters > 0) cfg.floss.pretrain_iters = iters;
    CellRngs rngs = cell_rngs(cfg.master_seed, seed);
    RnnParams p = init_params(cfg.arch(), gain, rngs.init);

    LyapunovEstimate before = measure_lyapunov(p, cfg.task, cfg.lyap, rngs.lyap.split(1));
    FlossHistory hist = detail::floss_phase(p, cfg, rngs);
    LyapunovEstimate after = measure_lyapunov(p, cfg.task, cfg.lyap, rngs.lyap.split(2));

    fs::create_directories(out);
    {
        std::vector<std::string> header{"iteration", "loss", "skipped"};
        for (int i = 1; i <= cfg.floss.k; ++i) header.push_back("lambda_" + std::to_string(i));
        CsvWriter w(out + "/floss_history.csv", header);
        for (size_t it = 0; it < hist.iters.size(); ++it) {
            const FlossIteration& f = hist.iters[it];
            std::vector<std::string> row{std::to_string(it), format_double(f.loss),
                                         f.skipped ? "1" : "0"};
            for (int i = 0; i < cfg.floss.k; ++i)
                row.push_back(i < static_cast<int>(f.lambdas.size()) ? format_double(f.lambdas[i])
                                                                     : "");
            w.row(row);
        }
    }
    save_checkpoint(out + "/flossed.ckpt", p, seed, gain);
    nlohmann::json summary = {{"gain", gain},
                              {"seed", seed},
                              {"pretrain_iters", cfg.floss.pretrain_iters},
                              {"lambda_max_before", before.lambdas[0]},
                              {"lambda_max_after", after.lambdas[0]}};
    std::ofstream(out + "/summary.json") << summary.dump(2) << "\n";
    std::printf("floss gain=%g seed=%llu: lambda_max %.4f -> %.4f\n", gain,
                static_cast<unsigned long long>(seed), before.lambdas[0], after.lambdas[0]);
    return 0;
}

int cmd_lyapunov(const std::string& config_path, const std::string& task,
                 const std::string& checkpoint, double gain, uint64_t seed, int k, int warmup,
                 int horizon, const std::string& out) {
    ExperimentConfig cfg = base_config(config_path, task, "", -1);
    if (k > 0) cfg.lyap.k = k;
    if (warmup >= 0) cfg.lyap.warmup = warmup;
    if (horizon > 0) cfg.lyap.horizon = horizon;

    CellRngs rngs = cell_rngs(cfg.master_seed, seed);
    RnnParams p;
    if (!checkpoint.empty()) {
        Checkpoint c = load_checkpoint(checkpoint);
        p = std::move(c.params);
        require(p.n_in == cfg.task.n_in(), "checkpoint input width does not match task");
    } else {
        p = init_params(cfg.arch(), gain, rngs.init);
    }
    LyapunovEstimate est = measure_lyapunov(p, cfg.task, cfg.lyap, rngs.lyap.split(1));

    std::printf("lyapunov gain=%g seed=%llu k=%d warmup=%d horizon=%d\n", gain,
                static_cast<unsigned long long>(seed), cfg.lyap.k, cfg.lyap.warmup,
                cfg.lyap.horizon);
    for (size_t i = 0; i < est.lambdas.size(); ++i)
        std::printf("  lambda_%zu = %.6f nats/step\n", i + 1, est.lambdas[i]);
    if (est.rank_collapsed) std::printf("  warning: rank collapse\n");
    if (est.diverged) std::printf("  warning: trajectory diverged\n");

    if (!out.empty()) {
        fs::create_directories(out);
        std::vector<std::string> header{"gain", "seed", "k"};
        for (int i = 1; i <= cfg.lyap.k; ++i) header.push_back("lambda_" + std::to_string(i));
        for (const char* extra : {"horizon", "warmup", "rank_collapsed", "diverged"})
            header.push_back(extra);
        CsvWriter w(out + "/lyapunov.csv", header);
        std::vector<std::string> row{format_double(gain), std::to_string(seed),
                                     std::to_string(cfg.lyap.k)};
        for (double l : est.lambdas) row.push_back(format_double(l));
        row.push_back(std::to_string(cfg.lyap.horizon));
        row.push_back(std::to_string(cfg.lyap.warmup));
        row.push_back(est.rank_collapsed ? "1" : "0");
        row.push_back(est.diverged ? "1" : "0");
        w.row(row);
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, std::string out, bool out_given, int threads) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (threads > 0) cfg.threads = threads;
    if (!out_given) out = cfg.out;
    SuiteResult suite = run_figure_suite(cfg, out, true);
    std::printf("sweep '%s' done: %zu cells, digest %s, outputs in %s\n", cfg.name.c_str(),
                suite.cells.size(), suite.digest.c_str(), out.c_str());
    if (!suite.failures.empty()) {
        std::fprintf(stderr, "sweep finished with %zu failure(s); see %s/manifest.json\n",
                     suite.failures.size(), out.c_str());
        for (const std::string& f : suite.failures) std::fprintf(stderr, "  %s\n", f.c_str());
        return 1;
    }
    return 0;
}

int cmd_plot(const std::string& curves, const std::string& lyap, const std::string& floss,
             const std::string& out) {
    fs::create_directories(out);
    if (!curves.empty()) plot_curves_csv(curves, out);
    if (!lyap.empty()) plot_lyapunov_csv(lyap, out + "/lyapunov.svg");
    if (!floss.empty()) plot_floss_csv(floss, out + "/flossing.svg");
    std::printf("plots written to %s\n", out.c_str());
    return 0;
}

int cmd_smoke(const std::string& out) {
    std::string error;
    if (run_smoke(out, &error)) {
        std::printf("smoke PASS (outputs in %s)\n", out.c_str());
        return 0;
    }
    std::printf("smoke FAIL: %s\n", error.c_str());
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"leaky ReLU RNN training, Lyapunov spectra, and gradient flossing"};
    app.require_subcommand(1);

    std::string config_path, task, rule = "eprop", trace, checkpoint;
    std::string out = "out";
    std::string curves_csv, lyap_csv, floss_csv;
    double gain = 1.0, lr = 1e-3;
    uint64_t seed = 1;
    int iters = -1, k = -1, warmup = -1, horizon = -1, threads = -1;

    auto add_common = [&](CLI::App* sub, bool with_rule) {
        sub->add_option("--config", config_path, "experiment config JSON");
        sub->add_option("--task", task, "task name: romo, 2af, dms");
        sub->add_option("--gain", gain, "initialization gain");
        sub->add_option("--seed", seed, "cell seed");
        sub->add_option("--out", out, "output directory");
        if (with_rule) {
            sub->add_option("--rule", rule, "learning rule: bptt or eprop");
            sub->add_option("--lr", lr, "learning rate");
            sub->add_option("--trace", trace, "trace mode: full_diag, leak_only, one_step");
            sub->add_option("--iters", iters, "training iterations");
        }
    };

    CLI::App* train = app.add_subcommand("train", "train a single network");
    add_common(train, true);

    CLI::App* floss = app.add_subcommand("floss", "flossing pretraining only");
    add_common(floss, false);
    floss->add_option("--iters", iters, "pretraining iterations");

    CLI::App* lyap = app.add_subcommand("lyapunov", "measure the Lyapunov spectrum");
    add_common(lyap, false);
    lyap->add_option("--checkpoint", checkpoint, "measure a saved checkpoint instead of a fresh init");
    lyap->add_option("--k", k, "number of exponents");
    lyap->add_option("--warmup", warmup, "warmup steps");
    lyap->add_option("--horizon", horizon, "accumulated steps");

    CLI::App* sweep = app.add_subcommand("sweep", "full figure suite from a config");
    sweep->add_option("--config", config_path, "experiment config JSON")->required();
    sweep->add_option("--out", out, "output directory");
    sweep->add_option("--threads", threads, "worker threads");

    CLI::App* plot = app.add_subcommand("plot", "regenerate SVG plots from CSV outputs");
    plot->add_option("--curves", curves_csv, "curves.csv path");
    plot->add_option("--lyapunov", lyap_csv, "lyapunov.csv path");
    plot->add_option("--floss", floss_csv, "floss_history.csv path");
    plot->add_option("--out", out, "output directory");

    CLI::App* smoke = app.add_subcommand("smoke", "tiny end-to-end pipeline check");
    smoke->add_option("--out", out, "output directory");

    std::string lyap_out;
    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed())
            return cmd_train(config_path, task, rule, trace, gain, lr, seed, iters, out);
        if (floss->parsed()) return cmd_floss(config_path, task, gain, seed, iters, out);
        if (lyap->parsed()) {
            lyap_out = lyap->get_option("--out")->count() ? out : "";
            return cmd_lyapunov(config_path, task, checkpoint, gain, seed, k, warmup, horizon,
                                lyap_out);
        }
        if (sweep->parsed())
            return cmd_sweep(config_path, out, sweep->get_option("--out")->count() > 0, threads);
        if (plot->parsed()) return cmd_plot(curves_csv, lyap_csv, floss_csv, out);
        if (smoke->parsed()) return cmd_smoke(out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
