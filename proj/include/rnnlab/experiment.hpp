#pragma once

// Experiment harness: single-cell training, learning-rate selection on held
// seeds, and the full figure suite (Lyapunov spectra before/after training,
// optional flossing arm, CSV/JSON/SVG outputs).
//
// Determinism contract: every random stream is derived from
// (master_seed, cell seed, purpose tag), never from execution order, so
// results are independent of the worker count and repeated runs produce
// byte-identical CSV files.

#include <atomic>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "adam.hpp"
#include "bptt.hpp"
#include "checkpoint.hpp"
#include "csv.hpp"
#include "eprop.hpp"
#include "flossing.hpp"
#include "lyapunov.hpp"
#include "rnn.hpp"
#include "stats.hpp"
#include "svg_plot.hpp"
#include "tasks.hpp"

namespace rnnlab {

enum class Rule { bptt, eprop };

inline std::string to_string(Rule r) { return r == Rule::bptt ? "bptt" : "eprop"; }

inline Rule rule_from_string(const std::string& s) {
    if (s == "bptt") return Rule::bptt;
    if (s == "eprop") return Rule::eprop;
    throw std::invalid_argument("unknown rule: " + s);
}

inline constexpr const char* kFlossArm = "floss+eprop";

struct ExperimentConfig {
    std::string name = "experiment";
    std::string out = "out";  // default output directory; CLI --out overrides
    int n = 64;
    double alpha = 0.8;
    TaskConfig task = task_defaults(TaskId::romo);
    std::vector<Rule> rules{Rule::bptt, Rule::eprop};
    TraceMode trace = TraceMode::full_diag;
    std::vector<double> gains{0.2, 1.0, 1.5};
    std::vector<double> floss_gains{};  // gains that additionally run a flossed arm
    std::vector<double> lrs{1e-4, 3e-4, 1e-3, 3e-3};
    std::vector<uint64_t> select_seeds{1001, 1002};  // held seeds for lr selection
    std::vector<uint64_t> seeds{1, 2, 3, 4, 5};      // evaluation seeds
    int iters = 3000;
    double clip_norm = 1.0;
    uint64_t master_seed = 7;
    LyapunovConfig lyap;
    FlossConfig floss;
    int threads = 1;

    ArchConfig arch() const {
        ArchConfig a;
        a.n = n;
        a.alpha = alpha;
        a.n_in = task.n_in();
        a.n_out = task.n_out();
        return a;
    }

    void validate() const {
        task.validate();
        arch().validate();
        require(!rules.empty(), "ExperimentConfig: need at least one rule");
        require(!gains.empty() && !lrs.empty(), "ExperimentConfig: empty gains or lr grid");
        require(!select_seeds.empty() && !seeds.empty(), "ExperimentConfig: empty seed lists");
        require(iters >= 1, "ExperimentConfig: iters must be >= 1");
        for (double g : gains) require(g >= 0.0, "ExperimentConfig: negative gain");
        for (double lr : lrs) require(lr > 0.0, "ExperimentConfig: nonpositive lr");
        if (!floss_gains.empty()) {
            bool has_eprop = false;
            for (Rule r : rules) has_eprop = has_eprop || r == Rule::eprop;
            require(has_eprop, "ExperimentConfig: floss arm needs an eprop arm for lr reuse");
            for (double g : floss_gains) {
                bool found = false;
                for (double h : gains) found = found || h == g;
                require(found, "ExperimentConfig: floss_gains must be a subset of gains");
            }
        }
        require(threads >= 1, "ExperimentConfig: threads must be >= 1");
    }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json rules = nlohmann::json::array();
    for (Rule r : c.rules) rules.push_back(to_string(r));
    return {
        {"name", c.name},
        {"out", c.out},
        {"n", c.n},
        {"alpha", c.alpha},
        {"task", to_json(c.task)},
        {"rules", rules},
        {"trace", to_string(c.trace)},
        {"gains", c.gains},
        {"floss_gains", c.floss_gains},
        {"lrs", c.lrs},
        {"select_seeds", c.select_seeds},
        {"seeds", c.seeds},
        {"iters", c.iters},
        {"clip_norm", c.clip_norm},
        {"master_seed", c.master_seed},
        {"lyapunov", {{"k", c.lyap.k}, {"warmup", c.lyap.warmup}, {"horizon", c.lyap.horizon}}},
        {"floss",
         {{"k", c.floss.k},
          {"pretrain_iters", c.floss.pretrain_iters},
          {"warmup", c.floss.warmup},
          {"horizon", c.floss.horizon},
          {"lr", c.floss.lr}}},
        {"threads", c.threads},
    };
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.name = j.value("name", c.name);
    c.out = j.value("out", c.out);
    c.n = j.value("n", c.n);
    c.alpha = j.value("alpha", c.alpha);
    if (j.contains("task")) c.task = task_config_from_json(j.at("task"));
    if (j.contains("batch")) c.task.batch = j.at("batch").get<int>();
    if (j.contains("rule")) c.rules = {rule_from_string(j.at("rule").get<std::string>())};
    if (j.contains("rules")) {
        c.rules.clear();
        for (const auto& r : j.at("rules")) c.rules.push_back(rule_from_string(r.get<std::string>()));
    }
    if (j.contains("trace")) c.trace = trace_mode_from_string(j.at("trace").get<std::string>());
    if (j.contains("gains")) c.gains = j.at("gains").get<std::vector<double>>();
    if (j.contains("floss_gains")) c.floss_gains = j.at("floss_gains").get<std::vector<double>>();
    if (j.contains("lrs")) c.lrs = j.at("lrs").get<std::vector<double>>();
    if (j.contains("select_seeds"))
        c.select_seeds = j.at("select_seeds").get<std::vector<uint64_t>>();
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    c.iters = j.value("iters", c.iters);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.master_seed = j.value("master_seed", c.master_seed);
    if (j.contains("lyapunov")) {
        const auto& l = j.at("lyapunov");
        c.lyap.k = l.value("k", c.lyap.k);
        c.lyap.warmup = l.value("warmup", c.lyap.warmup);
        c.lyap.horizon = l.value("horizon", c.lyap.horizon);
    }
    if (j.contains("floss")) {
        const auto& f = j.at("floss");
        c.floss.k = f.value("k", c.floss.k);
        c.floss.pretrain_iters = f.value("pretrain_iters", c.floss.pretrain_iters);
        c.floss.warmup = f.value("warmup", c.floss.warmup);
        c.floss.horizon = f.value("horizon", c.floss.horizon);
        c.floss.lr = f.value("lr", c.floss.lr);
    }
    c.threads = j.value("threads", c.threads);
    c.validate();
    return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    nlohmann::json j;
    in >> j;
    return experiment_config_from_json(j);
}

// FNV-1a over the canonical (key-sorted) JSON dump.
inline std::string config_digest(const nlohmann::json& j) {
    const std::string s = j.dump();
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    for (int i = 15; i >= 0; --i) {
        buf[i] = "0123456789abcdef"[h & 0xf];
        h >>= 4;
    }
    buf[16] = '\0';
    return std::string(buf);
}

// --- per-cell random streams -----------------------------------------------

// All derived from (master, seed): same seed gives the same initial weights
// and trial stream across rules and gains, so arm comparisons are paired.
struct CellRngs {
    RngStream init;
    RngStream data;
    RngStream lyap;
    RngStream floss;
};

inline CellRngs cell_rngs(uint64_t master, uint64_t seed) {
    const uint64_t base = derive_seed(master, seed);
    return CellRngs{RngStream(derive_seed(base, 1)), RngStream(derive_seed(base, 2)),
                    RngStream(derive_seed(base, 3)), RngStream(derive_seed(base, 4))};
}

// --- single training cell ---------------------------------------------------

struct TrainOptions {
    Rule rule = Rule::eprop;
    TraceMode trace = TraceMode::full_diag;
    int iters = 3000;
    double lr = 1e-3;
    double clip_norm = 1.0;
};

struct TrainResult {
    std::vector<double> losses;  // pre-update loss per iteration
    RnnParams params;            // parameters after the last applied update
    bool failed = false;         // divergence or non-finite loss/gradients
    int failed_iter = -1;
};

inline TrainResult train_cell(RnnParams p, const TaskConfig& task, const TrainOptions& opt,
                              RngStream data_rng) {
    TrainResult res;
    res.losses.reserve(opt.iters);
    AdamState st(p);
    AdamConfig acfg;
    acfg.lr = opt.lr;
    for (int it = 0; it < opt.iters; ++it) {
        TrialBatch batch = gen_trials(task, data_rng);
        GradientResult g = opt.rule == Rule::bptt ? bptt_gradients(p, batch)
                                                  : eprop_gradients(p, batch, opt.trace);
        res.losses.push_back(g.loss);
        if (g.diverged || !std::isfinite(g.loss) || !g.grads.finite()) {
            res.failed = true;
            res.failed_iter = it;
            break;
        }
        clip_by_global_norm(g.grads, opt.clip_norm);
        adam_update(p, g.grads, st, acfg);
    }
    res.params = std::move(p);
    return res;
}

// Mean loss over the final 10% of the schedule (at least one iteration).
// Infinity if the run failed or never reached the window.
inline double final_window_mean(const std::vector<double>& losses, int iters, bool failed) {
    const int window = std::max(1, iters / 10);
    const int start = iters - window;
    if (failed || static_cast<int>(losses.size()) < iters)
        return std::numeric_limits<double>::infinity();
    Vector tail(losses.begin() + start, losses.begin() + iters);
    return mean(tail);
}

// --- Lyapunov measurement on task-driven dynamics ----------------------------

inline LyapunovEstimate measure_lyapunov(const RnnParams& p, const TaskConfig& task,
                                         const LyapunovConfig& lycfg, RngStream rng) {
    Matrix q0 = lyapunov_q0(p.n, lycfg.k, rng);
    TaskInputStream stream(task, RngStream(rng.next_u64()));
    return lyapunov_spectrum(p, stream, lycfg, q0);
}

namespace detail {

// Flossing pretraining with the rng discipline shared by every entry point:
// rollout inputs come from floss.split(1), starting bases from floss.split(2).
inline FlossHistory floss_phase(RnnParams& p, const ExperimentConfig& cfg, const CellRngs& rngs) {
    StreamFactory factory = [task = cfg.task, rng = rngs.floss.split(1)]() mutable {
        return std::unique_ptr<InputStream>(new TaskInputStream(task, RngStream(rng.next_u64())));
    };
    RngStream basis_rng = rngs.floss.split(2);
    return pretrain_floss(p, cfg.floss, factory, basis_rng);
}

}  // namespace detail

// init_params -> optional flossing pretraining -> cfg.iters training steps.
// Deterministic in (cfg, rule, gain, lr, seed) and reproduces figure-suite
// cells exactly because the random streams are derived identically.
inline TrainResult train(const ExperimentConfig& cfg, Rule rule, double gain, double lr,
                         uint64_t seed, bool with_floss = false,
                         FlossHistory* floss_hist = nullptr) {
    CellRngs rngs = cell_rngs(cfg.master_seed, seed);
    RnnParams p = init_params(cfg.arch(), gain, rngs.init);
    if (with_floss) {
        FlossHistory h = detail::floss_phase(p, cfg, rngs);
        if (floss_hist) *floss_hist = std::move(h);
    }
    TrainOptions opt{rule, cfg.trace, cfg.iters, lr, cfg.clip_norm};
    return train_cell(std::move(p), cfg.task, opt, rngs.data);
}

inline TrainResult train(const ExperimentConfig& cfg, double gain, double lr, uint64_t seed) {
    return train(cfg, cfg.rules.front(), gain, lr, seed);
}

// --- learning-rate selection --------------------------------------------------

// Index of the smallest score; exact ties resolve to the earliest entry,
// which is the smaller lr when scores parallel an ascending grid.
inline size_t pick_best(const Vector& scores) {
    require(!scores.empty(), "pick_best: empty scores");
    size_t best = 0;
    for (size_t i = 1; i < scores.size(); ++i)
        if (scores[i] < scores[best]) best = i;
    return best;
}

struct LrSelection {
    double lr = 0.0;
    Vector scores;  // parallel to the (ascending) lr grid
    Vector grid;    // the grid, sorted ascending
};

// Score per lr: mean over selection seeds of the final-window loss. Smallest
// score wins; exact ties go to the smaller lr; if every lr failed on every
// seed this is an error, not a silent pick.
inline LrSelection select_lr(const ExperimentConfig& cfg, Rule rule, double gain) {
    LrSelection sel;
    sel.grid = cfg.lrs;
    std::sort(sel.grid.begin(), sel.grid.end());
    for (double lr : sel.grid) {
        Vector scores;
        for (uint64_t seed : cfg.select_seeds) {
            TrainResult r = train(cfg, rule, gain, lr, seed);
            scores.push_back(final_window_mean(r.losses, cfg.iters, r.failed));
        }
        sel.scores.push_back(mean(scores));
    }
    const size_t best = pick_best(sel.scores);
    if (!std::isfinite(sel.scores[best]))
        throw std::runtime_error("select_lr: every learning rate failed");
    sel.lr = sel.grid[best];
    return sel;
}

// --- figure suite -------------------------------------------------------------

struct CellResult {
    std::string arm;  // "bptt", "eprop", or "floss+eprop"
    double gain = 0.0;
    uint64_t seed = 0;
    double lr = 0.0;
    std::vector<double> losses;
    bool errored = false;       // the cell threw; see SuiteResult::failures
    bool train_failed = false;  // training diverged partway
    double final_loss = std::numeric_limits<double>::infinity();  // final-window mean
    std::optional<LyapunovEstimate> lyap_before;
    std::optional<LyapunovEstimate> lyap_post_floss;
    std::optional<LyapunovEstimate> lyap_after;
    FlossHistory floss;
    RnnParams final_params;
};

struct SuiteResult {
    ExperimentConfig cfg;
    std::map<std::string, std::map<double, LrSelection>> selected;  // rule -> gain -> selection
    std::vector<CellResult> cells;
    std::vector<std::string> failures;  // human-readable, also written to the manifest
    std::string digest;
};

namespace detail {

inline void run_jobs(std::vector<std::function<void()>>& jobs, int threads) {
    if (threads <= 1 || jobs.size() <= 1) {
        for (auto& j : jobs) j();
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    const int count = std::min<int>(threads, static_cast<int>(jobs.size()));
    pool.reserve(count);
    for (int t = 0; t < count; ++t)
        pool.emplace_back([&] {
            while (true) {
                const size_t i = next.fetch_add(1);
                if (i >= jobs.size()) break;
                jobs[i]();
            }
        });
    for (auto& th : pool) th.join();
}

inline std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_')
                   ? c
                   : '_';
    return out;
}

}  // namespace detail

struct ArmSpec {
    std::string name;
    Rule rule = Rule::eprop;
    bool flossed = false;
    std::vector<double> gains;
};

inline std::vector<ArmSpec> suite_arms(const ExperimentConfig& cfg) {
    std::vector<ArmSpec> arms;
    for (Rule r : cfg.rules) arms.push_back({to_string(r), r, false, cfg.gains});
    if (!cfg.floss_gains.empty()) arms.push_back({kFlossArm, Rule::eprop, true, cfg.floss_gains});
    return arms;
}

inline CellResult run_eval_cell(const ExperimentConfig& cfg, const ArmSpec& arm, double gain,
                                uint64_t seed, double lr) {
    CellResult cell;
    cell.arm = arm.name;
    cell.gain = gain;
    cell.seed = seed;
    cell.lr = lr;

    CellRngs rngs = cell_rngs(cfg.master_seed, seed);
    RnnParams p = init_params(cfg.arch(), gain, rngs.init);
    cell.lyap_before = measure_lyapunov(p, cfg.task, cfg.lyap, rngs.lyap.split(1));

    if (arm.flossed) {
        cell.floss = detail::floss_phase(p, cfg, rngs);
        cell.lyap_post_floss = measure_lyapunov(p, cfg.task, cfg.lyap, rngs.lyap.split(2));
    }

    TrainOptions opt{arm.rule, cfg.trace, cfg.iters, lr, cfg.clip_norm};
    TrainResult tr = train_cell(std::move(p), cfg.task, opt, rngs.data);
    cell.losses = std::move(tr.losses);
    cell.train_failed = tr.failed;
    cell.final_loss = final_window_mean(cell.losses, cfg.iters, tr.failed);
    if (!tr.failed)
        cell.lyap_after = measure_lyapunov(tr.params, cfg.task, cfg.lyap, rngs.lyap.split(3));
    cell.final_params = std::move(tr.params);
    return cell;
}

// --- output emission ------------------------------------------------------------

// curves.csv content (header + one row per recorded iteration). Shared by the
// writer and by the aggregate round-trip checks.
inline std::vector<std::vector<std::string>> curve_rows(const std::vector<CellResult>& cells) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"iteration", "rule", "gain", "lr", "seed", "loss"});
    for (const CellResult& c : cells) {
        const std::string gain = format_double(c.gain);
        const std::string lr = format_double(c.lr);
        const std::string seed = std::to_string(c.seed);
        for (size_t it = 0; it < c.losses.size(); ++it)
            rows.push_back(
                {std::to_string(it), c.arm, gain, lr, seed, format_double(c.losses[it])});
    }
    return rows;
}

inline void write_curves_csv(const std::string& path, const std::vector<CellResult>& cells) {
    const auto rows = curve_rows(cells);
    CsvWriter w(path, rows[0]);
    for (size_t i = 1; i < rows.size(); ++i) w.row(rows[i]);
}

inline void write_lyapunov_csv(const std::string& path, const ExperimentConfig& cfg,
                               const std::vector<CellResult>& cells) {
    std::vector<std::string> header{"phase", "gain", "seed", "k"};
    for (int i = 1; i <= cfg.lyap.k; ++i) header.push_back("lambda_" + std::to_string(i));
    for (const char* extra : {"horizon", "rule", "warmup", "rank_collapsed", "diverged"})
        header.push_back(extra);
    CsvWriter w(path, header);
    auto emit = [&](const char* phase, const CellResult& c, const LyapunovEstimate& e) {
        std::vector<std::string> row{phase, format_double(c.gain), std::to_string(c.seed),
                                     std::to_string(cfg.lyap.k)};
        for (double l : e.lambdas) row.push_back(format_double(l));
        row.push_back(std::to_string(cfg.lyap.horizon));
        row.push_back(c.arm);
        row.push_back(std::to_string(cfg.lyap.warmup));
        row.push_back(e.rank_collapsed ? "1" : "0");
        row.push_back(e.diverged ? "1" : "0");
        w.row(row);
    };
    for (const CellResult& c : cells) {
        if (c.lyap_before) emit("before", c, *c.lyap_before);
        if (c.lyap_post_floss) emit("post_floss", c, *c.lyap_post_floss);
        if (c.lyap_after) emit("after", c, *c.lyap_after);
    }
}

inline void write_floss_csv(const std::string& path, const ExperimentConfig& cfg,
                            const std::vector<CellResult>& cells) {
    std::vector<std::string> header{"rule", "gain", "seed", "iteration", "loss", "skipped"};
    for (int i = 1; i <= cfg.floss.k; ++i) header.push_back("lambda_" + std::to_string(i));
    CsvWriter w(path, header);
    for (const CellResult& c : cells) {
        for (size_t it = 0; it < c.floss.iters.size(); ++it) {
            const FlossIteration& f = c.floss.iters[it];
            std::vector<std::string> row{c.arm,
                                         format_double(c.gain),
                                         std::to_string(c.seed),
                                         std::to_string(it),
                                         format_double(f.loss),
                                         f.skipped ? "1" : "0"};
            for (int i = 0; i < cfg.floss.k; ++i)
                row.push_back(i < static_cast<int>(f.lambdas.size())
                                  ? format_double(f.lambdas[i])
                                  : "");
            w.row(row);
        }
    }
}

// --- aggregates and plots (built from CSV rows, shared with `plot`) -----------

struct CurveAggregate {
    std::vector<long> iters;
    Vector mean_loss;
    Vector std_loss;
};

// rule -> gain label -> per-iteration mean and sample std across seeds.
using CurveAggregates = std::map<std::string, std::map<std::string, CurveAggregate>>;

inline CurveAggregates aggregate_curves(const std::vector<std::vector<std::string>>& rows) {
    std::map<std::string, std::map<std::string, std::map<long, Vector>>> acc;
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() < 6) continue;
        acc[r[1]][r[2]][std::stol(r[0])].push_back(parse_double(r[5]));
    }
    CurveAggregates out;
    for (const auto& [rule, by_gain] : acc)
        for (const auto& [gain, by_iter] : by_gain) {
            CurveAggregate& a = out[rule][gain];
            for (const auto& [it, losses] : by_iter) {
                a.iters.push_back(it);
                a.mean_loss.push_back(mean(losses));
                a.std_loss.push_back(losses.size() > 1 ? sample_std(losses) : 0.0);
            }
        }
    return out;
}

inline void plot_curves_csv(const std::string& csv_path, const std::string& out_dir,
                            std::vector<std::string>* written = nullptr) {
    const CurveAggregates agg = aggregate_curves(read_csv(csv_path));
    for (const auto& [rule, by_gain] : agg) {
        std::vector<PlotSeries> series;
        for (const auto& [gain, a] : by_gain) {
            PlotSeries s;
            s.label = "gain " + gain;
            for (size_t i = 0; i < a.iters.size(); ++i) {
                s.x.push_back(static_cast<double>(a.iters[i]));
                s.y.push_back(a.mean_loss[i]);
                s.lo.push_back(a.mean_loss[i] - a.std_loss[i]);
                s.hi.push_back(a.mean_loss[i] + a.std_loss[i]);
            }
            series.push_back(std::move(s));
        }
        PlotOptions opt;
        opt.title = "training loss: " + rule;
        opt.xlabel = "iteration";
        opt.ylabel = "loss";
        const std::string name = "curves_" + detail::sanitize(rule) + ".svg";
        write_svg_plot(out_dir + "/" + name, series, opt);
        if (written) written->push_back(name);
    }
}

inline bool plot_lyapunov_csv(const std::string& csv_path, const std::string& out_path) {
    auto rows = read_csv(csv_path);
    require(!rows.empty(), "plot_lyapunov_csv: empty file");
    // columns: phase,gain,seed,k,lambda_1..k,horizon,rule,warmup,rank_collapsed,diverged
    std::map<std::pair<std::string, std::string>, std::map<double, Vector>> groups;
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() < 5) continue;
        if (r[0] == "post_floss") continue;  // before/after training is the headline view
        const int k = std::stoi(r[3]);
        if (static_cast<int>(r.size()) < 4 + k + 5) continue;
        const std::string& rule = r[4 + k + 1];
        groups[{rule, r[0]}][parse_double(r[1])].push_back(parse_double(r[4]));
    }
    std::vector<PlotSeries> series;
    for (const auto& [key, by_gain] : groups) {
        PlotSeries s;
        s.label = key.first + " " + key.second;
        for (const auto& [gain, lams] : by_gain) {
            Vector finite;
            for (double l : lams)
                if (std::isfinite(l)) finite.push_back(l);
            if (finite.empty()) continue;
            s.x.push_back(gain);
            s.y.push_back(median(finite));
            s.lo.push_back(*std::min_element(finite.begin(), finite.end()));
            s.hi.push_back(*std::max_element(finite.begin(), finite.end()));
        }
        if (!s.x.empty()) series.push_back(std::move(s));
    }
    if (series.empty()) return false;
    PlotOptions opt;
    opt.title = "largest Lyapunov exponent vs gain";
    opt.xlabel = "gain";
    opt.ylabel = "lambda_max (nats/step)";
    write_svg_plot(out_path, series, opt);
    return true;
}

inline bool plot_floss_csv(const std::string& csv_path, const std::string& out_path) {
    auto rows = read_csv(csv_path);
    if (rows.size() <= 1) return false;  // no flossed cells
    std::map<std::string, std::map<long, Vector>> by_gain;
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() < 6 || r[5] == "1") continue;
        by_gain[r[1]][std::stol(r[3])].push_back(parse_double(r[4]));
    }
    std::vector<PlotSeries> series;
    for (const auto& [gain, by_iter] : by_gain) {
        PlotSeries s;
        s.label = "gain " + gain;
        for (const auto& [it, losses] : by_iter) {
            const double m = mean(losses);
            const double sd = losses.size() > 1 ? sample_std(losses) : 0.0;
            s.x.push_back(static_cast<double>(it));
            s.y.push_back(m);
            s.lo.push_back(m - sd);
            s.hi.push_back(m + sd);
        }
        if (!s.x.empty()) series.push_back(std::move(s));
    }
    if (series.empty()) return false;
    PlotOptions opt;
    opt.title = "flossing objective";
    opt.xlabel = "pretraining iteration";
    opt.ylabel = "sum lambda^2";
    write_svg_plot(out_path, series, opt);
    return true;
}

// --- the suite -------------------------------------------------------------------

inline SuiteResult run_figure_suite(const ExperimentConfig& cfg, const std::string& out_dir,
                                    bool verbose = false) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    fs::create_directories(out_dir + "/checkpoints");

    SuiteResult suite;
    suite.cfg = cfg;
    const nlohmann::json cfg_json = to_json(cfg);
    suite.digest = config_digest(cfg_json);
    {
        std::ofstream out(out_dir + "/config.json", std::ios::binary);
        nlohmann::json echo = cfg_json;
        echo["digest"] = suite.digest;
        out << echo.dump(2) << "\n";
    }

    // phase 1: learning-rate selection, one job per (rule, gain)
    struct SelKey {
        std::string rule;
        double gain;
    };
    std::vector<SelKey> sel_keys;
    for (Rule r : cfg.rules)
        for (double g : cfg.gains) sel_keys.push_back({to_string(r), g});
    std::vector<std::optional<LrSelection>> selections(sel_keys.size());
    std::vector<std::string> sel_errors(sel_keys.size());
    {
        std::vector<std::function<void()>> jobs;
        for (size_t i = 0; i < sel_keys.size(); ++i)
            jobs.push_back([&, i] {
                try {
                    selections[i] =
                        select_lr(cfg, rule_from_string(sel_keys[i].rule), sel_keys[i].gain);
                } catch (const std::exception& e) {
                    sel_errors[i] = e.what();
                }
            });
        detail::run_jobs(jobs, cfg.threads);
    }
    for (size_t i = 0; i < sel_keys.size(); ++i) {
        if (!selections[i]) {
            suite.failures.push_back("lr selection failed for " + sel_keys[i].rule + " gain " +
                                     format_double(sel_keys[i].gain) + ": " + sel_errors[i]);
            continue;
        }
        suite.selected[sel_keys[i].rule][sel_keys[i].gain] = *selections[i];
        if (verbose)
            std::fprintf(stderr, "selected lr %g for %s gain %g\n", selections[i]->lr,
                         sel_keys[i].rule.c_str(), sel_keys[i].gain);
    }

    // phase 2: evaluation cells (skipping arms whose lr selection failed)
    const std::vector<ArmSpec> arms = suite_arms(cfg);
    struct EvalKey {
        const ArmSpec* arm;
        double gain;
        uint64_t seed;
        double lr;
    };
    std::vector<EvalKey> keys;
    for (const ArmSpec& arm : arms) {
        const std::string lr_rule = arm.flossed ? to_string(Rule::eprop) : arm.name;
        for (double g : arm.gains) {
            const auto rule_it = suite.selected.find(lr_rule);
            if (rule_it == suite.selected.end() || !rule_it->second.count(g)) {
                suite.failures.push_back("skipped " + arm.name + " gain " + format_double(g) +
                                         ": no selected lr");
                continue;
            }
            for (uint64_t s : cfg.seeds) keys.push_back({&arm, g, s, rule_it->second.at(g).lr});
        }
    }
    suite.cells.resize(keys.size());
    std::vector<std::string> cell_errors(keys.size());
    {
        std::vector<std::function<void()>> jobs;
        for (size_t i = 0; i < keys.size(); ++i)
            jobs.push_back([&, i] {
                try {
                    suite.cells[i] =
                        run_eval_cell(cfg, *keys[i].arm, keys[i].gain, keys[i].seed, keys[i].lr);
                } catch (const std::exception& e) {
                    suite.cells[i].arm = keys[i].arm->name;
                    suite.cells[i].gain = keys[i].gain;
                    suite.cells[i].seed = keys[i].seed;
                    suite.cells[i].lr = keys[i].lr;
                    suite.cells[i].errored = true;
                    cell_errors[i] = e.what();
                }
            });
        detail::run_jobs(jobs, cfg.threads);
    }
    for (size_t i = 0; i < keys.size(); ++i) {
        const CellResult& c = suite.cells[i];
        const std::string label =
            c.arm + " gain " + format_double(c.gain) + " seed " + std::to_string(c.seed);
        if (c.errored)
            suite.failures.push_back(label + ": " + cell_errors[i]);
        else if (c.train_failed)
            suite.failures.push_back(label + ": training diverged at iteration " +
                                     std::to_string(c.losses.size() - 1));
    }

    // outputs
    std::vector<std::string> files{"config.json", "curves.csv", "lyapunov.csv",
                                   "floss_history.csv"};
    write_curves_csv(out_dir + "/curves.csv", suite.cells);
    write_lyapunov_csv(out_dir + "/lyapunov.csv", cfg, suite.cells);
    write_floss_csv(out_dir + "/floss_history.csv", cfg, suite.cells);
    for (const CellResult& c : suite.cells) {
        if (c.errored || c.train_failed || !all_finite(c.final_params.w_h)) continue;
        const std::string name = detail::sanitize(c.arm) + "_gain" + format_double(c.gain) +
                                 "_seed" + std::to_string(c.seed) + ".ckpt";
        save_checkpoint(out_dir + "/checkpoints/" + name, c.final_params, c.seed, c.gain);
        files.push_back("checkpoints/" + name);
    }
    plot_curves_csv(out_dir + "/curves.csv", out_dir, &files);
    if (plot_lyapunov_csv(out_dir + "/lyapunov.csv", out_dir + "/lyapunov.svg"))
        files.push_back("lyapunov.svg");
    if (plot_floss_csv(out_dir + "/floss_history.csv", out_dir + "/flossing.svg"))
        files.push_back("flossing.svg");

    nlohmann::json selected = nlohmann::json::object();
    for (const auto& [rule, by_gain] : suite.selected)
        for (const auto& [gain, sel] : by_gain)
            selected[rule + "@" + format_double(gain)] = sel.lr;
    nlohmann::json manifest = {
        {"name", cfg.name},
        {"digest", suite.digest},
        {"cells", suite.cells.size()},
        {"selected_lr", selected},
        {"failures", suite.failures},
        {"files", files},
    };
    std::ofstream mout(out_dir + "/manifest.json", std::ios::binary);
    mout << manifest.dump(2) << "\n";
    return suite;
}

// --- small end-to-end pipeline check ----------------------------------------------

// Tiny suite covering both rules plus the flossed arm on one task.
inline ExperimentConfig smoke_config(TaskId task = TaskId::romo) {
    ExperimentConfig cfg;
    cfg.name = "smoke_" + to_string(task);
    cfg.n = 8;
    cfg.task = task_defaults(task);
    cfg.task.batch = 4;
    cfg.rules = {Rule::bptt, Rule::eprop};
    cfg.trace = TraceMode::one_step;
    cfg.gains = {1.0};
    cfg.floss_gains = {1.0};
    cfg.lrs = {1e-3};
    cfg.select_seeds = {1001};
    cfg.seeds = {1};
    cfg.iters = 10;
    cfg.lyap.warmup = 20;
    cfg.lyap.horizon = 100;
    cfg.floss.pretrain_iters = 2;
    cfg.floss.warmup = 20;
    cfg.floss.horizon = 100;
    return cfg;
}

// Runs a miniature figure suite per task (both rules and the flossed arm) and
// verifies the outputs exist, parse, and have the advertised row counts.
// Returns true on success; reports the first problem otherwise.
inline bool run_smoke(const std::string& out_dir, std::string* error = nullptr) {
    try {
        for (TaskId task : {TaskId::romo, TaskId::twoaf, TaskId::dms}) {
            const ExperimentConfig cfg = smoke_config(task);
            const std::string dir = out_dir + "/" + to_string(task);
            SuiteResult suite = run_figure_suite(cfg, dir);
            require(suite.failures.empty(), "smoke: suite reported failures");
            require(suite.cells.size() == 3, "smoke: unexpected cell count");
            for (const char* f :
                 {"config.json", "curves.csv", "lyapunov.csv", "floss_history.csv",
                  "manifest.json", "lyapunov.svg", "flossing.svg", "curves_bptt.svg",
                  "curves_eprop.svg", "curves_floss_eprop.svg"}) {
                if (!std::filesystem::exists(std::filesystem::path(dir) / f))
                    throw std::runtime_error(std::string("smoke: missing output ") + f);
            }
            const auto curves = read_csv(dir + "/curves.csv");
            require(curves[0].size() == 6, "smoke: bad curves.csv header");
            require(static_cast<int>(curves.size()) - 1 ==
                        static_cast<int>(suite.cells.size()) * cfg.iters,
                    "smoke: curves.csv row count mismatch");
            const auto lyap = read_csv(dir + "/lyapunov.csv");
            require(static_cast<int>(lyap.size()) - 1 == 7, "smoke: lyapunov.csv row count");
            for (const CellResult& c : suite.cells)
                require(std::isfinite(c.final_loss), "smoke: non-finite final loss");
        }
        return true;
    } catch (const std::exception& e) {
        if (error) *error = e.what();
        return false;
    }
}

}  // namespace rnnlab
