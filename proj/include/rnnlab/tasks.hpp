#pragma once

// Native trial generators for the three cognitive tasks: Romo (compare two
// sequential scalar stimuli), 2AF (noisy two-channel evidence decision),
// and DMS (delayed match-to-sample).
//
// Trials are laid out over five epochs (fixation, stim1, delay, stim2,
// decision) whose durations partition [0, T). The loss mask is 1 exactly
// on decision-epoch steps. Targets are +-1 (Romo) or one-hot (2AF, DMS).
// Inputs carry i.i.d. Gaussian noise of configurable std on every entry.
//
// Generators are pure in (config, rng seed). Per trial the draw order is
// fixed: trial parameters first, then noise step-by-step, channel-by-
// channel, so batches are reproducible bit-for-bit.

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "io.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace rnnlab {

enum class TaskId { romo, twoaf, dms };

inline std::string to_string(TaskId t) {
    switch (t) {
        case TaskId::romo: return "romo";
        case TaskId::twoaf: return "2af";
        case TaskId::dms: return "dms";
    }
    return "?";
}

inline TaskId task_id_from_string(const std::string& s) {
    if (s == "romo") return TaskId::romo;
    if (s == "2af" || s == "twoaf") return TaskId::twoaf;
    if (s == "dms") return TaskId::dms;
    throw std::invalid_argument("unknown task id: " + s);
}

struct EpochSpec {
    int fixation = 0;
    int stim1 = 0;
    int delay = 0;
    int stim2 = 0;
    int decision = 0;

    int total() const { return fixation + stim1 + delay + stim2 + decision; }
    int decision_start() const { return fixation + stim1 + delay + stim2; }
    bool in_stim1(int t) const { return t >= fixation && t < fixation + stim1; }
    bool in_stim2(int t) const {
        return t >= fixation + stim1 + delay && t < fixation + stim1 + delay + stim2;
    }
    bool in_decision(int t) const { return t >= decision_start(); }
};

struct TaskConfig {
    TaskId task = TaskId::romo;
    EpochSpec epochs{5, 10, 10, 10, 10};
    double stim_min = 0.5;   // Romo stimulus amplitude range
    double stim_max = 1.5;
    double min_gap = 0.1;    // Romo: minimum |f1 - f2|
    std::vector<double> coherences{0.05, 0.1, 0.2, 0.4};  // 2AF evidence strengths
    double stim_amp = 1.0;   // 2AF baseline / DMS symbol amplitude
    double noise_std = 0.05;
    int batch = 32;
    bool fixation_channel = false;  // 2AF: optional extra input channel

    int t_steps() const { return epochs.total(); }

    int n_in() const {
        switch (task) {
            case TaskId::romo: return 1;
            case TaskId::twoaf: return fixation_channel ? 3 : 2;
            case TaskId::dms: return 2;
        }
        return 0;
    }

    int n_out() const { return task == TaskId::romo ? 1 : 2; }

    void validate() const {
        require(batch >= 1, "TaskConfig: batch must be >= 1");
        require(noise_std >= 0.0, "TaskConfig: noise_std must be >= 0");
        require(epochs.fixation >= 0 && epochs.stim1 >= 0 && epochs.delay >= 0 &&
                    epochs.stim2 >= 0 && epochs.decision >= 1,
                "TaskConfig: epochs must be nonnegative with a nonempty decision epoch");
        require(stim_amp >= 0.0, "TaskConfig: stim_amp must be >= 0");
        if (task == TaskId::romo) {
            require(stim_max >= stim_min && stim_min >= 0.0, "TaskConfig: bad stimulus range");
            require(min_gap >= 0.0 && (min_gap == 0.0 || stim_max - stim_min > min_gap),
                    "TaskConfig: min_gap must leave room in the stimulus range");
        }
        if (task == TaskId::twoaf) {
            require(!coherences.empty(), "TaskConfig: 2af needs at least one coherence");
            for (double c : coherences) require(c >= 0.0 && c <= 1.0, "TaskConfig: coherence in [0,1]");
        }
    }
};

struct TrialBatch {
    int batch = 0;
    int t_steps = 0;
    int n_in = 0;
    int n_out = 0;
    std::vector<Matrix> inputs;   // T matrices, n_in x B
    std::vector<Matrix> targets;  // T matrices, n_out x B
    std::vector<Matrix> mask;     // T matrices, n_out x B, entries 0/1
    std::vector<std::map<std::string, double>> meta;  // per-trial labels
};

namespace detail {

inline TrialBatch empty_batch(const TaskConfig& cfg) {
    TrialBatch b;
    b.batch = cfg.batch;
    b.t_steps = cfg.t_steps();
    b.n_in = cfg.n_in();
    b.n_out = cfg.n_out();
    b.inputs.assign(b.t_steps, Matrix(b.n_in, b.batch));
    b.targets.assign(b.t_steps, Matrix(b.n_out, b.batch));
    b.mask.assign(b.t_steps, Matrix(b.n_out, b.batch));
    return b;
}

inline void add_input_noise(TrialBatch& b, int trial, double std, RngStream& rng) {
    if (std == 0.0) return;
    for (int t = 0; t < b.t_steps; ++t)
        for (int c = 0; c < b.n_in; ++c) b.inputs[t](c, trial) += std * rng.gaussian();
}

}  // namespace detail

inline TrialBatch gen_romo(const TaskConfig& cfg, RngStream& rng) {
    cfg.validate();
    require(cfg.task == TaskId::romo, "gen_romo: config is not a romo config");
    TrialBatch b = detail::empty_batch(cfg);
    for (int k = 0; k < cfg.batch; ++k) {
        double f1, f2;
        do {
            f1 = rng.uniform(cfg.stim_min, cfg.stim_max);
            f2 = rng.uniform(cfg.stim_min, cfg.stim_max);
        } while (std::abs(f1 - f2) < cfg.min_gap || f1 == f2);
        const double target = f1 > f2 ? 1.0 : -1.0;
        for (int t = 0; t < b.t_steps; ++t) {
            if (cfg.epochs.in_stim1(t)) b.inputs[t](0, k) = f1;
            if (cfg.epochs.in_stim2(t)) b.inputs[t](0, k) = f2;
            if (cfg.epochs.in_decision(t)) {
                b.targets[t](0, k) = target;
                b.mask[t](0, k) = 1.0;
            }
        }
        detail::add_input_noise(b, k, cfg.noise_std, rng);
        b.meta.push_back({{"f1", f1}, {"f2", f2}, {"target", target}});
    }
    return b;
}

inline TrialBatch gen_2af(const TaskConfig& cfg, RngStream& rng) {
    cfg.validate();
    require(cfg.task == TaskId::twoaf, "gen_2af: config is not a 2af config");
    TrialBatch b = detail::empty_batch(cfg);
    for (int k = 0; k < cfg.batch; ++k) {
        const int correct = rng.uniform_int(2);
        const double coh = cfg.coherences[rng.uniform_int(static_cast<int>(cfg.coherences.size()))];
        const double hi = 0.5 * (1.0 + coh) * cfg.stim_amp;
        const double lo = 0.5 * (1.0 - coh) * cfg.stim_amp;
        for (int t = 0; t < b.t_steps; ++t) {
            if (cfg.epochs.in_stim1(t)) {
                b.inputs[t](correct, k) = hi;
                b.inputs[t](1 - correct, k) = lo;
            }
            if (cfg.fixation_channel && !cfg.epochs.in_decision(t)) b.inputs[t](2, k) = 1.0;
            if (cfg.epochs.in_decision(t)) {
                b.targets[t](correct, k) = 1.0;
                b.mask[t](0, k) = 1.0;
                b.mask[t](1, k) = 1.0;
            }
        }
        detail::add_input_noise(b, k, cfg.noise_std, rng);
        b.meta.push_back({{"correct", static_cast<double>(correct)}, {"coherence", coh}});
    }
    return b;
}

inline TrialBatch gen_dms(const TaskConfig& cfg, RngStream& rng) {
    cfg.validate();
    require(cfg.task == TaskId::dms, "gen_dms: config is not a dms config");
    TrialBatch b = detail::empty_batch(cfg);
    for (int k = 0; k < cfg.batch; ++k) {
        const int sample = rng.uniform_int(2);
        const int test = rng.uniform_int(2);
        const int match = sample == test ? 1 : 0;  // output 0 = "match", 1 = "non-match"
        for (int t = 0; t < b.t_steps; ++t) {
            if (cfg.epochs.in_stim1(t)) b.inputs[t](sample, k) = cfg.stim_amp;
            if (cfg.epochs.in_stim2(t)) b.inputs[t](test, k) = cfg.stim_amp;
            if (cfg.epochs.in_decision(t)) {
                b.targets[t](match ? 0 : 1, k) = 1.0;
                b.mask[t](0, k) = 1.0;
                b.mask[t](1, k) = 1.0;
            }
        }
        detail::add_input_noise(b, k, cfg.noise_std, rng);
        b.meta.push_back({{"sample", static_cast<double>(sample)},
                          {"test", static_cast<double>(test)},
                          {"match", static_cast<double>(match)}});
    }
    return b;
}

inline TrialBatch gen_trials(const TaskConfig& cfg, RngStream& rng) {
    switch (cfg.task) {
        case TaskId::romo: return gen_romo(cfg, rng);
        case TaskId::twoaf: return gen_2af(cfg, rng);
        case TaskId::dms: return gen_dms(cfg, rng);
    }
    throw std::invalid_argument("gen_trials: bad task id");
}

// --- JSON (de)serialization, shared by the defaults file and experiment configs ---

inline nlohmann::json to_json(const TaskConfig& c) {
    return {
        {"task", to_string(c.task)},
        {"epochs",
         {{"fixation", c.epochs.fixation},
          {"stim1", c.epochs.stim1},
          {"delay", c.epochs.delay},
          {"stim2", c.epochs.stim2},
          {"decision", c.epochs.decision}}},
        {"stim_min", c.stim_min},
        {"stim_max", c.stim_max},
        {"min_gap", c.min_gap},
        {"coherences", c.coherences},
        {"stim_amp", c.stim_amp},
        {"noise_std", c.noise_std},
        {"batch", c.batch},
        {"fixation_channel", c.fixation_channel},
    };
}

inline TaskConfig task_config_from_json(const nlohmann::json& j) {
    TaskConfig c;
    c.task = task_id_from_string(j.at("task").get<std::string>());
    if (j.contains("epochs")) {
        const auto& e = j.at("epochs");
        c.epochs.fixation = e.value("fixation", c.epochs.fixation);
        c.epochs.stim1 = e.value("stim1", c.epochs.stim1);
        c.epochs.delay = e.value("delay", c.epochs.delay);
        c.epochs.stim2 = e.value("stim2", c.epochs.stim2);
        c.epochs.decision = e.value("decision", c.epochs.decision);
    }
    c.stim_min = j.value("stim_min", c.stim_min);
    c.stim_max = j.value("stim_max", c.stim_max);
    c.min_gap = j.value("min_gap", c.min_gap);
    if (j.contains("coherences")) c.coherences = j.at("coherences").get<std::vector<double>>();
    c.stim_amp = j.value("stim_amp", c.stim_amp);
    c.noise_std = j.value("noise_std", c.noise_std);
    c.batch = j.value("batch", c.batch);
    c.fixation_channel = j.value("fixation_channel", c.fixation_channel);
    c.validate();
    return c;
}

// Pinned per-task defaults; configs/task_defaults.json carries the same
// values for versioning and external override.
inline TaskConfig task_defaults(TaskId task) {
    TaskConfig c;
    c.task = task;
    switch (task) {
        case TaskId::romo:
            c.epochs = {5, 10, 10, 10, 10};
            break;
        case TaskId::twoaf:
            // delayed-response variant: evidence must be carried across a
            // stimulus-free gap before the decision epoch, so the task probes
            // memory and not just instantaneous readout
            c.epochs = {5, 20, 10, 0, 10};
            // noisy-evidence regime: per-step noise comparable to the mean
            // channel split, plus zero-coherence (chance) trials, so low
            // coherences reward integrating most of the stimulus window
            c.coherences = {0.0, 0.064, 0.128, 0.256, 0.512};
            c.noise_std = 0.1;
            break;
        case TaskId::dms:
            c.epochs = {5, 10, 10, 10, 10};
            break;
    }
    return c;
}

// --- binary export for cross-implementation diffing ---

inline void save_trial_batch(const std::string& path, const TrialBatch& b) {
    // blocks are trial-major: row index is trial*T + t
    Matrix inputs(b.batch * b.t_steps, b.n_in);
    Matrix targets(b.batch * b.t_steps, b.n_out);
    Matrix mask(b.batch * b.t_steps, b.n_out);
    for (int k = 0; k < b.batch; ++k)
        for (int t = 0; t < b.t_steps; ++t) {
            for (int c = 0; c < b.n_in; ++c) inputs(k * b.t_steps + t, c) = b.inputs[t](c, k);
            for (int c = 0; c < b.n_out; ++c) {
                targets(k * b.t_steps + t, c) = b.targets[t](c, k);
                mask(k * b.t_steps + t, c) = b.mask[t](c, k);
            }
        }
    nlohmann::json meta = nlohmann::json::array();
    for (const auto& m : b.meta) meta.push_back(m);
    nlohmann::json header = {{"type", "trial_batch"}, {"batch", b.batch},   {"t_steps", b.t_steps},
                             {"n_in", b.n_in},        {"n_out", b.n_out},   {"meta", meta}};
    write_block_file(path, header, {{"inputs", &inputs}, {"targets", &targets}, {"mask", &mask}});
}

inline TrialBatch load_trial_batch(const std::string& path) {
    BlockFile f = read_block_file(path);
    if (f.header.value("type", "") != "trial_batch")
        throw std::runtime_error("not a trial batch file: " + path);
    TrialBatch b;
    b.batch = f.header.at("batch").get<int>();
    b.t_steps = f.header.at("t_steps").get<int>();
    b.n_in = f.header.at("n_in").get<int>();
    b.n_out = f.header.at("n_out").get<int>();
    b.inputs.assign(b.t_steps, Matrix(b.n_in, b.batch));
    b.targets.assign(b.t_steps, Matrix(b.n_out, b.batch));
    b.mask.assign(b.t_steps, Matrix(b.n_out, b.batch));
    const Matrix& inputs = f.block("inputs");
    const Matrix& targets = f.block("targets");
    const Matrix& mask = f.block("mask");
    for (int k = 0; k < b.batch; ++k)
        for (int t = 0; t < b.t_steps; ++t) {
            for (int c = 0; c < b.n_in; ++c) b.inputs[t](c, k) = inputs(k * b.t_steps + t, c);
            for (int c = 0; c < b.n_out; ++c) {
                b.targets[t](c, k) = targets(k * b.t_steps + t, c);
                b.mask[t](c, k) = mask(k * b.t_steps + t, c);
            }
        }
    for (const auto& m : f.header.at("meta"))
        b.meta.push_back(m.get<std::map<std::string, double>>());
    return b;
}

}  // namespace rnnlab
