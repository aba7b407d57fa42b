#pragma once

// Phase-space experiments: cutoff sweeps over (sigma_w^2, sigma_b^2) cells,
// optional validation training, timing benchmarks and the two-stage
// hyperparameter search.

#include "edgescout/cascade.hpp"
#include "edgescout/classifier.hpp"
#include "edgescout/cutoff.hpp"
#include "edgescout/data.hpp"
#include "edgescout/entropy.hpp"
#include "edgescout/error.hpp"
#include "edgescout/nn.hpp"
#include "edgescout/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace edgescout {

struct ValidationSpec {
    bool enabled = false;
    std::size_t epochs = 20;
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    std::size_t train_samples = 0;  // 0 means the whole training split
    std::size_t test_samples = 0;   // 0 means the whole test split
    // Cells to train, as (sigma_w^2, sigma_b^2). Empty means every cell.
    std::vector<std::pair<double, double>> cells;
};

struct SweepSpec {
    std::vector<double> sigma_w_sq{};
    std::vector<double> sigma_b_sq{0.05};
    std::size_t depth = 50;
    std::vector<std::size_t> hidden_widths;  // empty: every layer as wide as the input
    Activation activation = Activation::tanh;
    EntropyKind entropy = EntropyKind::relative;
    std::optional<double> eta;  // defaults per entropy kind
    std::size_t train_samples = 10000;
    std::size_t eval_samples = 100;
    std::size_t seeds = 3;
    std::uint64_t base_seed = 0;
    DecoderOptions decoder;
    std::size_t workers = 1;
    ValidationSpec validation;

    double effective_eta() const { return eta.value_or(default_eta(entropy)); }

    void validate() const {
        if (sigma_w_sq.empty() || sigma_b_sq.empty()) throw ArgumentError("sweep axes must be nonempty");
        if (!std::is_sorted(sigma_w_sq.begin(), sigma_w_sq.end()) ||
            !std::is_sorted(sigma_b_sq.begin(), sigma_b_sq.end()))
            throw ArgumentError("sweep axes must be ascending");
        if (depth == 0) throw ArgumentError("depth must be positive");
        if (!hidden_widths.empty() && hidden_widths.size() != depth)
            throw ArgumentError("expected " + std::to_string(depth) + " hidden widths, got " +
                                std::to_string(hidden_widths.size()));
        if (seeds == 0) throw ArgumentError("seeds per cell must be at least 1");
        if (train_samples == 0) throw ArgumentError("cascade training needs at least one sample");
        if (eval_samples < 2) throw ArgumentError("evaluation needs at least two samples");
        if (!(effective_eta() > 0.0)) throw ArgumentError("eta must be positive");
    }

    NetworkConfig network(double sw, double sb, std::size_t seed_index, std::size_t input_width) const {
        NetworkConfig c;
        c.depth = depth;
        c.widths.push_back(input_width);
        if (hidden_widths.empty())
            c.widths.resize(depth + 1, input_width);
        else
            c.widths.insert(c.widths.end(), hidden_widths.begin(), hidden_widths.end());
        c.sigma_w_sq = sw;
        c.sigma_b_sq = sb;
        c.activation = activation;
        c.seed = network_seed(seed_index);
        return c;
    }

    // The same network draw is used in every cell (common random numbers), so
    // neighbouring cells differ only through the variances.
    std::uint64_t network_seed(std::size_t seed_index) const { return derive_seed(base_seed, seed_index); }
    std::uint64_t decoder_seed_base(std::size_t seed_index) const {
        return derive_seed(base_seed, 0x10000ULL + seed_index);
    }
};

struct SeedRecord {
    std::size_t seed_index = 0;
    std::vector<double> curve;
    std::size_t cutoff = 0;
    std::optional<double> accuracy;
    double wall_time_s = 0.0;
    std::string error;  // empty on success
};

struct CellRecord {
    double sigma_w_sq = 0.0;
    double sigma_b_sq = 0.0;
    std::vector<SeedRecord> seeds;
    double mean_cutoff = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> mean_curve;
    std::optional<double> accuracy;
    std::string validation_error;
    double wall_time_s = 0.0;

    std::size_t successful_seeds() const {
        return static_cast<std::size_t>(
            std::count_if(seeds.begin(), seeds.end(), [](const SeedRecord& s) { return s.error.empty(); }));
    }
    bool failed() const { return successful_seeds() == 0; }
};

struct PhaseGrid {
    SweepSpec spec;
    std::vector<CellRecord> cells;  // sigma_w^2 major, sigma_b^2 minor

    std::size_t rows() const { return spec.sigma_w_sq.size(); }
    std::size_t cols() const { return spec.sigma_b_sq.size(); }
    CellRecord& at(std::size_t w, std::size_t b) { return cells.at(w * cols() + b); }
    const CellRecord& at(std::size_t w, std::size_t b) const { return cells.at(w * cols() + b); }

    const CellRecord* find(double sw, double sb) const {
        for (const auto& c : cells)
            if (std::abs(c.sigma_w_sq - sw) < 1e-12 && std::abs(c.sigma_b_sq - sb) < 1e-12) return &c;
        return nullptr;
    }
};

// Inputs actually consumed by a sweep: cascade training rows and evaluation rows.
struct SweepData {
    Matrix train;
    Matrix eval;
};

inline SweepData sweep_data(const SweepSpec& spec, const DatasetSplits& splits) {
    if (splits.train.size() == 0 || splits.test.size() < 2) throw ArgumentError("dataset is empty");
    if (splits.train.size() < spec.train_samples)
        throw ArgumentError("dataset has " + std::to_string(splits.train.size()) + " training rows, " +
                            std::to_string(spec.train_samples) + " requested");
    if (splits.test.size() < spec.eval_samples)
        throw ArgumentError("dataset has " + std::to_string(splits.test.size()) + " test rows, " +
                            std::to_string(spec.eval_samples) + " requested");
    return {splits.train.images.topRows(static_cast<Eigen::Index>(spec.train_samples)),
            splits.test.images.topRows(static_cast<Eigen::Index>(spec.eval_samples))};
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void summarize_cell(CellRecord& cell) {
    cell.mean_curve.clear();
    cell.mean_cutoff = std::numeric_limits<double>::quiet_NaN();
    cell.wall_time_s = 0.0;
    double cutoff_sum = 0.0;
    std::size_t ok = 0;
    for (const auto& s : cell.seeds) {
        cell.wall_time_s += s.wall_time_s;
        if (!s.error.empty()) continue;
        if (cell.mean_curve.empty()) cell.mean_curve.assign(s.curve.size(), 0.0);
        for (std::size_t k = 0; k < s.curve.size(); ++k) cell.mean_curve[k] += s.curve[k];
        cutoff_sum += static_cast<double>(s.cutoff);
        ++ok;
    }
    if (ok == 0) return;
    for (auto& v : cell.mean_curve) v /= static_cast<double>(ok);
    cell.mean_cutoff = cutoff_sum / static_cast<double>(ok);
}

}  // namespace detail

// One network instance: init, cascade training, entropy curve and cutoff.
// Errors are caught and stored in the record.
inline SeedRecord run_seed(const SweepSpec& spec, double sw, double sb, std::size_t seed_index,
                           const SweepData& data, std::size_t workers) {
    SeedRecord rec;
    rec.seed_index = seed_index;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const Mlp dnn = init_random(spec.network(sw, sb, seed_index, static_cast<std::size_t>(data.train.cols())));
        const std::uint64_t before = dnn.checksum();
        DecoderOptions opts = spec.decoder;
        opts.seed = spec.decoder_seed_base(seed_index);
        const Cascade cascade(train_all_decoders(dnn, data.train, opts, workers));
        const EntropyCurve curve = entropy_curve(spec.entropy, dnn, cascade, data.eval, workers);
        if (dnn.checksum() != before) throw NumericalError("network parameters changed during prediction");
        rec.curve = curve.values;
        rec.cutoff = detect_cutoff(curve, spec.effective_eta()).cutoff;
    } catch (const Error& e) {
        rec.error = e.what();
    }
    rec.wall_time_s = detail::seconds_since(t0);
    return rec;
}

inline CellRecord run_cell(const SweepSpec& spec, double sw, double sb, const SweepData& data,
                           std::size_t workers = 1) {
    CellRecord cell;
    cell.sigma_w_sq = sw;
    cell.sigma_b_sq = sb;
    for (std::size_t s = 0; s < spec.seeds; ++s) cell.seeds.push_back(run_seed(spec, sw, sb, s, data, workers));
    detail::summarize_cell(cell);
    return cell;
}

// The network itself is never trained here. Jobs are (cell, seed) pairs; with
// fewer jobs than workers the spare threads go to decoder training inside
// each job. Results do not depend on the schedule.
inline PhaseGrid run_sweep(const SweepSpec& spec, const DatasetSplits& splits) {
    spec.validate();
    const SweepData data = sweep_data(spec, splits);
    PhaseGrid grid;
    grid.spec = spec;
    for (double sw : spec.sigma_w_sq)
        for (double sb : spec.sigma_b_sq) {
            CellRecord c;
            c.sigma_w_sq = sw;
            c.sigma_b_sq = sb;
            c.seeds.resize(spec.seeds);
            grid.cells.push_back(std::move(c));
        }
    const std::size_t jobs = grid.cells.size() * spec.seeds;
    const std::size_t workers = std::max<std::size_t>(spec.workers, 1);
    const std::size_t outer = std::min(workers, jobs);
    const std::size_t inner = std::max<std::size_t>(1, workers / outer);
    parallel_for(jobs, outer, [&](std::size_t j) {
        CellRecord& cell = grid.cells[j / spec.seeds];
        const std::size_t s = j % spec.seeds;
        cell.seeds[s] = run_seed(spec, cell.sigma_w_sq, cell.sigma_b_sq, s, data, inner);
    });
    for (auto& c : grid.cells) detail::summarize_cell(c);
    return grid;
}

inline bool validation_selected(const ValidationSpec& v, const CellRecord& cell) {
    if (v.cells.empty()) return true;
    return std::any_of(v.cells.begin(), v.cells.end(), [&](const auto& p) {
        return std::abs(p.first - cell.sigma_w_sq) < 1e-12 && std::abs(p.second - cell.sigma_b_sq) < 1e-12;
    });
}

// Trains the seed-0 network of one cell as a classifier and returns the final
// test accuracy (chance level after zero epochs).
inline double validate_cell(const SweepSpec& spec, double sw, double sb, const DatasetSplits& splits) {
    const ValidationSpec& v = spec.validation;
    if (splits.train.classes < 2) throw ArgumentError("validation needs a labelled dataset with at least 2 classes");
    const Dataset train = v.train_samples ? splits.train.head(v.train_samples) : splits.train;
    const Dataset test = v.test_samples ? splits.test.head(v.test_samples) : splits.test;
    Classifier c = make_classifier(init_random(spec.network(sw, sb, 0, train.pixels())), splits.train.classes,
                                   spec.network_seed(0));
    if (v.epochs == 0) return evaluate_accuracy(c, test);
    ClassifierOptions opts;
    opts.epochs = v.epochs;
    opts.learning_rate = v.learning_rate;
    opts.batch_size = v.batch_size;
    opts.shuffle_seed = derive_seed(spec.base_seed, 0x20000ULL);
    return train_classifier(c, train, test, opts).back();
}

// Fills `accuracy` for the cells selected in grid.spec.validation. Divergence
// is recorded per cell.
inline void run_validation(PhaseGrid& grid, const DatasetSplits& splits) {
    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < grid.cells.size(); ++i)
        if (validation_selected(grid.spec.validation, grid.cells[i])) chosen.push_back(i);
    parallel_for(chosen.size(), grid.spec.workers, [&](std::size_t k) {
        CellRecord& cell = grid.cells[chosen[k]];
        try {
            cell.accuracy = validate_cell(grid.spec, cell.sigma_w_sq, cell.sigma_b_sq, splits);
            if (!cell.seeds.empty()) cell.seeds.front().accuracy = cell.accuracy;
        } catch (const NumericalError& e) {
            cell.validation_error = e.what();
        }
    });
}

// ---------------------------------------------------------------------------
// Timing

struct TimingStat {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation, 0 for a single repeat
    std::size_t repeats = 0;
};

inline TimingStat timing_stat(const std::vector<double>& samples) {
    TimingStat t;
    t.repeats = samples.size();
    if (samples.empty()) return t;
    t.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
    if (samples.size() > 1) {
        double ss = 0.0;
        for (double s : samples) ss += (s - t.mean) * (s - t.mean);
        t.stddev = std::sqrt(ss / static_cast<double>(samples.size() - 1));
    }
    return t;
}

struct BenchmarkSpec {
    std::size_t depth = 50;
    double sigma_w_sq = 1.76;
    double sigma_b_sq = 0.05;
    std::size_t train_samples = 10000;  // same rows for the network epoch and the decoders
    std::size_t eval_samples = 100;
    std::size_t repeats = 10;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    EntropyKind entropy = EntropyKind::relative;
    std::uint64_t seed = 0;
};

struct BenchmarkReport {
    TimingStat single_epoch;    // one SGD epoch of the full classifier
    TimingStat prediction;      // init, all decoders, entropy curve and cutoff, serial
    TimingStat decoder_epoch;   // one decoder (the deepest) for one epoch

    double prediction_ratio() const { return prediction.mean / single_epoch.mean; }
    double decoder_ratio() const { return decoder_epoch.mean / single_epoch.mean; }
};

inline BenchmarkReport run_benchmark(const BenchmarkSpec& b, const DatasetSplits& splits) {
    if (b.repeats == 0) throw ArgumentError("repeats must be at least 1");
    if (splits.train.size() < b.train_samples || splits.test.size() < b.eval_samples)
        throw ArgumentError("dataset too small for the benchmark sample sizes");
    const Dataset train = splits.train.head(b.train_samples);
    const Dataset test = splits.test.head(b.eval_samples);
    const NetworkConfig config =
        NetworkConfig::uniform(b.depth, train.pixels(), b.sigma_w_sq, b.sigma_b_sq, b.seed);

    std::vector<double> epoch, predict, decoder;
    for (std::size_t r = 0; r < b.repeats; ++r) {
        Classifier c = make_classifier(init_random(config), std::max<std::size_t>(train.classes, 2), b.seed);
        ClassifierOptions opts;
        opts.epochs = 1;
        opts.learning_rate = b.learning_rate;
        opts.batch_size = b.batch_size;
        opts.shuffle_seed = derive_seed(b.seed, r);
        // Test accuracy is evaluated on the small evaluation slice only.
        auto t0 = std::chrono::steady_clock::now();
        train_classifier(c, train, test, opts);
        epoch.push_back(detail::seconds_since(t0));

        t0 = std::chrono::steady_clock::now();
        const Mlp dnn = init_random(config);
        DecoderOptions dopts;
        dopts.batch_size = b.batch_size;
        dopts.seed = derive_seed(b.seed, 0x10000ULL + r);
        const Cascade cascade(train_all_decoders(dnn, train.images, dopts, 1));
        const EntropyCurve curve = entropy_curve(b.entropy, dnn, cascade, test.images, 1);
        (void)detect_cutoff(curve, default_eta(b.entropy));
        predict.push_back(detail::seconds_since(t0));

        const Matrix below = forward_to(dnn, train.images, b.depth - 1);
        const Matrix above = dnn.layers.back().forward(below);
        t0 = std::chrono::steady_clock::now();
        (void)fit_decoder(b.depth, above, below, dopts);
        decoder.push_back(detail::seconds_since(t0));
    }
    return {timing_stat(epoch), timing_stat(predict), timing_stat(decoder)};
}

// ---------------------------------------------------------------------------
// Two-stage search: a cutoff sweep over sigma_w^2 (no training), then a
// learning-rate scan at one predicted-trainable point. Cost is
// |sigma_w^2 axis| cascade cells plus |learning rates| trainings.

struct HyperparameterScan {
    PhaseGrid prediction;
    std::optional<double> chosen_sigma_w_sq;
    std::vector<std::pair<double, double>> learning_rate_accuracy;
    std::size_t cascade_cells = 0;
    std::size_t trainings = 0;
};

// Among cells whose mean cutoff reaches the depth, the one with the lowest
// mean entropy at the last layer; nullopt if no cell reaches the depth.
inline std::optional<double> pick_trainable(const PhaseGrid& grid) {
    const CellRecord* best = nullptr;
    for (const auto& c : grid.cells) {
        if (c.failed() || c.mean_cutoff < static_cast<double>(grid.spec.depth)) continue;
        if (!best || c.mean_curve.back() < best->mean_curve.back()) best = &c;
    }
    if (!best) return std::nullopt;
    return best->sigma_w_sq;
}

inline HyperparameterScan run_hyperparameter_scan(const SweepSpec& spec, const std::vector<double>& learning_rates,
                                                  const DatasetSplits& splits) {
    HyperparameterScan scan;
    scan.prediction = run_sweep(spec, splits);
    scan.cascade_cells = scan.prediction.cells.size();
    scan.chosen_sigma_w_sq = pick_trainable(scan.prediction);
    if (!scan.chosen_sigma_w_sq) return scan;
    SweepSpec s = spec;
    std::vector<double> acc(learning_rates.size(), std::numeric_limits<double>::quiet_NaN());
    parallel_for(learning_rates.size(), spec.workers, [&](std::size_t i) {
        SweepSpec local = s;
        local.validation.learning_rate = learning_rates[i];
        try {
            acc[i] = validate_cell(local, *scan.chosen_sigma_w_sq, spec.sigma_b_sq.front(), splits);
        } catch (const NumericalError&) {
        }
    });
    for (std::size_t i = 0; i < learning_rates.size(); ++i) scan.learning_rate_accuracy.emplace_back(learning_rates[i], acc[i]);
    scan.trainings = learning_rates.size();
    return scan;
}

}  // namespace edgescout
