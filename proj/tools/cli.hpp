#pragma once

// Command-line front end. Kept in a header so the test suite can drive it
// in-process; tools/edgescout.cpp only forwards main().
//
// Exit codes: 0 success, 2 bad arguments, 3 data error, 4 numerical failure.

#include "edgescout/cascade.hpp"
#include "edgescout/classifier.hpp"
#include "edgescout/cutoff.hpp"
#include "edgescout/data.hpp"
#include "edgescout/entropy.hpp"
#include "edgescout/error.hpp"
#include "edgescout/image.hpp"
#include "edgescout/meanfield.hpp"
#include "edgescout/report.hpp"
#include "edgescout/sweep.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace edgescout::cli {

enum ExitCode : int { ok = 0, bad_arguments = 2, data_error = 3, numerical_failure = 4 };

// "a:b:step", inclusive of b up to rounding.
inline std::vector<double> parse_range(const std::string& text) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ArgumentError("bad range '" + text + "', expected start:stop:step");
        }
    }
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0])
        throw ArgumentError("bad range '" + text + "', expected start:stop:step with step > 0 and stop >= start");
    std::vector<double> out;
    const auto n = static_cast<long long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
    for (long long k = 0; k <= n; ++k) out.push_back(std::round((parts[0] + static_cast<double>(k) * parts[2]) * 1e12) / 1e12);
    return out;
}

inline std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const long long v = std::stoll(item, &used);
            if (used != item.size() || v < 0) throw std::invalid_argument(item);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw ArgumentError("bad integer list '" + text + "'");
        }
    }
    return out;
}

struct DataOptions {
    std::string data = "mnist";
    std::string data_dir;
    std::size_t noise_pixels = 784;
};

struct NetworkOptions {
    double sigma_w2 = 1.76;
    double sigma_b2 = 0.05;
    std::size_t depth = 50;
    std::string widths;
};

struct PredictOptions {
    std::string entropy = "relative";
    std::optional<double> eta;
    std::size_t sample_size = 100;
    std::size_t train_samples = 10000;
    std::size_t seeds = 1;
    double lr = 1e-3;
    std::size_t batch_size = 64;
    bool timings = false;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::string out = "out";
    bool verbose = false;
    DataOptions data;
    NetworkOptions net;
    PredictOptions predict;
    std::string w2_range = "0.1:4.0:0.1";
    double slice_b2 = 0.05;
    std::size_t grid_seeds = 3;
    // validation / reconstruction training
    std::size_t epochs = 20;
    std::size_t classifier_train_samples = 0;
    std::size_t test_samples = 0;
    // bench
    std::size_t repeats = 10;
    // meanfield
    double scale = 1.0;
    std::size_t order = kDefaultQuadratureOrder;
    // reconstruct
    std::string indices = "0";
    std::size_t recon_epochs = 0;
    bool archetypes = false;
};

inline EntropyKind parse_entropy(const std::string& s) {
    if (s == "relative") return EntropyKind::relative;
    if (s == "differential") return EntropyKind::differential;
    throw ArgumentError("unknown entropy kind '" + s + "'");
}

inline DatasetSplits load_data(const DataOptions& d, std::size_t train_needed, std::size_t test_needed,
                               std::uint64_t seed) {
    if (d.data == "noise") {
        DatasetSplits s;
        s.train = white_noise(std::max<std::size_t>(train_needed, 1), d.noise_pixels, derive_seed(seed, 0x401e1ULL));
        s.test = white_noise(std::max<std::size_t>(test_needed, 2), d.noise_pixels, derive_seed(seed, 0x401e2ULL));
        return s;
    }
    const auto dir = resolve_data_dir(d.data_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(d.data_dir));
    if (d.data == "mnist") return load_mnist(dir);
    if (d.data == "cifar10") return load_cifar10_dir(dir);
    throw ArgumentError("unknown dataset '" + d.data + "'");
}

inline SweepSpec base_spec(const RunConfig& c) {
    SweepSpec s;
    s.depth = c.net.depth;
    if (!c.net.widths.empty()) s.hidden_widths = parse_sizes(c.net.widths);
    s.entropy = parse_entropy(c.predict.entropy);
    s.eta = c.predict.eta;
    s.train_samples = c.predict.train_samples;
    s.eval_samples = c.predict.sample_size;
    s.seeds = c.predict.seeds;
    s.base_seed = c.seed;
    s.decoder.learning_rate = c.predict.lr;
    s.decoder.batch_size = c.predict.batch_size;
    s.workers = c.workers;
    return s;
}

inline std::string verdict(double mean_cutoff, std::size_t depth) {
    if (mean_cutoff >= static_cast<double>(depth)) return "TRAINABLE";
    std::ostringstream os;
    os << "UNTRAINABLE (cutoff=" << format_double(mean_cutoff) << ")";
    return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw DataError(DataErrorKind::io, "cannot write " + path.string());
}

inline void log(const RunConfig& c, const std::string& msg) {
    if (c.verbose) std::cerr << msg << '\n';
}

// ---------------------------------------------------------------------------

inline int cmd_predict(const RunConfig& c, std::ostream& out) {
    SweepSpec spec = base_spec(c);
    spec.sigma_w_sq = {c.net.sigma_w2};
    spec.sigma_b_sq = {c.net.sigma_b2};
    spec.validate();
    const DatasetSplits data = load_data(c.data, spec.train_samples, spec.eval_samples, c.seed);
    log(c, "training " + std::to_string(spec.depth) + " decoders per seed");
    const PhaseGrid grid = run_sweep(spec, data);
    const CellRecord& cell = grid.cells.front();
    if (cell.failed()) throw NumericalError(cell.seeds.front().error);
    const std::filesystem::path dir = c.out;
    export_csv(grid, dir / "curve.csv", c.predict.timings);
    const std::string v = verdict(cell.mean_cutoff, spec.depth);
    std::ostringstream summary;
    summary << "sigma_w_sq=" << format_double(cell.sigma_w_sq) << "\nsigma_b_sq=" << format_double(cell.sigma_b_sq)
            << "\ndepth=" << spec.depth << "\nentropy=" << to_string(spec.entropy)
            << "\neta=" << format_double(spec.effective_eta()) << "\ncutoff=" << format_double(cell.mean_cutoff)
            << "\nverdict=" << v << '\n';
    write_text(dir / "cutoff.txt", summary.str());
    out << v << '\n';
    return ok;
}

inline SweepSpec grid_spec(const RunConfig& c) {
    SweepSpec spec = base_spec(c);
    spec.sigma_w_sq = parse_range(c.w2_range);
    spec.sigma_b_sq = {c.slice_b2};
    spec.seeds = c.grid_seeds;
    return spec;
}

inline int cmd_sweep(const RunConfig& c, std::ostream& out) {
    const SweepSpec spec = grid_spec(c);
    spec.validate();
    const DatasetSplits data = load_data(c.data, spec.train_samples, spec.eval_samples, c.seed);
    log(c, "sweeping " + std::to_string(spec.sigma_w_sq.size()) + " cells x " + std::to_string(spec.seeds) + " seeds");
    const PhaseGrid grid = run_sweep(spec, data);
    const std::filesystem::path dir = c.out;
    export_csv(grid, dir / "sweep.csv", c.predict.timings);
    export_heatmaps(grid, dir / "cutoff.pgm", dir / "entropy.pgm");
    std::size_t failed = 0;
    for (const auto& cell : grid.cells) {
        out << format_double(cell.sigma_w_sq) << ' ' << format_double(cell.sigma_b_sq) << ' ';
        if (cell.failed()) {
            ++failed;
            out << "FAILED " << cell.seeds.front().error << '\n';
        } else {
            out << verdict(cell.mean_cutoff, spec.depth) << '\n';
        }
    }
    return failed == grid.cells.size() ? numerical_failure : ok;
}

inline int cmd_validate(const RunConfig& c, std::ostream& out) {
    SweepSpec spec = grid_spec(c);
    spec.validation.enabled = true;
    spec.validation.epochs = c.epochs;
    spec.validation.learning_rate = c.predict.lr;
    spec.validation.batch_size = c.predict.batch_size;
    spec.validation.train_samples = c.classifier_train_samples;
    spec.validation.test_samples = c.test_samples;
    spec.decoder = DecoderOptions{};
    spec.decoder.seed = c.seed;
    spec.validate();
    const DatasetSplits data = load_data(c.data, std::max(spec.train_samples, c.classifier_train_samples),
                                         std::max(spec.eval_samples, c.test_samples), c.seed);
    PhaseGrid grid = run_sweep(spec, data);
    log(c, "training " + std::to_string(grid.cells.size()) + " classifiers");
    run_validation(grid, data);
    export_csv(grid, std::filesystem::path(c.out) / "validate.csv", c.predict.timings);
    for (const auto& cell : grid.cells) {
        out << format_double(cell.sigma_w_sq) << ' ' << format_double(cell.sigma_b_sq) << " cutoff="
            << format_double(cell.mean_cutoff) << " accuracy=";
        if (cell.accuracy)
            out << format_double(*cell.accuracy);
        else
            out << "n/a (" << cell.validation_error << ")";
        out << '\n';
    }
    return ok;
}

inline int cmd_bench(const RunConfig& c, std::ostream& out) {
    BenchmarkSpec b;
    b.depth = c.net.depth;
    b.sigma_w_sq = c.net.sigma_w2;
    b.sigma_b_sq = c.net.sigma_b2;
    b.train_samples = c.predict.train_samples;
    b.eval_samples = c.predict.sample_size;
    b.repeats = c.repeats;
    b.batch_size = c.predict.batch_size;
    b.learning_rate = c.predict.lr;
    b.entropy = parse_entropy(c.predict.entropy);
    b.seed = c.seed;
    const DatasetSplits data = load_data(c.data, b.train_samples, b.eval_samples, c.seed);
    const BenchmarkReport r = run_benchmark(b, data);
    auto cell = [](const TimingStat& t) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(3) << t.mean << " +- " << t.stddev;
        return os.str();
    };
    out << "Single epoch [s] | Prediction [s] | Single reconstruction [s]\n"
        << cell(r.single_epoch) << " | " << cell(r.prediction) << " | " << cell(r.decoder_epoch) << '\n'
        << "prediction / epoch = " << format_double(r.prediction_ratio())
        << "\nreconstruction / epoch = " << format_double(r.decoder_ratio()) << '\n';
    std::ostringstream csv;
    csv << "quantity,mean_s,std_s,repeats\n";
    for (auto [name, t] : {std::pair{"single_epoch", r.single_epoch}, std::pair{"prediction", r.prediction},
                           std::pair{"single_reconstruction", r.decoder_epoch}})
        csv << name << ',' << format_double(t.mean) << ',' << format_double(t.stddev) << ',' << t.repeats << '\n';
    write_text(std::filesystem::path(c.out) / "bench.csv", csv.str());
    return ok;
}

inline int cmd_meanfield(const RunConfig& c, std::ostream& out) {
    const auto axis = parse_range(c.w2_range);
    if (c.order < 2) throw ArgumentError("quadrature order must be at least 2");
    const GaussHermiteRule rule = gauss_hermite(c.order);
    std::vector<MeanFieldPoint> points(axis.size());
    parallel_for(axis.size(), c.workers, [&](std::size_t i) { points[i] = mean_field_point(axis[i], c.slice_b2, rule); });
    export_mean_field_csv(points, std::filesystem::path(c.out) / "meanfield.csv", c.scale);
    try {
        out << "critical sigma_w^2 = " << format_double(critical_sigma_w_sq(c.slice_b2, 0.1, 10.0, c.order)) << '\n';
    } catch (const NumericalError&) {
        out << "critical sigma_w^2 not bracketed in [0.1, 10]\n";
    }
    return ok;
}

inline int cmd_reconstruct(const RunConfig& c, std::ostream& out) {
    const auto indices = parse_sizes(c.indices);
    const SweepSpec spec = base_spec(c);
    const DatasetSplits data =
        load_data(c.data, std::max(spec.train_samples, c.classifier_train_samples), std::max<std::size_t>(2, c.test_samples), c.seed);
    for (auto i : indices)
        if (i >= data.test.size()) throw ArgumentError("input index " + std::to_string(i) + " beyond the test split");
    if (data.train.size() < spec.train_samples) throw ArgumentError("not enough training rows for the decoders");

    const NetworkConfig config = spec.network(c.net.sigma_w2, c.net.sigma_b2, 0, data.train.pixels());
    Mlp dnn = init_random(config);
    if (c.archetypes || c.recon_epochs > 0) {
        if (data.train.classes < 2) throw ArgumentError("classifier training needs labelled data");
        Classifier clf = make_classifier(std::move(dnn), data.train.classes, spec.network_seed(0));
        if (c.recon_epochs > 0) {
            ClassifierOptions opts;
            opts.epochs = c.recon_epochs;
            opts.learning_rate = c.predict.lr;
            opts.batch_size = c.predict.batch_size;
            opts.shuffle_seed = derive_seed(c.seed, 0x20000ULL);
            const Dataset train = c.classifier_train_samples ? data.train.head(c.classifier_train_samples) : data.train;
            const Dataset test = c.test_samples ? data.test.head(c.test_samples) : data.test;
            const auto history = train_classifier(clf, train, test, opts);
            out << "test accuracy " << format_double(history.back()) << '\n';
        }
        // With archetypes the softmax readout is part of the decoded network.
        dnn = c.archetypes ? as_network(clf) : clf.body;
    }
    DecoderOptions dopts;
    dopts.seed = spec.decoder_seed_base(0);
    dopts.learning_rate = 1e-3;
    dopts.batch_size = 64;
    const Matrix train_rows = data.train.images.topRows(static_cast<Eigen::Index>(spec.train_samples));
    const Cascade cascade(train_all_decoders(dnn, train_rows, dopts, c.workers));

    const std::filesystem::path dir = c.out;
    const std::size_t hidden = c.archetypes ? dnn.depth() - 1 : dnn.depth();
    for (auto i : indices) {
        const Matrix x = data.test.images.row(static_cast<Eigen::Index>(i));
        write_image(dir / ("input_" + std::to_string(i) + ".pgm"), x.row(0), data.test.shape);
        const ActivationTrace trace = forward_record(dnn, x);
        for (std::size_t l = 1; l <= hidden; ++l) {
            const Matrix r = cascade.reconstruct(l, trace.at(l));
            std::ostringstream name;
            name << "input_" << i << "_layer_" << std::setw(3) << std::setfill('0') << l << ".pgm";
            write_image(dir / name.str(), r.row(0), data.test.shape);
        }
    }
    std::size_t written = indices.size() * (hidden + 1);
    if (c.archetypes) {
        for (std::size_t k = 0; k < dnn.output_width(); ++k) {
            RowVector onehot = RowVector::Zero(static_cast<Eigen::Index>(dnn.output_width()));
            onehot[static_cast<Eigen::Index>(k)] = 1.0;
            write_image(dir / ("archetype_" + std::to_string(k) + ".pgm"), reconstruct_from_output(cascade, dnn, onehot),
                        data.test.shape);
            ++written;
        }
    }
    out << "wrote " << written << " images to " << dir.string() << '\n';
    return ok;
}

// ---------------------------------------------------------------------------

inline void add_data_options(CLI::App* app, RunConfig& c) {
    app->add_option("--data", c.data.data, "Dataset")->check(CLI::IsMember({"mnist", "cifar10", "noise"}));
    app->add_option("--data-dir", c.data.data_dir,
                    "Dataset directory (default: $EDGESCOUT_DATA_DIR, then ./data)");
    app->add_option("--noise-pixels", c.data.noise_pixels, "Pixels per white-noise input")->check(CLI::PositiveNumber);
}

inline void add_network_options(CLI::App* app, RunConfig& c, bool single_point) {
    if (single_point) {
        app->add_option("--sigma-w2", c.net.sigma_w2, "Weight variance sigma_w^2")->check(CLI::NonNegativeNumber);
        app->add_option("--sigma-b2", c.net.sigma_b2, "Bias variance sigma_b^2")->check(CLI::NonNegativeNumber);
    }
    app->add_option("--depth", c.net.depth, "Number of hidden layers L")->check(CLI::PositiveNumber);
    app->add_option("--widths", c.net.widths, "Comma-separated hidden widths, L entries (default: input width)");
}

inline void add_grid_options(CLI::App* app, RunConfig& c) {
    app->add_option("--w2-range", c.w2_range, "sigma_w^2 axis as start:stop:step");
    app->add_option("--slice-b2", c.slice_b2, "Fixed sigma_b^2 of the slice")->check(CLI::NonNegativeNumber);
}

inline void add_prediction_options(CLI::App* app, RunConfig& c, bool decoder_training, std::size_t& seeds) {
    app->add_option("--entropy", c.predict.entropy, "Entropy measure")->check(CLI::IsMember({"relative", "differential"}));
    app->add_option("--eta", c.predict.eta, "Cutoff threshold (default: 0.005 relative, 0.5 differential)")
        ->check(CLI::PositiveNumber);
    app->add_option("--sample-size", c.predict.sample_size, "Evaluation inputs per entropy curve")->check(CLI::Range(2, 1 << 30));
    app->add_option("--train-samples", c.predict.train_samples, "Training inputs for the decoders")->check(CLI::PositiveNumber);
    app->add_option("--seeds", seeds, "Network instances per cell")->check(CLI::PositiveNumber);
    if (decoder_training) {
        app->add_option("--lr", c.predict.lr, "Decoder Adam learning rate")->check(CLI::PositiveNumber);
        app->add_option("--batch-size", c.predict.batch_size, "Decoder batch size")->check(CLI::PositiveNumber);
    }
    app->add_flag("--timings", c.predict.timings, "Fill the wall_time_s CSV column (output is then run-dependent)");
}

inline void add_classifier_options(CLI::App* app, RunConfig& c, std::size_t& epochs) {
    app->add_option("--epochs", epochs, "Classifier training epochs (SGD)");
    app->add_option("--lr", c.predict.lr, "Classifier SGD learning rate")->check(CLI::PositiveNumber);
    app->add_option("--batch-size", c.predict.batch_size, "Classifier batch size")->check(CLI::PositiveNumber);
    app->add_option("--classifier-train-samples", c.classifier_train_samples,
                    "Training rows for the classifier (0: whole split)");
    app->add_option("--test-samples", c.test_samples, "Test rows for accuracy (0: whole split)");
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    RunConfig c;
    CLI::App app{"Predict trainable regions of deep tanh networks from reconstruction entropy", "edgescout"};
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "INI file, one [section] per subcommand; flags override it (default: none)");
    app.add_option("--seed", c.seed, "Base random seed");
    app.add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", c.out, "Output directory");
    app.add_flag("-v,--verbose", c.verbose, "Progress messages on stderr");
    app.require_subcommand(1);
    app.fallthrough();

    auto* predict = app.add_subcommand("predict", "Cutoff and trainability verdict for one phase point");
    add_data_options(predict, c);
    add_network_options(predict, c, true);
    add_prediction_options(predict, c, true, c.predict.seeds);

    auto* sweep = app.add_subcommand("sweep", "Cutoff sweep over a sigma_w^2 slice; CSV and graymaps");
    add_data_options(sweep, c);
    add_network_options(sweep, c, false);
    add_grid_options(sweep, c);
    add_prediction_options(sweep, c, true, c.grid_seeds);

    auto* validate = app.add_subcommand("validate", "Sweep plus classifier training on every cell");
    add_data_options(validate, c);
    add_network_options(validate, c, false);
    add_grid_options(validate, c);
    add_prediction_options(validate, c, false, c.grid_seeds);
    add_classifier_options(validate, c, c.epochs);

    auto* bench = app.add_subcommand("bench", "Timing of a network epoch, a full prediction and one decoder epoch");
    add_data_options(bench, c);
    add_network_options(bench, c, true);
    bench->add_option("--entropy", c.predict.entropy, "Entropy measure")->check(CLI::IsMember({"relative", "differential"}));
    bench->add_option("--sample-size", c.predict.sample_size, "Evaluation inputs per entropy curve")->check(CLI::Range(2, 1 << 30));
    bench->add_option("--train-samples", c.predict.train_samples, "Training rows for both the network and the decoders")
        ->check(CLI::PositiveNumber);
    bench->add_option("--lr", c.predict.lr, "Learning rate (SGD for the network, Adam for decoders)")->check(CLI::PositiveNumber);
    bench->add_option("--batch-size", c.predict.batch_size, "Batch size")->check(CLI::PositiveNumber);
    bench->add_option("--repeats", c.repeats, "Repetitions per timing")->check(CLI::PositiveNumber);

    auto* meanfield = app.add_subcommand("meanfield", "Infinite-width correlation depth along a sigma_w^2 slice");
    add_grid_options(meanfield, c);
    meanfield->add_option("--scale", c.scale, "Factor applied to xi_c in the CSV");
    meanfield->add_option("--order", c.order, "Gauss-Hermite nodes");

    auto* recon = app.add_subcommand("reconstruct", "Per-layer reconstruction images and class archetypes");
    add_data_options(recon, c);
    add_network_options(recon, c, true);
    add_classifier_options(recon, c, c.recon_epochs);
    recon->add_option("--train-samples", c.predict.train_samples, "Training inputs for the decoders")
        ->check(CLI::PositiveNumber);
    recon->add_option("--indices", c.indices, "Comma-separated test-set indices to reconstruct");
    recon->add_flag("--archetypes", c.archetypes, "Also decode one-hot outputs into class archetypes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        const CLI::App* target = &app;
        for (const auto* sub : app.get_subcommands()) target = sub;
        out << target->help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << e.what() << '\n';
            return ok;
        }
        err << "error: " << e.what() << "\nRun with --help for usage.\n";
        return bad_arguments;
    }

    try {
        if (*predict) return cmd_predict(c, out);
        if (*sweep) return cmd_sweep(c, out);
        if (*validate) return cmd_validate(c, out);
        if (*bench) return cmd_bench(c, out);
        if (*meanfield) return cmd_meanfield(c, out);
        if (*recon) return cmd_reconstruct(c, out);
    } catch (const ArgumentError& e) {
        err << "error: " << e.what() << '\n';
        return bad_arguments;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return data_error;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return numerical_failure;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return data_error;
    }
    return bad_arguments;
}

}  // namespace edgescout::cli
