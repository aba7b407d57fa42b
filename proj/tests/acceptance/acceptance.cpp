// Acceptance run. Prints one "PASS n: ..." or "FAIL n: ..." line per
// criterion, preceded by indented detail lines. Exit status is nonzero when
// any selected criterion fails.
//
//   acceptance                 all criteria
//   acceptance --criterion 4   one criterion
//
// MNIST is read from $EDGESCOUT_DATA_DIR (falling back to ./data).

#include "edgescout/cascade.hpp"
#include "edgescout/classifier.hpp"
#include "edgescout/cutoff.hpp"
#include "edgescout/data.hpp"
#include "edgescout/entropy.hpp"
#include "edgescout/meanfield.hpp"
#include "edgescout/report.hpp"
#include "edgescout/sweep.hpp"

#include "../support/oracles.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace edgescout;

namespace {

// Tolerances and sizes. Fixed here; never adjusted per run.
constexpr double kHelloTarget = 0.0462;
constexpr double kHelloTolerance = 0.0005;

constexpr std::size_t kDepth = 50;
constexpr double kBiasVariance = 0.05;
constexpr std::size_t kSeeds = 3;
constexpr std::size_t kCascadeTrainRows = 10000;
constexpr std::size_t kEvalRows = 100;
constexpr std::uint64_t kBaseSeed = 2024;
const std::vector<double> kCriticalColumns{1.5, 1.76, 2.1};
constexpr double kOrderedColumn = 0.5;
constexpr double kOrderedMaxCutoff = 10.0;
constexpr double kChaoticColumn = 3.5;

constexpr double kDeOrdered = 0.2, kDeCritical = 1.76, kDeChaotic = 3.5;
constexpr double kDeOrderedTarget = -18.0, kDeChaoticTarget = -13.0, kDeBand = 4.0;

constexpr std::size_t kValidationDepth = 20;
const std::vector<double> kValidationColumns{0.2, 0.8, 1.76, 3.0, 4.0};
constexpr std::size_t kValidationEpochs = 20;
constexpr double kValidationLr = 1e-3;
constexpr std::size_t kValidationTrainRows = 10000;
constexpr double kHighAccuracy = 0.9;
constexpr double kLowAccuracy = 0.5;

constexpr std::size_t kBenchRepeats = 3;
constexpr double kMaxPredictionRatio = 5.0;
constexpr double kMaxDecoderRatio = 0.1;

constexpr double kGradientTolerance = 1e-4;
constexpr double kJvpTolerance = 1e-4;

constexpr double kGaussianSigmaW = 3.4;
const std::vector<std::size_t> kGaussianPixels{0, 391, 783};
const std::vector<std::size_t> kGaussianLayers{1, 10, 49};
constexpr std::size_t kGaussianImages = 1000;
constexpr double kMaxSkew = 0.5;
constexpr double kMaxExcessKurtosis = 1.0;

constexpr double kCriticalTarget = 1.76;
constexpr double kCriticalTolerance = 0.05;
constexpr double kRefinementTolerance = 1e-8;

struct Outcome {
    bool pass = false;
    std::string summary;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

void detail(const std::string& line) { std::cout << "  " << line << '\n' << std::flush; }

DatasetSplits mnist() { return load_mnist(resolve_data_dir(std::nullopt)); }

SweepSpec phase_spec(std::vector<double> columns, EntropyKind kind) {
    SweepSpec s;
    s.sigma_w_sq = std::move(columns);
    s.sigma_b_sq = {kBiasVariance};
    s.depth = kDepth;
    s.entropy = kind;
    s.train_samples = kCascadeTrainRows;
    s.eval_samples = kEvalRows;
    s.seeds = kSeeds;
    s.base_seed = kBaseSeed;
    return s;
}

void print_grid(const PhaseGrid& g) {
    for (const auto& c : g.cells) {
        std::string per_seed;
        for (const auto& s : c.seeds) per_seed += " " + (s.error.empty() ? std::to_string(s.cutoff) : "err");
        detail("sigma_w^2=" + fmt(c.sigma_w_sq) + " mean cutoff=" + fmt(c.mean_cutoff) + " (seeds:" + per_seed +
               ") last-layer entropy=" + (c.mean_curve.empty() ? "n/a" : fmt(c.mean_curve.back())));
    }
}

// The three-column check shared by the MNIST and white-noise runs.
Outcome phase_columns(const DatasetSplits& data) {
    std::vector<double> cols{kOrderedColumn};
    cols.insert(cols.end(), kCriticalColumns.begin(), kCriticalColumns.end());
    cols.push_back(kChaoticColumn);
    const PhaseGrid g = run_sweep(phase_spec(cols, EntropyKind::relative), data);
    print_grid(g);
    auto mean = [&](double sw) { return g.find(sw, kBiasVariance)->mean_cutoff; };
    bool critical = true;
    std::string crit;
    for (double sw : kCriticalColumns) {
        critical = critical && mean(sw) == static_cast<double>(kDepth);
        crit += " " + fmt(mean(sw));
    }
    const bool ordered = mean(kOrderedColumn) <= kOrderedMaxCutoff;
    const bool chaotic = mean(kChaoticColumn) < static_cast<double>(kDepth);
    detail(std::string("critical band at L: ") + (critical ? "yes" : "no") + ", ordered <= 10: " +
           (ordered ? "yes" : "no") + ", chaotic < L: " + (chaotic ? "yes" : "no"));
    return {critical && ordered && chaotic, "mean cutoffs: 0.5 -> " + fmt(mean(kOrderedColumn)) + ", [1.5,1.76,2.1] ->" +
                                                crit + ", 3.5 -> " + fmt(mean(kChaoticColumn)) + " (L=50)"};
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
    const std::vector<double> v{8, 5, 12, 12, 15}, ascii{72, 69, 76, 76, 79};
    const double d = kl_divergence(to_pmf(v), to_pmf(ascii));
    return {std::abs(d - kHelloTarget) <= kHelloTolerance, "HELLO divergence = " + fmt(d, 6) + " (target 0.0462 +- 0.0005)"};
}

Outcome criterion2() { return phase_columns(mnist()); }

Outcome criterion3() {
    const PhaseGrid g = run_sweep(phase_spec({kDeOrdered, kDeCritical, kDeChaotic}, EntropyKind::differential), mnist());
    print_grid(g);
    auto s = [&](double sw) { return g.find(sw, kBiasVariance)->mean_curve.back(); };
    const double a = s(kDeOrdered), b = s(kDeChaotic), c = s(kDeCritical);
    const bool order = a < b && b < c;
    const bool ordered_band = std::abs(a - kDeOrderedTarget) <= kDeBand;
    const bool chaotic_band = std::abs(b - kDeChaoticTarget) <= kDeBand;
    detail(std::string("ordering: ") + (order ? "yes" : "no") + ", S(0.2) in -18+-4: " + (ordered_band ? "yes" : "no") +
           ", S(3.5) in -13+-4: " + (chaotic_band ? "yes" : "no"));
    return {order && ordered_band && chaotic_band,
            "S at layer 50: S(0.2)=" + fmt(a) + ", S(3.5)=" + fmt(b) + ", S(1.76)=" + fmt(c)};
}

Outcome criterion4() {
    DatasetSplits noise;
    noise.train = white_noise(kCascadeTrainRows, 784, derive_seed(kBaseSeed, 0xA3));
    noise.test = white_noise(kEvalRows, 784, derive_seed(kBaseSeed, 0xA4));
    Outcome o = phase_columns(noise);
    o.summary = "white noise, " + o.summary;
    return o;
}

Outcome criterion5() {
    const DatasetSplits data = mnist();
    SweepSpec s = phase_spec(kValidationColumns, EntropyKind::relative);
    s.depth = kValidationDepth;
    s.validation.epochs = kValidationEpochs;
    s.validation.learning_rate = kValidationLr;
    s.validation.train_samples = kValidationTrainRows;
    PhaseGrid g = run_sweep(s, data);
    run_validation(g, data);
    bool pass = true;
    std::string summary;
    for (const auto& c : g.cells) {
        const double acc = c.accuracy.value_or(std::numeric_limits<double>::quiet_NaN());
        const bool full = c.mean_cutoff >= static_cast<double>(kValidationDepth);
        const bool short_range = c.mean_cutoff < static_cast<double>(kValidationDepth) / 2.0;
        bool ok = full == (acc > kHighAccuracy);
        if (short_range) ok = ok && acc < kLowAccuracy;
        detail("sigma_w^2=" + fmt(c.sigma_w_sq) + " mean cutoff=" + fmt(c.mean_cutoff) + " accuracy=" + fmt(acc) +
               (c.validation_error.empty() ? "" : " (" + c.validation_error + ")") + (ok ? "" : "  <- mismatch"));
        pass = pass && ok;
        summary += (summary.empty() ? "" : ", ") + fmt(c.sigma_w_sq) + ": cutoff " + fmt(c.mean_cutoff) + " acc " +
                   fmt(acc, 3);
    }
    return {pass, "L=20 " + summary};
}

Outcome criterion6() {
    BenchmarkSpec b;
    b.depth = kDepth;
    b.train_samples = kCascadeTrainRows;
    b.eval_samples = kEvalRows;
    b.repeats = kBenchRepeats;
    b.seed = kBaseSeed;
    const BenchmarkReport r = run_benchmark(b, mnist());
    detail("single epoch " + fmt(r.single_epoch.mean) + " +- " + fmt(r.single_epoch.stddev) + " s, prediction " +
           fmt(r.prediction.mean) + " +- " + fmt(r.prediction.stddev) + " s, decoder epoch " +
           fmt(r.decoder_epoch.mean) + " +- " + fmt(r.decoder_epoch.stddev) + " s");
    const bool pass = r.prediction_ratio() <= kMaxPredictionRatio && r.decoder_ratio() < kMaxDecoderRatio;
    return {pass, "prediction/epoch = " + fmt(r.prediction_ratio(), 3) + " (<= 5), decoder/epoch = " +
                      fmt(r.decoder_ratio(), 3) + " (< 0.1)"};
}

// Condensed property checks; the unit suite carries the full versions.
Outcome criterion7() {
    std::vector<std::pair<std::string, bool>> checks;
    oracle::Gen g(77);

    {  // gradients, through each activation
        bool ok = true;
        std::mt19937_64 rng(5);
        for (Activation a : {Activation::tanh, Activation::linear, Activation::softmax}) {
            DenseLayer layer = gaussian_layer(5, 4, 1.3, 0.2, a, rng);
            const Matrix x = g.matrix(7, 5);
            const Matrix t = g.matrix(7, 4, -0.8, 0.8);
            const LayerGradients grads = backprop_mse(layer, x, t);
            auto loss = [&] { return oracle::mse(oracle::dense_forward(layer, x), t); };
            const auto gw = oracle::numeric_gradient(layer.weights.data(), static_cast<std::size_t>(layer.weights.size()), loss);
            for (Eigen::Index i = 0; i < grads.weights.size(); ++i)
                ok = ok && oracle::relative_error(grads.weights.data()[i], gw[static_cast<std::size_t>(i)]) < kGradientTolerance;
        }
        checks.emplace_back("finite-difference gradients", ok);
    }
    {
        bool ok = true;
        for (int trial = 0; trial < 1000; ++trial) {
            const std::size_t n = g.index(1, 40);
            const Pmf p = to_pmf(g.pmf(n)), q = to_pmf(g.pmf(n));
            ok = ok && kl_divergence(p, q) >= -1e-12 && std::abs(kl_divergence(p, p)) < 1e-12;
        }
        checks.emplace_back("KL nonnegativity and identity (1000 pmfs)", ok);
    }
    {
        bool ok = true;
        for (int trial = 0; trial < 10000; ++trial) {
            const auto v = g.curve(g.index(1, 200));
            const double eta = std::pow(10.0, g.uniform(-4, 0));
            ok = ok && find_cutoff(v, eta) == oracle::brute_force_cutoff(v, eta);
        }
        checks.emplace_back("cutoff oracle equivalence (10000 curves)", ok);
    }
    {
        bool ok = true;
        for (int trial = 0; trial < 2000; ++trial) {
            EntropyCurve c;
            c.values = g.curve(g.index(1, 100));
            double a = std::pow(10.0, g.uniform(-4, 0)), b = std::pow(10.0, g.uniform(-4, 0));
            if (a > b) std::swap(a, b);
            ok = ok && detect_cutoff(c, a).cutoff >= detect_cutoff(c, b).cutoff;
        }
        checks.emplace_back("cutoff monotone in eta", ok);
    }
    const Mlp net = init_random(NetworkConfig::uniform(4, 10, 1.76, 0.05, 3));
    const Matrix train = g.matrix(256, 10, 0.0, 1.0);
    {
        const auto before = net.checksum();
        const Cascade c(train_all_decoders(net, train, {}, 2));
        checks.emplace_back("network unchanged by cascade training", net.checksum() == before);

        bool ok = true;
        for (std::size_t l = 1; l <= 4; ++l) {
            const Matrix z = g.matrix(3, 10, -0.9, 0.9), v = g.matrix(3, 10);
            const double h = 1e-5;
            const Matrix fd = (c.reconstruct(l, z + h * v) - c.reconstruct(l, z - h * v)) / (2 * h);
            ok = ok && (c.jacobian_vector_product(l, z, v) - fd).norm() / std::max(fd.norm(), 1e-12) < kJvpTolerance;
        }
        checks.emplace_back("cascade JVP against finite differences", ok);
    }
    {
        DatasetSplits d;
        d.train = white_noise(128, 10, 1);
        d.test = white_noise(20, 10, 2);
        SweepSpec s;
        s.sigma_w_sq = {0.5, 1.76, 3.0};
        s.depth = 3;
        s.train_samples = 128;
        s.eval_samples = 20;
        s.seeds = 2;
        s.base_seed = 9;
        const auto dir = std::filesystem::temp_directory_path() / "edgescout_acceptance";
        export_csv(run_sweep(s, d), dir / "a.csv");
        s.workers = 3;
        export_csv(run_sweep(s, d), dir / "b.csv");
        auto slurp = [](const std::filesystem::path& p) {
            std::ifstream in(p, std::ios::binary);
            std::stringstream ss;
            ss << in.rdbuf();
            return ss.str();
        };
        const std::string a = slurp(dir / "a.csv");
        checks.emplace_back("fixed-seed output byte-identical", !a.empty() && a == slurp(dir / "b.csv"));
    }
    bool pass = true;
    std::string failed;
    for (const auto& [name, ok] : checks) {
        detail(name + ": " + (ok ? "ok" : "FAILED"));
        pass = pass && ok;
        if (!ok) failed += (failed.empty() ? "" : ", ") + name;
    }
    return {pass, std::to_string(checks.size()) + " property checks" + (failed.empty() ? "" : "; failed: " + failed)};
}

Outcome criterion8() {
    const DatasetSplits data = mnist();
    const Mlp net = init_random(NetworkConfig::uniform(kDepth, 784, kGaussianSigmaW, kBiasVariance, kBaseSeed));
    DecoderOptions o;
    o.seed = derive_seed(kBaseSeed, 0x10000);
    const Cascade cascade(
        train_all_decoders(net, data.train.images.topRows(static_cast<Eigen::Index>(kCascadeTrainRows)), o, 1));
    const Matrix x = data.test.images.topRows(static_cast<Eigen::Index>(kGaussianImages));
    const ActivationTrace trace = forward_record(net, x);
    bool pass = true;
    double worst_skew = 0.0, worst_kurt = 0.0;
    for (std::size_t l : kGaussianLayers) {
        const Matrix recon = cascade.reconstruct(l, trace.at(l));
        for (const auto& m : gaussianity_report(recon, kGaussianPixels)) {
            const bool ok = !m.zero_variance && std::abs(m.skewness) < kMaxSkew &&
                            std::abs(m.excess_kurtosis) < kMaxExcessKurtosis;
            detail("layer " + std::to_string(l) + " pixel " + std::to_string(m.pixel) + ": mean " + fmt(m.mean) +
                   " var " + fmt(m.variance) + " skew " + fmt(m.skewness) + " excess kurtosis " +
                   fmt(m.excess_kurtosis) + (ok ? "" : "  <- outside bounds"));
            pass = pass && ok;
            worst_skew = std::max(worst_skew, std::abs(m.skewness));
            worst_kurt = std::max(worst_kurt, std::abs(m.excess_kurtosis));
        }
    }
    return {pass, "sigma_w^2=3.4, max |skew| " + fmt(worst_skew) + " (< 0.5), max |excess kurtosis| " +
                      fmt(worst_kurt) + " (< 1)"};
}

Outcome criterion9() {
    const double crit = critical_sigma_w_sq(kBiasVariance);
    const double refined = critical_sigma_w_sq(kBiasVariance, 0.1, 10.0, 2 * kDefaultQuadratureOrder);
    double worst = std::abs(crit - refined);
    const GaussHermiteRule coarse = gauss_hermite(kDefaultQuadratureOrder), fine = gauss_hermite(2 * kDefaultQuadratureOrder);
    for (int k = 1; k <= 40; ++k) {
        const double sw = 0.1 * k;
        const auto a = mean_field_point(sw, kBiasVariance, coarse), b = mean_field_point(sw, kBiasVariance, fine);
        worst = std::max({worst, std::abs(a.q_star - b.q_star), std::abs(a.chi - b.chi)});
    }
    detail("order " + std::to_string(kDefaultQuadratureOrder) + " vs " + std::to_string(2 * kDefaultQuadratureOrder) +
           ": max change in q*, chi and the crossing over sigma_w^2 in [0.1, 4] = " + fmt(worst, 3));
    return {std::abs(crit - kCriticalTarget) <= kCriticalTolerance && worst < kRefinementTolerance,
            "chi = 1 at sigma_w^2 = " + fmt(crit, 8) + " (1.76 +- 0.05), refinement change " + fmt(worst, 3)};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>> kCriteria{
    {"KL worked example", criterion1},
    {"critical point (MNIST, L=50)", criterion2},
    {"differential entropy phase ordering", criterion3},
    {"white-noise invariance", criterion4},
    {"prediction vs training", criterion5},
    {"prediction cost", criterion6},
    {"property suites", criterion7},
    {"reconstruction Gaussianity", criterion8},
    {"mean-field baseline", criterion9},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<std::size_t> selected;
    app.add_option("--criterion", selected, "Criterion number(s), 1-9 (default: all)")->check(CLI::Range(1, 9));
    CLI11_PARSE(app, argc, argv);
    if (selected.empty())
        for (std::size_t i = 1; i <= kCriteria.size(); ++i) selected.push_back(i);

    int failures = 0;
    for (std::size_t n : selected) {
        const auto& [name, fn] = kCriteria[n - 1];
        std::cout << "criterion " << n << ": " << name << '\n' << std::flush;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << (o.pass ? "PASS " : "FAIL ") << n << ": " << o.summary << " [" << fmt(secs, 3) << " s]\n"
                  << std::flush;
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
