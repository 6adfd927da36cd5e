// lst: command-line driver for level-set traversal experiments.
//
// Every subcommand accepts --config FILE with `key = value` lines naming the
// subcommand's long options; flags given on the command line win. Each output
// directory receives manifest.txt with the resolved options.
//
// Exit codes: 0 ok, 1 usage, 2 data/format, 3 numeric.

#include "lst/checkpoint.hpp"
#include "lst/csv.hpp"
#include "lst/data_io.hpp"
#include "lst/errors.hpp"
#include "lst/experiments.hpp"
#include "lst/file_util.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace lst;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

class UsageError : public Error {
public:
    using Error::Error;
};

// Options shared by every subcommand.
struct Common {
    fs::path out = "out";
    std::uint64_t seed = 0;
    int jobs = 1;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", "key = value file with option defaults");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--seed", c.seed, "global seed");
    sub->add_option("--jobs", c.jobs, "worker threads for pair-level parallelism")->check(CLI::PositiveNumber);
}

std::map<std::string, std::string> resolved_options(const CLI::App* sub) {
    std::map<std::string, std::string> out;
    out["command"] = sub->get_name();
    for (const CLI::Option* opt : sub->get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "config") continue;
        std::string value;
        if (opt->get_expected_min() == 0) {
            value = opt->count() > 0 ? "true" : "false";
        } else if (opt->count() > 0) {
            for (const std::string& r : opt->results()) value += (value.empty() ? "" : ",") + r;
        } else {
            value = opt->get_default_str();
        }
        out[name] = value;
    }
    return out;
}

void write_csv(const fs::path& path, const std::string& text) { write_file_atomic(path, text); }

// Short form for labels in headers, e.g. 0.1 rather than 0.10000000000000001.
std::string label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::map<std::string, std::string> with_lst(std::map<std::string, std::string> opts, const LSTConfig& c) {
    opts["resolved.m"] = std::to_string(c.max_iterations);
    opts["resolved.eta"] = format_double(c.eta);
    opts["resolved.eps"] = format_double(c.epsilon);
    opts["resolved.delta"] = format_double(c.delta);
    opts["resolved.beta"] = format_double(c.ema_beta);
    opts["resolved.early_stop"] = c.early_stop ? "true" : "false";
    return opts;
}

// ---------------------------------------------------------------------------
// Datasets.

struct DataOptions {
    std::string dataset;  // blobs, blobs2, cifar
    fs::path data_dir;
    int per_class = 0;    // cifar subset size per class; 0 = from the scale preset
    std::string split = "test";
};

struct Scale {
    int pairs;
    int per_class;
};

Scale scale_preset(const std::string& name) {
    if (name == "desk") return {100, 200};
    if (name == "full") return {1000, 5000};
    throw UsageError("unknown scale preset '" + name + "' (expected desk or full)");
}

Dataset load_data(const DataOptions& d, std::uint64_t seed, const Scale& scale) {
    if (d.dataset == "blobs" || d.dataset == "blobs2") {
        const auto spec = d.dataset == "blobs" ? BlobDatasetSpec::checkerboard(seed) : BlobDatasetSpec::two_class(8.0, seed);
        BlobDataset b = generate_blobs(spec);
        return d.split == "train" ? b.train : b.test;
    }
    if (d.dataset == "cifar") {
        if (d.data_dir.empty()) throw UsageError("--data-dir is required for the cifar dataset");
        if (!fs::exists(d.data_dir)) throw FormatError("dataset path does not exist: " + d.data_dir.string());
        const int per_class = d.per_class > 0 ? d.per_class : scale.per_class;
        if (d.split == "test" && fs::is_directory(d.data_dir) && fs::exists(d.data_dir / "test_batch.bin")) {
            return balanced_subset(read_cifar10_binary(d.data_dir / "test_batch.bin"), 10, per_class);
        }
        return balanced_subset(load_cifar10(d.data_dir), 10, per_class);
    }
    throw UsageError("unknown dataset '" + d.dataset + "' (expected blobs, blobs2 or cifar)");
}

// Dataset options default to what the checkpoint was trained on.
void fill_from_checkpoint(DataOptions& d, const Checkpoint& ckpt) {
    auto get = [&](const char* key) {
        auto it = ckpt.metadata.find(key);
        return it == ckpt.metadata.end() ? std::string() : it->second;
    };
    if (d.dataset.empty()) d.dataset = get("dataset");
    if (d.data_dir.empty()) d.data_dir = get("data_dir");
    if (d.dataset.empty()) throw UsageError("checkpoint does not record a dataset; pass --dataset");
}

void add_data_options(CLI::App* sub, DataOptions& d) {
    sub->add_option("--dataset", d.dataset, "blobs, blobs2 or cifar (default: from checkpoint)");
    sub->add_option("--data-dir", d.data_dir, "CIFAR-10 binary directory or file");
    sub->add_option("--per-class", d.per_class, "CIFAR images per class (0 = scale preset)");
    sub->add_option("--split", d.split, "train or test")->check(CLI::IsMember({"train", "test"}));
}

// ---------------------------------------------------------------------------
// LST settings.

struct LstOptions {
    std::string preset = "imagenet";
    int m = 0;
    double eta = -1, eps = -1, delta = -1, beta = -1;
    bool no_early_stop = false;
};

void add_lst_options(CLI::App* sub, LstOptions& o) {
    sub->add_option("--preset", o.preset, "imagenet (m=400, delta=0.2) or cifar (m=300, delta=0.25)")
        ->check(CLI::IsMember({"imagenet", "cifar"}));
    sub->add_option("--m", o.m, "max iterations (overrides the preset)");
    sub->add_option("--eta", o.eta, "orthogonal step scale");
    sub->add_option("--eps", o.eps, "parallel step size");
    sub->add_option("--delta", o.delta, "confidence tolerance");
    sub->add_option("--beta", o.beta, "parallel-step smoothing");
    sub->add_flag("--no-early-stop", o.no_early_stop, "run all m iterations");
}

LSTConfig lst_config(const LstOptions& o) {
    LSTConfig c = o.preset == "cifar" ? LSTConfig::cifar_preset() : LSTConfig::imagenet_preset();
    if (o.m > 0) c.max_iterations = o.m;
    if (o.eta >= 0) c.eta = o.eta;
    if (o.eps >= 0) c.epsilon = o.eps;
    if (o.delta >= 0) c.delta = o.delta;
    if (o.beta >= 0) c.ema_beta = o.beta;
    if (o.no_early_stop) c.early_stop = false;
    c.validate();
    return c;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("bad number in list: '" + item + "'");
        }
    }
    if (out.empty()) throw UsageError("empty value list");
    return out;
}

bool is_image(const Tensor& t) { return t.shape().rank() == 3 && (t.shape()[0] == 1 || t.shape()[0] == 3); }

std::string pair_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "pair_%04zu", i);
    return buf;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
    Common common;
    DataOptions data{"blobs", {}, 0, "train"};
    std::string arch = "mlp";
    std::string scale = "desk";
    std::string activation = "softplus";
    std::string pooling = "average";
    int epochs = 50;
    double lr = 0.05;
    double momentum = 0.9;
    int batch = 32;
    bool adversarial = false;
    double radius = 0.1;
    int adv_steps = 7;
};

int run_train(const CLI::App* sub, const TrainOptions& o) {
    const Dataset data = load_data(o.data, o.common.seed, scale_preset(o.scale));
    if (data.empty()) throw FormatError("training set is empty");
    const Shape& in = data.front().input.shape();
    int classes = 0;
    for (const Sample& s : data) classes = std::max(classes, s.label + 1);

    Architecture arch;
    if (o.arch == "mlp") {
        if (in.rank() != 1) throw UsageError("mlp needs flat inputs; use --arch cnn for images");
        arch = Architecture::mlp(in[0], {64, 64}, classes);
    } else {
        if (in.rank() != 3) throw UsageError("cnn needs image inputs");
        arch = Architecture::cnn(in, {8, 16}, classes);
    }
    arch.activation = o.activation == "relu" ? Activation::Relu : Activation::Softplus;
    arch.pooling = o.pooling == "max" ? Pooling::Max : Pooling::Average;

    TrainConfig cfg;
    cfg.epochs = o.epochs;
    cfg.learning_rate = o.lr;
    cfg.momentum = o.momentum;
    cfg.batch_size = o.batch;
    cfg.seed = o.common.seed;
    if (o.adversarial) cfg.adversarial = AdversarialTraining{o.radius, o.adv_steps, 0.0};
    cfg.validate();

    TrainResult tr = train(arch, cfg, data);
    fs::create_directories(o.common.out);
    std::map<std::string, std::string> meta{{"dataset", o.data.dataset},
                                            {"data_dir", o.data.data_dir.string()},
                                            {"seed", std::to_string(o.common.seed)},
                                            {"epochs", std::to_string(o.epochs)},
                                            {"adversarial", o.adversarial ? format_double(o.radius) : "none"}};
    save_checkpoint(o.common.out / "model.ckpt", tr.model, meta);
    std::ostringstream log;
    write_training_log_csv(log, tr.log);
    write_csv(o.common.out / "training_log.csv", log.str());
    write_manifest(o.common.out, resolved_options(sub));
    std::cout << "train accuracy " << label(tr.train_accuracy) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// traverse

struct TraverseOptions {
    Common common;
    DataOptions data;
    LstOptions lst;
    fs::path checkpoint;
    std::string scale = "desk";
    int sources = 5;
    int targets = 4;
    int grid = 0;
    std::vector<std::string> pairs;  // "source:target" dataset indices
    std::string layer;
};

std::vector<Pair> explicit_pairs(const Dataset& data, const std::vector<std::string>& specs) {
    std::vector<Pair> out;
    for (const std::string& s : specs) {
        const auto colon = s.find(':');
        if (colon == std::string::npos) throw UsageError("--pair expects SOURCE:TARGET, got '" + s + "'");
        std::size_t si = 0, ti = 0;
        try {
            si = std::stoul(s.substr(0, colon));
            ti = std::stoul(s.substr(colon + 1));
        } catch (const std::exception&) {
            throw UsageError("--pair expects numeric indices, got '" + s + "'");
        }
        if (si >= data.size() || ti >= data.size()) throw IndexError("pair index out of range: " + s);
        out.push_back({si, ti, data[si].input, data[ti].input, data[si].label, data[ti].label});
    }
    return out;
}

int run_traverse(const CLI::App* sub, TraverseOptions o) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    const Model model = ckpt.model();
    fill_from_checkpoint(o.data, ckpt);
    const Dataset data = load_data(o.data, o.common.seed, scale_preset(o.scale));
    const LSTConfig cfg = lst_config(o.lst);
    const std::string layer = o.layer.empty() ? model.default_feature_layer() : o.layer;

    std::vector<Pair> pairs;
    if (!o.pairs.empty()) {
        pairs = explicit_pairs(data, o.pairs);
    } else if (o.grid > 0) {
        pairs = class_grid_pairs(model, data, o.grid, o.common.seed);
    } else {
        pairs = select_pairs(model, data, o.sources, o.targets, o.common.seed);
    }
    for (const Pair& p : pairs) {
        if (p.source_label >= model.num_classes() || p.target_label >= model.num_classes()) {
            throw IndexError("class index out of range for the model");
        }
    }
    const auto runs = traverse_pairs(model, pairs, cfg, o.common.jobs);

    fs::create_directories(o.common.out / "traces");
    std::ostringstream table;
    {
        CsvWriter csv(table, {"pair", "source_index", "target_index", "source_label", "target_label", "label",
                              "termination", "iterations", "source_confidence", "output_confidence",
                              "rmse_to_target", "linf_to_target", "degenerate_steps"});
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const Traversal& r = runs[i];
            csv.row(i, r.pair.source_index, r.pair.target_index, r.pair.source_label, r.pair.target_label, r.label,
                    to_string(r.result.termination), r.result.iterations, r.result.source_confidence,
                    r.result.output_confidence, rmse(r.result.output, r.pair.target),
                    l_inf(r.result.output, r.pair.target), r.result.degenerate_steps);
        }
    }
    write_csv(o.common.out / "traversals.csv", table.str());
    parallel_for(runs.size(), o.common.jobs, [&](std::size_t i) {
        std::ostringstream trace;
        write_trace_csv(trace, runs[i].result);
        write_csv(o.common.out / "traces" / (pair_name(i) + ".csv"), trace.str());
        if (is_image(runs[i].result.output)) {
            write_image(o.common.out / "images" / (pair_name(i) + "_output.ppm"), runs[i].result.output);
        }
    });

    const DistanceReport d = traversal_distances(model, runs, layer);
    std::ostringstream dist;
    {
        CsvWriter csv(dist, {"metric", "mean", "std", "pairs"});
        csv.row("rmse", d.rmse.mean, d.rmse.std, d.pairs);
        csv.row("l_inf", d.l_inf.mean, d.l_inf.std, d.pairs);
        csv.row("ssim", d.ssim.mean, d.ssim.std, d.pairs);
        csv.row("feature_distance(" + layer + ", LPIPS substitute)", d.feature_distance.mean, d.feature_distance.std,
                d.pairs);
    }
    write_csv(o.common.out / "distances.csv", dist.str());

    if (o.grid > 0 && o.pairs.empty()) {
        std::ostringstream cells;
        CsvWriter csv(cells, {"row", "col", "source_class", "target_class", "source_confidence",
                              "output_confidence", "rmse_to_target"});
        std::vector<Tensor> tiles;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const int row = static_cast<int>(i) / o.grid, col = static_cast<int>(i) % o.grid;
            csv.row(row, col, runs[i].pair.source_label, runs[i].pair.target_label, runs[i].result.source_confidence,
                    runs[i].result.output_confidence, rmse(runs[i].result.output, runs[i].pair.target));
            tiles.push_back(runs[i].result.output);
        }
        write_csv(o.common.out / "grid.csv", cells.str());
        if (is_image(tiles.front())) write_image(o.common.out / "grid.ppm", tile_images(tiles, o.grid, o.grid));
    }

    write_file_atomic(o.common.out / "blindspots.lstb", encode_bundle(runs));
    write_manifest(o.common.out, with_lst(resolved_options(sub), cfg));
    int guard = 0;
    for (const auto& r : runs) guard += r.result.termination == Termination::ConfidenceGuard;
    std::cout << runs.size() << " traversals, " << guard << " stopped by the confidence guard\n";
    return 0;
}

// ---------------------------------------------------------------------------
// triangle / path / extremality

struct BundleOptions {
    Common common;
    fs::path checkpoint;
    fs::path bundle;
    int subdivisions = 10;
    std::string deltas = "0,0.1,0.2,0.3";
    int samples = 10;
    std::string extrapolations = "0,0.05,0.1,0.2";
    bool heatmaps = false;
};

int run_triangle(const CLI::App* sub, const BundleOptions& o) {
    const Model model = load_model(o.checkpoint);
    const auto runs = decode_bundle(read_file(o.bundle));
    std::map<std::size_t, int> per_source;
    for (const auto& r : runs) ++per_source[r.pair.source_index];
    for (const auto& [src, n] : per_source) {
        if (n < 2) throw UsageError("source " + std::to_string(src) + " has fewer than 2 blind spots");
    }
    const auto deltas = parse_list(o.deltas);
    const TriangleSummary s = triangle_summary(model, runs, o.subdivisions, deltas);

    fs::create_directories(o.common.out);
    std::ostringstream rows;
    {
        std::vector<std::string> header{"triangle", "source_index", "source_confidence", "mean_confidence"};
        for (double d : deltas) header.push_back("fraction_delta_" + label(d));
        CsvWriter csv(rows, header);
        for (std::size_t t = 0; t < s.reports.size(); ++t) {
            const TriangleReport& r = s.reports[t];
            std::string line = std::to_string(t) + "," +
                               std::to_string(runs[static_cast<std::size_t>(s.report_source[t])].pair.source_index) +
                               "," + format_double(r.source_confidence) + "," + format_double(r.mean_confidence);
            for (double f : r.fractions) line += "," + format_double(f);
            rows << line << "\n";
        }
    }
    write_csv(o.common.out / "triangles.csv", rows.str());

    std::ostringstream summary;
    {
        CsvWriter csv(summary, {"statistic", "mean", "std", "summary", "triangles"});
        csv.row("avg_delta_confidence", s.mean_confidence.mean, s.mean_confidence.std, summary_cell(s.mean_confidence),
                s.reports.size());
        for (std::size_t d = 0; d < deltas.size(); ++d) {
            csv.row("avg_delta_fraction@" + label(deltas[d]), s.fractions[d].mean, s.fractions[d].std,
                    summary_cell(s.fractions[d]), s.reports.size());
        }
    }
    write_csv(o.common.out / "triangle_summary.csv", summary.str());
    if (o.heatmaps) {
        for (std::size_t t = 0; t < s.reports.size(); ++t) {
            char name[32];
            std::snprintf(name, sizeof name, "triangle_%04zu.ppm", t);
            write_heatmap(o.common.out / "heatmaps" / name, s.reports[t].confidence_grid);
        }
    }
    write_manifest(o.common.out, resolved_options(sub));
    std::cout << s.reports.size() << " triangles, mean confidence " << summary_cell(s.mean_confidence) << "\n";
    return 0;
}

int run_path(const CLI::App* sub, const BundleOptions& o) {
    const Model model = load_model(o.checkpoint);
    const auto runs = decode_bundle(read_file(o.bundle));
    const PathSummary s = path_summary(model, runs, o.samples);
    fs::create_directories(o.common.out);
    std::ostringstream rows;
    {
        CsvWriter csv(rows, {"pair", "lambda", "confidence"});
        for (std::size_t i = 0; i < s.profiles.size(); ++i)
            for (std::size_t k = 0; k < s.profiles[i].lambdas.size(); ++k)
                csv.row(i, s.profiles[i].lambdas[k], s.profiles[i].confidences[k]);
    }
    write_csv(o.common.out / "paths.csv", rows.str());
    std::ostringstream summary;
    {
        CsvWriter csv(summary, {"statistic", "mean", "std", "summary", "pairs"});
        csv.row("path_mean_confidence", s.mean_confidence.mean, s.mean_confidence.std, summary_cell(s.mean_confidence),
                s.profiles.size());
        csv.row("path_min_confidence", s.min_confidence.mean, s.min_confidence.std, summary_cell(s.min_confidence),
                s.profiles.size());
    }
    write_csv(o.common.out / "path_summary.csv", summary.str());
    write_manifest(o.common.out, resolved_options(sub));
    std::cout << s.profiles.size() << " paths, mean confidence " << summary_cell(s.mean_confidence) << "\n";
    return 0;
}

int run_extremality(const CLI::App* sub, const BundleOptions& o) {
    const Model model = load_model(o.checkpoint);
    const auto runs = decode_bundle(read_file(o.bundle));
    const auto eps = parse_list(o.extrapolations);
    fs::create_directories(o.common.out);
    std::vector<std::vector<double>> by_eps(eps.size());
    std::ostringstream rows;
    {
        CsvWriter csv(rows, {"pair", "eps_ext", "confidence", "drop"});
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto rep = extremality_probe(model, runs[i].label, runs[i].pair.source, runs[i].result.output, eps);
            for (std::size_t e = 0; e < eps.size(); ++e) {
                csv.row(i, eps[e], rep.confidences[e], rep.drops[e]);
                by_eps[e].push_back(rep.confidences[e]);
            }
        }
    }
    write_csv(o.common.out / "extremality.csv", rows.str());
    std::ostringstream summary;
    {
        CsvWriter csv(summary, {"eps_ext", "median_confidence", "pairs"});
        for (std::size_t e = 0; e < eps.size(); ++e) csv.row(eps[e], median(by_eps[e]), runs.size());
    }
    write_csv(o.common.out / "extremality_summary.csv", summary.str());
    write_manifest(o.common.out, resolved_options(sub));
    return 0;
}

// ---------------------------------------------------------------------------
// attack-compare

struct AttackOptions {
    Common common;
    DataOptions data;
    LstOptions lst;
    fs::path checkpoint;
    std::string scale = "desk";
    int pairs = 0;
    double radius = 0.2;
    int steps = 20;
    int samples = 10;
    std::string layer;
};

int run_attack_compare(const CLI::App* sub, AttackOptions o) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    const Model model = ckpt.model();
    fill_from_checkpoint(o.data, ckpt);
    const Scale scale = scale_preset(o.scale);
    const Dataset data = load_data(o.data, o.common.seed, scale);
    const int n = o.pairs > 0 ? o.pairs : scale.pairs;
    const auto pairs = select_pairs(model, data, n, 1, o.common.seed);
    AttackConfig atk = AttackConfig::pgd_defaults(o.radius, o.common.seed);
    atk.steps = o.steps;
    const std::string layer = o.layer.empty() ? model.default_feature_layer() : o.layer;
    const LSTConfig cfg = lst_config(o.lst);
    const AttackCompare cmp = attack_compare(model, pairs, cfg, atk, layer, o.samples, o.common.jobs);

    fs::create_directories(o.common.out);
    std::ostringstream rows;
    {
        CsvWriter csv(rows, {"lambda", "targeted_pgd", "feature_targeted", "lst"});
        for (const auto& r : cmp.rows) csv.row(r.lambda, r.targeted_pgd, r.feature_targeted, r.lst);
    }
    write_csv(o.common.out / "attack_compare.csv", rows.str());
    write_manifest(o.common.out, with_lst(resolved_options(sub), cfg));
    return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOptions {
    Common common;
    DataOptions data;
    LstOptions lst;
    fs::path checkpoint;
    std::string scale = "desk";
    std::string axis;
    std::string values;
    int sources = 10;
    int targets = 5;
    int subdivisions = 10;
    std::string layer;
};

int run_sweep(const CLI::App* sub, SweepOptions o) {
    const SweepAxis axis = parse_sweep_axis(o.axis);
    const auto values = parse_list(o.values);
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    const Model model = ckpt.model();
    fill_from_checkpoint(o.data, ckpt);
    const Dataset data = load_data(o.data, o.common.seed, scale_preset(o.scale));
    const auto pairs = select_pairs(model, data, o.sources, o.targets, o.common.seed);
    const std::string layer = o.layer.empty() ? model.default_feature_layer() : o.layer;
    const LSTConfig base = lst_config(o.lst);
    const auto rows = sweep(model, pairs, base, axis, values, layer, o.subdivisions, o.common.jobs);

    fs::create_directories(o.common.out);
    std::ostringstream out;
    {
        std::vector<std::string> header{"axis", "value", "m", "eta", "eps", "rmse_mean", "rmse_std", "linf_mean",
                                        "linf_std", "ssim_mean", "ssim_std", "feature_distance_mean",
                                        "feature_distance_std", "avg_delta_confidence_mean",
                                        "avg_delta_confidence_std"};
        for (double d : kDefaultDeltas) header.push_back("fraction_delta_" + label(d) + "_mean");
        header.push_back("guard_stops");
        CsvWriter csv(out, header);
        for (const SweepRow& r : rows) {
            std::string line = to_string(axis) + "," + format_double(r.value) + "," +
                               std::to_string(r.config.max_iterations) + "," + format_double(r.config.eta) + "," +
                               format_double(r.config.epsilon);
            for (const MeanStd& m : {r.distances.rmse, r.distances.l_inf, r.distances.ssim,
                                     r.distances.feature_distance, r.triangles.mean_confidence}) {
                line += "," + format_double(m.mean) + "," + format_double(m.std);
            }
            for (const MeanStd& f : r.triangles.fractions) line += "," + format_double(f.mean);
            line += "," + std::to_string(r.guard_stops);
            out << line << "\n";
        }
    }
    write_csv(o.common.out / "sweep.csv", out.str());
    write_manifest(o.common.out, with_lst(resolved_options(sub), base));
    std::cout << rows.size() << " sweep rows (feature_distance stands in for LPIPS)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// theory

struct TheoryOptions {
    Common common;
    int dim = 6;
    int samples = 100000;
};

int run_theory(const CLI::App* sub, const TheoryOptions& o) {
    const auto checks = theory_checks(o.dim, o.common.seed, o.samples);
    fs::create_directories(o.common.out);
    std::ostringstream out;
    bool ok = true;
    {
        CsvWriter csv(out, {"check", "value", "reference", "tolerance", "passed"});
        for (const auto& c : checks) {
            csv.row(c.name, c.value, c.reference, c.tolerance, c.passed);
            std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  value=" << label(c.value)
                      << "  reference=" << format_double(c.reference) << "\n";
            ok = ok && c.passed;
        }
    }
    write_csv(o.common.out / "theory.csv", out.str());
    write_manifest(o.common.out, resolved_options(sub));
    return ok ? 0 : kExitNumeric;
}

}  // namespace

// Rewrites `SUB ... --config FILE` into explicit options taken from FILE.
// Keys already given on the command line are left alone so the command line wins.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
    auto sub_it = std::find_if(args.begin(), args.end(), [](const std::string& a) { return !a.empty() && a[0] != '-'; });
    if (sub_it == args.end()) return args;
    const CLI::App* sub = app.get_subcommand_no_throw(*sub_it);
    if (sub == nullptr) return args;
    fs::path file;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) file = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) file = args[i].substr(9);
    }
    if (file.empty()) return args;
    const auto given = [&](const std::string& key) {
        return std::any_of(args.begin(), args.end(),
                           [&](const std::string& a) { return a == "--" + key || a.rfind("--" + key + "=", 0) == 0; });
    };
    const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::vector<std::string> extra;
    std::istringstream lines(read_file(file));
    std::string line;
    int lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        line = trim(line.substr(0, line.find_first_of("#;")));
        if (line.empty() || line.front() == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError(file.string() + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        const CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (opt == nullptr || key == "config") throw UsageError(file.string() + ": unknown option '" + key + "'");
        if (given(key)) continue;
        if (opt->get_expected_min() == 0) {
            if (value == "true" || value == "1") extra.push_back("--" + key);
            else if (value != "false" && value != "0") throw UsageError(file.string() + ": flag '" + key + "' expects true or false");
        } else {
            extra.push_back("--" + key);
            extra.push_back(value);
        }
    }
    args.insert(sub_it + 1, extra.begin(), extra.end());
    return args;
}

int main(int argc, char** argv) {
    CLI::App app{"Level-set traversal toolkit", "lst"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolkitVersion);
    app.option_defaults()->always_capture_default();

    TrainOptions train_o;
    auto* train_cmd = app.add_subcommand("train", "train a reference model and write a checkpoint");
    add_common(train_cmd, train_o.common);
    add_data_options(train_cmd, train_o.data);
    train_cmd->add_option("--arch", train_o.arch, "mlp or cnn")->check(CLI::IsMember({"mlp", "cnn"}));
    train_cmd->add_option("--scale", train_o.scale, "desk or full");
    train_cmd->add_option("--activation", train_o.activation)->check(CLI::IsMember({"softplus", "relu"}));
    train_cmd->add_option("--pooling", train_o.pooling)->check(CLI::IsMember({"average", "max"}));
    train_cmd->add_option("--epochs", train_o.epochs);
    train_cmd->add_option("--lr", train_o.lr);
    train_cmd->add_option("--momentum", train_o.momentum);
    train_cmd->add_option("--batch", train_o.batch);
    train_cmd->add_flag("--adversarial", train_o.adversarial, "PGD adversarial training");
    train_cmd->add_option("--radius", train_o.radius, "adversarial l_inf radius");
    train_cmd->add_option("--adv-steps", train_o.adv_steps);

    TraverseOptions trav_o;
    auto* trav_cmd = app.add_subcommand("traverse", "run LST on source/target pairs");
    add_common(trav_cmd, trav_o.common);
    add_data_options(trav_cmd, trav_o.data);
    add_lst_options(trav_cmd, trav_o.lst);
    trav_cmd->add_option("--checkpoint", trav_o.checkpoint)->required();
    trav_cmd->add_option("--scale", trav_o.scale, "desk or full");
    trav_cmd->add_option("--sources", trav_o.sources, "random sources");
    trav_cmd->add_option("--targets", trav_o.targets, "other-class targets per source");
    trav_cmd->add_option("--grid", trav_o.grid, "K x K class grid instead of random pairs");
    trav_cmd->add_option("--pair", trav_o.pairs, "explicit SOURCE:TARGET dataset indices");
    trav_cmd->add_option("--layer", trav_o.layer, "feature layer for the perceptual-distance substitute");

    BundleOptions tri_o, path_o, ext_o;
    auto* tri_cmd = app.add_subcommand("triangle", "confidence over triangles spanned by a source and two blind spots");
    auto* path_cmd = app.add_subcommand("path", "confidence along source -> blind spot segments");
    auto* ext_cmd = app.add_subcommand("extremality", "confidence past each blind spot along the traversal direction");
    for (auto [cmd, opts] : {std::pair{tri_cmd, &tri_o}, std::pair{path_cmd, &path_o}, std::pair{ext_cmd, &ext_o}}) {
        add_common(cmd, opts->common);
        cmd->add_option("--checkpoint", opts->checkpoint)->required();
        cmd->add_option("--bundle", opts->bundle, "blindspots.lstb written by traverse")->required();
    }
    tri_cmd->add_option("--subdivisions", tri_o.subdivisions)->check(CLI::PositiveNumber);
    tri_cmd->add_option("--deltas", tri_o.deltas, "comma-separated confidence tolerances");
    tri_cmd->add_flag("--heatmaps", tri_o.heatmaps, "write one heatmap per triangle");
    path_cmd->add_option("--samples", path_o.samples)->check(CLI::Range(2, 100000));
    ext_cmd->add_option("--eps-ext", ext_o.extrapolations, "comma-separated extrapolation factors");

    AttackOptions atk_o;
    auto* atk_cmd = app.add_subcommand("attack-compare", "median path confidence: targeted PGD vs feature attack vs LST");
    add_common(atk_cmd, atk_o.common);
    add_data_options(atk_cmd, atk_o.data);
    add_lst_options(atk_cmd, atk_o.lst);
    atk_cmd->add_option("--checkpoint", atk_o.checkpoint)->required();
    atk_cmd->add_option("--scale", atk_o.scale, "desk or full");
    atk_cmd->add_option("--pairs", atk_o.pairs, "pair count (0 = scale preset)");
    atk_cmd->add_option("--radius", atk_o.radius, "attack l_inf radius");
    atk_cmd->add_option("--steps", atk_o.steps);
    atk_cmd->add_option("--samples", atk_o.samples)->check(CLI::Range(2, 100000));
    atk_cmd->add_option("--layer", atk_o.layer, "feature layer for the feature-level attack");

    SweepOptions sw_o;
    auto* sw_cmd = app.add_subcommand("sweep", "one-at-a-time LST hyperparameter sweep");
    add_common(sw_cmd, sw_o.common);
    add_data_options(sw_cmd, sw_o.data);
    add_lst_options(sw_cmd, sw_o.lst);
    sw_cmd->add_option("--checkpoint", sw_o.checkpoint)->required();
    sw_cmd->add_option("--scale", sw_o.scale, "desk or full");
    sw_cmd->add_option("--axis", sw_o.axis, "m, eta, eps, eta@m or eps@m")->required();
    sw_cmd->add_option("--values", sw_o.values, "comma-separated values")->required();
    sw_cmd->add_option("--sources", sw_o.sources);
    sw_cmd->add_option("--targets", sw_o.targets);
    sw_cmd->add_option("--subdivisions", sw_o.subdivisions);
    sw_cmd->add_option("--layer", sw_o.layer);

    TheoryOptions th_o;
    auto* th_cmd = app.add_subcommand("theory", "analytic checks on linear models");
    add_common(th_cmd, th_o.common);
    th_cmd->add_option("--dim", th_o.dim)->check(CLI::Range(2, 4096));
    th_cmd->add_option("--samples", th_o.samples, "random unit vectors for the Rayleigh sandwich");

    try {
        std::vector<std::string> args = expand_config(app, std::vector<std::string>(argv + 1, argv + argc));
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const FormatError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    }

    try {
        if (*train_cmd) return run_train(train_cmd, train_o);
        if (*trav_cmd) return run_traverse(trav_cmd, trav_o);
        if (*tri_cmd) return run_triangle(tri_cmd, tri_o);
        if (*path_cmd) return run_path(path_cmd, path_o);
        if (*ext_cmd) return run_extremality(ext_cmd, ext_o);
        if (*atk_cmd) return run_attack_compare(atk_cmd, atk_o);
        if (*sw_cmd) return run_sweep(sw_cmd, sw_o);
        if (*th_cmd) return run_theory(th_cmd, th_o);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const SingularityError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const TrainingError& e) {
        std::cerr << "numeric failure at epoch " << e.epoch() << ": " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DomainError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
