#pragma once

#include "lst/attacks.hpp"
#include "lst/data_io.hpp"
#include "lst/geometry.hpp"
#include "lst/image_metrics.hpp"
#include "lst/lst.hpp"
#include "lst/train.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace lst {

inline constexpr const char* kToolkitVersion = "0.3.1";

// Runs body(i) for i in [0, n) on up to `jobs` threads. Each index is handled
// exactly once, so results stored by index do not depend on scheduling. The
// first exception thrown by any body is rethrown after all workers join.
template <typename Body>
void parallel_for(std::size_t n, int jobs, Body&& body) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

double median(std::vector<double> values);

// ---------------------------------------------------------------------------
// Reference blobs model.

TrainConfig blobs_train_config(std::uint64_t seed = 0);

struct BlobsModel {
    Model model;
    BlobDataset data;
    std::vector<EpochLog> log;
};

// MLP 2 -> 64 -> 64 -> 4 trained on the checkerboard blobs.
BlobsModel blobs_mlp(std::uint64_t seed = 0, const std::optional<AdversarialTraining>& adversarial = {});

// ---------------------------------------------------------------------------
// Pair selection.

struct Pair {
    std::size_t source_index = 0;
    std::size_t target_index = 0;
    Tensor source;
    Tensor target;
    int source_label = 0;  // dataset label of the source
    int target_label = 0;
};

// `sources` correctly classified samples from a seeded shuffle of `pool`,
// each paired with `targets_per_source` distinct samples of other classes.
std::vector<Pair> select_pairs(const Classifier& model, const Dataset& pool, int sources, int targets_per_source,
                               std::uint64_t seed);

// One correctly classified representative per class in [0, classes), then all
// classes x classes (source, target) combinations in row-major order.
std::vector<Pair> class_grid_pairs(const Classifier& model, const Dataset& pool, int classes, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Traversal batches.

struct Traversal {
    Pair pair;
    int label = 0;  // predicted class of the source, the class LST preserves
    LSTResult result;
};

std::vector<Traversal> traverse_pairs(const Classifier& model, const std::vector<Pair>& pairs,
                                      const LSTConfig& config, int jobs = 1);

DistanceReport traversal_distances(const Classifier& model, const std::vector<Traversal>& runs,
                                   const std::string& layer);

// Binary bundle of traversal results, consumed by the triangle/path/extremality commands.
std::string encode_bundle(const std::vector<Traversal>& runs);
std::vector<Traversal> decode_bundle(const std::string& bytes);

// ---------------------------------------------------------------------------
// Aggregated reports.

// Triangles over every pair of blind spots that share a source.
struct TriangleSummary {
    std::vector<double> deltas;
    MeanStd mean_confidence;
    std::vector<MeanStd> fractions;  // per delta
    std::vector<TriangleReport> reports;
    std::vector<int> report_source;  // source index (into the run list) of each report's first blind spot
};

TriangleSummary triangle_summary(const Classifier& model, const std::vector<Traversal>& runs, int subdivisions,
                                 const std::vector<double>& deltas = kDefaultDeltas);

// Source -> blind spot paths.
struct PathSummary {
    MeanStd mean_confidence;
    MeanStd min_confidence;
    std::vector<PathProfile> profiles;
};

PathSummary path_summary(const Classifier& model, const std::vector<Traversal>& runs, int samples);

struct AttackCompareRow {
    double lambda = 0.0;
    double targeted_pgd = 0.0;
    double feature_targeted = 0.0;
    double lst = 0.0;
};

// Medians per lambda of the confidence along
//   targeted PGD:  lambda x2 + (1 - lambda)(x1 + e12), class y2
//   feature:       same with a feature-matching perturbation, class y2
//   LST:           lambda x_s + (1 - lambda) x_lst,    class y
// so lambda = 0 is always the crafted endpoint.
struct AttackCompare {
    std::vector<AttackCompareRow> rows;
    std::vector<PathProfile> pgd;
    std::vector<PathProfile> feature;
    std::vector<PathProfile> lst;
};

AttackCompare attack_compare(const Classifier& model, const std::vector<Pair>& pairs, const LSTConfig& lst_config,
                             const AttackConfig& attack, const std::string& feature_layer, int samples, int jobs = 1);

// ---------------------------------------------------------------------------
// Hyperparameter sweeps.

enum class SweepAxis { Iterations, Eta, Epsilon, EtaAtM, EpsilonAtM };

SweepAxis parse_sweep_axis(const std::string& name);  // m, eta, eps, eta@m, eps@m
std::string to_string(SweepAxis axis);

// Config for one sweep value; the @m axes run at m = 100.
LSTConfig sweep_config(const LSTConfig& base, SweepAxis axis, double value);

struct SweepRow {
    double value = 0.0;
    LSTConfig config;
    DistanceReport distances;
    TriangleSummary triangles;
    int guard_stops = 0;
};

std::vector<SweepRow> sweep(const Classifier& model, const std::vector<Pair>& pairs, const LSTConfig& base,
                            SweepAxis axis, const std::vector<double>& values, const std::string& layer,
                            int subdivisions, int jobs = 1);

// ---------------------------------------------------------------------------
// Analytic checks.

struct TheoryCheck {
    std::string name;
    double value = 0.0;
    double reference = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

// LST settings for linear models: no parallel correction (eps = 0), eta = 0.5,
// m = 100, no pixel box and no early stop, so the output converges to the
// level-set projection of the target.
LSTConfig exact_linear_config();

std::vector<TheoryCheck> theory_checks(int dimension, std::uint64_t seed, int rayleigh_samples = 100000);

// ---------------------------------------------------------------------------
// Output helpers.

// manifest.txt: "toolkit_version = ..." followed by the resolved config, one
// sorted `key = value` line each.
void write_manifest(const std::filesystem::path& dir, const std::map<std::string, std::string>& config);

std::string summary_cell(const MeanStd& m);  // "mean ± std" at 4 decimals

}  // namespace lst
