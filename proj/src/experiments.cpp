#include "lst/experiments.hpp"

#include "lst/analytic.hpp"
#include "lst/binary_io.hpp"
#include "lst/checkpoint.hpp"
#include "lst/file_util.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

namespace lst {

namespace {

// Fisher-Yates with plain modular draws: the permutation depends only on the
// engine output, not on the standard library's distribution implementation.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
    return idx;
}

bool correctly_classified(const Classifier& model, const Sample& s) { return predicted_class(model, s.input) == s.label; }

}  // namespace

double median(std::vector<double> values) {
    if (values.empty()) throw DomainError("median of an empty list");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

TrainConfig blobs_train_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.seed = seed;
    return cfg;
}

BlobsModel blobs_mlp(std::uint64_t seed, const std::optional<AdversarialTraining>& adversarial) {
    BlobDataset data = generate_blobs(BlobDatasetSpec::checkerboard(seed));
    TrainConfig cfg = blobs_train_config(seed);
    cfg.adversarial = adversarial;
    TrainResult tr = train(Architecture::mlp(2, {64, 64}, 4), cfg, data.train);
    return {std::move(tr.model), std::move(data), std::move(tr.log)};
}

std::vector<Pair> select_pairs(const Classifier& model, const Dataset& pool, int sources, int targets_per_source,
                               std::uint64_t seed) {
    if (sources < 1 || targets_per_source < 1) throw DomainError("pair selection needs positive counts");
    std::mt19937_64 rng(seed);
    const auto order = shuffled_indices(pool.size(), rng);
    std::vector<Pair> pairs;
    int taken = 0;
    for (std::size_t si : order) {
        if (taken == sources) break;
        if (!correctly_classified(model, pool[si])) continue;
        ++taken;
        int found = 0;
        for (std::size_t ti : shuffled_indices(pool.size(), rng)) {
            if (found == targets_per_source) break;
            if (pool[ti].label == pool[si].label) continue;
            pairs.push_back({si, ti, pool[si].input, pool[ti].input, pool[si].label, pool[ti].label});
            ++found;
        }
        if (found < targets_per_source) throw LookupError("not enough other-class targets in the pool");
    }
    if (taken < sources) throw LookupError("not enough correctly classified sources in the pool");
    return pairs;
}

std::vector<Pair> class_grid_pairs(const Classifier& model, const Dataset& pool, int classes, std::uint64_t seed) {
    if (classes < 1 || classes > model.num_classes()) throw IndexError("grid class count out of range");
    std::mt19937_64 rng(seed);
    const auto order = shuffled_indices(pool.size(), rng);
    std::vector<std::size_t> rep(static_cast<std::size_t>(classes), pool.size());
    for (std::size_t i : order) {
        const int c = pool[i].label;
        if (c < 0 || c >= classes || rep[static_cast<std::size_t>(c)] != pool.size()) continue;
        if (correctly_classified(model, pool[i])) rep[static_cast<std::size_t>(c)] = i;
    }
    for (int c = 0; c < classes; ++c) {
        if (rep[static_cast<std::size_t>(c)] == pool.size()) {
            throw LookupError("no correctly classified sample of class " + std::to_string(c));
        }
    }
    std::vector<Pair> pairs;
    for (std::size_t si : rep)
        for (std::size_t ti : rep) pairs.push_back({si, ti, pool[si].input, pool[ti].input, pool[si].label, pool[ti].label});
    return pairs;
}

std::vector<Traversal> traverse_pairs(const Classifier& model, const std::vector<Pair>& pairs,
                                      const LSTConfig& config, int jobs) {
    config.validate();
    std::vector<Traversal> runs(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t i) {
        Traversal& r = runs[i];
        r.pair = pairs[i];
        r.label = predicted_class(model, r.pair.source);
        r.result = traverse(model, r.pair.source, r.label, r.pair.target, config);
    });
    return runs;
}

DistanceReport traversal_distances(const Classifier& model, const std::vector<Traversal>& runs,
                                   const std::string& layer) {
    std::vector<Tensor> outputs, targets;
    for (const Traversal& r : runs) {
        outputs.push_back(r.result.output);
        targets.push_back(r.pair.target);
    }
    return distance_report(model, outputs, targets, layer);
}

namespace {

constexpr char kBundleMagic[8] = {'L', 'S', 'T', 'B', 'N', 'D', 'L', '\0'};
constexpr std::uint32_t kBundleVersion = 1;

}  // namespace

std::string encode_bundle(const std::vector<Traversal>& runs) {
    std::string out(kBundleMagic, sizeof kBundleMagic);
    binary::put<std::uint32_t>(out, kBundleVersion);
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(runs.size()));
    for (const Traversal& r : runs) {
        binary::put<std::uint64_t>(out, r.pair.source_index);
        binary::put<std::uint64_t>(out, r.pair.target_index);
        binary::put<std::int32_t>(out, r.pair.source_label);
        binary::put<std::int32_t>(out, r.pair.target_label);
        binary::put<std::int32_t>(out, r.label);
        binary::put<std::uint8_t>(out, static_cast<std::uint8_t>(r.result.termination));
        binary::put<std::int32_t>(out, r.result.iterations);
        binary::put<double>(out, r.result.source_confidence);
        binary::put<double>(out, r.result.output_confidence);
        binary::put_tensor(out, r.pair.source);
        binary::put_tensor(out, r.pair.target);
        binary::put_tensor(out, r.result.output);
    }
    binary::put<std::uint64_t>(out, fnv1a64(out.data(), out.size()));
    return out;
}

std::vector<Traversal> decode_bundle(const std::string& bytes) {
    binary::Reader in(bytes);
    if (in.take(sizeof kBundleMagic) != std::string_view(kBundleMagic, sizeof kBundleMagic)) {
        throw FormatError("not a blind-spot bundle (bad magic bytes)");
    }
    const auto version = in.get<std::uint32_t>();
    if (version != kBundleVersion) throw FormatError("unsupported bundle version " + std::to_string(version));
    const std::size_t body = bytes.size() - sizeof(std::uint64_t);
    if (bytes.size() < sizeof(std::uint64_t) + sizeof kBundleMagic + 8) throw FormatError("truncated bundle");
    binary::Reader tail(std::string_view(bytes).substr(body));
    if (tail.get<std::uint64_t>() != fnv1a64(bytes.data(), body)) throw FormatError("bundle digest mismatch");

    const auto count = in.get<std::uint32_t>();
    std::vector<Traversal> runs;
    for (std::uint32_t i = 0; i < count; ++i) {
        Traversal r;
        r.pair.source_index = in.get<std::uint64_t>();
        r.pair.target_index = in.get<std::uint64_t>();
        r.pair.source_label = in.get<std::int32_t>();
        r.pair.target_label = in.get<std::int32_t>();
        r.label = in.get<std::int32_t>();
        const auto term = in.get<std::uint8_t>();
        if (term > static_cast<std::uint8_t>(Termination::ConfidenceGuard)) throw FormatError("bad termination code");
        r.result.termination = static_cast<Termination>(term);
        r.result.iterations = in.get<std::int32_t>();
        r.result.source_confidence = in.get<double>();
        r.result.output_confidence = in.get<double>();
        r.pair.source = binary::get_tensor(in);
        r.pair.target = binary::get_tensor(in);
        r.result.output = binary::get_tensor(in);
        runs.push_back(std::move(r));
    }
    if (in.position() != body) throw FormatError("trailing bytes before bundle digest");
    return runs;
}

TriangleSummary triangle_summary(const Classifier& model, const std::vector<Traversal>& runs, int subdivisions,
                                 const std::vector<double>& deltas) {
    TriangleSummary s;
    s.deltas = deltas;
    for (std::size_t a = 0; a < runs.size(); ++a) {
        for (std::size_t b = a + 1; b < runs.size(); ++b) {
            if (runs[a].pair.source_index != runs[b].pair.source_index) continue;
            TriangleSpec spec{runs[a].pair.source, runs[a].result.output, runs[b].result.output, subdivisions};
            s.reports.push_back(triangle_report(model, runs[a].label, spec, deltas));
            s.report_source.push_back(static_cast<int>(a));
        }
    }
    std::vector<double> means;
    for (const auto& r : s.reports) means.push_back(r.mean_confidence);
    s.mean_confidence = mean_std(means);
    for (std::size_t d = 0; d < deltas.size(); ++d) {
        std::vector<double> f;
        for (const auto& r : s.reports) f.push_back(r.fractions[d]);
        s.fractions.push_back(mean_std(f));
    }
    return s;
}

PathSummary path_summary(const Classifier& model, const std::vector<Traversal>& runs, int samples) {
    PathSummary s;
    std::vector<double> means, mins;
    for (const Traversal& r : runs) {
        s.profiles.push_back(path_confidence_profile(model, r.label, PathSpec{r.pair.source, r.result.output, samples}));
        means.push_back(s.profiles.back().mean);
        mins.push_back(s.profiles.back().min);
    }
    s.mean_confidence = mean_std(means);
    s.min_confidence = mean_std(mins);
    return s;
}

AttackCompare attack_compare(const Classifier& model, const std::vector<Pair>& pairs, const LSTConfig& lst_config,
                             const AttackConfig& attack, const std::string& feature_layer, int samples, int jobs) {
    attack.validate();
    lst_config.validate();
    AttackCompare out;
    out.pgd.resize(pairs.size());
    out.feature.resize(pairs.size());
    out.lst.resize(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t i) {
        const Pair& p = pairs[i];
        AttackConfig cfg = attack;
        cfg.seed = attack.seed + i;
        const AttackResult adv = targeted_attack(model, p.source, p.target_label, cfg);
        out.pgd[i] = path_confidence_profile(model, p.target_label, PathSpec{p.target, adv.input, samples});
        const AttackResult feat = feature_targeted_attack(model, p.source, p.target, feature_layer, cfg);
        out.feature[i] = path_confidence_profile(model, p.target_label, PathSpec{p.target, feat.input, samples});
        const int y = predicted_class(model, p.source);
        const LSTResult r = traverse(model, p.source, y, p.target, lst_config);
        out.lst[i] = path_confidence_profile(model, y, PathSpec{p.source, r.output, samples});
    });
    for (int k = 0; k < samples; ++k) {
        auto column = [&](const std::vector<PathProfile>& profiles) {
            std::vector<double> v;
            for (const auto& pr : profiles) v.push_back(pr.confidences[static_cast<std::size_t>(k)]);
            return median(v);
        };
        AttackCompareRow row;
        row.lambda = PathSpec{{}, {}, samples}.lambda(k);
        row.targeted_pgd = column(out.pgd);
        row.feature_targeted = column(out.feature);
        row.lst = column(out.lst);
        out.rows.push_back(row);
    }
    return out;
}

SweepAxis parse_sweep_axis(const std::string& name) {
    if (name == "m") return SweepAxis::Iterations;
    if (name == "eta") return SweepAxis::Eta;
    if (name == "eps") return SweepAxis::Epsilon;
    if (name == "eta@m") return SweepAxis::EtaAtM;
    if (name == "eps@m") return SweepAxis::EpsilonAtM;
    throw ConfigError("unknown sweep axis '" + name + "' (expected m, eta, eps, eta@m or eps@m)");
}

std::string to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::Iterations: return "m";
        case SweepAxis::Eta: return "eta";
        case SweepAxis::Epsilon: return "eps";
        case SweepAxis::EtaAtM: return "eta@m";
        case SweepAxis::EpsilonAtM: return "eps@m";
    }
    return "?";
}

LSTConfig sweep_config(const LSTConfig& base, SweepAxis axis, double value) {
    LSTConfig cfg = base;
    switch (axis) {
        case SweepAxis::Iterations:
            if (value < 1 || value != std::floor(value)) throw ConfigError("m must be a positive integer");
            cfg.max_iterations = static_cast<int>(value);
            break;
        case SweepAxis::Eta: cfg.eta = value; break;
        case SweepAxis::Epsilon: cfg.epsilon = value; break;
        case SweepAxis::EtaAtM:
            cfg.eta = value;
            cfg.max_iterations = 100;
            break;
        case SweepAxis::EpsilonAtM:
            cfg.epsilon = value;
            cfg.max_iterations = 100;
            break;
    }
    cfg.validate();
    return cfg;
}

std::vector<SweepRow> sweep(const Classifier& model, const std::vector<Pair>& pairs, const LSTConfig& base,
                            SweepAxis axis, const std::vector<double>& values, const std::string& layer,
                            int subdivisions, int jobs) {
    std::vector<SweepRow> rows;
    for (double v : values) {
        SweepRow row;
        row.value = v;
        row.config = sweep_config(base, axis, v);
        const auto runs = traverse_pairs(model, pairs, row.config, jobs);
        row.distances = traversal_distances(model, runs, layer);
        row.triangles = triangle_summary(model, runs, subdivisions);
        for (const auto& r : runs) row.guard_stops += r.result.termination == Termination::ConfidenceGuard;
        rows.push_back(std::move(row));
    }
    return rows;
}

LSTConfig exact_linear_config() {
    LSTConfig cfg;
    cfg.max_iterations = 100;
    cfg.eta = 0.5;
    cfg.epsilon = 0.0;
    cfg.clamp_low = -std::numeric_limits<double>::infinity();
    cfg.clamp_high = std::numeric_limits<double>::infinity();
    cfg.early_stop = false;
    return cfg;
}

std::vector<TheoryCheck> theory_checks(int dimension, std::uint64_t seed, int rayleigh_samples) {
    if (dimension < 2) throw DomainError("theory checks need dimension >= 2");
    std::vector<TheoryCheck> checks;
    auto add = [&](std::string name, double value, double reference, double tol, bool passed) {
        checks.push_back({std::move(name), value, reference, tol, passed});
    };
    auto close = [](double a, double b, double tol) { return std::abs(a - b) <= tol; };

    {
        Eigen::Matrix2d a;
        a << 3, 0, 0, 1;
        SvdAnalysis<double> s(a);
        const double lo = min_rayleigh(s).value, hi = max_rayleigh(s).value, k = condition_number(s);
        add("diag(3,1) sigma_min^2", lo, 1.0, 1e-12, close(lo, 1.0, 1e-12));
        add("diag(3,1) sigma_max^2", hi, 9.0, 1e-12, close(hi, 9.0, 1e-12));
        add("diag(3,1) kappa", k, 3.0, 1e-12, close(k, 3.0, 1e-12));
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    {
        const Index d = dimension;
        Eigen::MatrixXd a(d, d);
        for (Index i = 0; i < a.size(); ++i) a(i) = normal(rng);
        SvdAnalysis<double> s(a);
        const double lo = min_rayleigh(s).value, hi = max_rayleigh(s).value;
        double sampled_lo = std::numeric_limits<double>::infinity(), sampled_hi = 0.0;
        for (int n = 0; n < rayleigh_samples; ++n) {
            Eigen::VectorXd v(d);
            for (Index i = 0; i < d; ++i) v(i) = normal(rng);
            const double q = rayleigh_quotient(a, v);
            sampled_lo = std::min(sampled_lo, q);
            sampled_hi = std::max(sampled_hi, q);
        }
        add("random sigma_min^2 <= sampled min", lo, sampled_lo, 1e-9, lo <= sampled_lo + 1e-9);
        add("random sigma_max^2 >= sampled max", hi, sampled_hi, 1e-9, hi + 1e-9 >= sampled_hi);
        const double q_min = rayleigh_quotient(a, min_rayleigh(s).direction);
        const double q_max = rayleigh_quotient(a, max_rayleigh(s).direction);
        add("min direction attains sigma_min^2", q_min, lo, 1e-9 * std::max(1.0, lo), close(q_min, lo, 1e-9 * std::max(1.0, lo)));
        add("max direction attains sigma_max^2", q_max, hi, 1e-9 * std::max(1.0, hi), close(q_max, hi, 1e-9 * std::max(1.0, hi)));
        const Eigen::MatrixXd inv = a.inverse();
        const double norm_a = std::sqrt(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a.transpose() * a).eigenvalues().maxCoeff());
        const double norm_inv =
            std::sqrt(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(inv.transpose() * inv).eigenvalues().maxCoeff());
        const double k = condition_number(s), k_ref = norm_a * norm_inv;
        add("kappa vs |A| |A^-1|", k, k_ref, 1e-8, std::abs(k - k_ref) <= 1e-8 * k_ref);
    }

    {
        const Index d = dimension;
        LinearFunctional f{Eigen::VectorXd(d), normal(rng)};
        for (Index i = 0; i < d; ++i) f.weights(i) = normal(rng) / std::sqrt(static_cast<double>(d));
        Tensor xs(Shape{d}), xt(Shape{d});
        for (Index i = 0; i < d; ++i) {
            xs[i] = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            xt[i] = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        }
        LinearFunctionalClassifier model(f);
        LSTConfig cfg = exact_linear_config();
        const int y = predicted_class(model, xs);
        const LSTResult r = traverse(model, xs, y, xt, cfg);
        const double fs = f(xs.data()), fo = f(r.output.data());
        const double gap = (r.output.data() - level_set_projection(f, xs.data(), xt.data())).norm();
        add("linear LST |f(out) - f(x_s)|", std::abs(fo - fs), 0.0, 1e-10 * (1.0 + std::abs(fs)),
            std::abs(fo - fs) <= 1e-10 * (1.0 + std::abs(fs)));
        add("linear LST |out - projection|", gap, 0.0, 1e-6, gap < 1e-6);
    }
    return checks;
}

void write_manifest(const std::filesystem::path& dir, const std::map<std::string, std::string>& config) {
    std::string text = std::string("toolkit_version = ") + kToolkitVersion + "\n";
    for (const auto& [k, v] : config) text += k + " = " + v + "\n";
    write_file_atomic(dir / "manifest.txt", text);
}

std::string summary_cell(const MeanStd& m) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f ± %.4f", m.mean, m.std);
    return buf;
}

}  // namespace lst
