// dsnc: train, evaluate and benchmark stochastic binary-code classifiers.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dsnc/dsnc.hpp"

namespace {

using namespace dsnc;
using Clock = std::chrono::steady_clock;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonOptions {
    std::string data;
    std::uint64_t seed = 0;
    std::string out;
    std::size_t threads = 1;
    bool max_abs_scale = false;
    std::size_t n_override = 0;
};

struct TrainOptions {
    std::size_t code_size = 16;
    std::size_t batch_size = 100;
    std::size_t epochs = 50;
    double lr = 1e-2;
    std::string estimator = "ste";
    std::size_t reinforce_samples = 1;
    bool reinforce_baseline = false;
    double beta = 0.05;
    double gamma = 0.01;
    bool no_reg = false;
    std::size_t patience = 20;
    bool record_wall_time = false;
    bool no_index = false;
};

struct EvalOptions {
    std::string model;
    std::string split = "test";
    std::vector<std::string> decoders;
    std::size_t mih_substrings = 0;
    std::string report;
    std::size_t queries = 1000;
    bool random_queries = false;
};

// Flags that take no value; everything else in a config file is "--key value".
const std::set<std::string> kBooleanFlags = {"no-reg", "reinforce-baseline", "record-wall-time", "no-index",
                                              "max-abs-scale", "random-queries"};

void make_parent_dirs(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    std::error_code ec;
    if (!parent.empty() && !std::filesystem::create_directories(parent, ec) && ec) {
        throw DataError("cannot create directory " + parent.string() + ": " + ec.message());
    }
}

std::string stem_of(const std::string& path) {
    const std::filesystem::path p(path);
    return (p.parent_path() / p.stem()).string();
}

std::string fmt(double v) { return detail::format_double(v); }

Dataset load_data(const CommonOptions& common) {
    if (common.data.rfind("blobs:", 0) == 0) {
        std::size_t K = 0, n = 0, per = 0;
        double spread = 0.1;
        std::uint64_t seed = common.seed;
        std::stringstream ss(common.data.substr(6));
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) {
                throw DataError("bad blobs parameter '" + item + "'");
            }
            const auto key = item.substr(0, eq);
            const auto value = item.substr(eq + 1);
            try {
                if (key == "K") {
                    K = std::stoul(value);
                } else if (key == "n") {
                    n = std::stoul(value);
                } else if (key == "per") {
                    per = std::stoul(value);
                } else if (key == "spread") {
                    spread = std::stod(value);
                } else if (key == "seed") {
                    seed = std::stoull(value);
                } else {
                    throw DataError("unknown blobs parameter '" + key + "'");
                }
            } catch (const std::logic_error&) {
                throw DataError("bad value for blobs parameter '" + key + "'");
            }
        }
        if (K < 2 || n < 2 || per < 1) {
            throw DataError("blobs needs K>=2, n>=2, per>=1");
        }
        return make_blobs(K, n, per, spread, seed);
    }
    SvmlightOptions opts;
    opts.max_abs_scale = common.max_abs_scale;
    if (common.n_override > 0) {
        opts.n_override = common.n_override;
    }
    return load_svmlight(common.data, opts);
}

const Dataset& pick_split(const Split& split, const std::string& name, const Dataset& all) {
    if (name == "train") {
        return split.train;
    }
    if (name == "validation") {
        return split.validation;
    }
    if (name == "test") {
        return split.test;
    }
    if (name == "all") {
        return all;
    }
    throw ArgumentError("unknown split '" + name + "'");
}

TrainConfig make_config(const CommonOptions& common, const TrainOptions& t) {
    TrainConfig cfg;
    cfg.code_size = t.code_size;
    cfg.batch_size = t.batch_size;
    cfg.epochs = t.epochs;
    cfg.lr = t.lr;
    if (t.estimator == "ste") {
        cfg.estimator = Estimator::ste;
    } else if (t.estimator == "reinforce") {
        cfg.estimator = Estimator::reinforce;
    } else {
        throw ArgumentError("unknown estimator '" + t.estimator + "'");
    }
    cfg.reinforce_samples = t.reinforce_samples;
    cfg.reinforce_baseline = t.reinforce_baseline;
    cfg.seed = common.seed;
    cfg.regularize = !t.no_reg;
    cfg.coeffs.beta = t.beta;
    cfg.coeffs.gamma = t.gamma;
    cfg.patience = t.patience;
    cfg.threads = common.threads;
    cfg.record_wall_time = t.record_wall_time;
    return cfg;
}

class Report {
  public:
    void add(const std::string& key, const std::string& value) { lines_.push_back(key + "=" + value); }
    void add(const std::string& key, double value) { add(key, fmt(value)); }
    void add(const std::string& key, std::size_t value) { add(key, std::to_string(value)); }
    void add_opt(const std::string& key, const std::optional<double>& value) {
        add(key, value ? fmt(*value) : std::string("NA"));
    }

    void add_stats(const std::string& prefix, const CodeStats& s) {
        add_opt(prefix + ".intra_mean", s.intra_mean);
        add_opt(prefix + ".intra_std", s.intra_std);
        add_opt(prefix + ".inter_mean", s.inter_mean);
        add_opt(prefix + ".inter_std", s.inter_std);
        add(prefix + ".distinct_codes", s.distinct_codes);
        add(prefix + ".sampled", std::string(s.sampled ? "true" : "false"));
    }

    void add_dataset(const std::string& prefix, const Dataset& all, const Split& split) {
        add(prefix + ".n", all.n);
        add(prefix + ".K", all.K);
        add(prefix + ".size", all.size());
        add(prefix + ".train", split.train.size());
        add(prefix + ".validation", split.validation.size());
        add(prefix + ".test", split.test.size());
    }

    std::string str() const {
        std::string out;
        for (const auto& l : lines_) {
            out += l + "\n";
        }
        return out;
    }

    void write(const std::string& path) const {
        if (path.empty() || path == "-") {
            std::cout << str();
        } else {
            make_parent_dirs(path);
            write_file_bytes(path, str());
        }
    }

  private:
    std::vector<std::string> lines_;
};

void echo_config(Report& r, const CLI::App& sub) {
    r.add("command", sub.get_name());
    for (const auto* opt : sub.get_options()) {
        const auto name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "config") {
            continue;
        }
        std::string value;
        for (const auto& v : opt->as<std::vector<std::string>>()) {
            value += (value.empty() ? "" : ",") + v;
        }
        if (value.empty()) {
            value = opt->get_default_str();
        }
        if (kBooleanFlags.count(name) != 0) {
            value = opt->count() > 0 ? "true" : "false";
        }
        r.add("config." + name, value);
    }
}

struct Latency {
    double mean_us = 0.0;
    double median_us = 0.0;
};

Latency summarize(std::vector<double> us) {
    Latency l;
    if (us.empty()) {
        return l;
    }
    double total = 0.0;
    for (double v : us) {
        total += v;
    }
    l.mean_us = total / static_cast<double>(us.size());
    std::sort(us.begin(), us.end());
    const std::size_t mid = us.size() / 2;
    l.median_us = us.size() % 2 ? us[mid] : 0.5 * (us[mid - 1] + us[mid]);
    return l;
}

std::optional<Decoder> parse_decoder(const std::string& s) {
    if (s == "linear") {
        return Decoder::linear;
    }
    if (s == "nn" || s == "nn-brute") {
        return Decoder::nn;
    }
    if (s == "mih") {
        return Decoder::mih;
    }
    if (s == "table") {
        return Decoder::table;
    }
    return std::nullopt;
}

// Everything a DSNC evaluation needs: the model, its index, and lazily the
// multi-index and code table.
struct DecodingStack {
    DsncModel model;
    CodeIndex index;
    std::optional<MihIndex> mih;
    std::optional<CodeTable> table;
    bool index_from_file = false;
};

DecodingStack load_stack(const std::string& path, const Split& split, const std::vector<Decoder>& decoders,
                         std::size_t mih_substrings) {
    auto loaded = parse_dsnc(read_file_bytes(path));
    DecodingStack s{std::move(loaded.model), {}, std::nullopt, std::nullopt, loaded.index.has_value()};
    if (split.train.n != s.model.n || split.train.K != s.model.K) {
        throw DataError("model (n=" + std::to_string(s.model.n) + ", K=" + std::to_string(s.model.K) +
                        ") does not match data (n=" + std::to_string(split.train.n) +
                        ", K=" + std::to_string(split.train.K) + ")");
    }
    s.index = loaded.index ? std::move(*loaded.index) : build_index(s.model, split.train);
    for (auto d : decoders) {
        if (d == Decoder::mih && !s.mih) {
            s.mih.emplace(s.index, mih_substrings > 0 ? std::optional<std::size_t>(mih_substrings) : std::nullopt);
        }
        if (d == Decoder::table && !s.table) {
            s.table = enumerate_table(s.model);
        }
    }
    return s;
}

std::vector<Decoder> resolve_decoders(const std::vector<std::string>& names, std::size_t c) {
    std::vector<Decoder> out;
    if (names.empty()) {
        out = {Decoder::linear, Decoder::nn, Decoder::mih};
        if (c <= CodeTable::kMaxCodeSize) {
            out.push_back(Decoder::table);
        }
        return out;
    }
    for (const auto& n : names) {
        const auto d = parse_decoder(n);
        if (!d) {
            throw ArgumentError("unknown decoder '" + n + "'");
        }
        out.push_back(*d);
    }
    return out;
}

// Times decode-only latency per query for one decoder over precomputed codes.
struct DecoderRun {
    std::size_t correct = 0;
    std::vector<double> latencies_us;
    std::size_t candidates_total = 0;
    std::size_t candidates_max = 0;
    double seconds = 0.0;
};

DecoderRun run_decoder(const DecodingStack& s, Decoder d, const std::vector<BinaryCode>& codes,
                       const std::vector<std::uint32_t>& labels) {
    DecoderRun run;
    run.latencies_us.reserve(codes.size());
    const auto start = Clock::now();
    for (std::size_t i = 0; i < codes.size(); ++i) {
        const auto t0 = Clock::now();
        std::size_t predicted = 0;
        std::size_t candidates = 0;
        switch (d) {
        case Decoder::linear:
            predicted = linear_decode(s.model, codes[i]);
            candidates = s.model.K;
            break;
        case Decoder::nn: {
            const auto r = nn_decode(s.index, codes[i]);
            predicted = r.label;
            candidates = r.candidates;
            break;
        }
        case Decoder::mih: {
            const auto r = s.mih->query(s.index, codes[i]);
            predicted = r.label;
            candidates = r.candidates;
            break;
        }
        case Decoder::table:
            predicted = s.table->lookup(codes[i]);
            break;
        }
        const auto t1 = Clock::now();
        run.latencies_us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
        run.candidates_total += candidates;
        run.candidates_max = std::max(run.candidates_max, candidates);
        if (i < labels.size() && predicted == labels[i]) {
            ++run.correct;
        }
    }
    run.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return run;
}

void write_outputs_for_fit(const std::string& out, const std::string& model_bytes,
                           const std::vector<EpochMetrics>& log, const Report& report) {
    make_parent_dirs(out);
    write_file_bytes(out, model_bytes);
    const auto stem = stem_of(out);
    write_file_bytes(stem + ".metrics.csv", metrics_csv(log));
    write_file_bytes(stem + ".report.txt", report.str());
}

int cmd_train(const CLI::App& sub, const CommonOptions& common, const TrainOptions& t) {
    const auto t_start = Clock::now();
    const Dataset all = load_data(common);
    const Split split = split_dataset(all, common.seed);
    const TrainConfig cfg = make_config(common, t);
    auto fitted = train_dsnc(split, cfg);
    const double train_ms = std::chrono::duration<double, std::milli>(Clock::now() - t_start).count();

    const CodeIndex index = build_index(fitted.model, split.train);
    const std::string bytes = serialize_dsnc(fitted.model, t.no_index ? nullptr : &index);

    Report r;
    echo_config(r, sub);
    r.add_dataset("data", all, split);
    r.add("fit.best_epoch", fitted.best_epoch);
    r.add("fit.best_val_acc", fitted.best_val_acc);
    r.add("fit.epochs_run", fitted.log.size());
    const MihIndex mih(index);
    DecoderSet res{&index, &mih, nullptr};
    std::optional<CodeTable> table;
    if (fitted.model.c <= CodeTable::kMaxCodeSize) {
        table = enumerate_table(fitted.model);
        res.table = &*table;
    }
    for (auto d : {Decoder::linear, Decoder::nn, Decoder::mih, Decoder::table}) {
        if (d == Decoder::table && !table) {
            continue;
        }
        r.add("accuracy.test." + to_string(d), evaluate(fitted.model, split.test, d, res, cfg.threads));
    }
    r.add("index.entries", index.size());
    r.add("index.mih_substrings", mih.substrings());
    r.add_stats("codestats.train", code_stats(fitted.model, split.train, {.seed = common.seed}));
    r.add_stats("codestats.test", code_stats(fitted.model, split.test, {.seed = common.seed}));
    r.add("timing.train_wall_ms", train_ms);
    write_outputs_for_fit(common.out, bytes, fitted.log, r);
    std::cout << r.str();
    return kExitOk;
}

int cmd_mlp_train(const CLI::App& sub, const CommonOptions& common, const TrainOptions& t) {
    const auto t_start = Clock::now();
    const Dataset all = load_data(common);
    const Split split = split_dataset(all, common.seed);
    const TrainConfig cfg = make_config(common, t);
    auto fitted = train_mlp(split, cfg);
    const double train_ms = std::chrono::duration<double, std::milli>(Clock::now() - t_start).count();

    Report r;
    echo_config(r, sub);
    r.add_dataset("data", all, split);
    r.add("fit.best_epoch", fitted.best_epoch);
    r.add("fit.best_val_acc", fitted.best_val_acc);
    r.add("fit.epochs_run", fitted.log.size());
    r.add("accuracy.test.mlp", mlp_accuracy(fitted.model, split.test, cfg.threads));
    r.add("timing.train_wall_ms", train_ms);
    write_outputs_for_fit(common.out, serialize_mlp(fitted.model), fitted.log, r);
    std::cout << r.str();
    return kExitOk;
}

int cmd_ecoc_train(const CLI::App& sub, const CommonOptions& common, const TrainOptions& t) {
    const auto t_start = Clock::now();
    const Dataset all = load_data(common);
    const Split split = split_dataset(all, common.seed);
    const TrainConfig cfg = make_config(common, t);
    const EcocModel model = train_ecoc(split, cfg.code_size, cfg);
    const double train_ms = std::chrono::duration<double, std::milli>(Clock::now() - t_start).count();

    Report r;
    echo_config(r, sub);
    r.add_dataset("data", all, split);
    r.add("accuracy.validation.ecoc", ecoc_accuracy(model, split.validation, cfg.threads));
    r.add("accuracy.test.ecoc", ecoc_accuracy(model, split.test, cfg.threads));
    r.add("timing.train_wall_ms", train_ms);
    make_parent_dirs(common.out);
    write_file_bytes(common.out, serialize_ecoc(model));
    write_file_bytes(stem_of(common.out) + ".report.txt", r.str());
    std::cout << r.str();
    return kExitOk;
}

int cmd_eval(const CLI::App& sub, const CommonOptions& common, const EvalOptions& e) {
    const Dataset all = load_data(common);
    const Split split = split_dataset(all, common.seed);
    const Dataset& target = pick_split(split, e.split, all);
    const std::string bytes = read_file_bytes(e.model);

    Report r;
    echo_config(r, sub);
    r.add_dataset("data", all, split);
    r.add("eval.split", e.split);
    r.add("eval.size", target.size());

    switch (detect_model_kind(bytes)) {
    case ModelKind::mlp: {
        const auto m = parse_mlp(bytes);
        r.add("model.kind", std::string("MLP1"));
        r.add("accuracy.mlp", mlp_accuracy(m, target, common.threads));
        r.write(e.report);
        return kExitOk;
    }
    case ModelKind::ecoc: {
        const auto m = parse_ecoc(bytes);
        r.add("model.kind", std::string("ECOC"));
        r.add("accuracy.ecoc", ecoc_accuracy(m, target, common.threads));
        r.write(e.report);
        return kExitOk;
    }
    case ModelKind::dsnc:
        break;
    }

    const auto header = parse_dsnc(bytes);
    const auto decoders = resolve_decoders(e.decoders, header.model.c);
    const auto stack = load_stack(e.model, split, decoders, e.mih_substrings);
    r.add("model.kind", std::string("DSNC"));
    r.add("model.n", stack.model.n);
    r.add("model.c", stack.model.c);
    r.add("model.K", stack.model.K);
    r.add("index.source", std::string(stack.index_from_file ? "file" : "rebuilt-from-train"));
    r.add("index.entries", stack.index.size());
    if (stack.mih) {
        r.add("index.mih_substrings", stack.mih->substrings());
    }

    const auto codes = threshold_codes(stack.model, target, common.threads);
    const auto labels = labels_of(target);
    for (auto d : decoders) {
        const auto run = run_decoder(stack, d, codes, labels);
        const auto name = to_string(d);
        const auto lat = summarize(run.latencies_us);
        r.add("accuracy." + name, static_cast<double>(run.correct) / static_cast<double>(codes.size()));
        r.add("latency." + name + ".mean_us", lat.mean_us);
        r.add("latency." + name + ".median_us", lat.median_us);
        r.add("candidates." + name + ".mean",
              static_cast<double>(run.candidates_total) / static_cast<double>(codes.size()));
        r.add("candidates." + name + ".max", run.candidates_max);
    }
    if (target.size() >= 2) {
        r.add_stats("codestats", code_stats(codes, labels, {.seed = common.seed}));
    }
    r.write(e.report);
    return kExitOk;
}

int cmd_bench(const CLI::App&, const CommonOptions& common, const EvalOptions& e) {
    const Dataset all = load_data(common);
    const Split split = split_dataset(all, common.seed);
    const Dataset& source = pick_split(split, e.split, all);
    const std::string bytes = read_file_bytes(e.model);
    const auto header = parse_dsnc(bytes);
    auto decoders = resolve_decoders(e.decoders, header.model.c);
    const auto stack = load_stack(e.model, split, decoders, e.mih_substrings);

    RandomStream rng(derive_seed(common.seed, {0xbe4cULL}));
    std::vector<BinaryCode> codes;
    std::vector<std::uint32_t> labels;
    codes.reserve(e.queries);
    for (std::size_t q = 0; q < e.queries; ++q) {
        if (e.random_queries) {
            BinaryCode code(stack.model.c);
            for (std::size_t i = 0; i < stack.model.c; ++i) {
                code.set(i, (rng.next_u64() >> 63) != 0);
            }
            codes.push_back(std::move(code));
        } else {
            const auto& ex = source.examples[rng.below(source.size())];
            codes.push_back(threshold_code(encode_probs(stack.model, ex.x).distribution));
            labels.push_back(ex.y);
        }
    }

    std::string csv = "decoder,queries,queries_per_s,mean_latency_us,median_latency_us,mean_candidates,"
                      "max_candidates,index_entries,accuracy\n";
    for (auto d : decoders) {
        const auto run = run_decoder(stack, d, codes, labels);
        const auto lat = summarize(run.latencies_us);
        const double qps = run.seconds > 0.0 ? static_cast<double>(codes.size()) / run.seconds : 0.0;
        const std::string name = d == Decoder::nn ? "nn-brute" : to_string(d);
        csv += name + "," + std::to_string(codes.size()) + "," + fmt(qps) + "," + fmt(lat.mean_us) + "," +
               fmt(lat.median_us) + "," +
               fmt(static_cast<double>(run.candidates_total) / static_cast<double>(codes.size())) + "," +
               std::to_string(run.candidates_max) + "," + std::to_string(stack.index.size()) + "," +
               (labels.empty() ? std::string("NA")
                               : fmt(static_cast<double>(run.correct) / static_cast<double>(codes.size()))) +
               "\n";
    }
    if (common.out.empty() || common.out == "-") {
        std::cout << csv;
    } else {
        make_parent_dirs(common.out);
        write_file_bytes(common.out, csv);
    }
    return kExitOk;
}

int cmd_stats(const CLI::App& sub, const CommonOptions& common, const EvalOptions& e) {
    const Dataset all = load_data(common);
    const Split split = split_dataset(all, common.seed);
    const auto loaded = parse_dsnc(read_file_bytes(e.model));
    Report r;
    echo_config(r, sub);
    r.add_dataset("data", all, split);
    const std::vector<std::string> names =
        e.split == "all" ? std::vector<std::string>{"train", "validation", "test"} : std::vector{e.split};
    for (const auto& name : names) {
        const Dataset& d = pick_split(split, name, all);
        if (d.size() < 2) {
            continue;
        }
        r.add_stats("codestats." + name, code_stats(loaded.model, d, {.seed = common.seed}));
    }
    r.write(e.report);
    return kExitOk;
}

// Reads "key=value" lines and returns "--key value" arguments for every key
// not already present on the command line.
std::vector<std::string> config_args(const std::string& path, const std::vector<std::string>& argv) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open config " + path);
    }
    std::vector<std::string> out;
    std::string line;
    std::size_t line_no = 0;
    const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": expected key=value");
        }
        auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.rfind("--", 0) == 0) {
            key = key.substr(2);
        }
        const auto flag = "--" + key;
        const bool on_cli = std::any_of(argv.begin(), argv.end(), [&](const std::string& a) {
            return a == flag || a.rfind(flag + "=", 0) == 0;
        });
        if (on_cli) {
            continue;
        }
        if (kBooleanFlags.count(key) != 0) {
            if (value == "true" || value == "1" || value == "yes") {
                out.push_back(flag);
            }
            continue;
        }
        out.push_back(flag);
        out.push_back(value);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dsnc: stochastic binary codes for large multi-class classification"};
    app.require_subcommand(1);

    CommonOptions common;
    TrainOptions train;
    EvalOptions eval;
    std::string config_path;

    const auto add_common = [&](CLI::App* sub, bool needs_out) {
        sub->add_option("--data", common.data, "svmlight file (.gz ok) or blobs:K=..,n=..,per=..,spread=..")
            ->required();
        sub->add_option("--seed", common.seed, "seed for splits, initialization and sampling")->capture_default_str();
        auto* out = sub->add_option("--out", common.out, "output path");
        if (needs_out) {
            out->required();
        }
        sub->add_option("--threads", common.threads, "worker threads")->capture_default_str()->check(
            CLI::PositiveNumber);
        sub->add_flag("--max-abs-scale", common.max_abs_scale, "scale each feature by its max |value|");
        sub->add_option("--n", common.n_override, "input dimension override for svmlight data");
        sub->add_option("--config", config_path, "key=value config file; command-line flags win");
    };
    const auto add_train = [&](CLI::App* sub) {
        sub->add_option("--code-size", train.code_size, "code bits (hidden units for mlp-train)")
            ->capture_default_str();
        sub->add_option("--batch-size", train.batch_size)->capture_default_str();
        sub->add_option("--epochs", train.epochs)->capture_default_str();
        sub->add_option("--lr", train.lr, "Adam learning rate")->capture_default_str();
        sub->add_option("--estimator", train.estimator)
            ->capture_default_str()
            ->check(CLI::IsMember({"ste", "reinforce"}));
        sub->add_option("--reinforce-samples", train.reinforce_samples)->capture_default_str();
        sub->add_flag("--reinforce-baseline", train.reinforce_baseline, "leave-one-out baseline for REINFORCE");
        sub->add_option("--beta", train.beta, "initial intra-class weight")->capture_default_str();
        sub->add_option("--gamma", train.gamma, "initial inter-class weight")->capture_default_str();
        sub->add_flag("--no-reg", train.no_reg, "disable intra/inter-class regularization");
        sub->add_option("--patience", train.patience, "validation evaluations without improvement before stopping")
            ->capture_default_str();
        sub->add_flag("--record-wall-time", train.record_wall_time, "fill the wall_ms metrics column");
    };
    const auto add_eval = [&](CLI::App* sub, bool bench) {
        sub->add_option("--model", eval.model, "model file")->required();
        sub->add_option("--split", eval.split, "train, validation, test or all")
            ->capture_default_str()
            ->check(CLI::IsMember({"train", "validation", "test", "all"}));
        sub->add_option("--decoder", eval.decoders, "linear, nn, mih, table (repeatable)");
        sub->add_option("--mih-substrings", eval.mih_substrings, "multi-index substring count (0 = default)");
        if (bench) {
            sub->add_option("--queries", eval.queries, "query workload size")->capture_default_str();
            sub->add_flag("--random-queries", eval.random_queries, "uniform random query codes");
        } else {
            sub->add_option("--report", eval.report, "report path (default stdout)");
        }
    };

    auto* train_cmd = app.add_subcommand("train", "train a DSNC model");
    add_common(train_cmd, true);
    add_train(train_cmd);
    train_cmd->add_flag("--no-index", train.no_index, "omit the code index section from the model file");

    auto* mlp_cmd = app.add_subcommand("mlp-train", "train the MLP baseline");
    add_common(mlp_cmd, true);
    add_train(mlp_cmd);

    auto* ecoc_cmd = app.add_subcommand("ecoc-train", "train the ECOC baseline");
    add_common(ecoc_cmd, true);
    add_train(ecoc_cmd);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a model file");
    add_common(eval_cmd, false);
    add_eval(eval_cmd, false);

    auto* bench_cmd = app.add_subcommand("bench", "decoder latency and candidate counts (CSV)");
    add_common(bench_cmd, false);
    add_eval(bench_cmd, true);

    auto* stats_cmd = app.add_subcommand("stats", "latent code statistics");
    add_common(stats_cmd, false);
    add_eval(stats_cmd, false);

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        for (std::size_t i = 0; i + 1 < args.size(); ++i) {
            if (args[i] == "--config") {
                const auto extra = config_args(args[i + 1], args);
                args.insert(args.end(), extra.begin(), extra.end());
                break;
            }
            if (args[i].rfind("--config=", 0) == 0) {
                const auto extra = config_args(args[i].substr(9), args);
                args.insert(args.end(), extra.begin(), extra.end());
                break;
            }
        }
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }

    try {
        if (*train_cmd) {
            return cmd_train(*train_cmd, common, train);
        }
        if (*mlp_cmd) {
            return cmd_mlp_train(*mlp_cmd, common, train);
        }
        if (*ecoc_cmd) {
            return cmd_ecoc_train(*ecoc_cmd, common, train);
        }
        if (*eval_cmd) {
            return cmd_eval(*eval_cmd, common, eval);
        }
        if (*bench_cmd) {
            return cmd_bench(*bench_cmd, common, eval);
        }
        if (*stats_cmd) {
            return cmd_stats(*stats_cmd, common, eval);
        }
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitUsage;
}
