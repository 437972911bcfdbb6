// termclust command-line tool: synth, train, embed, index, eval, sweep,
// cluster, link.

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "termclust/binary_io.hpp"
#include "termclust/clustereval.hpp"
#include "termclust/encoder.hpp"
#include "termclust/error.hpp"
#include "termclust/simd.hpp"
#include "termclust/simindex.hpp"
#include "termclust/trainer.hpp"
#include "termclust/vocab.hpp"

#ifndef TERMCLUST_VERSION
#define TERMCLUST_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace termclust;

namespace {

struct Common {
    std::uint64_t seed = 42;
    unsigned threads = 0;
    bool deterministic = false;
    bool raw_surfaces = false;
    std::string config_path;
    std::string manifest_path;

    unsigned resolved_threads() const {
        if (deterministic) return 1;
        if (threads > 0) return threads;
        return std::max(1u, std::thread::hardware_concurrency());
    }
};

struct Manifest {
    std::string command;
    json config = json::object();
    json inputs = json::object();
    json outputs = json::object();
    json results = json::object();
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

    void input(const std::string& path) { inputs[path] = io::hex64(io::file_checksum(path)); }
    void output(const std::string& path) { outputs[path] = io::hex64(io::file_checksum(path)); }
};

void log(const std::string& line) { std::cerr << "termclust: " << line << "\n"; }

// Shortest text that reads back to the same double.
std::string exact(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Writes next to `path` and renames into place.
void write_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail_validation("cannot open for writing: " + tmp.string());
        out << content;
        out.flush();
        if (!out) fail_validation("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) fail_validation("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

const std::set<std::string> kFlags{"deterministic", "raw-surfaces"};

// Every option of the subcommand, defaults materialized.
json resolved_options(const CLI::App& sub) {
    json j = json::object();
    for (const CLI::Option* opt : sub.get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "config" || name == "manifest") continue;
        if (opt->count() > 0) {
            const auto& res = opt->results();
            if (opt->get_expected_max() > 1 || res.size() > 1) {
                json arr = json::array();
                for (const auto& r : res) arr.push_back(r);
                j[name] = arr;
            } else if (kFlags.count(name)) {
                j[name] = true;
            } else {
                j[name] = res.empty() ? "" : res.back();
            }
        } else {
            j[name] = kFlags.count(name) ? json(false) : json(opt->get_default_str());
        }
    }
    return j;
}

void write_manifest(Manifest& m, const Common& common, const fs::path& primary_output) {
    json j;
    j["command"] = m.command;
    j["tool_version"] = TERMCLUST_VERSION;
    j["simd"] = std::string(simd::isa_name(simd::kernels().isa));
    j["rng_seed"] = common.seed;
    j["deterministic"] = common.deterministic;
    j["threads"] = common.resolved_threads();
    j["config"] = m.config;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    j["results"] = m.results;
    j["timings"] = {{"finished_utc", utc_now()},
                    {"wall_seconds",
                     std::chrono::duration<double>(std::chrono::steady_clock::now() - m.started).count()}};
    fs::path path = common.manifest_path;
    if (path.empty()) {
        path = primary_output;
        path += ".manifest.json";
    }
    write_atomic(path, j.dump(2) + "\n");
}

std::string scalar_arg(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_number_float()) return exact(v.get<double>());
    fail_validation("config: unsupported value " + v.dump());
}

// Expands the subcommand's section of a JSON config into flags placed before
// the command-line flags, so the command line wins under take-last.
std::vector<std::string> inject_config(const std::vector<std::string>& args) {
    if (args.empty()) return args;
    std::string config_path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (config_path.empty()) return args;
    std::ifstream in(config_path);
    if (!in) fail_validation("cannot open config file: " + config_path);
    json cfg;
    try {
        cfg = json::parse(in);
    } catch (const json::exception& e) {
        fail_validation("config " + config_path + ": " + e.what());
    }
    if (!cfg.is_object()) fail_validation("config " + config_path + ": expected a JSON object");
    const std::string& command = args[0];
    std::vector<std::string> injected{command};
    auto add_section = [&](const json& section, const std::string& where) {
        if (!section.is_object()) fail_validation("config " + config_path + ": section '" + where + "' is not an object");
        for (const auto& [key, value] : section.items()) {
            const std::string flag = "--" + key;
            if (value.is_boolean()) {
                if (value.get<bool>()) injected.push_back(flag);
            } else if (value.is_array()) {
                for (const auto& v : value) {
                    injected.push_back(flag);
                    injected.push_back(scalar_arg(v));
                }
            } else {
                injected.push_back(flag);
                injected.push_back(scalar_arg(value));
            }
        }
    };
    if (cfg.contains("common")) add_section(cfg["common"], "common");
    if (cfg.contains(command)) add_section(cfg[command], command);
    injected.insert(injected.end(), args.begin() + 1, args.end());
    return injected;
}

void add_common(CLI::App& sub, Common& c, bool seeded) {
    if (seeded) sub.add_option("--seed", c.seed, "Random seed for every stochastic step");
    sub.add_option("--threads", c.threads, "Worker threads (0 = all cores)");
    sub.add_flag("--deterministic", c.deterministic,
                 "Single-threaded, no wall-clock values in artifacts");
    sub.add_option("--config", c.config_path, "JSON config file; command-line flags override it");
    sub.add_option("--manifest", c.manifest_path, "Run manifest path (default: <output>.manifest.json)");
}

Vocabulary read_vocab(const std::string& path, const Common& c, Manifest& m) {
    auto v = load_vocabulary(path, !c.raw_surfaces);
    m.input(path);
    log("loaded " + std::to_string(v.size()) + " terms from " + path);
    return v;
}

json report_json(const EvalReport& r) {
    return json{{"theta", r.theta}, {"tp", r.tp},           {"fp", r.fp},         {"fn", r.fn},
                {"tn", r.tn},       {"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}};
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(prec);
    os << v;
    return os.str();
}

NeighborTable read_table_for(const std::string& path, const Vocabulary& vocab, Manifest& m) {
    auto t = load_neighbor_table(path);
    m.input(path);
    if (t.n != vocab.size())
        fail_data(path + ": table has " + std::to_string(t.n) + " rows but vocabulary has " +
                  std::to_string(vocab.size()) + " terms");
    return t;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    SynthSpec spec;
    std::vector<std::string> kinds{"numeric-qualifier", "suffix-token", "body-part-token", "abbreviation"};
    std::string out;
};

void run_synth(SynthArgs& a, Common& c, Manifest& m) {
    a.spec.rng_seed = c.seed;
    a.spec.variant_kinds.clear();
    for (const auto& k : a.kinds) a.spec.variant_kinds.insert(parse_variant_kind(k));
    const auto s = synth_vocabulary(a.spec);
    write_vocabulary(a.out, s.vocab);
    m.output(a.out);
    m.results = {{"terms", s.vocab.size()},
                 {"concepts", s.clusters.cluster_count()},
                 {"singletons", s.clusters.singleton_count}};
    log("wrote " + std::to_string(s.vocab.size()) + " terms in " + std::to_string(s.clusters.cluster_count()) +
        " concepts to " + a.out);
}

struct TrainArgs {
    std::string vocab;
    std::string out;
    std::string metrics;
    std::string refresh = "2000";
    std::string positive_mode = "k-positives";
    TrainConfig cfg;
};

void run_train(TrainArgs& a, Common& c, Manifest& m) {
    auto& cfg = a.cfg;
    cfg.rng_seed = c.seed;
    cfg.threads = c.resolved_threads();
    if (a.refresh == "never") {
        cfg.refresh_interval_steps.reset();
    } else {
        try {
            std::size_t used = 0;
            const long long v = std::stoll(a.refresh, &used);
            if (used != a.refresh.size() || v < 1) throw std::invalid_argument(a.refresh);
            cfg.refresh_interval_steps = static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            fail_validation("--refresh-steps must be a positive integer or 'never', got '" + a.refresh + "'");
        }
    }
    if (a.positive_mode == "k-positives") cfg.positive_mode = PositiveMode::k_positives;
    else if (a.positive_mode == "single-positive") cfg.positive_mode = PositiveMode::single_positive;
    else fail_validation("--positive-mode must be k-positives or single-positive");
    cfg.validate();

    const auto vocab = read_vocab(a.vocab, c, m);
    const auto clusters = concept_clusters(vocab);
    if (a.metrics.empty()) a.metrics = a.out + ".metrics.jsonl";
    std::ofstream metrics(a.metrics, std::ios::binary | std::ios::trunc);
    if (!metrics) fail_validation("cannot open metrics log: " + a.metrics);

    TrainHooks hooks;
    hooks.abort_checkpoint = fs::path(a.out + ".abort");
    hooks.on_metrics = [&](const MetricsRecord& r) {
        MetricsRecord line = r;
        if (c.deterministic) line.elapsed_seconds = 0.0;
        metrics << to_json_line(line) << "\n";
        metrics.flush();
        if (r.event == "log")
            log("step " + std::to_string(r.step) + " loss " + fmt(r.loss) + " lr " + fmt(r.lr, 6) +
                " same-concept negatives " + fmt(r.hard_neg_same_cui_fraction, 3));
        else
            log(r.event + " at step " + std::to_string(r.step) + ": probe loss " + fmt(r.probe_loss) +
                ", table same-concept fraction " + fmt(r.hard_neg_same_cui_fraction, 3) + ", refreshes " +
                std::to_string(r.refresh_count));
    };
    log("training " + std::to_string(cfg.total_steps) + " steps, b=" + std::to_string(cfg.b) +
        " k=" + std::to_string(cfg.effective_k()) + " m=" + std::to_string(cfg.m) + " refresh=" + a.refresh);
    const auto result = train(vocab, clusters, cfg, hooks);
    metrics.close();
    save_checkpoint(a.out, result.params, &result.optimizer);
    m.output(a.out);
    m.output(a.metrics);
    m.results = {{"probe_loss_initial", result.probe_loss_initial},
                 {"probe_loss_final", result.probe_loss_final},
                 {"refresh_count", result.metrics.empty() ? 0 : result.metrics.back().refresh_count}};
    log("probe loss " + fmt(result.probe_loss_initial) + " -> " + fmt(result.probe_loss_final));
}

struct EmbedArgs {
    std::string vocab, checkpoint, out;
};

void run_embed(EmbedArgs& a, Common& c, Manifest& m) {
    const auto vocab = read_vocab(a.vocab, c, m);
    const auto ck = load_checkpoint(a.checkpoint);
    m.input(a.checkpoint);
    const auto emb = encode_batch(ck.params, vocab.surfaces(), c.resolved_threads());
    save_embeddings(a.out, emb);
    m.output(a.out);
    m.results = {{"n", emb.rows()}, {"dim", emb.cols()}};
    log("wrote " + std::to_string(emb.rows()) + " x " + std::to_string(emb.cols()) + " embeddings to " + a.out);
}

struct IndexArgs {
    std::string embeddings, out;
    std::size_t m = 30;
};

void run_index(IndexArgs& a, Common& c, Manifest& m) {
    const auto emb = load_embeddings(a.embeddings);
    m.input(a.embeddings);
    if (emb.rows() < 2 || a.m < 1 || a.m > emb.rows() - 1)
        fail_validation("--m must be in [1, n-1] for n=" + std::to_string(emb.rows()));
    const auto t0 = std::chrono::steady_clock::now();
    const auto table = build_neighbor_table(emb, a.m, {c.resolved_threads()});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_neighbor_table(a.out, table);
    m.output(a.out);
    m.results = {{"n", table.n}, {"m", table.m}, {"checksum", io::hex64(table.checksum())}};
    log("indexed " + std::to_string(table.n) + " terms, m=" + std::to_string(table.m) + " in " + fmt(secs, 2) + "s");
}

struct EvalArgs {
    std::string table, vocab, out;
    double theta = 0.8;
    std::uint64_t budget = 100'000'000;
};

void run_eval(EvalArgs& a, Common& c, Manifest& m) {
    const auto vocab = read_vocab(a.vocab, c, m);
    const auto table = read_table_for(a.table, vocab, m);
    EvalOptions opt;
    opt.cluster_pair_budget = a.budget;
    opt.threads = c.resolved_threads();
    opt.warn = [](const std::string& w) { log("warning: " + w); };
    const auto r = evaluate(table, concept_clusters(vocab), a.theta, opt);
    const auto j = report_json(r);
    write_atomic(a.out, j.dump(2) + "\n");
    m.output(a.out);
    m.results = j;
    std::cout << "theta=" << fmt(r.theta, 2) << " precision=" << fmt(r.precision) << " recall=" << fmt(r.recall)
              << " f1=" << fmt(r.f1) << "\n";
}

struct SweepArgs {
    std::string table, vocab, out, csv;
    double begin = 0.50, end = 0.99, step = 0.01;
    std::uint64_t budget = 100'000'000;
};

void run_sweep(SweepArgs& a, Common& c, Manifest& m) {
    const auto vocab = read_vocab(a.vocab, c, m);
    const auto table = read_table_for(a.table, vocab, m);
    const auto grid = theta_grid(a.begin, a.end, a.step);
    EvalOptions opt;
    opt.cluster_pair_budget = a.budget;
    opt.threads = c.resolved_threads();
    opt.warn = [](const std::string& w) { log("warning: " + w); };
    const auto s = sweep(table, concept_clusters(vocab), grid, opt);

    json arr = json::array();
    std::ostringstream csv;
    csv << "theta,precision,recall,f1\n";
    for (const auto& r : s.reports) {
        arr.push_back(report_json(r));
        csv << exact(r.theta) << ',' << exact(r.precision) << ',' << exact(r.recall) << ',' << exact(r.f1) << '\n';
    }
    if (a.csv.empty()) a.csv = fs::path(a.out).replace_extension(".csv").string();
    write_atomic(a.out, arr.dump(2) + "\n");
    write_atomic(a.csv, csv.str());
    m.output(a.out);
    m.output(a.csv);
    const auto& best = s.reports[s.best_index];
    m.results = {{"best_theta", s.best_theta}, {"best", report_json(best)}};
    std::cout << "theta0=" << fmt(s.best_theta, 2) << " precision=" << fmt(best.precision)
              << " recall=" << fmt(best.recall) << " f1=" << fmt(best.f1) << "\n";
}

struct ClusterArgs {
    std::string table, vocab, out;
    double theta = 0.8;
};

void run_cluster(ClusterArgs& a, Common& c, Manifest& m) {
    const auto vocab = read_vocab(a.vocab, c, m);
    const auto table = read_table_for(a.table, vocab, m);
    const auto pairs = predict_pairs(table, a.theta);
    const auto ids = connected_components(pairs, table.n);
    std::string body;
    for (std::size_t t = 0; t < ids.size(); ++t)
        body += std::to_string(t) + '\t' + std::to_string(ids[t]) + '\t' + vocab[static_cast<TermId>(t)].surface + '\n';
    write_atomic(a.out, body);
    m.output(a.out);
    std::size_t count = 0;
    for (std::size_t t = 0; t < ids.size(); ++t) count += ids[t] == t;
    m.results = {{"predicted_pairs", pairs.size()}, {"clusters", count}};
    log(std::to_string(pairs.size()) + " predicted pairs, " + std::to_string(count) + " clusters");
}

struct LinkArgs {
    std::string checkpoint, dictionary, queries, out;
    std::vector<std::size_t> ks{1, 5};
};

void run_link(LinkArgs& a, Common& c, Manifest& m) {
    const auto dict = read_vocab(a.dictionary, c, m);
    if (dict.size() == 0) fail_data(a.dictionary + ": dictionary is empty");
    const auto queries_vocab = read_vocab(a.queries, c, m);
    const auto ck = load_checkpoint(a.checkpoint);
    m.input(a.checkpoint);
    std::sort(a.ks.begin(), a.ks.end());
    a.ks.erase(std::unique(a.ks.begin(), a.ks.end()), a.ks.end());
    if (a.ks.empty() || a.ks.front() == 0) fail_validation("--ks values must be >= 1");

    const unsigned threads = c.resolved_threads();
    const auto dict_emb = encode_batch(ck.params, dict.surfaces(), threads);
    const auto query_emb = encode_batch(ck.params, queries_vocab.surfaces(), threads);
    std::vector<std::string> dict_concepts;
    for (const auto& t : dict.terms()) dict_concepts.push_back(t.concept_id);
    std::vector<LinkingQuery> queries;
    for (std::size_t i = 0; i < queries_vocab.size(); ++i)
        queries.push_back({std::vector<float>(query_emb.row(i).begin(), query_emb.row(i).end()),
                           queries_vocab[static_cast<TermId>(i)].concept_id});
    const auto r = linking_accuracy(dict_emb, dict_concepts, queries, a.ks,
                                    [](const std::string& w) { log("warning: " + w); });
    json acc = json::object();
    for (std::size_t i = 0; i < r.ks.size(); ++i) acc["acc@" + std::to_string(r.ks[i])] = r.accuracy[i];
    json j{{"queries", r.queries}, {"missing_gold", r.missing_gold}, {"accuracy", acc}};
    write_atomic(a.out, j.dump(2) + "\n");
    m.output(a.out);
    m.results = j;
    for (std::size_t i = 0; i < r.ks.size(); ++i)
        std::cout << "acc@" << r.ks[i] << "=" << fmt(r.accuracy[i]) << (i + 1 < r.ks.size() ? " " : "\n");
}

int exit_code(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::validation: return 2;
        case ErrorKind::data: return 3;
        case ErrorKind::numeric: return 4;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Term clustering: train hashed n-gram encoders with hard-negative mining and count pairwise "
                 "clustering metrics over all term pairs."};
    app.set_version_flag("--version", TERMCLUST_VERSION);
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    Common common;
    Manifest manifest;
    fs::path primary;

    // synth
    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic vocabulary TSV with hard concept families");
    s->add_option("--concepts", synth.spec.concept_count, "Number of concepts");
    s->add_option("--synonyms-min", synth.spec.synonyms_min, "Fewest surfaces per concept");
    s->add_option("--synonyms-max", synth.spec.synonyms_max, "Most surfaces per concept");
    s->add_option("--hard-fraction", synth.spec.hard_family_fraction, "Share of concepts generated in hard families");
    s->add_option("--variant-kinds", synth.kinds,
                  "Family variant kinds: numeric-qualifier, suffix-token, body-part-token, abbreviation")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
        ->delimiter(',');
    s->add_option("-o,--out", synth.out, "Output vocabulary TSV")->required();
    add_common(*s, common, true);

    // train
    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train encoder parameters with MS loss and neighbor-table mining");
    t->add_option("vocab", tr.vocab, "Vocabulary TSV (concept_id<TAB>surface)")->required()->check(CLI::ExistingFile);
    t->add_option("-o,--out", tr.out, "Checkpoint output")->required();
    t->add_option("--metrics", tr.metrics, "Metrics JSONL (default: <out>.metrics.jsonl)");
    t->add_option("--b", tr.cfg.b, "Anchors per mini-batch");
    t->add_option("--k", tr.cfg.k, "Positives per anchor");
    t->add_option("--m", tr.cfg.m, "Hard negatives per anchor (neighbor table width)");
    t->add_option("--steps", tr.cfg.total_steps, "Parameter updates");
    t->add_option("--accumulation", tr.cfg.accumulation_steps, "Mini-batches accumulated per update");
    t->add_option("--refresh-steps", tr.refresh, "Rebuild the neighbor table every N steps, or 'never'");
    t->add_option("--positive-mode", tr.positive_mode, "k-positives or single-positive (forces k=1)");
    t->add_option("--lr", tr.cfg.peak_lr, "Peak learning rate");
    t->add_option("--warmup", tr.cfg.warmup_steps, "Linear warm-up steps");
    t->add_option("--weight-decay", tr.cfg.weight_decay, "AdamW decoupled weight decay");
    t->add_option("--adam-beta1", tr.cfg.adam_beta1);
    t->add_option("--adam-beta2", tr.cfg.adam_beta2);
    t->add_option("--adam-eps", tr.cfg.adam_eps);
    t->add_option("--alpha", tr.cfg.loss.alpha, "MS loss positive scale");
    t->add_option("--beta", tr.cfg.loss.beta, "MS loss negative scale");
    t->add_option("--lambda", tr.cfg.loss.lambda, "MS loss similarity margin");
    t->add_option("--epsilon", tr.cfg.loss.epsilon, "MS pair-mining slack");
    t->add_option("--dim", tr.cfg.encoder.dim, "Embedding dimension");
    t->add_option("--buckets", tr.cfg.encoder.bucket_count, "Hashed n-gram buckets");
    t->add_option("--ngram-min", tr.cfg.encoder.ngram_min);
    t->add_option("--ngram-max", tr.cfg.encoder.ngram_max);
    t->add_option("--max-chars", tr.cfg.encoder.max_chars, "Code points kept per surface");
    t->add_option("--hash-seed", tr.cfg.encoder.hash_seed);
    t->add_option("--log-interval", tr.cfg.log_interval_steps, "Steps between metrics records");
    t->add_flag("--raw-surfaces", common.raw_surfaces, "Skip NFKC + lowercase normalization");
    add_common(*t, common, true);

    // embed
    EmbedArgs em;
    auto* e = app.add_subcommand("embed", "Encode every vocabulary term into an embedding file");
    e->add_option("vocab", em.vocab, "Vocabulary TSV")->required()->check(CLI::ExistingFile);
    e->add_option("--checkpoint", em.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
    e->add_option("-o,--out", em.out, "Embedding output")->required();
    e->add_flag("--raw-surfaces", common.raw_surfaces, "Skip NFKC + lowercase normalization");
    add_common(*e, common, false);

    // index
    IndexArgs ix;
    auto* x = app.add_subcommand("index", "Build the exact top-m cosine neighbor table");
    x->add_option("embeddings", ix.embeddings, "Embedding file")->required()->check(CLI::ExistingFile);
    x->add_option("--m", ix.m, "Neighbors per term");
    x->add_option("-o,--out", ix.out, "Neighbor table output")->required();
    add_common(*x, common, false);

    // eval
    EvalArgs ev;
    auto* v = app.add_subcommand("eval", "Count TP/FP/FN/TN over all term pairs at one threshold");
    v->add_option("table", ev.table, "Neighbor table file")->required()->check(CLI::ExistingFile);
    v->add_option("--vocab", ev.vocab, "Vocabulary TSV with gold concepts")->required()->check(CLI::ExistingFile);
    v->add_option("--theta", ev.theta, "Similarity threshold (strict >)");
    v->add_option("--cluster-pair-budget", ev.budget, "Warn when the largest |C|^2 exceeds this");
    v->add_option("-o,--out", ev.out, "Report JSON")->required();
    v->add_flag("--raw-surfaces", common.raw_surfaces, "Skip NFKC + lowercase normalization");
    add_common(*v, common, false);

    // sweep
    SweepArgs sw;
    auto* w = app.add_subcommand("sweep", "Evaluate a threshold grid and report the best F1 threshold");
    w->add_option("table", sw.table, "Neighbor table file")->required()->check(CLI::ExistingFile);
    w->add_option("--vocab", sw.vocab, "Vocabulary TSV with gold concepts")->required()->check(CLI::ExistingFile);
    w->add_option("--grid-begin", sw.begin, "First threshold");
    w->add_option("--grid-end", sw.end, "Last threshold (inclusive)");
    w->add_option("--grid-step", sw.step, "Threshold step");
    w->add_option("--cluster-pair-budget", sw.budget, "Warn when the largest |C|^2 exceeds this");
    w->add_option("-o,--out", sw.out, "Reports JSON array")->required();
    w->add_option("--csv", sw.csv, "theta,precision,recall,f1 CSV (default: <out> with .csv)");
    w->add_flag("--raw-surfaces", common.raw_surfaces, "Skip NFKC + lowercase normalization");
    add_common(*w, common, false);

    // cluster
    ClusterArgs cl;
    auto* k = app.add_subcommand("cluster", "Write predicted clusters (connected components at theta)");
    k->add_option("table", cl.table, "Neighbor table file")->required()->check(CLI::ExistingFile);
    k->add_option("--vocab", cl.vocab, "Vocabulary TSV")->required()->check(CLI::ExistingFile);
    k->add_option("--theta", cl.theta, "Similarity threshold (strict >)");
    k->add_option("-o,--out", cl.out, "Output TSV (term_id<TAB>cluster_id<TAB>surface)")->required();
    k->add_flag("--raw-surfaces", common.raw_surfaces, "Skip NFKC + lowercase normalization");
    add_common(*k, common, false);

    // link
    LinkArgs ln;
    auto* l = app.add_subcommand("link", "Acc@k of query terms against a concept dictionary");
    l->add_option("--checkpoint", ln.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
    l->add_option("--dictionary", ln.dictionary, "Dictionary TSV (concept_id<TAB>surface)")
        ->required()
        ->check(CLI::ExistingFile);
    l->add_option("--queries", ln.queries, "Query TSV (gold_concept_id<TAB>surface)")
        ->required()
        ->check(CLI::ExistingFile);
    l->add_option("--ks", ln.ks, "Cutoffs, comma separated")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
        ->delimiter(',');
    l->add_option("-o,--out", ln.out, "Accuracy JSON")->required();
    l->add_flag("--raw-surfaces", common.raw_surfaces, "Skip NFKC + lowercase normalization");
    add_common(*l, common, false);

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = inject_config(args);
        std::reverse(args.begin(), args.end());  // CLI11 parses a reversed vector
        app.parse(args);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    } catch (const Error& err) {
        std::cerr << "termclust: error: " << err.what() << "\n";
        return exit_code(err);
    }

    CLI::App* sub = app.get_subcommands().front();
    manifest.command = sub->get_name();
    manifest.config = resolved_options(*sub);
    try {
        if (sub == s) run_synth(synth, common, manifest), primary = synth.out;
        else if (sub == t) run_train(tr, common, manifest), primary = tr.out;
        else if (sub == e) run_embed(em, common, manifest), primary = em.out;
        else if (sub == x) run_index(ix, common, manifest), primary = ix.out;
        else if (sub == v) run_eval(ev, common, manifest), primary = ev.out;
        else if (sub == w) run_sweep(sw, common, manifest), primary = sw.out;
        else if (sub == k) run_cluster(cl, common, manifest), primary = cl.out;
        else if (sub == l) run_link(ln, common, manifest), primary = ln.out;
        write_manifest(manifest, common, primary);
    } catch (const Error& err) {
        std::cerr << "termclust: error: " << err.what() << "\n";
        return exit_code(err);
    } catch (const std::exception& err) {
        std::cerr << "termclust: internal error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
