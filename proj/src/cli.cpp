#include "srcd/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "srcd/errors.hpp"
#include "srcd/glcm.hpp"
#include "srcd/gsr.hpp"
#include "srcd/lsr.hpp"
#include "srcd/png_io.hpp"
#include "srcd/rng.hpp"
#include "srcd/tbsa.hpp"
#include "srcd/trainer.hpp"

namespace srcd::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kDefaultSeed = 17;

enum class LogLevel { Quiet, Info, Debug };
LogLevel g_log_level = LogLevel::Info;

bool log_enabled(LogLevel level) { return static_cast<int>(level) <= static_cast<int>(g_log_level); }

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << text;
}

void emit(const json& doc, const std::string& out_path) {
    const std::string text = doc.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        write_text(out_path, text);
    }
}

json load_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
    return doc;
}

// ---------------------------------------------------------------------------
// glcm
// ---------------------------------------------------------------------------

struct GlcmArgs {
    std::string image;
    GlcmConfig cfg;
    std::string matrix_csv;
};

void run_glcm(const GlcmArgs& args) {
    args.cfg.validate();
    const Image img = read_png(args.image);
    const Glcm g = compute_glcm(to_grayscale(img), args.cfg);

    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", glcm_entropy(g));
    std::cout << "entropy " << buf << "\n";

    if (!args.matrix_csv.empty()) {
        std::string csv;
        for (int i = 0; i < g.levels; ++i) {
            for (int j = 0; j < g.levels; ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", g.at(i, j));
                csv += buf;
                csv += (j + 1 < g.levels) ? ',' : '\n';
            }
        }
        write_text(args.matrix_csv, csv);
    }
}

// ---------------------------------------------------------------------------
// augment
// ---------------------------------------------------------------------------

struct AugmentArgs {
    std::string input_dir;
    std::string output_dir;
    std::string mode = "pair";
    std::uint64_t seed = kDefaultSeed;
    GlcmConfig cfg;
    PatchPolicy policy;
};

json sidecar_json(const AugRecord& rec) {
    return json{
        {"phi", rec.phi},
        {"patch_bounds",
         {{"top", rec.patch_bounds.top},
          {"left", rec.patch_bounds.left},
          {"height", rec.patch_bounds.height},
          {"width", rec.patch_bounds.width}}},
        {"patch_entropy", rec.patch_entropy},
        {"image_entropy", rec.image_entropy},
        {"flipped", rec.flipped},
    };
}

std::size_t worker_count(std::size_t jobs) {
    std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SRCD_THREADS")) {
        char* end = nullptr;
        const long parsed = std::strtol(env, &end, 10);
        if (end != env && parsed >= 1) {
            workers = std::min<std::size_t>(workers, static_cast<std::size_t>(parsed));
        }
    }
    return std::max<std::size_t>(1, std::min(workers, jobs));
}

void run_augment(const AugmentArgs& args) {
    args.cfg.validate();
    args.policy.validate();
    if (!fs::is_directory(args.input_dir)) {
        throw Error("augment: input is not a directory: " + args.input_dir);
    }
    fs::create_directories(args.output_dir);

    std::vector<fs::path> inputs;
    for (const auto& entry : fs::directory_iterator(args.input_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            inputs.push_back(entry.path());
        }
    }
    std::sort(inputs.begin(), inputs.end());
    if (inputs.empty()) throw Error("augment: no .png files in " + args.input_dir);

    const Rng root(args.seed);
    const fs::path out_dir(args.output_dir);

    auto process = [&](const fs::path& in_path) {
        // Per-image stream keyed by file name: results do not depend on the
        // directory contents or on worker scheduling.
        Rng rng = root.split(fnv1a(in_path.filename().string()));
        const Image img = read_png(in_path);
        const std::string stem = in_path.stem().string();

        auto save = [&](const Augmented& aug, const char* tag) {
            write_png(out_dir / (stem + "_" + tag + ".png"), aug.image);
            write_text(out_dir / (stem + "_" + tag + ".json"),
                       sidecar_json(aug.record).dump(2) + "\n");
            if (log_enabled(LogLevel::Debug)) {
                std::cerr << "debug: " << stem << " " << tag << " phi=" << aug.record.phi
                          << " flipped=" << aug.record.flipped << "\n";
            }
        };

        if (args.mode == "weak") {
            save(augment(img, AugMode::Weak, args.policy, args.cfg, rng), "weak");
        } else if (args.mode == "strong") {
            save(augment(img, AugMode::Strong, args.policy, args.cfg, rng), "strong");
        } else {
            const auto [weak, strong] = augment_pair(img, args.policy, args.cfg, rng);
            save(weak, "weak");
            save(strong, "strong");
        }
    };

    const std::size_t workers = worker_count(inputs.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::vector<std::string> errors;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= inputs.size()) return;
            try {
                process(inputs[i]);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                errors.emplace_back(inputs[i].string() + ": " + e.what());
            }
        }
    };

    std::vector<std::thread> threads;
    for (std::size_t w = 0; w + 1 < workers; ++w) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();

    if (!errors.empty()) {
        std::sort(errors.begin(), errors.end());
        throw Error("augment: " + errors.front());
    }
    if (log_enabled(LogLevel::Info)) {
        std::cout << "augmented " << inputs.size() << " image(s)\n";
    }
}

// ---------------------------------------------------------------------------
// graph
// ---------------------------------------------------------------------------

struct GraphArgs {
    std::string features_path;
    std::size_t k = 4;
    double gamma = 0.99;
    std::string out_path;
};

void run_graph(const GraphArgs& args) {
    const json doc = load_json(args.features_path);
    if (!doc.contains("vectors") || !doc.contains("labels") || !doc.contains("domains")) {
        throw Error("graph: features file needs vectors, labels and domains");
    }
    const auto& vectors = doc["vectors"];
    const auto& labels = doc["labels"];
    const auto& domains = doc["domains"];
    if (vectors.size() != labels.size() || vectors.size() != domains.size()) {
        throw Error("graph: vectors, labels and domains must have equal length");
    }

    std::vector<InstanceFeature> v1, v2;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        InstanceFeature f;
        f.vector = vectors[i].get<std::vector<double>>();
        f.label = labels[i].get<int>();
        f.domain_tag = domains[i].get<int>();
        if (f.domain_tag == 1) {
            v1.push_back(std::move(f));
        } else if (f.domain_tag == 2) {
            v2.push_back(std::move(f));
        } else {
            throw Error("graph: domain tags must be 1 or 2");
        }
    }

    std::vector<InstanceFeature> all = v1;
    all.insert(all.end(), v2.begin(), v2.end());
    AttributeWeights weights(args.k, args.gamma);
    weights.ema_update(estimate_attribute_weights(all, args.k));

    const RelationGraph graph = build_local_graph(v1, v2, weights);
    const Matrix features = stack_features(v1, v2);
    const Matrix fused = fuse_local(graph, features);

    json adjacency = json::array();
    for (std::size_t r = 0; r < graph.adjacency.rows(); ++r) {
        adjacency.push_back(std::vector<double>(graph.adjacency.row(r).begin(),
                                                graph.adjacency.row(r).end()));
    }
    json fused_rows = json::array();
    for (std::size_t r = 0; r < fused.rows(); ++r) {
        fused_rows.push_back(std::vector<double>(fused.row(r).begin(), fused.row(r).end()));
    }
    emit(json{{"m", graph.m}, {"n", graph.n}, {"adjacency", adjacency}, {"fused", fused_rows}},
         args.out_path);
}

// ---------------------------------------------------------------------------
// gsr-dump
// ---------------------------------------------------------------------------

struct GsrDumpArgs {
    std::string state_path;
    std::string out_path;
};

json prototype_map_json(const PrototypeSet& set) {
    json protos = json::object();
    for (const auto& [label, proto] : set.prototypes) {
        protos[std::to_string(label)] = proto;
    }
    return protos;
}

void run_gsr_dump(const GsrDumpArgs& args) {
    const json doc = load_json(args.state_path);
    if (!doc.contains("capacity") || !doc.contains("sets")) {
        throw Error("gsr-dump: state file needs capacity and sets");
    }

    MemoryPool pool(doc["capacity"].get<std::size_t>());
    for (const auto& set_doc : doc["sets"]) {  // oldest first, push order
        PrototypeSet set;
        set.creation_iteration = set_doc.at("iteration").get<std::uint64_t>();
        for (const auto& [key, value] : set_doc.at("prototypes").items()) {
            set.prototypes.emplace(std::stoi(key), value.get<std::vector<double>>());
        }
        pool.push(std::move(set));
    }

    const GlobalGraph graph = build_global_graph(pool);

    json entries = json::array();
    for (const auto& entry : pool.entries()) {
        entries.push_back(json{{"age", entry.age},
                               {"iteration", entry.set.creation_iteration},
                               {"prototypes", prototype_map_json(entry.set)}});
    }
    json nodes = json::array();
    for (const auto& node : graph.nodes) {
        nodes.push_back(json{{"entry", node.entry_index}, {"label", node.label}, {"age", node.age}});
    }
    json adjacency = json::array();
    for (std::size_t r = 0; r < graph.adjacency.rows(); ++r) {
        adjacency.push_back(std::vector<double>(graph.adjacency.row(r).begin(),
                                                graph.adjacency.row(r).end()));
    }
    emit(json{{"capacity", pool.capacity()},
              {"tau", pool.tau()},
              {"entries", entries},
              {"nodes", nodes},
              {"adjacency", adjacency}},
         args.out_path);
}

// ---------------------------------------------------------------------------
// demo
// ---------------------------------------------------------------------------

struct DemoArgs {
    TrainConfig cfg;
    std::string report_path;
    std::string state_out_path;
};

json config_json(const TrainConfig& cfg) {
    return json{
        {"k", cfg.attribute_count},
        {"z", cfg.pool_capacity},
        {"gamma", cfg.gamma},
        {"lambda", cfg.lambda},
        {"beta", cfg.beta},
        {"lr", cfg.learning_rate},
        {"iterations", cfg.iterations},
        {"seed", cfg.seed},
        {"classes", cfg.num_classes},
        {"dim", cfg.feature_dim},
        {"batch_per_domain", cfg.batch_per_domain},
        {"eval_samples", cfg.eval_samples},
    };
}

void run_demo_cmd(const DemoArgs& args) {
    const TrainReport report = run_demo(args.cfg);

    emit(json{{"loss_trace", report.loss_trace},
              {"source_acc", report.source_accuracy},
              {"shifted_acc", report.shifted_accuracy},
              {"config", config_json(report.config)}},
         args.report_path);

    if (!args.state_out_path.empty()) {
        json sets = json::array();
        for (auto it = report.pool.entries().rbegin(); it != report.pool.entries().rend(); ++it) {
            sets.push_back(json{{"iteration", it->set.creation_iteration},
                                {"prototypes", prototype_map_json(it->set)}});
        }
        emit(json{{"capacity", report.pool.capacity()}, {"sets", sets}}, args.state_out_path);
    }

    if (log_enabled(LogLevel::Info)) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6g", report.source_accuracy);
        std::cout << "source_acc " << buf;
        std::snprintf(buf, sizeof(buf), "%.6g", report.shifted_accuracy);
        std::cout << " shifted_acc " << buf << "\n";
    }
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradcheckArgs {
    std::uint64_t seed = kDefaultSeed;
    double step = 1e-5;
};

void run_gradcheck_cmd(const GradcheckArgs& args) {
    const GradCheckReport report = run_gradcheck(args.seed, args.step);
    char buf[64];
    bool ok = true;
    auto line = [&](const char* name, double err, double tol) {
        std::snprintf(buf, sizeof(buf), "%.3e", err);
        std::cout << name << " max_rel_error " << buf << (err < tol ? " ok" : " FAIL") << "\n";
        if (err >= tol) ok = false;
    };
    line("quadratic", report.quadratic, 1e-8);
    line("lsr_loss", report.lsr, 1e-4);
    line("gsr_loss", report.gsr, 1e-4);
    if (!ok) throw Error("gradcheck: tolerance exceeded");
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"SRCD training kernels: texture-based Fourier self-augmentation and "
                 "local/global semantic reasoning"};
    app.require_subcommand(1);

    // Global flags; per-subcommand --seed overrides the global one.
    std::uint64_t global_seed = kDefaultSeed;
    auto* global_seed_opt =
        app.add_option("--seed", global_seed, "Default random seed for all subcommands");
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "quiet | info | debug")
        ->check(CLI::IsMember({"quiet", "info", "debug"}));
    app.parse_complete_callback([&] {
        g_log_level = log_level == "quiet" ? LogLevel::Quiet
                      : log_level == "debug" ? LogLevel::Debug
                                             : LogLevel::Info;
    });

    GlcmArgs glcm_args;
    auto* glcm_cmd = app.add_subcommand("glcm", "Co-occurrence entropy of an image");
    glcm_cmd->add_option("--image", glcm_args.image, "Input PNG")->required()
        ->check(CLI::ExistingFile);
    glcm_cmd->add_option("--levels", glcm_args.cfg.levels, "Gray quantization bins");
    glcm_cmd->add_option("--d", glcm_args.cfg.distance, "Offset distance");
    glcm_cmd->add_option("--theta", glcm_args.cfg.theta_deg, "Offset direction in degrees")
        ->check(CLI::IsMember({0, 45, 90, 135}));
    glcm_cmd->add_option("--matrix-csv", glcm_args.matrix_csv, "Dump the matrix as CSV");
    glcm_cmd->callback([&] { run_glcm(glcm_args); });

    AugmentArgs aug_args;
    auto* aug_cmd = app.add_subcommand("augment", "Amplitude-mix a corpus of PNGs");
    aug_cmd->add_option("--input", aug_args.input_dir, "Input directory")->required()
        ->check(CLI::ExistingDirectory);
    aug_cmd->add_option("--output", aug_args.output_dir, "Output directory")->required();
    aug_cmd->add_option("--mode", aug_args.mode, "weak | strong | pair")
        ->check(CLI::IsMember({"weak", "strong", "pair"}));
    auto* aug_seed = aug_cmd->add_option("--seed", aug_args.seed, "Random seed");
    aug_cmd->add_option("--levels", aug_args.cfg.levels, "Gray quantization bins");
    aug_cmd->add_option("--d", aug_args.cfg.distance, "Offset distance");
    aug_cmd->add_option("--theta", aug_args.cfg.theta_deg, "Offset direction in degrees")
        ->check(CLI::IsMember({0, 45, 90, 135}));
    aug_cmd->add_option("--min-frac", aug_args.policy.min_frac, "Minimum patch side fraction");
    aug_cmd->add_option("--max-frac", aug_args.policy.max_frac, "Maximum patch side fraction");
    aug_cmd->add_option("--retries", aug_args.policy.max_retries, "Patch selection retries");
    aug_cmd->callback([&] {
        if (!aug_seed->count() && global_seed_opt->count()) aug_args.seed = global_seed;
        run_augment(aug_args);
    });

    GraphArgs graph_args;
    auto* graph_cmd = app.add_subcommand("graph", "Local relation graph over feature vectors");
    graph_cmd->add_option("--features", graph_args.features_path, "Features JSON")->required()
        ->check(CLI::ExistingFile);
    graph_cmd->add_option("--k", graph_args.k, "Attribute segments");
    graph_cmd->add_option("--gamma", graph_args.gamma, "Attribute-weight EMA rate");
    graph_cmd->add_option("--out", graph_args.out_path, "Output JSON (default stdout)");
    graph_cmd->callback([&] { run_graph(graph_args); });

    GsrDumpArgs dump_args;
    auto* dump_cmd = app.add_subcommand("gsr-dump", "Global graph over a prototype pool state");
    dump_cmd->add_option("--state", dump_args.state_path, "Pool state JSON")->required()
        ->check(CLI::ExistingFile);
    dump_cmd->add_option("--out", dump_args.out_path, "Output JSON (default stdout)");
    dump_cmd->callback([&] { run_gsr_dump(dump_args); });

    DemoArgs demo_args;
    auto* demo_cmd = app.add_subcommand("demo", "Desk-scale synthetic training run");
    demo_cmd->add_option("--iters", demo_args.cfg.iterations, "Training iterations");
    demo_cmd->add_option("--classes", demo_args.cfg.num_classes, "Number of classes");
    demo_cmd->add_option("--dim", demo_args.cfg.feature_dim, "Feature dimension");
    demo_cmd->add_option("--k", demo_args.cfg.attribute_count, "Attribute segments");
    demo_cmd->add_option("--z", demo_args.cfg.pool_capacity, "Memory pool capacity");
    demo_cmd->add_option("--gamma", demo_args.cfg.gamma, "Attribute-weight EMA rate");
    demo_cmd->add_option("--lambda", demo_args.cfg.lambda, "Local reasoning loss weight");
    demo_cmd->add_option("--beta", demo_args.cfg.beta, "Global reasoning loss weight");
    demo_cmd->add_option("--lr", demo_args.cfg.learning_rate, "Learning rate (flat schedule)");
    demo_cmd->add_option("--batch", demo_args.cfg.batch_per_domain, "Instances per domain");
    demo_cmd->add_option("--eval-samples", demo_args.cfg.eval_samples, "Held-out samples per domain");
    auto* demo_seed = demo_cmd->add_option("--seed", demo_args.cfg.seed, "Random seed");
    demo_cmd->add_option("--report", demo_args.report_path, "Report JSON (default stdout)");
    demo_cmd->add_option("--state-out", demo_args.state_out_path, "Write the final pool state");
    demo_cmd->callback([&] {
        if (!demo_seed->count() && global_seed_opt->count()) demo_args.cfg.seed = global_seed;
        run_demo_cmd(demo_args);
    });

    GradcheckArgs grad_args;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Verify analytic loss gradients");
    auto* grad_seed = grad_cmd->add_option("--seed", grad_args.seed, "Random seed");
    grad_cmd->add_option("--step", grad_args.step, "Central-difference step");
    grad_cmd->callback([&] {
        if (!grad_seed->count() && global_seed_opt->count()) grad_args.seed = global_seed;
        run_gradcheck_cmd(grad_args);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace srcd::cli
