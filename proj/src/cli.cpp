#include "eltrack/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "eltrack/checkpoint.hpp"
#include "eltrack/gradsuite.hpp"
#include "eltrack/metrics.hpp"
#include "eltrack/runtime.hpp"
#include "eltrack/synthetic.hpp"
#include "eltrack/training.hpp"

namespace eltrack {

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string checkpoint;
    std::string dataset;
    std::string results;
    std::optional<double> theta;
    std::string mode = "ope";
    int count = 8;
    std::string log;
    std::optional<int> epochs;
    bool no_transfer = false;
    std::string sequence;
    std::string out_dir;
};

Config base_config(const Options& o) {
    Config cfg = o.config.empty() ? parse_config("") : load_config(o.config);
    if (o.seed) {
        cfg.world.seed = *o.seed;
        cfg.train.seed = *o.seed;
        cfg.model.seed = *o.seed;
    }
    if (o.theta) cfg.runtime.theta = *o.theta;
    if (o.epochs) cfg.train.epochs = *o.epochs;
    if (o.no_transfer) cfg.runtime.temporal_transfer = false;
    return cfg;
}

int cmd_synth(const Options& o, std::ostream& out) {
    const Config cfg = base_config(o);
    for (int i = 0; i < o.count; ++i) {
        WorldConfig wc = cfg.world;
        wc.seed = sequence_seed(cfg.world.seed, i);
        char name[32];
        std::snprintf(name, sizeof(name), "seq%03d", i);
        const SyntheticSequence seq = generate_sequence(wc, name);
        write_sequence(o.dataset, seq);
    }
    out << "sequences=" << o.count << "\n" << "dataset=" << o.dataset << "\n";
    return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
    const Config cfg = base_config(o);
    TrackerModel<float> model(cfg.model);
    Trainer trainer(model, cfg);
    model.norm_stats = estimate_norm_stats(trainer.sampler());
    std::ofstream log_file;
    if (!o.log.empty()) {
        log_file.open(o.log, std::ios::app);
        if (!log_file) throw IoError("cannot open log " + o.log);
    }
    const auto start = std::chrono::steady_clock::now();
    double first = 0.0, last = 0.0;
    for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        const EpochSummary s = trainer.run_epoch(epoch, [&](const LogEntry& e) {
            if (log_file) log_file << format_log_entry(e) << "\n";
        });
        if (epoch == 0) first = s.mean_sequence_loss;
        last = s.mean_sequence_loss;
        out << "epoch=" << epoch << " length=" << s.length << " loss=" << num(s.mean_loss)
            << " sequence_loss=" << num(s.mean_sequence_loss) << "\n";
        out.flush();
    }
    save_checkpoint(o.checkpoint, model, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out << "first_epoch_loss=" << num(first) << "\nfinal_epoch_loss=" << num(last) << "\nseconds=" << num(secs)
        << "\ncheckpoint=" << o.checkpoint << "\n";
    return 0;
}

int cmd_track(const Options& o, std::ostream& out) {
    LoadedCheckpoint ck = load_checkpoint(o.checkpoint);
    RuntimeConfig rt = ck.config.runtime;
    if (o.theta) rt.theta = *o.theta;
    if (o.no_transfer) rt.temporal_transfer = false;
    std::filesystem::create_directories(o.results);
    const auto names = list_sequences(o.dataset);
    for (const auto& name : names) {
        const auto results = track_sequence_dir(*ck.model, std::filesystem::path(o.dataset) / name, rt);
        write_results(std::filesystem::path(o.results) / (name + ".txt"), results);
    }
    out << "sequences=" << names.size() << "\nresults=" << o.results << "\n";
    return 0;
}

std::vector<EvalRecord> load_records(const Options& o) {
    std::vector<EvalRecord> records;
    for (const auto& name : list_sequences(o.dataset)) {
        const auto dir = std::filesystem::path(o.dataset) / name;
        const Image first = read_ppm(frame_path(dir, 0));
        const auto labels = read_annotations(dir / "groundtruth.txt", first.width, first.height);
        const auto results = read_results(std::filesystem::path(o.results) / (name + ".txt"), first.width,
                                          first.height);
        records.push_back(make_record(results, labels));
    }
    return records;
}

int cmd_eval(const Options& o, std::ostream& out) {
    const auto records = load_records(o);
    out << "sequences=" << records.size() << "\n";
    if (o.mode == "ope") {
        const OpeMetrics m = compute_ope_metrics(records);
        out << "auc=" << num(m.auc) << "\nprecision20=" << num(m.precision20)
            << "\nnormalized_precision=" << num(m.normalized_precision) << "\n";
    } else if (o.mode == "oxuva") {
        const OxuvaMetrics m = compute_oxuva_metrics(records);
        out << "tpr=" << num(m.tpr) << "\ntnr=" << num(m.tnr) << "\nmaxgm=" << num(m.maxgm)
            << "\nmaxgm_threshold=" << num(m.maxgm_threshold) << "\n";
    } else {
        const VotLtMetrics m = compute_votlt_metrics(records);
        out << "precision=" << num(m.precision) << "\nrecall=" << num(m.recall) << "\nfscore=" << num(m.fscore)
            << "\nthreshold=" << num(m.threshold) << "\n";
    }
    return 0;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
    bool ok = true;
    for (const auto& e : run_gradient_suite(o.seed.value_or(1))) {
        ok = ok && e.report.pass;
        out << e.name << "=" << (e.report.pass ? "pass" : "FAIL") << " max_rel_err=" << e.report.max_rel_err
            << " entries=" << e.report.entries_checked << " kinks=" << e.report.nondifferentiable << "\n";
    }
    out << "gradcheck=" << (ok ? "pass" : "fail") << "\n";
    return ok ? 0 : 1;
}

int cmd_overlay(const Options& o, std::ostream& out) {
    const auto dir = std::filesystem::path(o.dataset) / o.sequence;
    const int n = count_frames(dir);
    if (n == 0) throw IoError("no frames in " + dir.string());
    const Image first = read_ppm(frame_path(dir, 0));
    const auto labels = read_annotations(dir / "groundtruth.txt", first.width, first.height);
    const auto results =
        read_results(std::filesystem::path(o.results) / (o.sequence + ".txt"), first.width, first.height);
    if (static_cast<int>(results.size()) != n || static_cast<int>(labels.size()) != n) {
        throw ValidationError("overlay: results, annotations and frames disagree in length");
    }
    std::filesystem::create_directories(o.out_dir);
    for (int i = 0; i < n; ++i) {
        Image img = read_ppm(frame_path(dir, i));
        if (labels[i].present) {
            const CornerBox g = pixel_corners(labels[i].pixels);
            draw_rectangle(img, static_cast<int>(g.x0), static_cast<int>(g.y0), static_cast<int>(g.x1),
                           static_cast<int>(g.y1), {0, 255, 0});
        }
        const CornerBox p = pixel_corners(results[i].pixels);
        const Rgb color = results[i].present ? Rgb{255, 0, 0} : Rgb{255, 255, 0};
        draw_rectangle(img, static_cast<int>(p.x0), static_cast<int>(p.y0), static_cast<int>(p.x1),
                       static_cast<int>(p.y1), color);
        write_ppm(img, frame_path(o.out_dir, i));
    }
    out << "frames=" << n << "\noverlay=" << o.out_dir << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Ensemble local tracker: synthetic data, training, tracking and evaluation"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "flat key=value config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "seed for world, model and training");
    };
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    common(synth);
    synth->add_option("--dataset", o.dataset, "output directory")->required();
    synth->add_option("--count", o.count, "number of sequences")->check(CLI::PositiveNumber);

    auto* train = app.add_subcommand("train", "train a model on synthetic sequences");
    common(train);
    train->add_option("--checkpoint", o.checkpoint, "output checkpoint")->required();
    train->add_option("--log", o.log, "append-only training log");
    train->add_option("--epochs", o.epochs, "override the configured epochs");

    auto* track = app.add_subcommand("track", "run a checkpoint over a dataset");
    track->add_option("--checkpoint", o.checkpoint)->required()->check(CLI::ExistingFile);
    track->add_option("--dataset", o.dataset)->required()->check(CLI::ExistingDirectory);
    track->add_option("--results", o.results, "output directory for results files")->required();
    track->add_option("--theta", o.theta, "presence threshold");
    track->add_flag("--no-transfer", o.no_transfer, "disable temporal transfer (one-shot detection)");

    auto* eval = app.add_subcommand("eval", "metrics from results and annotations");
    eval->add_option("--dataset", o.dataset)->required()->check(CLI::ExistingDirectory);
    eval->add_option("--results", o.results)->required()->check(CLI::ExistingDirectory);
    eval->add_option("--mode", o.mode)->check(CLI::IsMember({"ope", "oxuva", "votlt"}));

    auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    grad->add_option("--seed", o.seed);

    auto* overlay = app.add_subcommand("overlay", "draw predicted and ground-truth boxes onto frames");
    overlay->add_option("--dataset", o.dataset)->required()->check(CLI::ExistingDirectory);
    overlay->add_option("--results", o.results)->required()->check(CLI::ExistingDirectory);
    overlay->add_option("--sequence", o.sequence)->required();
    overlay->add_option("--out", o.out_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }
    try {
        if (*synth) return cmd_synth(o, out);
        if (*train) return cmd_train(o, out);
        if (*track) return cmd_track(o, out);
        if (*eval) return cmd_eval(o, out);
        if (*grad) return cmd_gradcheck(o, out);
        if (*overlay) return cmd_overlay(o, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    err << app.help();
    return 1;
}

}  // namespace eltrack
