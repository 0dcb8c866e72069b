// bandreg command-line tool: synthesis, registration, labeling, training,
// prediction, evaluation and reporting.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "bandreg/bandreg.hpp"
#include "bandreg/plot.hpp"

namespace
{
    using namespace bandreg;
    using io::json;
    namespace fs = std::filesystem;

    constexpr const char* tool_version = "0.1.0";

    /// Thrown for bad flag combinations or invalid configuration values.
    struct UsageError : std::invalid_argument
    {
        using std::invalid_argument::invalid_argument;
    };

    struct Globals
    {
        std::uint64_t seed = 0;
        bool seed_given = false;
        std::string config;
        std::string out = "out";
        int threads = 1;
        bool verbose = false;
        std::vector<std::string> argv;
    };

    Globals g;

    void info(const std::string& msg)
    {
        if (g.verbose)
        {
            std::cerr << msg << '\n';
        }
    }

    json load_config_file()
    {
        if (g.config.empty())
        {
            return json::object();
        }
        return io::read_json(g.config);
    }

    /// Registration section of the config file; a flat file is read as the
    /// registration section itself.
    RegConfig reg_config(const json& file, std::optional<int> grid_from_image = std::nullopt)
    {
        json section = file.contains("registration") ? file.at("registration")
                       : file.contains("training")   ? json::object()
                                                     : file;
        RegConfig base;
        if (grid_from_image && !section.contains("grid"))
        {
            base.grid = *grid_from_image;
            base.band = std::min(base.band, base.grid - base.grid % 2);
        }
        if (g.seed_given)
        {
            base.seed = g.seed;
        }
        try
        {
            return io::reg_config_from_json(section, base);
        }
        catch (const std::invalid_argument& e)
        {
            throw UsageError(e.what());
        }
    }

    void write_manifest(const std::string& command, const json& config, json extra = json::object())
    {
        json args = json::array();
        for (const auto& a : g.argv)
        {
            args.push_back(a);
        }
        json m = {{"command", command},
                  {"argv", args},
                  {"config", config},
                  {"config_hash", io::config_hash(config)},
                  {"seed", g.seed},
                  {"threads", g.threads},
                  {"versions", {{"bandreg", tool_version}, {"fftw", std::string(fftw_version)}, {"manifest", 1}}}};
        for (auto& [k, v] : extra.items())
        {
            m[k] = v;
        }
        io::write_json(fs::path(g.out) / "manifest.json", m);
    }

    void write_text(const fs::path& path, const std::string& text)
    {
        fs::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::trunc);
        if (!out)
        {
            throw IoError("cannot write " + path.string());
        }
        out << text;
    }

    SpatialImage load_input(const std::string& path)
    {
        if (!fs::exists(path))
        {
            throw IoError("missing input file " + path);
        }
        return io::load_any_image(path);
    }

    /// DetJac map as a PGM: 0 maps to black, 1 to mid gray, 2 and above to white.
    SpatialImage detjac_image(const SpatialImage& det)
    {
        SpatialImage out(det.extents());
        for (std::size_t i = 0; i < det.size(); ++i)
        {
            out[i] = std::clamp(det[i] / 2.0, 0.0, 1.0);
        }
        return out;
    }

    json ssd_summary(double before, double after, double min_detjac)
    {
        return {{"initial_ssd", before},
                {"final_ssd", after},
                {"ssd_ratio", before > 0.0 ? after / before : 0.0},
                {"min_detjac", min_detjac}};
    }

    // ---- subcommands -----------------------------------------------------

    struct SynthOpts
    {
        int n = 0;
        int grid = 100;
    };

    int run_synth(const SynthOpts& o)
    {
        const auto pool = gen_bulleye(o.n, g.seed, o.grid);
        auto m = io::save_corpus(g.out, pool, g.seed, o.grid);
        const json config = {{"n", o.n}, {"grid", o.grid}, {"seed", g.seed}};
        m["run"] = {{"command", "synth"}, {"config", config}, {"config_hash", io::config_hash(config)},
                    {"versions", {{"bandreg", tool_version}, {"fftw", std::string(fftw_version)}}}};
        io::write_json(fs::path(g.out) / "manifest.json", m);
        info("wrote " + std::to_string(o.n) + " images to " + g.out);
        return 0;
    }

    struct RegisterOpts
    {
        std::string source;
        std::string target;
    };

    int run_register(const RegisterOpts& o)
    {
        const auto S = load_input(o.source);
        const auto T = load_input(o.target);
        if (!(S.extents() == T.extents()))
        {
            throw UsageError("source and target differ in shape");
        }
        const auto cfg = reg_config(load_config_file(), S.extents().n[0]);
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = register_pair(S, T, cfg);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        const fs::path out = g.out;
        const auto psi = shoot_deformation(r.v_opt, make_operator(cfg.alpha, cfg.power, cfg.band_spec()), cfg.steps,
                                           S.extents());
        io::save_field(out / "fields/v_opt.blff", r.v_opt);
        io::save_deformation(out / "fields/deformation.spdf", psi);
        const auto warped = warp(S, psi);
        const auto det = det_jacobian(psi);
        io::save_image(out / "images/warped.spim", warped);
        if (S.extents().dim == 2)
        {
            io::save_pgm(out / "images/warped.pgm", warped);
            io::save_pgm(out / "images/detjac.pgm", detjac_image(det));
            io::save_pgm(out / "plots/before_after.pgm", plot::panels({S, warped, T}));
        }
        io::save_pgm(out / "plots/energy_trace.pgm", plot::line_plot(r.energy_trace, 200, 320, true));
        json res = ssd_summary(r.initial_ssd, r.final_ssd, r.min_detjac);
        res["iterations"] = r.iterations;
        res["backtracking_exhausted"] = r.backtracking_exhausted;
        res["energy_trace"] = r.energy_trace;
        res["wall_ms"] = ms;
        res["v_opt"] = "fields/v_opt.blff";
        res["deformation"] = "fields/deformation.spdf";
        io::write_json(out / "result.json", res);
        if (r.backtracking_exhausted)
        {
            std::cerr << "warning: line search exhausted; returning best iterate\n";
        }
        write_manifest("register", {{"registration", io::to_json(cfg)}, {"source", o.source}, {"target", o.target}});
        info("final/initial SSD " + std::to_string(r.final_ssd / std::max(r.initial_ssd, 1e-300)));
        return 0;
    }

    struct LabelOpts
    {
        std::string pairs_manifest;
        int workers = 0;
    };

    int run_make_labels(const LabelOpts& o)
    {
        const auto pairs = io::load_pairs(o.pairs_manifest);
        if (pairs.empty())
        {
            throw UsageError("pairs manifest lists no pairs");
        }
        const auto cfg = reg_config(load_config_file(), pairs.front().source.extents().n[0]);
        const int workers = o.workers > 0 ? o.workers : g.threads;
        auto ds = make_labels(pairs, cfg, workers, [](const std::string& m) { std::cerr << m << '\n'; });
        ds.provenance["pairs_manifest"] = o.pairs_manifest;
        io::save_dataset(g.out, ds);
        json failures = json::array();
        for (const auto& r : ds.rejected)
        {
            failures.push_back({{"id", r.id}, {"reason", r.reason}});
        }
        io::write_json(fs::path(g.out) / "failures.json", failures);
        // The dataset manifest doubles as the run manifest.
        auto m = io::read_json(fs::path(g.out) / "manifest.json");
        const json config = {{"registration", io::to_json(cfg)}, {"workers", workers}};
        m["run"] = {{"command", "make-labels"}, {"config", config}, {"config_hash", io::config_hash(config)},
                    {"versions", {{"bandreg", tool_version}, {"fftw", std::string(fftw_version)}}}};
        io::write_json(fs::path(g.out) / "manifest.json", m);
        info("labeled " + std::to_string(ds.pairs.size()) + " of " + std::to_string(pairs.size()) + " pairs");
        return 0;
    }

    struct TrainOpts
    {
        std::string dataset;
        std::string train_config;
        std::optional<int> epochs;
        std::optional<int> batch;
        std::optional<double> lr;
        std::optional<double> lambda;
        bool momentum = false;
        bool tie_weights = false;
    };

    TrainConfig train_config(const TrainOpts& o, int dim)
    {
        TrainConfig base;
        base.arch = Architecture::standard(dim);
        base.seed = g.seed;
        json section = json::object();
        if (!o.train_config.empty())
        {
            const auto f = io::read_json(o.train_config);
            section = f.contains("training") ? f.at("training") : f;
        }
        else if (const auto f = load_config_file(); f.contains("training"))
        {
            section = f.at("training");
        }
        try
        {
            auto c = io::train_config_from_json(section, base);
            if (o.epochs) c.epochs = *o.epochs;
            if (o.batch) c.batch = *o.batch;
            if (o.lr) c.lr = *o.lr;
            if (o.lambda) c.lambda = *o.lambda;
            if (o.momentum) c.momentum = true;
            if (o.tie_weights) c.tie_weights = true;
            if (g.seed_given) c.seed = g.seed;
            c.validate();
            return c;
        }
        catch (const std::invalid_argument& e)
        {
            throw UsageError(e.what());
        }
    }

    int run_train(const TrainOpts& o)
    {
        const auto ds = io::load_dataset(o.dataset);
        if (ds.split.train.empty())
        {
            throw UsageError("dataset has an empty training split");
        }
        const auto cfg = train_config(o, ds.reg.dim);
        const auto train_set = ds.examples(ds.split.train);
        const auto val_set = ds.examples(ds.split.val);
        const auto t0 = std::chrono::steady_clock::now();
        const auto res = train(train_set, val_set, cfg);
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const fs::path out = g.out;
        json meta = {{"train_config", io::to_json(cfg)},
                     {"reg_config", io::to_json(ds.reg)},
                     {"seed", cfg.seed},
                     {"epochs", cfg.epochs},
                     {"train_examples", train_set.size()},
                     {"val_examples", val_set.size()},
                     {"final_train_loss", res.train_loss.empty() ? 0.0 : res.train_loss.back()},
                     {"final_val_loss", res.val_loss.empty() ? 0.0 : res.val_loss.back()},
                     {"wall_s", s}};
        io::save_weights(out / "weights.dfw", res.weights, meta);
        std::string csv = "epoch,train_loss,val_loss\n";
        for (std::size_t e = 0; e < res.train_loss.size(); ++e)
        {
            char line[128];
            std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", e + 1, res.train_loss[e],
                          e < res.val_loss.size() ? res.val_loss[e] : 0.0);
            csv += line;
        }
        write_text(out / "loss_history.csv", csv);
        io::save_pgm(out / "plots/train_loss.pgm", plot::line_plot(res.train_loss, 200, 320, true));
        if (!res.val_loss.empty())
        {
            io::save_pgm(out / "plots/val_loss.pgm", plot::line_plot(res.val_loss, 200, 320, true));
        }
        write_manifest("train", {{"training", io::to_json(cfg)}, {"dataset", o.dataset}});
        info("trained " + std::to_string(cfg.epochs) + " epochs in " + std::to_string(s) + " s");
        return 0;
    }

    /// Weights and the registration config they were trained under.
    std::pair<DualNetWeights, RegConfig> load_model(const std::string& path, std::optional<int> grid)
    {
        if (!fs::exists(path))
        {
            throw IoError("missing weights file " + path);
        }
        auto w = io::load_weights(path);
        const auto side = io::sidecar_path(path);
        RegConfig cfg;
        if (!g.config.empty())
        {
            cfg = reg_config(load_config_file(), grid);
        }
        else if (fs::exists(side))
        {
            const auto j = io::read_json(side);
            const auto& t = j.at("training");
            if (t.contains("reg_config"))
            {
                cfg = io::reg_config_from_json(t.at("reg_config"));
            }
        }
        return {std::move(w), cfg};
    }

    struct PredictOpts
    {
        std::string source;
        std::string target;
        std::string weights;
    };

    int run_predict(const PredictOpts& o)
    {
        const auto S = load_input(o.source);
        const auto T = load_input(o.target);
        if (!(S.extents() == T.extents()))
        {
            throw UsageError("source and target differ in shape");
        }
        const auto [w, cfg] = load_model(o.weights, S.extents().n[0]);
        if (!(S.extents() == cfg.grid_extents()))
        {
            throw UsageError("images do not match the grid the model was trained on (" + std::to_string(cfg.grid) +
                             ")");
        }
        const auto t0 = std::chrono::steady_clock::now();
        const auto p = predict(S, T, w, cfg);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        const fs::path out = g.out;
        io::save_field(out / "fields/v_pre.blff", p.v_pre);
        io::save_deformation(out / "fields/deformation.spdf", p.psi);
        const auto warped = warp(S, p.psi);
        io::save_image(out / "images/warped.spim", warped);
        if (S.extents().dim == 2)
        {
            io::save_pgm(out / "images/warped.pgm", warped);
            io::save_pgm(out / "images/detjac.pgm", detjac_image(det_jacobian(p.psi)));
            io::save_pgm(out / "plots/before_after.pgm", plot::panels({S, warped, T}));
        }
        json res = ssd_summary(p.initial_ssd, p.final_ssd, p.min_detjac);
        res["v_pre_norm"] = norm(p.v_pre);
        res["wall_ms"] = ms;
        res["v_pre"] = "fields/v_pre.blff";
        res["deformation"] = "fields/deformation.spdf";
        io::write_json(out / "result.json", res);
        write_manifest("predict", {{"registration", io::to_json(cfg)}, {"weights", o.weights}, {"source", o.source},
                                   {"target", o.target}});
        return 0;
    }

    struct EvaluateOpts
    {
        std::string dataset;
        std::string weights;
        bool rerun_register = false;
    };

    int run_evaluate(const EvaluateOpts& o)
    {
        const auto ds = io::load_dataset(o.dataset);
        const auto [w, model_cfg] = load_model(o.weights, ds.reg.grid);
        (void)model_cfg;
        const auto& cfg = ds.reg;
        const auto& test = ds.split.test.empty() ? ds.split.train : ds.split.test;
        const auto op = make_operator(cfg.alpha, cfg.power, cfg.band_spec());
        ShootingKernel kernel(op, cfg.steps);
        TimingReport rep;
        rep.pair_count = test.size();
        rep.config_hash = io::config_hash(io::to_json(cfg));
        json per_pair = json::array();
        double sum_pred = 0.0, sum_opt = 0.0, sum_init = 0.0, dice_pred = 0.0, dice_opt = 0.0;
        int positive = 0, with_masks = 0;
        std::vector<double> reg_ms, pred_ms;
        for (int i : test)
        {
            const auto& lp = ds.pairs[i];
            const auto& S = lp.images.source;
            const auto& T = lp.images.target;
            double reg_wall = lp.diag.wall_ms;
            double opt_ssd = lp.diag.final_ssd;
            double opt_det = lp.diag.min_detjac;
            if (o.rerun_register)
            {
                const auto t0 = std::chrono::steady_clock::now();
                const auto r = register_pair(S, T, cfg);
                reg_wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
                opt_ssd = r.final_ssd;
                opt_det = r.min_detjac;
            }
            const auto t0 = std::chrono::steady_clock::now();
            const auto p = predict(S, T, w, cfg);
            const double pw = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            rep.rows.push_back({lp.images.id, "register", reg_wall, opt_ssd, opt_det});
            rep.rows.push_back({lp.images.id, "predict", pw, p.final_ssd, p.min_detjac});
            reg_ms.push_back(reg_wall);
            pred_ms.push_back(pw);
            sum_pred += p.final_ssd;
            sum_opt += opt_ssd;
            sum_init += p.initial_ssd;
            positive += p.min_detjac > 0.0;
            json row = {{"id", lp.images.id}, {"predict", ssd_summary(p.initial_ssd, p.final_ssd, p.min_detjac)},
                        {"optimizer_final_ssd", opt_ssd}};
            if (lp.images.source_mask.labels.size() == S.size())
            {
                const auto dp = dice(warp_labels(lp.images.source_mask, p.psi), lp.images.target_mask,
                                     {inner_label, ring_label});
                const auto dopt = dice(warp_labels(lp.images.source_mask, kernel.deformation(lp.v_opt, S.extents())),
                                       lp.images.target_mask, {inner_label, ring_label});
                row["dice_predict"] = {{"inner", dp.per_label.count(inner_label) ? dp.per_label.at(inner_label) : 0.0},
                                       {"ring", dp.per_label.count(ring_label) ? dp.per_label.at(ring_label) : 0.0},
                                       {"mean", dp.mean}};
                row["dice_optimizer"] = {{"mean", dopt.mean}};
                dice_pred += dp.mean;
                dice_opt += dopt.mean;
                ++with_masks;
            }
            per_pair.push_back(row);
        }
        const double n = std::max<std::size_t>(test.size(), 1);
        if (!test.empty())
        {
            rep.median_register_ms = median(reg_ms);
            rep.median_predict_ms = median(pred_ms);
        }
        json summary = {{"pairs", test.size()},
                        {"config_hash", rep.config_hash},
                        {"mean_initial_ssd", sum_init / n},
                        {"mean_predict_ssd", sum_pred / n},
                        {"mean_optimizer_ssd", sum_opt / n},
                        {"ssd_reduction_predict", sum_init > 0.0 ? 1.0 - sum_pred / sum_init : 0.0},
                        {"ssd_reduction_optimizer", sum_init > 0.0 ? 1.0 - sum_opt / sum_init : 0.0},
                        {"predict_to_optimizer_ssd", sum_opt > 0.0 ? sum_pred / sum_opt : 0.0},
                        {"positive_detjac_fraction", positive / n},
                        {"median_register_ms", rep.median_register_ms},
                        {"median_predict_ms", rep.median_predict_ms},
                        {"speedup", rep.median_predict_ms > 0.0 ? rep.speedup() : 0.0}};
        if (with_masks > 0)
        {
            summary["mean_dice_predict"] = dice_pred / with_masks;
            summary["mean_dice_optimizer"] = dice_opt / with_masks;
        }
        const fs::path out = g.out;
        write_text(out / "report.csv", timing_csv(rep));
        io::write_json(out / "summary.json", summary);
        io::write_json(out / "dice.json", per_pair);
        write_manifest("evaluate", {{"registration", io::to_json(cfg)}, {"dataset", o.dataset}, {"weights", o.weights},
                                    {"rerun_register", o.rerun_register}});
        std::cout << summary.dump(2) << '\n';
        return 0;
    }

    struct ReportOpts
    {
        std::vector<std::string> runs;
    };

    int run_report(const ReportOpts& o)
    {
        const std::vector<std::string> cols = {"pairs", "mean_predict_ssd", "mean_optimizer_ssd",
                                               "predict_to_optimizer_ssd", "mean_dice_predict", "mean_dice_optimizer",
                                               "positive_detjac_fraction", "median_register_ms",
                                               "median_predict_ms", "speedup"};
        std::string csv = "run";
        for (const auto& c : cols)
        {
            csv += "," + c;
        }
        csv += "\n";
        std::vector<double> dice_p, dice_o, speed;
        json merged = json::array();
        for (const auto& r : o.runs)
        {
            const auto path = fs::path(r) / "summary.json";
            if (!fs::exists(path))
            {
                throw IoError("missing file " + path.string());
            }
            const auto s = io::read_json(path);
            csv += r;
            for (const auto& c : cols)
            {
                csv += ",";
                if (s.contains(c))
                {
                    char buf[64];
                    std::snprintf(buf, sizeof buf, "%.10g", s.at(c).get<double>());
                    csv += buf;
                }
            }
            csv += "\n";
            dice_p.push_back(s.value("mean_dice_predict", 0.0));
            dice_o.push_back(s.value("mean_dice_optimizer", 0.0));
            speed.push_back(s.value("speedup", 0.0));
            merged.push_back({{"run", r}, {"summary", s}});
        }
        const fs::path out = g.out;
        write_text(out / "summary.csv", csv);
        io::write_json(out / "summary.json", merged);
        io::save_pgm(out / "plots/dice.pgm", plot::bar_plot({dice_p, dice_o}));
        io::save_pgm(out / "plots/speedup.pgm", plot::bar_plot({speed}));
        write_manifest("report", {{"runs", o.runs}});
        return 0;
    }

} // namespace

int main(int argc, char** argv)
{
    g.argv.assign(argv, argv + argc);
    CLI::App app{"Band-limited diffeomorphic registration and dual-network prediction"};
    app.require_subcommand(1);
    app.set_version_flag("--version", tool_version);
    auto* seed_opt = app.add_option("--seed", g.seed, "RNG seed")->capture_default_str();
    app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads for batch commands")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_flag("--verbose,-v", g.verbose, "Progress messages on stderr");
    app.fallthrough();

    SynthOpts synth;
    auto* c_synth = app.add_subcommand("synth", "Generate a bull-eye image corpus");
    c_synth->add_option("--n", synth.n, "Number of images")->required()->check(CLI::PositiveNumber);
    c_synth->add_option("--grid", synth.grid, "Grid size per axis")->check(CLI::Range(4, 4096))->capture_default_str();

    RegisterOpts reg;
    auto* c_reg = app.add_subcommand("register", "Optimize the initial velocity for one image pair");
    c_reg->add_option("--source", reg.source, "Source image (.pgm or .spim)")->required();
    c_reg->add_option("--target", reg.target, "Target image (.pgm or .spim)")->required();

    LabelOpts labels;
    auto* c_labels = app.add_subcommand("make-labels", "Register every pair of a corpus into a dataset");
    c_labels->add_option("--pairs-manifest", labels.pairs_manifest, "Corpus manifest.json")->required();
    c_labels->add_option("--workers", labels.workers, "Worker threads (default --threads)")
        ->check(CLI::PositiveNumber);

    TrainOpts tr;
    auto* c_train = app.add_subcommand("train", "Train the dual network on a labeled dataset");
    c_train->add_option("--dataset", tr.dataset, "Dataset directory")->required();
    c_train->add_option("--train-config", tr.train_config, "Training config JSON")->check(CLI::ExistingFile);
    c_train->add_option("--epochs", tr.epochs)->check(CLI::NonNegativeNumber);
    c_train->add_option("--batch", tr.batch)->check(CLI::PositiveNumber);
    c_train->add_option("--lr", tr.lr)->check(CLI::PositiveNumber);
    c_train->add_option("--lambda", tr.lambda)->check(CLI::NonNegativeNumber);
    c_train->add_flag("--momentum", tr.momentum, "Momentum SGD (0.9)");
    c_train->add_flag("--tie-weights", tr.tie_weights, "Share parameters between the real and imaginary nets");

    PredictOpts pr;
    auto* c_pred = app.add_subcommand("predict", "Predict the deformation of one pair with trained weights");
    c_pred->add_option("--source", pr.source)->required();
    c_pred->add_option("--target", pr.target)->required();
    c_pred->add_option("--weights", pr.weights, "weights.dfw")->required();

    EvaluateOpts ev;
    auto* c_eval = app.add_subcommand("evaluate", "Score predictions against the optimizer on the test split");
    c_eval->add_option("--dataset", ev.dataset)->required();
    c_eval->add_option("--weights", ev.weights)->required();
    c_eval->add_flag("--rerun-register", ev.rerun_register, "Time register() again instead of using stored times");

    ReportOpts rp;
    auto* c_report = app.add_subcommand("report", "Merge evaluation outputs into one table and plots");
    c_report->add_option("--runs", rp.runs, "Evaluation output directories")->required()->expected(1, -1);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForVersion& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return 2;
    }
    g.seed_given = seed_opt->count() > 0;

    try
    {
        fs::create_directories(g.out);
        if (*c_synth) return run_synth(synth);
        if (*c_reg) return run_register(reg);
        if (*c_labels) return run_make_labels(labels);
        if (*c_train) return run_train(tr);
        if (*c_pred) return run_predict(pr);
        if (*c_eval) return run_evaluate(ev);
        if (*c_report) return run_report(rp);
    }
    catch (const UsageError& e)
    {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
