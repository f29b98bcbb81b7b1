#include "gmmtree/cli.hpp"

#include "gmmtree/engine.hpp"
#include "gmmtree/errors.hpp"
#include "gmmtree/eval.hpp"
#include "gmmtree/impute.hpp"
#include "gmmtree/model_io.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>

namespace gmmtree {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Raised for flag combinations CLI11 cannot express.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Raised by benchmark when the engines disagree.
class EngineDivergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

int guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InvalidConfig& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NotPositiveDefinite& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const SingularSystem& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const EngineDivergence& e) {
        err << "engine divergence: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const std::exception& e) {
        // Parse errors, ragged rows, shape mismatches, unreadable files.
        err << "data error: " << e.what() << '\n';
        return kExitData;
    }
}

// Parses with CLI11; returns an exit code when the command should stop
// (help requested or bad flags), nullopt to continue.
std::optional<int> parse(CLI::App& app, const std::vector<std::string>& args, std::ostream& out,
                         std::ostream& err) {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return std::nullopt;
}

json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw InvalidConfig("cannot read config file " + path);
    }
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw InvalidConfig("config file " + path + " is not valid JSON: " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot write " + path.string());
    }
    f << text;
}

fs::path prepare_out(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

std::optional<std::size_t> env_threads() {
    const char* v = std::getenv("GMM_THREADS");
    if (!v || !*v) {
        return std::nullopt;
    }
    try {
        const long long n = std::stoll(v);
        if (n < 1) {
            throw InvalidConfig("GMM_THREADS must be a positive integer");
        }
        return static_cast<std::size_t>(n);
    } catch (const std::logic_error&) {
        throw InvalidConfig(std::string("GMM_THREADS is not an integer: ") + v);
    }
}

// Training flags shared by train and benchmark. Unset flags leave the value
// from the config file (or the default) alone.
struct TrainFlags {
    std::string config_path;
    std::optional<std::size_t> components;
    std::optional<std::size_t> max_iters;
    std::optional<double> tolerance;
    std::optional<double> ridge;
    std::optional<double> pc_fraction;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> engine;
    std::optional<std::size_t> recompute_every;
    std::optional<std::size_t> kmeans_iters;
    std::optional<std::size_t> max_patterns;
    std::optional<std::size_t> threads;
    bool fixed_weights = false;

    void add_to(CLI::App& app, bool with_engine) {
        app.add_option("--config", config_path, "JSON file with training settings (flags take precedence)");
        app.add_option("--components,-L", components, "Number of mixture components");
        app.add_option("--max-iters", max_iters, "Maximum EM iterations");
        app.add_option("--tol", tolerance, "Relative log-likelihood improvement to stop at (0 disables)");
        app.add_option("--ridge", ridge, "Value added to covariance diagonals");
        app.add_option("--pc-fraction", pc_fraction, "Fraction of principal components kept, in (0, 1]");
        app.add_option("--seed", seed, "Random seed for initialization");
        if (with_engine) {
            app.add_option("--engine", engine, "naive or fast");
        }
        app.add_option("--recompute-every", recompute_every,
                       "Rebuild workspaces from scratch at tree depths divisible by this (0: roots only)");
        app.add_option("--kmeans-iters", kmeans_iters, "K-means iterations for initialization");
        app.add_option("--max-patterns-per-tree", max_patterns, "Pattern-graph size before clustering");
        app.add_option("--threads", threads, "Worker threads over components (env GMM_THREADS)");
        app.add_flag("--fixed-weights", fixed_weights, "Keep mixing weights equal");
    }

    TrainConfig resolve(TrainConfig base = {}) const {
        TrainConfig c = base;
        bool threads_from_config = false;
        if (!config_path.empty()) {
            const json j = read_json_file(config_path);
            c = config_from_json(j, c);
            threads_from_config = j.contains("threads");
        }
        if (components) c.components = *components;
        if (max_iters) c.max_iters = *max_iters;
        if (tolerance) c.rel_ll_tolerance = *tolerance;
        if (ridge) c.ridge = *ridge;
        if (pc_fraction) c.pc_fraction = *pc_fraction;
        if (seed) c.seed = *seed;
        if (engine) c.engine = parse_engine(*engine);
        if (recompute_every) {
            c.recompute_every = *recompute_every == 0 ? std::nullopt : recompute_every;
        }
        if (kmeans_iters) c.kmeans_iters = *kmeans_iters;
        if (max_patterns) c.max_patterns_per_tree = *max_patterns;
        if (fixed_weights) c.optimize_weights = false;
        if (threads) {
            c.threads = *threads;
        } else if (!threads_from_config) {
            if (const auto t = env_threads()) {
                c.threads = *t;
            }
        }
        c.validate();
        return c;
    }
};

json trace_json(const TrainTrace& t) {
    json ll = json::array();
    json val = json::array();
    json e_ms = json::array();
    json m_ms = json::array();
    for (const IterationRecord& r : t.iterations) {
        ll.push_back(r.log_likelihood);
        val.push_back(r.validation_log_likelihood ? json(*r.validation_log_likelihood) : json(nullptr));
        e_ms.push_back(r.e_step_ms);
        m_ms.push_back(r.m_step_ms);
    }
    double e_total = 0.0;
    double m_total = 0.0;
    for (const IterationRecord& r : t.iterations) {
        e_total += r.e_step_ms;
        m_total += r.m_step_ms;
    }
    return {{"iterations", t.iterations.size()},
            {"stop_reason", t.stop_reason},
            {"initial_log_likelihood", t.initial_log_likelihood},
            {"log_likelihood", ll},
            {"validation_log_likelihood", val},
            {"n_patterns", t.n_patterns},
            {"n_trees", t.n_trees},
            {"mst_weight", t.mst_weight},
            {"timings_ms",
             {{"patterns", t.patterns_ms},
              {"mst", t.mst_ms},
              {"schedule", t.schedule_ms},
              {"init", t.init_ms},
              {"e_step", e_ms},
              {"m_step", m_ms},
              {"e_step_total", e_total},
              {"m_step_total", m_total},
              {"total", t.total_ms}}}};
}

Dataset load_data(const std::string& path, bool header) {
    CsvOptions opts;
    opts.header = header;
    return load_csv(path, opts);
}

}  // namespace

int cmd_train(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fit a Gaussian mixture to data with missing values", "gmmtree train"};
    std::string data_path;
    std::string validation_path;
    std::string out_dir = ".";
    bool header = false;
    TrainFlags flags;
    app.add_option("--data", data_path, "Training CSV")->required();
    app.add_option("--validation", validation_path, "CSV used for early stopping on log-likelihood");
    app.add_flag("--header", header, "CSV files start with a header line");
    app.add_option("--out", out_dir, "Output directory");
    flags.add_to(app, true);
    if (auto code = parse(app, args, out, err)) {
        return *code;
    }
    return guarded(
        [&] {
            const TrainConfig config = flags.resolve();
            const Dataset ds = load_data(data_path, header);
            std::optional<Dataset> validation;
            FitOptions fit_opts;
            if (!validation_path.empty()) {
                validation = load_data(validation_path, header);
                fit_opts.validation = &*validation;
            }
            const FitResult result = fit(ds, config, fit_opts);
            const fs::path dir = prepare_out(out_dir);
            const fs::path model_path = dir / "model.json";
            save_model(model_path.string(), result.model, &result.trace);
            json report{{"command", "train"},
                        {"engine", to_string(config.engine)},
                        {"config", to_json(config)},
                        {"data", {{"path", data_path}, {"n", ds.n()}, {"d", ds.d()}, {"missing", ds.missing_count()}}},
                        {"trace", trace_json(result.trace)},
                        {"artifacts", {{"model", model_path.string()}, {"report", (dir / "report.json").string()}}}};
            write_text(dir / "report.json", report.dump(2) + "\n");
            out << "trained " << result.model.size() << " components in " << result.trace.iterations.size()
                << " iterations (" << result.trace.stop_reason << "), mean log-likelihood "
                << (result.trace.iterations.empty() ? result.trace.initial_log_likelihood
                                                    : result.trace.iterations.back().log_likelihood)
                << "\nwrote " << model_path.string() << '\n';
            return static_cast<int>(kExitOk);
        },
        err);
}

int cmd_impute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fill in missing values", "gmmtree impute"};
    std::string strategy;
    std::string data_path;
    std::string model_path;
    std::string train_path;
    std::string reference_path;
    std::string out_dir = ".";
    std::size_t k = 1;
    bool header = false;
    app.add_option("--strategy", strategy, "mixture, mean or knn")
        ->required()
        ->check(CLI::IsMember({"mixture", "mean", "knn"}));
    app.add_option("--data", data_path, "CSV with missing cells")->required();
    app.add_option("--model", model_path, "Model JSON (strategy mixture)");
    app.add_option("--train", train_path, "CSV whose column means are used (strategy mean; default: --data)");
    app.add_option("--reference", reference_path, "Complete CSV of the same shape (strategy knn)");
    app.add_option("--k", k, "Neighbors averaged (strategy knn)")->check(CLI::PositiveNumber);
    app.add_flag("--header", header, "CSV files start with a header line");
    app.add_option("--out", out_dir, "Output directory");
    if (auto code = parse(app, args, out, err)) {
        return *code;
    }
    return guarded(
        [&] {
            if (strategy == "mixture" && model_path.empty()) {
                throw UsageError("strategy mixture needs --model");
            }
            if (strategy == "knn" && reference_path.empty()) {
                throw UsageError("strategy knn needs --reference (a complete copy of the data)");
            }
            const Dataset ds = load_data(data_path, header);
            ImputationResult result;
            if (strategy == "mixture") {
                result = impute_mixture(load_model(model_path), ds);
            } else if (strategy == "knn") {
                result = impute_knn(ds, load_data(reference_path, header), k);
            } else if (train_path.empty()) {
                result = impute_global_mean(ds);
            } else {
                const Dataset train = load_data(train_path, header);
                if (train.d() != ds.d()) {
                    throw DimensionMismatch("training CSV has a different number of columns");
                }
                const ImputationResult stats = impute_global_mean(train);
                const auto means = stats.parameters.at("means").get<std::vector<double>>();
                result = impute_global_mean(ds);
                for (std::size_t i = 0; i < ds.n(); ++i) {
                    for (int c : ds.row_mask(i).set_indices()) {
                        result.filled.set(i, static_cast<std::size_t>(c), means[static_cast<std::size_t>(c)]);
                    }
                }
                result.parameters = stats.parameters;
                result.parameters["train_path"] = train_path;
            }
            const fs::path dir = prepare_out(out_dir);
            result.filled.column_names = ds.column_names;
            save_csv((dir / "imputed.csv").string(), result.filled, header);
            save_csv((dir / "provenance.csv").string(), result.provenance(), header);
            json report{{"command", "impute"},
                        {"strategy", result.strategy},
                        {"parameters", result.parameters},
                        {"data", {{"path", data_path}, {"n", ds.n()}, {"d", ds.d()}}},
                        {"imputed_cells", ds.missing_count()},
                        {"artifacts",
                         {{"imputed", (dir / "imputed.csv").string()},
                          {"provenance", (dir / "provenance.csv").string()},
                          {"report", (dir / "report.json").string()}}}};
            write_text(dir / "report.json", report.dump(2) + "\n");
            out << "imputed " << ds.missing_count() << " cells with strategy " << strategy << '\n';
            return static_cast<int>(kExitOk);
        },
        err);
}

int cmd_benchmark(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Time the fast engine against the naive one and check they agree", "gmmtree benchmark"};
    std::string data_path;
    std::string out_dir = ".";
    bool header = false;
    std::size_t n = 2000;
    std::size_t d = 60;
    std::size_t min_run = 10;
    std::size_t max_run = 30;
    double separation = 3.0;
    std::uint64_t data_seed = 1;
    std::size_t iters = 10;
    std::size_t repeats = 3;
    double tolerance = 1e-6;
    bool inject = false;
    TrainFlags flags;
    app.add_option("--data", data_path, "CSV to train on (default: synthetic data)");
    app.add_flag("--header", header, "CSV starts with a header line");
    app.add_option("--n", n, "Synthetic sample count");
    app.add_option("--d", d, "Synthetic dimension");
    app.add_option("--min-run", min_run, "Shortest run of missing variables per synthetic row");
    app.add_option("--max-run", max_run, "Longest run of missing variables per synthetic row");
    app.add_option("--separation", separation, "Distance of synthetic component means from the origin");
    app.add_option("--data-seed", data_seed, "Seed of the synthetic data");
    app.add_option("--iters", iters, "EM iterations run by each engine");
    app.add_option("--repeats", repeats, "Timed runs per engine, alternating; the fastest of each is reported")
        ->check(CLI::PositiveNumber);
    app.add_option("--tolerance", tolerance, "Largest accepted divergence between engines");
    app.add_flag("--inject-divergence", inject, "Perturb the fast result (tests the divergence guard)");
    app.add_option("--out", out_dir, "Output directory");
    flags.add_to(app, false);
    if (auto code = parse(app, args, out, err)) {
        return *code;
    }
    return guarded(
        [&] {
            TrainConfig base;
            base.components = 3;
            TrainConfig config = flags.resolve(base);
            config.max_iters = iters;
            config.rel_ll_tolerance = 0.0;  // both engines run exactly `iters` iterations

            Dataset ds;
            json data_info;
            if (data_path.empty()) {
                const GeneratedMixture gen = gen_mixture(n, d, config.components, separation, data_seed);
                ds = mask_runs(gen.data, min_run, max_run, data_seed + 1);
                data_info = {{"source", "synthetic"}, {"min_run", min_run}, {"max_run", max_run},
                             {"separation", separation}, {"seed", data_seed}};
            } else {
                ds = load_data(data_path, header);
                data_info = {{"source", data_path}};
            }
            data_info["n"] = ds.n();
            data_info["d"] = ds.d();
            data_info["missing"] = ds.missing_count();
            data_info["patterns"] = extract_patterns(ds).size();

            TrainConfig fast_config = config;
            fast_config.engine = Engine::fast;
            config.engine = Engine::naive;
            const FitResult fast = fit(ds, fast_config);
            const FitResult naive = fit(ds, config);
            std::vector<double> fast_ms{fast.trace.total_ms};
            std::vector<double> naive_ms{naive.trace.total_ms};
            for (std::size_t r = 1; r < repeats; ++r) {
                fast_ms.push_back(fit(ds, fast_config).trace.total_ms);
                naive_ms.push_back(fit(ds, config).trace.total_ms);
            }
            const double best_fast = *std::min_element(fast_ms.begin(), fast_ms.end());
            const double best_naive = *std::min_element(naive_ms.begin(), naive_ms.end());

            MixtureModel fast_model = fast.model;
            if (inject) {
                fast_model.components[0].mean.array() += 1e-3;
            }
            double mean_div = 0.0;
            double cov_div = 0.0;
            double weight_div = 0.0;
            for (std::size_t j = 0; j < naive.model.size(); ++j) {
                const auto& a = fast_model.components[j];
                const auto& b = naive.model.components[j];
                mean_div = std::max(mean_div, relative_frobenius(a.mean, b.mean));
                cov_div = std::max(cov_div, relative_frobenius(a.cov, b.cov));
                weight_div = std::max(weight_div, std::abs(std::exp(a.log_weight) - std::exp(b.log_weight)));
            }
            const double ll_fast = fast.trace.iterations.empty() ? fast.trace.initial_log_likelihood
                                                                 : fast.trace.iterations.back().log_likelihood;
            const double ll_naive = naive.trace.iterations.empty() ? naive.trace.initial_log_likelihood
                                                                   : naive.trace.iterations.back().log_likelihood;
            const double ll_div = std::abs(ll_fast - ll_naive);
            const double max_div = std::max({mean_div, cov_div, weight_div, ll_div});
            const bool agree = max_div <= tolerance;
            const double ratio = best_naive / std::max(best_fast, 1e-9);
            auto em_ms = [](const TrainTrace& t) {
                double total = 0.0;
                for (const auto& r : t.iterations) {
                    total += r.e_step_ms + r.m_step_ms;
                }
                return total;
            };
            const double em_ratio = em_ms(naive.trace) / std::max(em_ms(fast.trace), 1e-9);

            const fs::path dir = prepare_out(out_dir);
            json report{{"command", "benchmark"},
                        {"config", to_json(config)},
                        {"data", data_info},
                        {"iterations", iters},
                        {"engines", {{"fast", trace_json(fast.trace)}, {"naive", trace_json(naive.trace)}}},
                        {"repeats", repeats},
                        {"total_ms", {{"fast", fast_ms}, {"naive", naive_ms}}},
                        {"best_ms", {{"fast", best_fast}, {"naive", best_naive}}},
                        {"ratio_naive_over_fast", ratio},
                        {"em_ratio_naive_over_fast", em_ratio},
                        {"divergence",
                         {{"mean", mean_div},
                          {"covariance", cov_div},
                          {"weight", weight_div},
                          {"log_likelihood", ll_div},
                          {"max", max_div}}},
                        {"tolerance", tolerance},
                        {"fault_injected", inject},
                        {"engines_agree", agree},
                        {"artifacts", {{"report", (dir / "benchmark.json").string()}}}};
            write_text(dir / "benchmark.json", report.dump(2) + "\n");
            out << "fast " << best_fast << " ms, naive " << best_naive << " ms, ratio " << ratio
                << ", max divergence " << max_div << '\n';
            if (!agree) {
                throw EngineDivergence("max divergence " + format_real(max_div) + " exceeds " +
                                       format_real(tolerance));
            }
            return static_cast<int>(kExitOk);
        },
        err);
}

int cmd_eval(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Compare imputation pipelines followed by kernel ridge regression", "gmmtree eval"};
    std::string data_path;
    std::string out_dir = ".";
    bool header = false;
    bool synthetic = false;
    std::optional<std::size_t> target;
    std::size_t n = 4000;
    std::uint64_t task_seed = 7;
    std::optional<std::size_t> n_train;
    std::optional<std::size_t> n_validation;
    std::vector<double> fractions{0.0, 0.05, 0.1, 0.2, 0.3, 0.4};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::string grid_name = "full";
    TrainFlags flags;
    app.add_option("--data", data_path, "Complete CSV with inputs and target");
    app.add_flag("--header", header, "CSV starts with a header line");
    app.add_option("--target", target, "Target column (default: last)");
    app.add_flag("--synthetic", synthetic, "Use the built-in synthetic regression task");
    app.add_option("--n", n, "Synthetic sample count");
    app.add_option("--task-seed", task_seed, "Seed of the synthetic task");
    app.add_option("--train-size", n_train, "Training rows (first rows of the file)");
    app.add_option("--validation-size", n_validation, "Validation rows (following the training rows)");
    app.add_option("--fractions", fractions, "Missing fractions")->delimiter(',');
    app.add_option("--seeds", seeds, "Masking seeds")->delimiter(',');
    app.add_option("--grid", grid_name, "Kernel grid: full (225 specs) or compact (45)")
        ->check(CLI::IsMember({"full", "compact"}));
    app.add_option("--out", out_dir, "Output directory");
    flags.add_to(app, true);
    if (auto code = parse(app, args, out, err)) {
        return *code;
    }
    return guarded(
        [&] {
            if (data_path.empty() == !synthetic) {
                throw UsageError("give exactly one of --data and --synthetic");
            }
            RegressionTask task;
            if (synthetic) {
                task = gen_regression_task(n, task_seed);
            } else {
                const Dataset table = load_data(data_path, header);
                if (!table.complete()) {
                    throw IncompleteReference("eval needs a complete source table (it inserts the missing cells)");
                }
                const std::size_t rows = table.n();
                // The customary split of the 4177-row abalone table.
                const std::size_t default_train = rows == 4177 ? 2000 : rows / 2;
                const std::size_t default_val = rows == 4177 ? 1133 : rows / 4;
                task = task_from_table(table, target.value_or(table.d() - 1), n_train.value_or(default_train),
                                       n_validation.value_or(default_val));
            }
            CompareOptions opts;
            opts.fractions = fractions;
            opts.seeds = seeds;
            opts.grid = grid_name == "full" ? default_grid() : compact_grid();
            opts.mixture = flags.resolve(CompareOptions::default_mixture_config());
            const auto start = std::chrono::steady_clock::now();
            const Report report = compare_pipelines(task, opts);
            const double total_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

            const fs::path dir = prepare_out(out_dir);
            {
                std::ofstream csv(dir / "eval.csv");
                if (!csv) {
                    throw std::runtime_error("cannot write " + (dir / "eval.csv").string());
                }
                report.write_csv(csv);
            }
            write_text(dir / "eval_summary.json", report.summary().dump(2) + "\n");
            json run{{"command", "eval"},
                     {"source", synthetic ? json("synthetic") : json(data_path)},
                     {"fractions", fractions},
                     {"seeds", seeds},
                     {"grid", grid_name},
                     {"grid_size", opts.grid.size()},
                     {"mixture_config", to_json(opts.mixture)},
                     {"rows", report.rows.size()},
                     {"timings_ms", {{"total", total_ms}}},
                     {"artifacts",
                      {{"table", (dir / "eval.csv").string()},
                       {"summary", (dir / "eval_summary.json").string()},
                       {"report", (dir / "report.json").string()}}}};
            write_text(dir / "report.json", run.dump(2) + "\n");
            out << "wrote " << report.rows.size() << " rows to " << (dir / "eval.csv").string() << '\n';
            return static_cast<int>(kExitOk);
        },
        err);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    static const char* usage =
        "usage: gmmtree <train|impute|benchmark|eval> [options]\n"
        "Run 'gmmtree <command> --help' for the options of a command.\n";
    if (args.empty()) {
        err << usage;
        return kExitConfig;
    }
    const std::string& cmd = args.front();
    const std::vector<std::string> rest(args.begin() + 1, args.end());
    if (cmd == "train") {
        return cmd_train(rest, out, err);
    }
    if (cmd == "impute") {
        return cmd_impute(rest, out, err);
    }
    if (cmd == "benchmark") {
        return cmd_benchmark(rest, out, err);
    }
    if (cmd == "eval") {
        return cmd_eval(rest, out, err);
    }
    if (cmd == "--help" || cmd == "-h" || cmd == "help") {
        out << usage;
        return kExitOk;
    }
    err << "unknown command '" << cmd << "'\n" << usage;
    return kExitConfig;
}

}  // namespace gmmtree
