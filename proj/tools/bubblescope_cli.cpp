// bubblescope command-line front end: file-based batch interface over the
// library. CSV in, JSON/CSV/TSV out; exit 0 on success, 1 on domain errors
// (machine-readable JSON on stderr), 2 on usage errors.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <bubblescope/bubblescope.hpp>

namespace bs = bubblescope;
using nlohmann::ordered_json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) bs::raise(bs::errc::io_error, "cannot open input file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Write to a sibling temp file and rename into place, so readers never
// observe a partially written output.
void write_file_atomic(const std::string& path, const std::string& content) {
    std::filesystem::path target(path);
    std::filesystem::path tmp(path + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) bs::raise(bs::errc::io_error, "cannot open output file: " + tmp.string());
        out << content;
        out.flush();
        if (!out) bs::raise(bs::errc::io_error, "write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) bs::raise(bs::errc::io_error, "rename failed: " + path + " (" + ec.message() + ")");
}

void echo_run(const std::string& subcommand, const ordered_json& config,
              const std::vector<std::string>& outputs) {
    ordered_json j{{"subcommand", subcommand}, {"config", config}, {"outputs", outputs}};
    std::cout << j.dump() << "\n";
}

bs::PriceSeries load_series(const std::string& path) {
    return bs::parse_csv(read_file(path), std::filesystem::path(path).stem().string());
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestOpts {
    std::string input, out, label;
};

void run_ingest(const IngestOpts& o) {
    bs::PriceSeries series = bs::parse_csv(
        read_file(o.input),
        o.label.empty() ? std::filesystem::path(o.input).stem().string() : o.label);
    ordered_json config{{"input", o.input}, {"out", o.out}, {"label", series.label}};
    // The file is the canonical series object; the run echo goes to stdout.
    write_file_atomic(o.out, bs::to_json(series).dump(2) + "\n");
    echo_run("ingest", config, {o.out});
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOpts {
    std::string kind, out, trace_out;
    std::uint64_t seed = 0;
    std::size_t n = 250;
    // gbm / feedback
    double p0 = 100.0, mu = 0.0005, sigma = 0.01, c = 2e-5;
    // fts / lppl
    double A = 5.0, B = -1.0, tc = -1.0, m = 0.5, noise = 0.0;
    double C1 = 0.05, C2 = 0.0, omega = 8.0;
    // ising
    std::size_t agents = 1000;
    double K = 1.0, sigma_noise = 1.0, lambda = 10.0;
    double k_start = -1.0, k_end = -1.0;
};

void run_simulate(const SimulateOpts& o) {
    if (o.n < 2) bs::raise(bs::errc::invalid_argument, "--n must be at least 2");
    std::vector<double> grid(o.n);
    for (std::size_t i = 0; i < o.n; ++i) grid[i] = static_cast<double>(i);

    ordered_json config{{"kind", o.kind}, {"seed", o.seed}, {"n", o.n}, {"out", o.out}};
    bs::PriceSeries series;
    std::vector<std::string> outputs{o.out};

    if (o.kind == "gbm") {
        config["p0"] = o.p0;
        config["mu"] = o.mu;
        config["sigma"] = o.sigma;
        series = bs::gen_gbm({o.p0, o.mu, o.sigma, o.n}, o.seed);
    } else if (o.kind == "fts") {
        double tc = o.tc > 0.0 ? o.tc : static_cast<double>(o.n) + 10.0;
        config["A"] = o.A;
        config["B"] = o.B;
        config["tc"] = tc;
        config["m"] = o.m;
        config["noise"] = o.noise;
        series = bs::gen_fts(bs::PowerLawFTSParams{o.A, o.B, tc, o.m}, o.noise, o.seed, grid);
    } else if (o.kind == "lppl") {
        double tc = o.tc > 0.0 ? o.tc : static_cast<double>(o.n) + 10.0;
        config["A"] = o.A;
        config["B"] = o.B;
        config["tc"] = tc;
        config["m"] = o.m;
        config["C1"] = o.C1;
        config["C2"] = o.C2;
        config["omega"] = o.omega;
        config["noise"] = o.noise;
        series = bs::gen_fts(bs::LPPLParams{o.A, o.B, tc, o.m, o.C1, o.C2, o.omega}, o.noise,
                             o.seed, grid);
    } else if (o.kind == "feedback") {
        config["p0"] = o.p0;
        config["c"] = o.c;
        config["noise"] = o.noise;
        series = bs::gen_feedback({o.p0, o.c}, o.noise, o.seed, grid);
    } else if (o.kind == "ising") {
        if ((o.k_start >= 0.0) != (o.k_end >= 0.0))
            throw CLI::ValidationError("simulate",
                                       "--k-start and --k-end must be given together");
        bs::IsingMarketParams params;
        params.n_agents = o.agents;
        params.K = o.K;
        params.sigma_noise = o.sigma_noise;
        params.lambda_liquidity = o.lambda;
        params.n_steps = o.n;
        if (o.k_start >= 0.0 && o.k_end >= 0.0) params.K_schedule = {{o.k_start, o.k_end}};
        config["agents"] = o.agents;
        config["K"] = o.K;
        config["sigma_noise"] = o.sigma_noise;
        config["lambda"] = o.lambda;
        if (params.K_schedule) {
            config["k_start"] = o.k_start;
            config["k_end"] = o.k_end;
        }
        bs::IsingMarketResult result = bs::gen_ising_market(params, o.seed);
        series = std::move(result.series);
        if (!o.trace_out.empty()) {
            std::string tsv = "time\tmagnetization\n";
            for (std::size_t i = 0; i < result.magnetization.size(); ++i) {
                tsv += bs::detail::format_double(series.times[i]);
                tsv += '\t';
                tsv += bs::detail::format_double(result.magnetization[i]);
                tsv += '\n';
            }
            write_file_atomic(o.trace_out, tsv);
            config["trace_out"] = o.trace_out;
            outputs.push_back(o.trace_out);
        }
    } else {
        bs::raise(bs::errc::invalid_argument, "unknown --kind: " + o.kind);
    }

    write_file_atomic(o.out, bs::to_csv(series));
    echo_run("simulate", config, outputs);
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitOpts {
    std::string input, out, model = "fts";
    std::uint64_t seed = 0;
    std::size_t min_length = 30;
    int refine_iter = 500;
    double refine_tol = 1e-9;
    int top_k = 5;
    double horizon_frac = 0.5;
};

void run_fit(const FitOpts& o) {
    bs::PriceSeries series = load_series(o.input);
    bs::LogPriceSeries logs = bs::log_prices(series);

    bs::FitConfig cfg;
    cfg.seed = o.seed;
    cfg.min_length = o.min_length;
    cfg.refine_max_iter = o.refine_iter;
    cfg.refine_tol = o.refine_tol;
    cfg.refine_top_k = o.top_k;
    cfg.tc_horizon_factor = o.horizon_frac;

    bs::FitResult fit;
    if (o.model == "fts")
        fit = bs::fit_fts(logs, cfg);
    else if (o.model == "lppl")
        fit = bs::fit_lppl(logs, cfg);
    else
        bs::raise(bs::errc::invalid_argument, "unknown --model: " + o.model);

    bs::ModelComparison cmp = bs::compare_to_null(fit);
    ordered_json config{{"input", o.input},       {"out", o.out},
                        {"model", o.model},       {"seed", o.seed},
                        {"min_length", o.min_length}, {"refine_iter", o.refine_iter},
                        {"refine_tol", o.refine_tol}, {"top_k", o.top_k},
                        {"horizon_frac", o.horizon_frac}};
    ordered_json doc{{"subcommand", "fit"},
                     {"config", config},
                     {"result", bs::to_json(fit)},
                     {"comparison",
                      ordered_json{{"sse_ratio", cmp.sse_ratio},
                                   {"relative_improvement", cmp.relative_improvement},
                                   {"bubble_shape_ok", cmp.bubble_shape_ok}}}};
    write_file_atomic(o.out, doc.dump(2) + "\n");
    echo_run("fit", config, {o.out});
}

// ---------------------------------------------------------------------------
// drawdowns
// ---------------------------------------------------------------------------

struct DrawdownsOpts {
    std::string input, out, csv_out, crashes_csv_out;
    double epsilon = 0.0;
    double crash_threshold = 0.15;
    double crash_window = 15.0;
    bool kings = false;
    double bulk_quantile = 0.99;
    double king_count_max = 0.1;
};

void run_drawdowns(const DrawdownsOpts& o) {
    bs::PriceSeries series = load_series(o.input);
    std::vector<bs::Drawdown> drawdowns = bs::extract_drawdowns(series, o.epsilon);
    std::vector<bs::CrashEvent> crashes =
        bs::detect_crashes(series, o.crash_threshold, o.crash_window);

    ordered_json config{{"input", o.input},
                        {"out", o.out},
                        {"epsilon", o.epsilon},
                        {"crash_threshold", o.crash_threshold},
                        {"crash_window", o.crash_window},
                        {"kings", o.kings},
                        {"bulk_quantile", o.bulk_quantile},
                        {"king_count_max", o.king_count_max}};

    ordered_json jdd = ordered_json::array();
    for (const bs::Drawdown& d : drawdowns) jdd.push_back(bs::to_json(d));
    ordered_json jcr = ordered_json::array();
    for (const bs::CrashEvent& c : crashes) jcr.push_back(bs::to_json(c));
    ordered_json doc{{"subcommand", "drawdowns"},
                     {"config", config},
                     {"drawdowns", jdd},
                     {"crashes", jcr}};

    if (o.kings) {
        bs::StretchedExpFit bulk = bs::fit_bulk(drawdowns, o.bulk_quantile);
        std::vector<bs::Drawdown> kings = bs::flag_kings(drawdowns, bulk, o.king_count_max);
        doc["bulk_fit"] = bs::to_json(bulk);
        ordered_json jk = ordered_json::array();
        for (const bs::Drawdown& d : kings) jk.push_back(bs::to_json(d));
        doc["kings"] = jk;
    }

    std::vector<std::string> outputs{o.out};
    write_file_atomic(o.out, doc.dump(2) + "\n");
    if (!o.csv_out.empty()) {
        write_file_atomic(o.csv_out, bs::to_csv(drawdowns));
        outputs.push_back(o.csv_out);
    }
    if (!o.crashes_csv_out.empty()) {
        write_file_atomic(o.crashes_csv_out, bs::to_csv(crashes));
        outputs.push_back(o.crashes_csv_out);
    }
    echo_run("drawdowns", config, outputs);
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

struct ScanOpts {
    std::string input, out, model = "fts";
    std::size_t window = 250;
    std::size_t step = 21;
    double improvement_min = 0.25;
    double horizon_frac = 0.25;
    double crash_threshold = 0.15;
    double crash_window = 15.0;
    double lookback = 63.0;
    std::uint64_t seed = 0;
    bool emit_plot_data = false;
};

void run_scan(const ScanOpts& o) {
    bs::PriceSeries series = load_series(o.input);

    bs::ScanConfig cfg;
    cfg.window_length = o.window;
    cfg.step = o.step;
    if (o.model == "fts")
        cfg.model = bs::ModelChoice::fts;
    else if (o.model == "lppl")
        cfg.model = bs::ModelChoice::lppl;
    else if (o.model == "both")
        cfg.model = bs::ModelChoice::both;
    else
        bs::raise(bs::errc::invalid_argument, "unknown --model: " + o.model);
    cfg.improvement_min = o.improvement_min;
    cfg.horizon_frac = o.horizon_frac;
    cfg.crash_threshold = o.crash_threshold;
    cfg.crash_window_days = o.crash_window;
    cfg.precedence_lookback = o.lookback;
    cfg.fit.seed = o.seed;

    bs::BubbleReport report = bs::scan(series, cfg);

    ordered_json config{{"input", o.input},
                        {"out", o.out},
                        {"window", o.window},
                        {"step", o.step},
                        {"model", o.model},
                        {"improvement_min", o.improvement_min},
                        {"horizon_frac", o.horizon_frac},
                        {"crash_threshold", o.crash_threshold},
                        {"crash_window", o.crash_window},
                        {"lookback", o.lookback},
                        {"seed", o.seed},
                        {"emit_plot_data", o.emit_plot_data}};
    ordered_json doc{{"subcommand", "scan"}, {"config", config}, {"report", bs::to_json(report)}};

    std::vector<std::string> outputs{o.out};
    write_file_atomic(o.out, doc.dump(2) + "\n");

    if (o.emit_plot_data) {
        std::string stem = o.out;
        if (stem.size() > 5 && stem.substr(stem.size() - 5) == ".json")
            stem = stem.substr(0, stem.size() - 5);
        std::size_t k = 0;
        for (const bs::WindowDiagnosis& w : report.windows) {
            if (!w.bubble_flag) {
                ++k;
                continue;
            }
            bs::LogPriceSeries win = bs::log_prices(bs::window(series, w.t_start, w.t_end));
            std::string path = stem + ".window" + std::to_string(k) + ".tsv";
            write_file_atomic(path, bs::plot_data_tsv(w, win));
            outputs.push_back(path);
            ++k;
        }
    }
    echo_run("scan", config, outputs);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bubblescope: super-exponential bubble diagnostics and crash statistics"};
    app.require_subcommand(1);

    IngestOpts ingest;
    CLI::App* cmd_ingest = app.add_subcommand("ingest", "validate a CSV and emit canonical JSON");
    cmd_ingest->add_option("--input", ingest.input, "input CSV (date,close)")->required();
    cmd_ingest->add_option("--out", ingest.out, "output JSON path")->required();
    cmd_ingest->add_option("--label", ingest.label, "series label (default: input stem)");

    SimulateOpts sim;
    CLI::App* cmd_sim = app.add_subcommand("simulate", "generate a synthetic series as CSV");
    cmd_sim->add_option("--kind", sim.kind, "gbm|fts|lppl|feedback|ising")->required();
    cmd_sim->add_option("--out", sim.out, "output CSV path")->required();
    cmd_sim->add_option("--seed", sim.seed, "RNG seed");
    cmd_sim->add_option("--n", sim.n, "number of observations (steps for ising)");
    cmd_sim->add_option("--p0", sim.p0, "initial price (gbm, feedback)");
    cmd_sim->add_option("--mu", sim.mu, "drift per day (gbm)");
    cmd_sim->add_option("--sigma", sim.sigma, "volatility per sqrt(day) (gbm)");
    cmd_sim->add_option("--c", sim.c, "feedback coefficient (feedback)");
    cmd_sim->add_option("--A", sim.A, "log-price level at tc (fts, lppl)");
    cmd_sim->add_option("--B", sim.B, "power-law amplitude (fts, lppl)");
    cmd_sim->add_option("--tc", sim.tc, "critical time (default n+10)");
    cmd_sim->add_option("--m", sim.m, "singularity exponent (fts, lppl)");
    cmd_sim->add_option("--noise", sim.noise, "log-price noise sigma (fts, lppl, feedback)");
    cmd_sim->add_option("--C1", sim.C1, "cosine amplitude (lppl)");
    cmd_sim->add_option("--C2", sim.C2, "sine amplitude (lppl)");
    cmd_sim->add_option("--omega", sim.omega, "angular log-frequency (lppl)");
    cmd_sim->add_option("--agents", sim.agents, "number of agents (ising)");
    cmd_sim->add_option("--K", sim.K, "imitation strength (ising)");
    cmd_sim->add_option("--sigma-noise", sim.sigma_noise, "idiosyncratic noise scale (ising)");
    cmd_sim->add_option("--lambda", sim.lambda, "price-impact divisor (ising)");
    cmd_sim->add_option("--k-start", sim.k_start, "ramp start coupling (ising)");
    cmd_sim->add_option("--k-end", sim.k_end, "ramp end coupling (ising)");
    cmd_sim->add_option("--trace-out", sim.trace_out, "magnetization trace TSV (ising)");

    FitOpts fit;
    CLI::App* cmd_fit = app.add_subcommand("fit", "calibrate fts/lppl on a series");
    cmd_fit->add_option("--input", fit.input, "input CSV")->required();
    cmd_fit->add_option("--out", fit.out, "output JSON path")->required();
    cmd_fit->add_option("--model", fit.model, "fts|lppl (default fts)");
    cmd_fit->add_option("--seed", fit.seed, "RNG seed");
    cmd_fit->add_option("--min-length", fit.min_length, "minimum window length");
    cmd_fit->add_option("--refine-iter", fit.refine_iter, "max refinement iterations");
    cmd_fit->add_option("--refine-tol", fit.refine_tol, "refinement SSE tolerance");
    cmd_fit->add_option("--top-k", fit.top_k, "grid starts to refine");
    cmd_fit->add_option("--horizon-frac", fit.horizon_frac, "tc horizon as fraction of span");

    DrawdownsOpts dd;
    CLI::App* cmd_dd = app.add_subcommand("drawdowns", "extract drawdowns and crash events");
    cmd_dd->add_option("--input", dd.input, "input CSV")->required();
    cmd_dd->add_option("--out", dd.out, "output JSON path")->required();
    cmd_dd->add_option("--csv-out", dd.csv_out, "drawdown list CSV path");
    cmd_dd->add_option("--crashes-csv-out", dd.crashes_csv_out, "crash list CSV path");
    cmd_dd->add_option("--epsilon", dd.epsilon, "drawdown rally tolerance");
    cmd_dd->add_option("--crash-threshold", dd.crash_threshold, "crash drop threshold");
    cmd_dd->add_option("--crash-window", dd.crash_window, "crash window in days");
    cmd_dd->add_flag("--kings", dd.kings, "fit the bulk and flag outlier kings");
    cmd_dd->add_option("--bulk-quantile", dd.bulk_quantile, "bulk cutoff quantile");
    cmd_dd->add_option("--king-count-max", dd.king_count_max, "expected-count flag threshold");

    ScanOpts scan;
    CLI::App* cmd_scan = app.add_subcommand("scan", "sliding-window bubble diagnosis report");
    cmd_scan->add_option("--input", scan.input, "input CSV")->required();
    cmd_scan->add_option("--out", scan.out, "output JSON path")->required();
    cmd_scan->add_option("--window", scan.window, "window length in observations");
    cmd_scan->add_option("--step", scan.step, "window step in observations");
    cmd_scan->add_option("--model", scan.model, "fts|lppl|both");
    cmd_scan->add_option("--improvement-min", scan.improvement_min, "flag threshold");
    cmd_scan->add_option("--horizon-frac", scan.horizon_frac, "tc horizon fraction");
    cmd_scan->add_option("--crash-threshold", scan.crash_threshold, "crash drop threshold");
    cmd_scan->add_option("--crash-window", scan.crash_window, "crash window in days");
    cmd_scan->add_option("--lookback", scan.lookback, "precedence lookback in days");
    cmd_scan->add_option("--seed", scan.seed, "RNG seed");
    cmd_scan->add_flag("--emit-plot-data", scan.emit_plot_data,
                       "write per-flagged-window TSV plot data");

    cmd_ingest->callback([&] { run_ingest(ingest); });
    cmd_sim->callback([&] { run_simulate(sim); });
    cmd_fit->callback([&] { run_fit(fit); });
    cmd_dd->callback([&] { run_drawdowns(dd); });
    cmd_scan->callback([&] { run_scan(scan); });

    auto subcommand_name = [&]() -> std::string {
        auto subs = app.get_subcommands();
        return subs.empty() ? "" : subs.front()->get_name();
    };

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const bs::Error& e) {
        ordered_json err{{"code", e.code_name()},
                         {"message", e.what()},
                         {"subcommand", subcommand_name()}};
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        ordered_json err{{"code", "Internal"},
                         {"message", e.what()},
                         {"subcommand", subcommand_name()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
