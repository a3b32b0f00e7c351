// Command-line front end: simulate test datasets, fit Thorin measures,
// sample from fitted measures, run goodness-of-fit benchmarks, and dump
// projected QQ diagnostics.
//
// Exit codes: 0 success, 2 usage, 3 data error, 4 numeric failure.

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "thorinfit/cubature.hpp"
#include "thorinfit/datasets.hpp"
#include "thorinfit/errors.hpp"
#include "thorinfit/gof.hpp"
#include "thorinfit/io.hpp"
#include "thorinfit/rng.hpp"
#include "thorinfit/sgd.hpp"
#include "thorinfit/thorin.hpp"

namespace {

std::vector<std::string> default_column_names(Eigen::Index d) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) names.push_back("x" + std::to_string(j + 1));
    return names;
}

std::vector<double> sorted_projection(const Eigen::MatrixXd& data, const Eigen::VectorXd& c) {
    Eigen::VectorXd y = data * c;
    std::vector<double> v(y.data(), y.data() + y.size());
    std::sort(v.begin(), v.end());
    return v;
}

int cmd_simulate(const std::string& kind, std::int64_t n, int d, std::uint64_t seed,
                 const std::string& out, bool header) {
    Eigen::MatrixXd data;
    if (kind == "functional") {
        data = thorinfit::simulate_functional(n, seed);
    } else {
        auto sim = thorinfit::simulate_multiplicative(n, d, seed);
        data = std::move(sim.data);
        std::cout << "exponents:";
        for (Eigen::Index j = 0; j < sim.exponents.size(); ++j) std::cout << ' ' << sim.exponents[j];
        std::cout << '\n';
    }
    thorinfit::write_csv(out, data,
                         header ? default_column_names(data.cols()) : std::vector<std::string>{});
    std::cout << "wrote " << data.rows() << " x " << data.cols() << " observations to " << out
              << '\n';
    return 0;
}

int cmd_fit(const std::string& input, bool header, const thorinfit::FitConfig& cfg,
            const std::string& report_path, const std::string& measure_path, bool wall_time) {
    const Eigen::MatrixXd data = thorinfit::load_csv(input, header);
    const thorinfit::FitReport report = thorinfit::fit(data, cfg);
    thorinfit::save_report(report_path, report, wall_time);
    nlohmann::ordered_json meta;
    meta["source"] = input;
    meta["seed"] = cfg.seed;
    thorinfit::save_measure(measure_path, report.measure, std::move(meta));
    std::cout << "fit " << data.rows() << " observations in dimension " << data.cols() << ": "
              << report.measure.atom_count() << " atoms kept, termination "
              << report.termination << " after " << report.iterations << " iterations";
    if (!report.loss_trace.empty()) std::cout << ", last traced loss " << report.loss_trace.back();
    std::cout << ", " << report.wall_seconds << " s\n";
    std::cout << "report: " << report_path << "\nmeasure: " << measure_path << '\n';
    return 0;
}

int cmd_sample(const std::string& measure_path, std::int64_t n, std::uint64_t seed,
               const std::string& out, bool header) {
    const thorinfit::ThorinMeasure nu = thorinfit::load_measure(measure_path);
    thorinfit::Rng rng(seed);
    bool degenerate = false;
    const Eigen::MatrixXd data = thorinfit::sample(nu, n, rng, &degenerate);
    if (degenerate)
        std::cerr << "warning: measure has no mass; sample is identically zero\n";
    thorinfit::write_csv(out, data,
                         header ? default_column_names(data.cols()) : std::vector<std::string>{});
    std::cout << "wrote " << data.rows() << " x " << data.cols() << " samples to " << out << '\n';
    return 0;
}

int cmd_gof(const std::string& measure_path, const std::string& truth_kind,
            const std::string& truth_csv, bool truth_header, int d_opt, std::int64_t n,
            int repetitions, int resamples, std::uint64_t seed, const std::string& out, bool force,
            int threads) {
    const thorinfit::ThorinMeasure nu = thorinfit::load_measure(measure_path);
    const int d = d_opt > 0 ? d_opt : nu.dim();

    thorinfit::Sampler truth;
    if (truth_kind == "functional") {
        if (nu.dim() != 4) throw thorinfit::data_error("functional truth is 4-dimensional");
        truth = [](std::int64_t rows, std::uint64_t s) {
            return thorinfit::simulate_functional(rows, s);
        };
    } else if (truth_kind == "multiplicative") {
        thorinfit::Rng exp_rng(thorinfit::derive_seed(seed, 0xE0ull));
        Eigen::VectorXd exponents(d);
        for (int j = 0; j < d; ++j) exponents[j] = exp_rng.uniform01();
        truth = [exponents](std::int64_t rows, std::uint64_t s) {
            return thorinfit::simulate_multiplicative_rows(exponents, rows, s);
        };
    } else {
        const Eigen::MatrixXd pool = thorinfit::load_csv(truth_csv, truth_header);
        truth = [pool](std::int64_t rows, std::uint64_t s) {
            thorinfit::Rng rng(s);
            Eigen::MatrixXd draw(rows, pool.cols());
            for (Eigen::Index i = 0; i < rows; ++i) {
                const auto row = static_cast<Eigen::Index>(rng.uniform01() *
                                                           static_cast<double>(pool.rows()));
                draw.row(i) = pool.row(std::min(row, pool.rows() - 1));
            }
            return draw;
        };
    }
    const thorinfit::Sampler model = [&nu](std::int64_t rows, std::uint64_t s) {
        thorinfit::Rng rng(s);
        return thorinfit::sample(nu, rows, rng);
    };

    const thorinfit::StatBenchmark bench =
        thorinfit::benchmark(truth, repetitions, n, thorinfit::derive_seed(seed, 1), force, threads);
    std::vector<double> ks_p(static_cast<std::size_t>(resamples)),
        cvm_p(static_cast<std::size_t>(resamples));
    for (int r = 0; r < resamples; ++r) {
        const auto [kp, cp] = thorinfit::p_values(truth, model, bench, n,
                                                  thorinfit::derive_seed(seed, 100 + static_cast<std::uint64_t>(r)),
                                                  force);
        ks_p[static_cast<std::size_t>(r)] = kp;
        cvm_p[static_cast<std::size_t>(r)] = cp;
    }

    const auto histogram = [](const std::vector<double>& p) {
        std::vector<int> bins(20, 0);
        for (double v : p) {
            auto b = static_cast<std::size_t>(v * 20.0);
            if (b >= 20) b = 19;
            ++bins[b];
        }
        return bins;
    };
    const auto fraction_below = [](const std::vector<double>& p, double cut) {
        double f = 0.0;
        for (double v : p) f += v < cut ? 1.0 : 0.0;
        return f / static_cast<double>(p.size());
    };

    nlohmann::ordered_json j;
    j["benchmark"] = {{"repetitions", repetitions},
                      {"sample_size", n},
                      {"dim", bench.dim},
                      {"ks", bench.ks},
                      {"cvm", bench.cvm}};
    j["p_values"] = {{"ks", ks_p}, {"cvm", cvm_p}};
    j["histogram"] = {{"bins", 20}, {"ks", histogram(ks_p)}, {"cvm", histogram(cvm_p)}};
    j["fraction_rejected_at_0.05"] = {{"ks", fraction_below(ks_p, 0.05)},
                                      {"cvm", fraction_below(cvm_p, 0.05)}};
    std::ofstream stream(out);
    if (!stream) throw thorinfit::data_error("cannot write " + out);
    stream << j.dump(2) << '\n';
    if (!stream) throw thorinfit::data_error("write failed for " + out);
    std::cout << "ks rejection fraction at 0.05: " << fraction_below(ks_p, 0.05)
              << ", cvm: " << fraction_below(cvm_p, 0.05) << "\nreport: " << out << '\n';
    return 0;
}

int cmd_diagnose(const std::string& input, bool header, const std::string& measure_path,
                 int directions, int levels, std::int64_t samples, std::uint64_t seed,
                 const std::string& out_prefix) {
    const Eigen::MatrixXd data = thorinfit::load_csv(input, header);
    const thorinfit::ThorinMeasure nu = thorinfit::load_measure(measure_path);
    if (nu.dim() != data.cols()) throw thorinfit::data_error("measure and data dimension mismatch");
    if (directions < 1 || levels < 1) throw thorinfit::data_error("need positive counts");
    const std::int64_t n_model = samples > 0 ? samples : data.rows();
    thorinfit::Rng rng(thorinfit::derive_seed(seed, 0x5a));
    const Eigen::MatrixXd model = thorinfit::sample(nu, n_model, rng);

    const int d = static_cast<int>(data.cols());
    std::vector<double> rel_errors;
    Eigen::MatrixXd qq(static_cast<Eigen::Index>(directions) * levels, 4);
    thorinfit::Rng dir_rng(seed);
    for (int k = 0; k < directions; ++k) {
        Eigen::VectorXd c(d);
        for (int j = 0; j < d; ++j) c[j] = dir_rng.uniform01();
        const auto data_sorted = sorted_projection(data, c);
        const auto model_sorted = sorted_projection(model, c);
        for (int l = 0; l < levels; ++l) {
            const double level = (l + 1.0) / (levels + 1.0);
            const double dq = thorinfit::quantile_sorted(data_sorted, level);
            const double mq = thorinfit::quantile_sorted(model_sorted, level);
            const Eigen::Index row = static_cast<Eigen::Index>(k) * levels + l;
            qq(row, 0) = k;
            qq(row, 1) = level;
            qq(row, 2) = dq;
            qq(row, 3) = mq;
            if (dq != 0.0) rel_errors.push_back(std::abs(mq - dq) / std::abs(dq));
        }
    }
    thorinfit::write_csv(out_prefix + "_projection_qq.csv", qq,
                         {"direction", "level", "data_quantile", "model_quantile"});

    Eigen::MatrixXd marginal_qq(static_cast<Eigen::Index>(d) * levels, 4);
    for (int j = 0; j < d; ++j) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
        c[j] = 1.0;
        const auto data_sorted = sorted_projection(data, c);
        const auto model_sorted = sorted_projection(model, c);
        for (int l = 0; l < levels; ++l) {
            const double level = (l + 1.0) / (levels + 1.0);
            const Eigen::Index row = static_cast<Eigen::Index>(j) * levels + l;
            marginal_qq(row, 0) = j;
            marginal_qq(row, 1) = level;
            marginal_qq(row, 2) = thorinfit::quantile_sorted(data_sorted, level);
            marginal_qq(row, 3) = thorinfit::quantile_sorted(model_sorted, level);
        }
    }
    thorinfit::write_csv(out_prefix + "_marginal_qq.csv", marginal_qq,
                         {"marginal", "level", "data_quantile", "model_quantile"});

    std::sort(rel_errors.begin(), rel_errors.end());
    if (!rel_errors.empty())
        std::cout << "median relative projected quantile error: "
                  << thorinfit::quantile_sorted(rel_errors, 0.5) << '\n';
    std::cout << "wrote " << out_prefix << "_projection_qq.csv and " << out_prefix
              << "_marginal_qq.csv\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fit finitely atomic Thorin measures to positive data by random projections"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a test dataset");
    std::string sim_kind;
    std::int64_t sim_n = 1000;
    int sim_d = 4;
    std::uint64_t sim_seed = 0;
    std::string sim_out;
    bool sim_header = false;
    sim->add_option("--kind", sim_kind, "dataset family")
        ->required()
        ->check(CLI::IsMember({"functional", "multiplicative"}));
    sim->add_option("--n", sim_n, "number of observations")->required();
    sim->add_option("--d", sim_d, "dimension (multiplicative only)");
    sim->add_option("--seed", sim_seed, "random seed");
    sim->add_option("--out", sim_out, "output CSV path")->required();
    sim->add_flag("--header", sim_header, "write a header row");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "fit a Thorin measure to CSV data");
    std::string fit_input, fit_report = "fit_report.json", fit_measure = "fitted_measure.json";
    bool fit_header = false, fit_no_wall = false;
    thorinfit::FitConfig cfg;
    fit_cmd->add_option("--input", fit_input, "observation CSV")->required()->check(CLI::ExistingFile);
    fit_cmd->add_flag("--header", fit_header, "input has a header row");
    fit_cmd->add_option("--out", fit_report, "fit report JSON path");
    fit_cmd->add_option("--measure-out", fit_measure, "fitted measure JSON path");
    fit_cmd->add_option("--atoms", cfg.atom_count, "number of atoms");
    fit_cmd->add_option("--degree", cfg.degree, "projected cumulant truncation degree");
    fit_cmd->add_option("--iterations", cfg.max_iterations, "gradient iterations");
    fit_cmd->add_option("--batch", cfg.batch_size, "directions per iteration");
    fit_cmd->add_option("--learning-rate", cfg.learning_rate, "Adam step size");
    fit_cmd->add_option("--lasso", cfg.lasso, "weight lasso strength");
    fit_cmd->add_option("--weight-threshold", cfg.weight_threshold, "final atom weight cutoff");
    fit_cmd->add_option("--scale-threshold", cfg.scale_threshold, "final scale entry cutoff");
    fit_cmd->add_option("--gradient-tolerance", cfg.gradient_tolerance,
                        "stop when the smoothed gradient norm falls below this");
    fit_cmd->add_flag("--decay-lr", cfg.decay_learning_rate, "scale steps by 1/sqrt(t)");
    fit_cmd->add_option("--seed", cfg.seed, "random seed");
    fit_cmd->add_option("--trace-stride", cfg.trace_stride, "loss trace stride");
    fit_cmd->add_option("--threads", cfg.threads, "batch evaluation threads");
    fit_cmd->add_flag("--no-wall-time", fit_no_wall, "omit wall time from the report");

    // sample
    auto* smp = app.add_subcommand("sample", "draw observations from a measure file");
    std::string smp_measure, smp_out;
    std::int64_t smp_n = 1000;
    std::uint64_t smp_seed = 0;
    bool smp_header = false;
    smp->add_option("--measure", smp_measure, "measure JSON")->required()->check(CLI::ExistingFile);
    smp->add_option("--n", smp_n, "number of observations")->required();
    smp->add_option("--seed", smp_seed, "random seed");
    smp->add_option("--out", smp_out, "output CSV path")->required();
    smp->add_flag("--header", smp_header, "write a header row");

    // gof
    auto* gof_cmd = app.add_subcommand("gof", "resampled goodness-of-fit test");
    std::string gof_measure, gof_truth = "csv", gof_truth_csv, gof_out;
    bool gof_truth_header = false, gof_force = false;
    int gof_d = 0, gof_reps = 200, gof_resamples = 100, gof_threads = 1;
    std::int64_t gof_n = 500;
    std::uint64_t gof_seed = 0;
    gof_cmd->add_option("--measure", gof_measure, "fitted measure JSON")
        ->required()
        ->check(CLI::ExistingFile);
    gof_cmd->add_option("--truth", gof_truth, "truth source")
        ->check(CLI::IsMember({"functional", "multiplicative", "csv"}));
    gof_cmd->add_option("--truth-csv", gof_truth_csv, "resampling pool CSV (truth=csv)");
    gof_cmd->add_flag("--truth-header", gof_truth_header, "pool CSV has a header row");
    gof_cmd->add_option("--d", gof_d, "truth dimension (multiplicative)");
    gof_cmd->add_option("--n", gof_n, "per-test sample size");
    gof_cmd->add_option("--reps", gof_reps, "benchmark repetitions");
    gof_cmd->add_option("--resamples", gof_resamples, "p-value resamples");
    gof_cmd->add_option("--seed", gof_seed, "random seed");
    gof_cmd->add_option("--out", gof_out, "output JSON path")->required();
    gof_cmd->add_flag("--force", gof_force, "override cost guards");
    gof_cmd->add_option("--threads", gof_threads, "benchmark threads");

    // diagnose
    auto* diag = app.add_subcommand("diagnose", "projected and marginal QQ tables");
    std::string diag_input, diag_measure, diag_prefix;
    bool diag_header = false;
    int diag_dirs = 50, diag_levels = 19;
    std::int64_t diag_samples = 0;
    std::uint64_t diag_seed = 0;
    diag->add_option("--input", diag_input, "observation CSV")->required()->check(CLI::ExistingFile);
    diag->add_flag("--header", diag_header, "input has a header row");
    diag->add_option("--measure", diag_measure, "measure JSON")->required()->check(CLI::ExistingFile);
    diag->add_option("--directions", diag_dirs, "random projection count");
    diag->add_option("--levels", diag_levels, "quantile levels per direction");
    diag->add_option("--samples", diag_samples, "model sample count (default: data size)");
    diag->add_option("--seed", diag_seed, "random seed");
    diag->add_option("--out-prefix", diag_prefix, "output file prefix")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(sim_kind, sim_n, sim_d, sim_seed, sim_out, sim_header);
        if (fit_cmd->parsed())
            return cmd_fit(fit_input, fit_header, cfg, fit_report, fit_measure, !fit_no_wall);
        if (smp->parsed()) return cmd_sample(smp_measure, smp_n, smp_seed, smp_out, smp_header);
        if (gof_cmd->parsed()) {
            if (gof_truth == "csv" && gof_truth_csv.empty())
                throw thorinfit::data_error("--truth-csv is required when truth=csv");
            return cmd_gof(gof_measure, gof_truth, gof_truth_csv, gof_truth_header, gof_d, gof_n,
                           gof_reps, gof_resamples, gof_seed, gof_out, gof_force, gof_threads);
        }
        if (diag->parsed())
            return cmd_diagnose(diag_input, diag_header, diag_measure, diag_dirs, diag_levels,
                                diag_samples, diag_seed, diag_prefix);
    } catch (const thorinfit::numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const thorinfit::data_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
