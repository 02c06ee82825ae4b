// Command-line front end: synthetic data generation, training, evaluation
// and the synthetic benchmark. Emits a JSON summary on stdout and writes
// artifacts to the output directory.
//
// Exit codes: 0 ok, 2 config/usage, 3 training failure, 4 evaluation
// failure, 5 I/O.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "mohsm/data_io.hpp"
#include "mohsm/gp.hpp"
#include "mohsm/metrics.hpp"
#include "mohsm/serialize.hpp"
#include "mohsm/spectral_init.hpp"
#include "mohsm/synth.hpp"
#include "mohsm/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitTraining = 3;
constexpr int kExitEvaluation = 4;
constexpr int kExitIo = 5;

using mohsm::json;

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw mohsm::IoError("cannot create output directory: " + dir);
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw mohsm::IoError("cannot open for writing: " + path);
    out << body;
    if (!out) throw mohsm::IoError("write failed: " + path);
}

void write_gram_csv(const std::string& path, const mohsm::MatrixXd& K) {
    std::ostringstream out;
    out.precision(17);
    for (int a = 0; a < K.rows(); ++a) {
        for (int b = 0; b < K.cols(); ++b) out << (b ? "," : "") << K(a, b);
        out << "\n";
    }
    write_text(path, out.str());
}

void write_train_report_csv(const std::string& path, const mohsm::TrainReport& rep) {
    std::ostringstream out;
    out.precision(17);
    out << "iteration,nll,grad_norm\n";
    for (size_t k = 0; k < rep.obj_trace.size(); ++k)
        out << k << "," << rep.obj_trace[k] << "," << rep.grad_trace[k] << "\n";
    write_text(path, out.str());
}

void write_periodograms_csv(const std::string& path,
                            const std::vector<mohsm::PeriodogramResult>& pgs) {
    std::ostringstream out;
    out.precision(17);
    out << "freq,power,window_id\n";
    for (const auto& pg : pgs)
        for (int b = 0; b < pg.freqs.size(); ++b)
            out << pg.freqs[b] << "," << pg.power[b] << "," << pg.window_id << "\n";
    write_text(path, out.str());
}

int fail(int code, const std::string& message) {
    json j;
    j["status"] = "error";
    j["exit_code"] = code;
    j["message"] = message;
    std::cout << j.dump(2) << std::endl;
    return code;
}

int run_synth(const std::string& config_path, std::uint64_t seed, bool seed_set,
              const std::string& out_dir) {
    mohsm::SynthConfig cfg;
    try {
        cfg = config_path.empty() ? mohsm::SynthConfig::defaults()
                                  : mohsm::SynthConfig::from_json(mohsm::read_json_file(config_path));
        if (seed_set) cfg.seed = seed;
        cfg.validate();
    } catch (const mohsm::IoError& e) {
        return fail(kExitIo, e.what());
    } catch (const std::exception& e) {
        return fail(kExitConfig, e.what());
    }
    try {
        ensure_dir(out_dir);
        const mohsm::SynthData data = mohsm::generate(cfg);
        mohsm::save_csv(out_dir + "/train.csv", data.train);
        mohsm::save_csv(out_dir + "/test.csv", data.test);
        write_gram_csv(out_dir + "/ground_truth_gram.csv", data.gram);
        json j;
        j["status"] = "ok";
        j["exit_code"] = kExitOk;
        j["seed"] = cfg.seed;
        j["train_points"] = data.train.size();
        j["test_points"] = data.test.size();
        j["total_points"] = 3 * cfg.n_points;
        j["artifacts"] = {out_dir + "/train.csv", out_dir + "/test.csv",
                          out_dir + "/ground_truth_gram.csv"};
        std::cout << j.dump(2) << std::endl;
        return kExitOk;
    } catch (const mohsm::IoError& e) {
        return fail(kExitIo, e.what());
    } catch (const std::exception& e) {
        return fail(kExitConfig, e.what());
    }
}

int run_train(const std::string& config_path, const std::string& method_flag,
              std::uint64_t seed, bool seed_set, const std::string& out_dir,
              const std::string& init_path) {
    mohsm::ExperimentConfig cfg;
    try {
        cfg = mohsm::ExperimentConfig::from_json(mohsm::read_json_file(config_path));
        if (!method_flag.empty()) cfg.method = method_flag;
        if (seed_set) cfg.seed = seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        cfg.validate();
    } catch (const mohsm::IoError& e) {
        return fail(kExitIo, e.what());
    } catch (const std::exception& e) {
        return fail(kExitConfig, e.what());
    }

    mohsm::Dataset train;
    try {
        const auto schema =
            cfg.data_schema == "long" ? mohsm::CsvSchema::kLong : mohsm::CsvSchema::kWide;
        mohsm::Dataset data = mohsm::load_csv(cfg.data_path, schema);
        auto [pool, heldout] = mohsm::apply_masks(data, cfg.masks);
        if (cfg.train_fraction < 1.0) {
            std::vector<int> idx(pool.points.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::mt19937_64 rng(cfg.seed);
            std::shuffle(idx.begin(), idx.end(), rng);
            const int n_train =
                static_cast<int>(std::round(cfg.train_fraction * idx.size()));
            std::sort(idx.begin(), idx.begin() + n_train);
            mohsm::Dataset split_train, split_rest;
            split_train.channel_names = split_rest.channel_names = pool.channel_names;
            for (int k = 0; k < static_cast<int>(idx.size()); ++k)
                (k < n_train ? split_train : split_rest)
                    .points.push_back(pool.points[idx[k]]);
            for (const auto& p : split_rest.points) heldout.points.push_back(p);
            pool = std::move(split_train);
        }
        ensure_dir(cfg.out_dir);
        if (!heldout.points.empty()) mohsm::save_csv(cfg.out_dir + "/heldout.csv", heldout);
        mohsm::save_csv(cfg.out_dir + "/train.csv", pool);
        pool.fit_normalization();
        train = std::move(pool);
    } catch (const mohsm::IoError& e) {
        return fail(kExitIo, e.what());
    } catch (const std::exception& e) {
        return fail(kExitConfig, e.what());
    }

    try {
        std::vector<mohsm::PeriodogramResult> periodograms;
        std::unique_ptr<mohsm::KernelModel> model;
        if (!init_path.empty()) {
            auto loaded = mohsm::model_from_json(mohsm::read_json_file(init_path));
            model = std::move(loaded.model);
            if (model->method() != cfg.method)
                return fail(kExitConfig, "init model method does not match 'method'");
        } else {
            model = mohsm::init_model(cfg.method, train, cfg.P, cfg.Q, &periodograms);
        }
        mohsm::TrainConfig tc;
        tc.algorithm = cfg.optimizer;
        tc.max_iters = cfg.max_iters;
        tc.learning_rate = cfg.learning_rate;
        tc.grad_tol = cfg.grad_tol;
        const mohsm::TrainReport rep = mohsm::optimize(*model, train, tc);

        mohsm::write_json_file(cfg.out_dir + "/model.json",
                               mohsm::model_to_json(*model, train.normalization));
        write_train_report_csv(cfg.out_dir + "/train_report.csv", rep);
        if (!periodograms.empty())
            write_periodograms_csv(cfg.out_dir + "/periodogram.csv", periodograms);

        json j;
        j["status"] = "ok";
        j["exit_code"] = kExitOk;
        j["method"] = cfg.method;
        j["train_points"] = train.size();
        j["iterations"] = rep.iterations;
        j["final_nll"] = rep.final_nll;
        j["grad_norm"] = rep.grad_norm;
        j["converged"] = rep.converged;
        j["artifacts"] = {cfg.out_dir + "/model.json", cfg.out_dir + "/train_report.csv"};
        std::cout << j.dump(2) << std::endl;
        return kExitOk;
    } catch (const mohsm::IoError& e) {
        return fail(kExitIo, e.what());
    } catch (const std::exception& e) {
        return fail(kExitTraining, e.what());
    }
}

int run_evaluate(const std::string& spec_path, const std::string& train_path,
                 const std::string& data_path, const std::string& schema_name,
                 const std::string& metrics_csv, const std::string& out_dir) {
    mohsm::Dataset train, heldout;
    mohsm::LoadedModel loaded;
    std::vector<std::string> metric_names;
    {
        std::stringstream ss(metrics_csv);
        std::string m;
        while (std::getline(ss, m, ',')) {
            if (!m.empty()) metric_names.push_back(m);
        }
    }
    try {
        for (const auto& m : metric_names)
            if (m != "mape" && m != "rmse" && m != "nmae" && m != "nll")
                return fail(kExitConfig, "unknown metric: " + m);
        loaded = mohsm::model_from_json(mohsm::read_json_file(spec_path));
        const auto schema =
            schema_name == "long" ? mohsm::CsvSchema::kLong : mohsm::CsvSchema::kWide;
        train = mohsm::load_csv(train_path, schema);
        heldout = mohsm::load_csv(data_path, schema);
        train.normalization = loaded.normalization;
        // Align held-out channel ids with the training channel order by name.
        for (auto& p : heldout.points) {
            const auto& name = heldout.channel_names[p.channel];
            const auto it =
                std::find(train.channel_names.begin(), train.channel_names.end(), name);
            if (it == train.channel_names.end())
                throw mohsm::ConfigError("unknown channel in held-out data: " + name);
            p.channel = static_cast<int>(it - train.channel_names.begin());
        }
        heldout.channel_names = train.channel_names;
    } catch (const mohsm::IoError& e) {
        return fail(kExitIo, e.what());
    } catch (const std::exception& e) {
        return fail(kExitConfig, e.what());
    }

    try {
        ensure_dir(out_dir);
        const auto queries = mohsm::inputs_of(heldout);
        const mohsm::PosteriorResult post = mohsm::posterior(*loaded.model, train, queries);

        {
            std::ostringstream out;
            out.precision(17);
            out << "x,channel,mean,lower95,upper95\n";
            for (size_t a = 0; a < queries.size(); ++a) {
                const double half = 1.96 * std::sqrt(post.variance[a]);
                out << queries[a].x[0] << "," << heldout.channel_names[queries[a].channel]
                    << "," << post.mean[a] << "," << post.mean[a] - half << ","
                    << post.mean[a] + half << "\n";
            }
            write_text(out_dir + "/posterior.csv", out.str());
        }

        mohsm::MetricReport report;
        const int M = heldout.n_channels();
        std::string failing_metric;
        try {
            for (const auto& name : metric_names) {
                failing_metric = name;
                std::vector<double> per_channel;
                for (int i = 0; i < M; ++i) {
                    std::vector<double> yt, yp, vr;
                    for (size_t a = 0; a < heldout.points.size(); ++a) {
                        if (heldout.points[a].channel != i) continue;
                        yt.push_back(heldout.points[a].y);
                        yp.push_back(post.mean[a]);
                        vr.push_back(post.variance[a]);
                    }
                    if (yt.empty()) continue;
                    const auto ytv = Eigen::Map<mohsm::VectorXd>(yt.data(), yt.size());
                    const auto ypv = Eigen::Map<mohsm::VectorXd>(yp.data(), yp.size());
                    const auto vrv = Eigen::Map<mohsm::VectorXd>(vr.data(), vr.size());
                    double value = 0.0;
                    if (name == "mape") value = mohsm::mape(ytv, ypv);
                    else if (name == "rmse") value = mohsm::rmse(ytv, ypv);
                    else if (name == "nmae") value = mohsm::nmae(ytv, ypv);
                    else {
                        // score noisy observations: add the learned noise
                        // variance, rescaled to original data units
                        const double s = train.normalization.channel_scale(i);
                        const double nv = loaded.model->noise_sigma(i) * s;
                        value = mohsm::predictive_nll(ytv, ypv, vrv, nv * nv);
                    }
                    report.add(loaded.model->method(), name, heldout.channel_names[i], {value});
                    per_channel.push_back(value);
                }
                if (!per_channel.empty())
                    report.add(loaded.model->method(), name, "overall",
                               {mohsm::sample_mean(per_channel)});
            }
        } catch (const mohsm::MetricError& e) {
            return fail(kExitEvaluation,
                        "metric '" + failing_metric + "' failed: " + e.what());
        }
        mohsm::write_json_file(out_dir + "/metrics.json", mohsm::to_json(report));

        json j;
        j["status"] = "ok";
        j["exit_code"] = kExitOk;
        j["method"] = loaded.model->method();
        j["heldout_points"] = heldout.size();
        j["metrics"] = mohsm::to_json(report)["entries"];
        j["artifacts"] = {out_dir + "/metrics.json", out_dir + "/posterior.csv"};
        std::cout << j.dump(2) << std::endl;
        return kExitOk;
    } catch (const mohsm::IoError& e) {
        return fail(kExitIo, e.what());
    } catch (const std::exception& e) {
        return fail(kExitEvaluation, e.what());
    }
}

int run_benchmark(const std::string& config_path, std::uint64_t seed, bool seed_set,
                  const std::string& methods_csv, int trials, int iters,
                  const std::string& out_dir) {
    mohsm::SynthConfig cfg;
    mohsm::BenchmarkOptions opts;
    try {
        cfg = config_path.empty() ? mohsm::SynthConfig::defaults()
                                  : mohsm::SynthConfig::from_json(mohsm::read_json_file(config_path));
        if (seed_set) cfg.seed = seed;
        opts.trials = trials;
        opts.train.max_iters = iters;
        opts.out_dir = out_dir;
        opts.methods.clear();
        std::stringstream ss(methods_csv);
        std::string m;
        while (std::getline(ss, m, ',')) {
            if (m != "mosm" && m != "hsm" && m != "hsm-lmc" && m != "mohsm")
                return fail(kExitConfig, "unknown method: " + m);
            opts.methods.push_back(m);
        }
        if (opts.methods.empty()) return fail(kExitConfig, "no methods requested");
        if (trials < 1) return fail(kExitConfig, "field 'trials' must be >= 1");
    } catch (const mohsm::IoError& e) {
        return fail(kExitIo, e.what());
    } catch (const std::exception& e) {
        return fail(kExitConfig, e.what());
    }
    try {
        ensure_dir(out_dir);
        const mohsm::MetricReport report = mohsm::run_benchmark(cfg, opts);
        mohsm::write_json_file(out_dir + "/benchmark.json", mohsm::to_json(report));
        json j;
        j["status"] = "ok";
        j["exit_code"] = kExitOk;
        j["trials"] = opts.trials;
        j["report"] = mohsm::to_json(report);
        j["artifacts"] = {out_dir + "/benchmark.json"};
        std::cout << j.dump(2) << std::endl;
        return kExitOk;
    } catch (const mohsm::IoError& e) {
        return fail(kExitIo, e.what());
    } catch (const std::exception& e) {
        return fail(kExitTraining, e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-output harmonizable spectral mixture GP toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", method, init_path;
    std::string spec_path, train_path, data_path, schema = "long";
    std::string metrics = "rmse,nmae", methods = "mohsm,mosm,hsm,hsm-lmc";
    std::uint64_t seed = 0;
    int trials = 5, iters = 200;

    auto* synth = app.add_subcommand("synth", "Generate the synthetic 3-channel dataset");
    synth->add_option("--config", config_path, "SynthConfig JSON path");
    auto* synth_seed = synth->add_option("--seed", seed, "Seed override");
    synth->add_option("--out", out_dir, "Output directory");

    auto* train = app.add_subcommand("train", "Initialize and train a model");
    train->add_option("--config", config_path, "ExperimentConfig JSON path")->required();
    train->add_option("--method", method, "mosm | hsm | hsm-lmc | mohsm");
    auto* train_seed = train->add_option("--seed", seed, "Seed override");
    auto* train_out = train->add_option("--out", out_dir, "Output directory");
    train->add_option("--init", init_path, "Warm-start model JSON");

    auto* eval = app.add_subcommand("evaluate", "Score a trained model on held-out data");
    eval->add_option("--spec", spec_path, "Trained model JSON")->required();
    eval->add_option("--train-data", train_path, "Conditioning data CSV")->required();
    eval->add_option("--data", data_path, "Held-out data CSV")->required();
    eval->add_option("--schema", schema, "CSV schema: long | wide");
    eval->add_option("--metrics", metrics, "Comma-separated: mape,rmse,nmae,nll");
    eval->add_option("--out", out_dir, "Output directory");

    auto* bench = app.add_subcommand("benchmark", "Run the synthetic CMD benchmark");
    bench->add_option("--config", config_path, "SynthConfig JSON path");
    auto* bench_seed = bench->add_option("--seed", seed, "Base seed override");
    bench->add_option("--methods", methods, "Comma-separated method list");
    bench->add_option("--trials", trials, "Number of trials");
    bench->add_option("--iters", iters, "Training iterations per trial");
    bench->add_option("--out", out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    if (synth->parsed()) return run_synth(config_path, seed, synth_seed->count() > 0, out_dir);
    if (train->parsed())
        return run_train(config_path, method, seed, train_seed->count() > 0,
                         train_out->count() > 0 ? out_dir : std::string(), init_path);
    if (eval->parsed())
        return run_evaluate(spec_path, train_path, data_path, schema, metrics, out_dir);
    if (bench->parsed())
        return run_benchmark(config_path, seed, bench_seed->count() > 0, methods, trials, iters,
                             out_dir);
    return kExitConfig;
}
