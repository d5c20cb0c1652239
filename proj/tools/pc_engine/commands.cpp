#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pcn/analysis.hpp"
#include "pcn/dataio.hpp"
#include "pcn/netio.hpp"
#include "pcn/training.hpp"
#include "pcn/verify.hpp"

namespace pce {

namespace fs = std::filesystem;
using pcn::Matrix;
using pcn::Network;

namespace {

struct OutPaths {
    fs::path root, traces, metrics, models;
    fs::path report() const { return root / "report.json"; }
};

OutPaths prepare_out_dir(const ExperimentConfig& cfg) {
    OutPaths p;
    p.root = cfg.out_dir;
    p.traces = p.root / "traces";
    p.metrics = p.root / "metrics";
    p.models = p.root / "models";
    fs::create_directories(p.traces);
    fs::create_directories(p.metrics);
    fs::create_directories(p.models);
    return p;
}

void write_report(const OutPaths& out, const json& report) {
    std::ofstream f(out.report());
    if (!f) throw pcn::DataError("cannot write " + out.report().string());
    f << report.dump(2) << "\n";
}

Network<double> build_network(const ExperimentConfig& cfg, pcn::Rng& rng) {
    if (cfg.network.load_model) {
        Network<double> net = pcn::load_network(*cfg.network.load_model);
        return net;
    }
    return pcn::make_mlp<double>(cfg.network.layer_dims,
                                 cfg.network.activation, cfg.network.loss, rng,
                                 cfg.network.init_gain,
                                 cfg.network.output_sigmoid);
}

// One batch of inputs/targets for the relaxation-style commands.
struct BatchData {
    Matrix<double> x;
    Matrix<double> y;
};

BatchData make_batch(const DataSpec& data, const Network<double>& net,
                     std::size_t batch, std::uint64_t seed) {
    BatchData b;
    if (data.kind == "idx") {
        pcn::Dataset ds = pcn::load_idx(data.images, data.labels,
                                        data.normalize);
        if (ds.feature_dim() != net.input_dim())
            throw pcn::ConfigError("data feature dim " +
                                   std::to_string(ds.feature_dim()) +
                                   " does not match network input " +
                                   std::to_string(net.input_dim()));
        pcn::BatchIterator it(ds, batch, seed, 0);
        auto first = it.next();
        if (!first) throw pcn::DataError("dataset is empty");
        b.x = std::move(first->images);
        b.y = Matrix<double>(b.x.rows, net.output_dim());
        for (std::size_t i = 0; i < b.x.rows; ++i) {
            const std::size_t c = static_cast<std::size_t>(first->labels[i]);
            if (c >= net.output_dim())
                throw pcn::ConfigError("label " + std::to_string(c) +
                                       " outside network output dim");
            b.y(i, c) = 1.0;
        }
        return b;
    }
    pcn::Rng rng(seed);
    pcn::Dataset ds =
        pcn::synthetic_gaussian(batch, net.input_dim(), net.output_dim(), rng);
    b.x = std::move(ds.images);
    b.y = std::move(ds.one_hot);
    return b;
}

std::vector<std::string> trace_header(std::size_t num_layers, bool with_dist) {
    std::vector<std::string> h;
    h.push_back("step");
    for (std::size_t i = 0; i < num_layers; ++i)
        h.push_back("E_" + std::to_string(i));
    h.push_back("loss");
    if (with_dist)
        for (std::size_t i = 0; i < num_layers; ++i)
            h.push_back("dist_" + std::to_string(i));
    h.push_back("algo");
    return h;
}

void write_trace_csv(const fs::path& path, const pcn::RelaxTrace& trace,
                     const std::string& algo) {
    const bool with_dist = !trace.records.empty() &&
                           !trace.records.front().distances.empty();
    const std::size_t nl =
        trace.records.front().energy.layer_energies.size();
    std::vector<std::vector<std::string>> rows;
    for (const auto& rec : trace.records) {
        std::vector<std::string> row;
        row.push_back(std::to_string(rec.step));
        for (double e : rec.energy.layer_energies)
            row.push_back(pcn::csv_double(e));
        row.push_back(pcn::csv_double(rec.energy.output_loss));
        if (with_dist)
            for (const auto& layer : rec.distances)
                row.push_back(pcn::csv_double(pcn::median_of(layer)));
        row.push_back(algo);
        rows.push_back(std::move(row));
    }
    pcn::write_csv(path.string(), trace_header(nl, with_dist), rows);
}

// Per-sample distances, one row per (step, layer, sample), for downstream
// quantile plots.
void write_distance_samples_csv(const fs::path& path,
                                const pcn::RelaxTrace& trace,
                                const std::string& algo) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& rec : trace.records) {
        for (std::size_t layer = 0; layer < rec.distances.size(); ++layer)
            for (std::size_t s = 0; s < rec.distances[layer].size(); ++s)
                rows.push_back({algo, std::to_string(rec.step),
                                std::to_string(layer), std::to_string(s),
                                pcn::csv_double(rec.distances[layer][s])});
    }
    pcn::write_csv(path.string(), {"algo", "step", "layer", "sample", "dist"},
                   rows);
}

double max_median_distance(const pcn::TraceRecord& rec) {
    double worst = 0.0;
    for (const auto& layer : rec.distances)
        worst = std::max(worst, pcn::median_of(layer));
    return worst;
}

json iterations_to_tolerances(const pcn::RelaxTrace& trace,
                              const std::vector<double>& tols) {
    json out = json::object();
    for (double tol : tols) {
        json val = nullptr;
        for (const auto& rec : trace.records) {
            if (rec.distances.empty()) break;
            if (max_median_distance(rec) <= tol) {
                val = rec.step;
                break;
            }
        }
        out[pcn::csv_double(tol)] = val;
    }
    return out;
}

// Casts everything to T, runs the requested relaxation, and returns the
// trace. The analytic reference (if any) is computed in double upstream.
template <typename T>
pcn::RelaxTrace run_relax(const Network<double>& net64,
                          const BatchData& batch,
                          const std::optional<pcn::StateConfig<double>>& ref64,
                          const std::string& algo, double lr,
                          std::size_t steps, std::size_t record_every) {
    Network<T> net = pcn::cast_network<T>(net64);
    Matrix<T> x = pcn::cast_matrix<T>(batch.x);
    Matrix<T> y = pcn::cast_matrix<T>(batch.y);
    pcn::RelaxConfig<T> cfg;
    cfg.lr = lr;
    cfg.steps = steps;
    cfg.record_every = record_every;
    if (ref64) {
        pcn::StateConfig<T> ref;
        for (const auto& m : ref64->layers)
            ref.layers.push_back(pcn::cast_matrix<T>(m));
        cfg.reference = std::move(ref);
    }
    if (algo == "spc") return pcn::spc_relax(net, x, y, cfg).trace;
    cfg.guard_backprop_regime = true;
    pcn::EpcRelaxResult<T> r = pcn::epc_relax(net, x, y, cfg);
    if (r.trace.backprop_regime_warning)
        std::fprintf(stderr,
                     "warning: epc relaxation ran in the backprop-equivalent "
                     "regime (T=%zu, lambda=%g); gradients may be plain "
                     "loss gradients rather than equilibrium ones\n",
                     steps, lr);
    return r.trace;
}

pcn::Dataset load_train_dataset(const DataSpec& data, std::uint64_t seed) {
    if (data.kind == "idx")
        return pcn::load_idx(data.images, data.labels, data.normalize);
    pcn::Rng rng(seed);
    return pcn::synthetic_gaussian(data.n, data.dim, data.classes, rng);
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_relax(const ExperimentConfig& cfg) {
    OutPaths out = prepare_out_dir(cfg);
    pcn::Rng rng(cfg.seed);
    Network<double> net = build_network(cfg, rng);
    const RelaxSection& rs = cfg.relax;
    BatchData batch = make_batch(rs.data, net, rs.batch, cfg.seed ^ 0xDA7A);

    std::optional<pcn::StateConfig<double>> reference;
    if (rs.analytic_reference)
        reference = pcn::analytic_equilibrium_linear(net, batch.x, batch.y);

    json report;
    report["command"] = "relax";
    report["seed"] = cfg.seed;
    report["precision"] = cfg.precision == Precision::f32 ? "f32" : "f64";
    json algos = json::object();

    for (const std::string& algo : rs.algorithms) {
        const double lr = (algo == "spc") ? rs.spc_lr : rs.epc_lr;
        const std::size_t steps = (algo == "spc") ? rs.spc_steps : rs.epc_steps;
        pcn::RelaxTrace trace =
            (cfg.precision == Precision::f32)
                ? run_relax<float>(net, batch, reference, algo, lr, steps,
                                   rs.record_every)
                : run_relax<double>(net, batch, reference, algo, lr, steps,
                                    rs.record_every);
        write_trace_csv(out.traces / (algo + "_trace.csv"), trace, algo);
        if (reference)
            write_distance_samples_csv(
                out.traces / (algo + "_dist_samples.csv"), trace, algo);

        json a;
        a["lr"] = lr;
        a["steps"] = steps;
        a["final_energy"] = trace.records.back().energy.total;
        if (reference) {
            a["final_max_median_dist"] =
                max_median_distance(trace.records.back());
            a["iterations_to_tolerance"] =
                iterations_to_tolerances(trace, rs.tolerances);
        }
        algos[algo] = std::move(a);
    }

    // Convergence-speed ratio when both algorithms ran against a reference.
    if (algos.contains("spc") && algos.contains("epc") && reference) {
        json ratios = json::object();
        for (double tol : rs.tolerances) {
            const std::string key = pcn::csv_double(tol);
            const json& s = algos["spc"]["iterations_to_tolerance"][key];
            const json& e = algos["epc"]["iterations_to_tolerance"][key];
            ratios[key] = (s.is_null() || e.is_null() ||
                           e.get<double>() == 0.0)
                              ? json(nullptr)
                              : json(s.get<double>() / e.get<double>());
        }
        report["spc_over_epc_iteration_ratio"] = ratios;
    }
    report["algorithms"] = std::move(algos);
    write_report(out, report);
    std::printf("relax: wrote %s\n", out.report().c_str());
    return 0;
}

int cmd_decay(const ExperimentConfig& cfg) {
    OutPaths out = prepare_out_dir(cfg);
    pcn::Rng rng(cfg.seed);
    Network<double> net = build_network(cfg, rng);
    const DecaySection& dc = cfg.decay;
    BatchData batch = make_batch(dc.data, net, dc.batch, cfg.seed ^ 0xDECA);

    pcn::RelaxTrace spc_trace, epc_trace;
    if (cfg.precision == Precision::f32) {
        spc_trace = run_relax<float>(net, batch, std::nullopt, "spc",
                                     dc.lambda, dc.spc_steps, 1);
        epc_trace = run_relax<float>(net, batch, std::nullopt, "epc",
                                     dc.lambda, dc.epc_steps, 1);
    } else {
        spc_trace = run_relax<double>(net, batch, std::nullopt, "spc",
                                      dc.lambda, dc.spc_steps, 1);
        epc_trace = run_relax<double>(net, batch, std::nullopt, "epc",
                                      dc.lambda, dc.epc_steps, 1);
    }
    write_trace_csv(out.traces / "spc_energy.csv", spc_trace, "spc");
    write_trace_csv(out.traces / "epc_energy.csv", epc_trace, "epc");

    // Idealized models, in log10 for direct heat-map rendering.
    const double ln10 = std::log(10.0);
    pcn::Matrix<double> table = pcn::simulate_simplified_wavefront(
        dc.binomial_layers, dc.lambda, dc.binomial_steps);
    pcn::DecayModel model{dc.binomial_layers, dc.lambda};
    std::vector<std::vector<std::string>> rows;
    for (std::size_t t = 0; t < table.rows; ++t)
        for (std::size_t k = 0; k < table.cols; ++k)
            rows.push_back(
                {std::to_string(t), std::to_string(k),
                 pcn::csv_double(pcn::binomial_magnitude(model, t, k) / ln10)});
    pcn::write_csv((out.traces / "binomial_table.csv").string(),
                   {"step", "layer", "log10_magnitude"}, rows);

    rows.clear();
    for (std::size_t t = 0; t < table.rows; ++t)
        for (std::size_t k = 0; k < table.cols; ++k)
            rows.push_back({std::to_string(t), std::to_string(k),
                            pcn::csv_double(std::log10(table(t, k)))});
    pcn::write_csv((out.traces / "wavefront_table.csv").string(),
                   {"step", "layer", "log10_magnitude"}, rows);

    rows.clear();
    for (double tau : dc.poisson_tau)
        for (std::size_t i = 0; i <= dc.poisson_max_i; ++i)
            rows.push_back({pcn::csv_double(tau), std::to_string(i),
                            pcn::csv_double(pcn::poisson_limit(tau, i) / ln10)});
    pcn::write_csv((out.traces / "poisson_table.csv").string(),
                   {"tau", "i", "log10_magnitude"}, rows);

    // Arrival summary at a threshold far below any meaningful energy but
    // above double-precision noise, scaled by the initial output loss.
    const double threshold =
        1e-30 * std::max(1.0, spc_trace.records.front().energy.output_loss);
    json report;
    report["command"] = "decay";
    report["precision"] = cfg.precision == Precision::f32 ? "f32" : "f64";
    report["lambda"] = dc.lambda;
    report["arrival_threshold"] = threshold;
    auto arrivals_json = [&](const pcn::RelaxTrace& tr) {
        json arr = json::array();
        for (const auto& a : pcn::wavefront_arrival(tr, threshold))
            arr.push_back(a ? json(*a) : json(nullptr));
        return arr;
    };
    report["spc_arrival_step"] = arrivals_json(spc_trace);
    report["epc_arrival_step"] = arrivals_json(epc_trace);
    write_report(out, report);
    std::printf("decay: wrote %s\n", out.report().c_str());
    return 0;
}

int cmd_verify(const ExperimentConfig& cfg) {
    OutPaths out = prepare_out_dir(cfg);
    pcn::VerifyOptions opt;
    opt.seed = cfg.seed;
    opt.num_nets = cfg.verify.num_nets;
    opt.fault_flip_error_grad_sign = cfg.verify.inject_error_grad_sign_flip;

    std::vector<pcn::CheckResult> results = pcn::run_equivalence_suite(opt);
    bool all_pass = true;
    json checks = json::array();
    for (const auto& r : results) {
        std::printf("[%s] %-22s residual=%.3e tolerance=%.1e  (%s)\n",
                    r.pass ? "PASS" : "FAIL", r.name.c_str(), r.residual,
                    r.tolerance, r.detail.c_str());
        all_pass = all_pass && r.pass;
        checks.push_back({{"name", r.name},
                          {"pass", r.pass},
                          {"residual", r.residual},
                          {"tolerance", r.tolerance},
                          {"detail", r.detail}});
    }
    json report;
    report["command"] = "verify";
    report["seed"] = cfg.seed;
    report["num_nets"] = opt.num_nets;
    report["fault_injection"] = opt.fault_flip_error_grad_sign;
    report["all_pass"] = all_pass;
    report["checks"] = std::move(checks);
    write_report(out, report);
    std::printf("verify: %s\n", all_pass ? "all checks passed" : "FAILURES");
    return all_pass ? 0 : 3;
}

namespace {

template <typename T>
int run_train(const ExperimentConfig& cfg, const OutPaths& out) {
    const TrainSection& ts = cfg.train;
    pcn::Dataset full = load_train_dataset(ts.data, cfg.seed ^ 0x7A19);
    if (ts.train_subset > 0) full = pcn::dataset_head(full, ts.train_subset);
    auto [train_set, val_set] =
        pcn::split_dataset(full, ts.val_fraction, cfg.seed);

    pcn::Rng rng(cfg.seed);
    Network<double> net64 = build_network(cfg, rng);
    if (net64.input_dim() != full.feature_dim())
        throw pcn::ConfigError("network input dim " +
                               std::to_string(net64.input_dim()) +
                               " does not match data features " +
                               std::to_string(full.feature_dim()));
    if (net64.output_dim() != full.num_classes)
        throw pcn::ConfigError("network output dim " +
                               std::to_string(net64.output_dim()) +
                               " does not match class count " +
                               std::to_string(full.num_classes));
    Network<T> net = pcn::cast_network<T>(net64);

    pcn::TrainConfig tc;
    tc.algorithm = ts.algorithm;
    tc.relax_lr = ts.relax_lr;
    tc.relax_steps = ts.relax_steps;
    tc.relax_momentum = ts.relax_momentum;
    tc.optimizer = ts.optimizer;
    tc.weight_lr = ts.weight_lr;
    tc.weight_decay = ts.weight_decay;
    tc.epochs = ts.epochs;
    tc.batch_size = ts.batch_size;
    tc.seed = cfg.seed;
    tc.schedule = pcn::schedule_from_name(ts.schedule);

    std::vector<pcn::EpochMetrics> metrics =
        pcn::train(net, train_set, val_set, tc);
    pcn::write_metrics((out.metrics / "metrics.csv").string(), metrics);

    Network<double> trained = pcn::cast_network<double>(net);
    pcn::save_network_with_descriptor(trained,
                                      (out.models / "model.pcn1").string());

    double test_accuracy;
    std::string eval_set_name;
    if (ts.data.kind == "idx" && !ts.data.test_images.empty()) {
        pcn::Dataset test = pcn::load_idx(ts.data.test_images,
                                          ts.data.test_labels,
                                          ts.data.normalize);
        test_accuracy = pcn::evaluate(net, test);
        eval_set_name = "test";
    } else {
        test_accuracy = pcn::evaluate(net, val_set);
        eval_set_name = "validation";
    }
    std::printf("train[%s]: final %s accuracy %.4f\n",
                pcn::algo_name(ts.algorithm), eval_set_name.c_str(),
                test_accuracy);

    json report;
    report["command"] = "train";
    report["algorithm"] = pcn::algo_name(ts.algorithm);
    report["epochs"] = ts.epochs;
    report["train_samples"] = train_set.size();
    report["val_samples"] = val_set.size();
    report["final_accuracy"] = test_accuracy;
    report["accuracy_set"] = eval_set_name;
    report["model"] = (out.models / "model.pcn1").string();
    write_report(out, report);
    return 0;
}

}  // namespace

int cmd_train(const ExperimentConfig& cfg) {
    OutPaths out = prepare_out_dir(cfg);
    return (cfg.precision == Precision::f32) ? run_train<float>(cfg, out)
                                             : run_train<double>(cfg, out);
}

int cmd_gradtraj(const ExperimentConfig& cfg) {
    OutPaths out = prepare_out_dir(cfg);
    pcn::Rng rng(cfg.seed);
    Network<double> net = build_network(cfg, rng);
    const GradTrajSection& gt = cfg.gradtraj;
    BatchData batch = make_batch(gt.data, net, gt.batch, cfg.seed ^ 0x6AD7);

    std::vector<std::size_t> layers = gt.layers;
    if (layers.empty()) {
        const std::size_t top = net.layers.size() - 1;
        layers = {0, top / 2, top};
    }
    for (std::size_t l : layers)
        if (l >= net.layers.size())
            throw pcn::ConfigError("gradtraj.layers: layer " +
                                   std::to_string(l) + " out of range");

    std::vector<std::vector<std::string>> rows;
    for (const std::string& algo : gt.algorithms) {
        std::vector<pcn::TrajectoryPoint> traj = pcn::gradient_trajectory(
            net, batch.x, batch.y,
            algo == "spc" ? pcn::TrainAlgo::spc : pcn::TrainAlgo::epc,
            gt.steps, gt.lambda);
        for (const auto& pt : traj)
            for (std::size_t l : layers)
                rows.push_back({algo, std::to_string(pt.step),
                                std::to_string(l),
                                pcn::csv_double(pt.grad_norm[l]),
                                pcn::csv_double(pt.cosine_to_backprop[l])});
    }
    pcn::write_csv((out.metrics / "gradtraj.csv").string(),
                   {"algo", "step", "layer", "grad_norm",
                    "cosine_to_backprop"},
                   rows);

    json report;
    report["command"] = "gradtraj";
    report["lambda"] = gt.lambda;
    report["steps"] = gt.steps;
    report["layers"] = layers;
    report["csv"] = (out.metrics / "gradtraj.csv").string();
    write_report(out, report);
    std::printf("gradtraj: wrote %s\n",
                (out.metrics / "gradtraj.csv").c_str());
    return 0;
}

}  // namespace pce
