#include "config.hpp"

#include <fstream>
#include <set>

#include "pcn/errors.hpp"

namespace pce {

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    if (!obj.is_object())
        throw pcn::ConfigError(where + ": expected a JSON object");
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key()))
            throw pcn::ConfigError(where + ": unknown key \"" + item.key() +
                                   "\"");
    }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw pcn::ConfigError("key \"" + key + "\": " + e.what());
    }
}

std::size_t get_count(const json& obj, const std::string& key,
                      std::size_t fallback, std::size_t min_value = 0) {
    if (obj.contains(key) && obj.at(key).is_number() &&
        obj.at(key).is_number_float())
        throw pcn::ConfigError("key \"" + key + "\" must be an integer");
    if (obj.contains(key) && obj.at(key).is_number_integer() &&
        obj.at(key).get<long long>() < 0)
        throw pcn::ConfigError("key \"" + key + "\" must be non-negative");
    const std::size_t v = get_or<std::size_t>(obj, key, fallback);
    if (v < min_value)
        throw pcn::ConfigError("key \"" + key + "\" must be >= " +
                               std::to_string(min_value));
    return v;
}

double get_positive(const json& obj, const std::string& key, double fallback) {
    const double v = get_or<double>(obj, key, fallback);
    if (!(v > 0.0))
        throw pcn::ConfigError("key \"" + key + "\" must be positive");
    return v;
}

DataSpec parse_data(const json& obj, const std::string& where) {
    DataSpec d;
    if (obj.is_null()) return d;
    reject_unknown_keys(obj,
                        {"kind", "n", "dim", "classes", "images", "labels",
                         "test_images", "test_labels", "normalize"},
                        where);
    d.kind = get_or<std::string>(obj, "kind", d.kind);
    if (d.kind != "synthetic_gaussian" && d.kind != "idx")
        throw pcn::ConfigError(where + ".kind: must be synthetic_gaussian or idx");
    d.n = get_count(obj, "n", d.n);
    d.dim = get_count(obj, "dim", d.dim, 1);
    d.classes = get_count(obj, "classes", d.classes, 2);
    d.images = get_or<std::string>(obj, "images", "");
    d.labels = get_or<std::string>(obj, "labels", "");
    d.test_images = get_or<std::string>(obj, "test_images", "");
    d.test_labels = get_or<std::string>(obj, "test_labels", "");
    if (d.kind == "idx" && (d.images.empty() || d.labels.empty()))
        throw pcn::ConfigError(where + ": idx data needs images and labels paths");
    if (obj.contains("normalize")) {
        const json& nm = obj.at("normalize");
        reject_unknown_keys(nm, {"mean", "std"}, where + ".normalize");
        d.normalize.mean = get_or<double>(nm, "mean", 0.5);
        d.normalize.stddev = get_positive(nm, "std", 0.5);
    }
    return d;
}

NetworkSpec parse_network(const json& obj) {
    NetworkSpec n;
    if (obj.is_null()) throw pcn::ConfigError("config: missing \"network\"");
    reject_unknown_keys(obj,
                        {"layer_dims", "activation", "output_sigmoid", "loss",
                         "init_gain", "load_model"},
                        "network");
    if (obj.contains("load_model")) {
        n.load_model = obj.at("load_model").get<std::string>();
    }
    if (obj.contains("layer_dims")) {
        n.layer_dims = obj.at("layer_dims").get<std::vector<std::size_t>>();
        if (n.layer_dims.size() < 3)
            throw pcn::ConfigError(
                "network.layer_dims: need input, at least one hidden, output");
        for (std::size_t d : n.layer_dims)
            if (d == 0)
                throw pcn::ConfigError("network.layer_dims: zero width");
    } else if (!n.load_model) {
        throw pcn::ConfigError("network: needs layer_dims or load_model");
    }
    n.activation = pcn::activation_from_name(
        get_or<std::string>(obj, "activation", "identity"));
    n.output_sigmoid = get_or<bool>(obj, "output_sigmoid", false);
    n.loss = pcn::loss_from_name(get_or<std::string>(obj, "loss", "mse"));
    if (obj.contains("init_gain"))
        n.init_gain = get_positive(obj, "init_gain", 1.0);
    return n;
}

void parse_relax(const json& obj, RelaxSection& r) {
    if (obj.is_null()) return;
    reject_unknown_keys(obj,
                        {"algorithms", "spc", "epc", "record_every", "batch",
                         "analytic_reference", "tolerances", "data"},
                        "relax");
    r.algorithms =
        get_or<std::vector<std::string>>(obj, "algorithms", r.algorithms);
    for (const auto& a : r.algorithms)
        if (a != "spc" && a != "epc")
            throw pcn::ConfigError("relax.algorithms: unknown algorithm " + a);
    if (obj.contains("spc")) {
        reject_unknown_keys(obj.at("spc"), {"lr", "steps"}, "relax.spc");
        r.spc_lr = get_positive(obj.at("spc"), "lr", r.spc_lr);
        r.spc_steps = get_count(obj.at("spc"), "steps", r.spc_steps);
    }
    if (obj.contains("epc")) {
        reject_unknown_keys(obj.at("epc"), {"lr", "steps"}, "relax.epc");
        r.epc_lr = get_positive(obj.at("epc"), "lr", r.epc_lr);
        r.epc_steps = get_count(obj.at("epc"), "steps", r.epc_steps);
    }
    r.record_every = get_count(obj, "record_every", r.record_every, 1);
    r.batch = get_count(obj, "batch", r.batch, 1);
    r.analytic_reference =
        get_or<bool>(obj, "analytic_reference", r.analytic_reference);
    r.tolerances = get_or<std::vector<double>>(obj, "tolerances", r.tolerances);
    for (double t : r.tolerances)
        if (!(t > 0.0))
            throw pcn::ConfigError("relax.tolerances: must be positive");
    if (obj.contains("data")) r.data = parse_data(obj.at("data"), "relax.data");
}

void parse_decay(const json& obj, DecaySection& d) {
    if (obj.is_null()) return;
    reject_unknown_keys(obj,
                        {"lambda", "spc_steps", "epc_steps", "batch",
                         "binomial", "poisson", "data"},
                        "decay");
    d.lambda = get_positive(obj, "lambda", d.lambda);
    if (d.lambda >= 1.0)
        throw pcn::ConfigError("decay.lambda: must be below 1");
    d.spc_steps = get_count(obj, "spc_steps", d.spc_steps, 1);
    d.epc_steps = get_count(obj, "epc_steps", d.epc_steps, 1);
    d.batch = get_count(obj, "batch", d.batch, 1);
    if (obj.contains("binomial")) {
        reject_unknown_keys(obj.at("binomial"), {"layers", "steps"},
                            "decay.binomial");
        d.binomial_layers =
            get_count(obj.at("binomial"), "layers", d.binomial_layers, 1);
        d.binomial_steps =
            get_count(obj.at("binomial"), "steps", d.binomial_steps, 1);
    }
    if (obj.contains("poisson")) {
        reject_unknown_keys(obj.at("poisson"), {"tau", "max_i"},
                            "decay.poisson");
        d.poisson_tau =
            get_or<std::vector<double>>(obj.at("poisson"), "tau", d.poisson_tau);
        for (double t : d.poisson_tau)
            if (!(t > 0.0))
                throw pcn::ConfigError("decay.poisson.tau: must be positive");
        d.poisson_max_i =
            get_count(obj.at("poisson"), "max_i", d.poisson_max_i, 1);
    }
    if (obj.contains("data")) d.data = parse_data(obj.at("data"), "decay.data");
}

void parse_verify(const json& obj, VerifySection& v) {
    if (obj.is_null()) return;
    reject_unknown_keys(obj, {"num_nets", "inject_error_grad_sign_flip"},
                        "verify");
    v.num_nets = get_count(obj, "num_nets", v.num_nets, 1);
    v.inject_error_grad_sign_flip =
        get_or<bool>(obj, "inject_error_grad_sign_flip", false);
}

void parse_train(const json& obj, TrainSection& t) {
    if (obj.is_null()) return;
    reject_unknown_keys(obj,
                        {"algorithm", "relax", "optimizer", "weight_lr",
                         "weight_decay", "epochs", "batch_size", "schedule",
                         "val_fraction", "train_subset", "data"},
                        "train");
    t.algorithm = pcn::algo_from_name(
        get_or<std::string>(obj, "algorithm", "backprop"));
    if (obj.contains("relax")) {
        reject_unknown_keys(obj.at("relax"), {"lr", "steps", "momentum"},
                            "train.relax");
        t.relax_lr = get_positive(obj.at("relax"), "lr", t.relax_lr);
        t.relax_steps = get_count(obj.at("relax"), "steps", t.relax_steps, 1);
        t.relax_momentum =
            get_or<double>(obj.at("relax"), "momentum", t.relax_momentum);
        if (t.relax_momentum < 0.0 || t.relax_momentum >= 1.0)
            throw pcn::ConfigError("train.relax.momentum: must be in [0, 1)");
    }
    t.optimizer =
        pcn::opt_from_name(get_or<std::string>(obj, "optimizer", "adam"));
    t.weight_lr = get_positive(obj, "weight_lr", t.weight_lr);
    t.weight_decay = get_or<double>(obj, "weight_decay", t.weight_decay);
    if (t.weight_decay < 0.0)
        throw pcn::ConfigError("train.weight_decay: must be >= 0");
    t.epochs = get_count(obj, "epochs", t.epochs);
    t.batch_size = get_count(obj, "batch_size", t.batch_size, 1);
    t.schedule = get_or<std::string>(obj, "schedule", t.schedule);
    pcn::schedule_from_name(t.schedule);  // validates
    t.val_fraction = get_or<double>(obj, "val_fraction", t.val_fraction);
    if (t.val_fraction < 0.0 || t.val_fraction >= 1.0)
        throw pcn::ConfigError("train.val_fraction: must be in [0, 1)");
    t.train_subset = get_count(obj, "train_subset", t.train_subset);
    if (obj.contains("data")) t.data = parse_data(obj.at("data"), "train.data");
}

void parse_gradtraj(const json& obj, GradTrajSection& g) {
    if (obj.is_null()) return;
    reject_unknown_keys(
        obj, {"algorithms", "lambda", "steps", "batch", "layers", "data"},
        "gradtraj");
    g.algorithms =
        get_or<std::vector<std::string>>(obj, "algorithms", g.algorithms);
    for (const auto& a : g.algorithms)
        if (a != "spc" && a != "epc")
            throw pcn::ConfigError("gradtraj.algorithms: unknown algorithm " + a);
    g.lambda = get_positive(obj, "lambda", g.lambda);
    g.steps = get_count(obj, "steps", g.steps, 1);
    g.batch = get_count(obj, "batch", g.batch, 1);
    g.layers = get_or<std::vector<std::size_t>>(obj, "layers", g.layers);
    if (obj.contains("data"))
        g.data = parse_data(obj.at("data"), "gradtraj.data");
}

}  // namespace

ExperimentConfig load_config(const std::string& path,
                             const std::string& command) {
    std::ifstream in(path);
    if (!in) throw pcn::ConfigError("cannot open config " + path);
    json root;
    try {
        root = json::parse(in);
    } catch (const json::exception& e) {
        throw pcn::ConfigError(path + ": " + e.what());
    }

    reject_unknown_keys(root,
                        {"schema_version", "seed", "precision", "out_dir",
                         "network", "relax", "decay", "verify", "train",
                         "gradtraj"},
                        "config");

    ExperimentConfig cfg;
    cfg.schema_version = get_or<int>(root, "schema_version", 1);
    if (cfg.schema_version != 1)
        throw pcn::ConfigError("unsupported schema_version " +
                               std::to_string(cfg.schema_version));
    cfg.seed = get_or<std::uint64_t>(root, "seed", cfg.seed);
    const std::string prec = get_or<std::string>(root, "precision", "f64");
    if (prec == "f32")
        cfg.precision = Precision::f32;
    else if (prec == "f64")
        cfg.precision = Precision::f64;
    else
        throw pcn::ConfigError("precision: must be f32 or f64");
    cfg.out_dir = get_or<std::string>(root, "out_dir", cfg.out_dir);

    if (command != "verify" || root.contains("network"))
        cfg.network = parse_network(root.value("network", json()));

    if (command == "relax") parse_relax(root.value("relax", json()), cfg.relax);
    if (command == "decay") parse_decay(root.value("decay", json()), cfg.decay);
    if (command == "verify")
        parse_verify(root.value("verify", json()), cfg.verify);
    if (command == "train") parse_train(root.value("train", json()), cfg.train);
    if (command == "gradtraj")
        parse_gradtraj(root.value("gradtraj", json()), cfg.gradtraj);
    return cfg;
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& o) {
    if (o.seed) cfg.seed = *o.seed;
    if (o.precision) {
        if (*o.precision == "f32")
            cfg.precision = Precision::f32;
        else if (*o.precision == "f64")
            cfg.precision = Precision::f64;
        else
            throw pcn::ConfigError("--precision: must be f32 or f64");
    }
    if (o.out_dir) cfg.out_dir = *o.out_dir;
}

}  // namespace pce
