#ifndef PC_ENGINE_CONFIG_HPP
#define PC_ENGINE_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcn/activations.hpp"
#include "pcn/network.hpp"
#include "pcn/training.hpp"

namespace pce {

using json = nlohmann::json;

enum class Precision { f32, f64 };

struct NetworkSpec {
    std::vector<std::size_t> layer_dims;  // input, hidden..., output
    pcn::Activation activation = pcn::Activation::identity;
    bool output_sigmoid = false;
    pcn::Loss loss = pcn::Loss::mse;
    std::optional<double> init_gain;
    std::optional<std::string> load_model;  // PCN1 path, overrides dims
};

struct DataSpec {
    std::string kind = "synthetic_gaussian";  // or "idx"
    // synthetic_gaussian
    std::size_t n = 64;
    std::size_t dim = 16;
    std::size_t classes = 10;
    // idx
    std::string images, labels;
    std::string test_images, test_labels;
    pcn::NormalizeParams normalize;
};

struct RelaxSection {
    std::vector<std::string> algorithms = {"spc", "epc"};
    double spc_lr = 0.3;
    std::size_t spc_steps = 4096;
    double epc_lr = 0.05;
    std::size_t epc_steps = 256;
    std::size_t record_every = 1;
    std::size_t batch = 64;
    bool analytic_reference = true;
    std::vector<double> tolerances = {1e-4, 1e-6};
    DataSpec data;
};

struct DecaySection {
    double lambda = 0.1;
    std::size_t spc_steps = 64;
    std::size_t epc_steps = 8;
    std::size_t batch = 1;
    std::size_t binomial_layers = 20;
    std::size_t binomial_steps = 64;
    std::vector<double> poisson_tau = {0.5, 1.0, 2.0};
    std::size_t poisson_max_i = 32;
    DataSpec data;
};

struct VerifySection {
    std::size_t num_nets = 8;
    bool inject_error_grad_sign_flip = false;
};

struct TrainSection {
    pcn::TrainAlgo algorithm = pcn::TrainAlgo::backprop;
    double relax_lr = 0.05;
    std::size_t relax_steps = 4;
    double relax_momentum = 0.0;
    pcn::OptKind optimizer = pcn::OptKind::adam;
    double weight_lr = 1e-4;
    double weight_decay = 0.0;
    std::size_t epochs = 2;
    std::size_t batch_size = 64;
    std::string schedule = "constant";
    double val_fraction = 0.1;
    std::size_t train_subset = 0;  // 0 = all
    DataSpec data;
};

struct GradTrajSection {
    std::vector<std::string> algorithms = {"spc", "epc"};
    double lambda = 0.05;
    std::size_t steps = 64;
    std::size_t batch = 8;
    std::vector<std::size_t> layers;  // empty = bottom / middle / top
    DataSpec data;
};

struct ExperimentConfig {
    int schema_version = 1;
    std::uint64_t seed = 42;
    Precision precision = Precision::f64;
    std::string out_dir = "out";
    NetworkSpec network;

    RelaxSection relax;
    DecaySection decay;
    VerifySection verify;
    TrainSection train;
    GradTrajSection gradtraj;
};

// Parses and validates the config file for one command. Unknown keys and
// out-of-range values are rejected before any computation runs.
ExperimentConfig load_config(const std::string& path, const std::string& command);

// Scalar flag overrides (flag beats config beats default).
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> precision;
    std::optional<std::string> out_dir;
};
void apply_overrides(ExperimentConfig& cfg, const Overrides& o);

}  // namespace pce

#endif  // PC_ENGINE_CONFIG_HPP
