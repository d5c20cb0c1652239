#ifndef PC_ENGINE_COMMANDS_HPP
#define PC_ENGINE_COMMANDS_HPP

#include "config.hpp"

namespace pce {

// Each command returns the process exit code: 0 success, 3 verification
// failure. Config errors (1) and numerical failures (2) arrive as exceptions
// and are mapped in main.
int cmd_relax(const ExperimentConfig& cfg);
int cmd_decay(const ExperimentConfig& cfg);
int cmd_verify(const ExperimentConfig& cfg);
int cmd_train(const ExperimentConfig& cfg);
int cmd_gradtraj(const ExperimentConfig& cfg);

}  // namespace pce

#endif  // PC_ENGINE_COMMANDS_HPP
