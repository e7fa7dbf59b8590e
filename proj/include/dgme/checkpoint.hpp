#pragma once

// Self-describing JSON checkpoints for every model kind, bundled with the
// scaler and a config echo so a saved model can be evaluated stand-alone.

#include <map>
#include <string>
#include <variant>

#include "dgme/baselines.hpp"
#include "dgme/data.hpp"
#include "dgme/mixture.hpp"

namespace dgme {

struct Checkpoint {
    std::string kind; // dgme | de | mdn | mcd
    std::variant<MixtureModel, MdnModel, McdModel> model;
    Scaler scaler;
    std::map<std::string, std::string> config_echo;
};

Checkpoint make_checkpoint(const MixtureModel& model, const Scaler& scaler,
                           std::map<std::string, std::string> config_echo);
Checkpoint make_checkpoint(const DeModel& model, const Scaler& scaler,
                           std::map<std::string, std::string> config_echo);
Checkpoint make_checkpoint(const MdnModel& model, const Scaler& scaler,
                           std::map<std::string, std::string> config_echo);
Checkpoint make_checkpoint(const McdModel& model, const Scaler& scaler,
                           std::map<std::string, std::string> config_echo);

// Round-trips are bit-exact: doubles are written with shortest-round-trip
// formatting.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

} // namespace dgme
