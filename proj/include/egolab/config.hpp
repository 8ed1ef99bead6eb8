#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "egolab/train.hpp"
#include "egolab/world.hpp"

namespace egolab {

// Everything that affects results, addressable as flat `section.key` names in
// a line-oriented `key = value` file. Unknown keys are errors; flags never
// carry result-relevant settings.
struct Config {
    uint64_t seed = 1;
    int eval_episodes = 1000;
    WorldSpec world;
    TrainConfig train;

    void validate() const;
};

// One `name=value` accessor per config field.
struct ConfigField {
    std::string name;
    std::string (*get)(const Config&);
    void (*set)(Config&, const std::string&);
};
const std::vector<ConfigField>& config_fields();

void config_set(Config& c, const std::string& key, const std::string& value);

// `key = value` lines, '#' comments, blank lines ignored.
Config parse_config_text(const std::string& text);
Config load_config(const std::string& path);

// Canonical form: every field, declaration order, doubles as %.17g.
std::string serialize_config(const Config& c);
// FNV-1a 64 over the canonical serialization, as 16 hex digits.
std::string config_hash(const Config& c);

}  // namespace egolab
