#pragma once

#include <map>
#include <string>
#include <vector>

#include "evosynth/evolution.hpp"

namespace evo {

// Minimal INI document: [section] headers, key = value lines, '#' and ';'
// comments. Duplicate sections merge; duplicate keys within a section are an
// error.
struct IniDoc {
    std::map<std::string, std::map<std::string, std::string>> sections;
};

IniDoc parse_ini_text(const std::string& text, const std::string& origin);
IniDoc parse_ini_file(const std::string& path);

// Layer stack grammar, one layer per ';':
//   conv2d out=16 k=3 stride=1 pad=1 act=relu
//   dense out=10 act=sigmoid
//   upsample factor=2
//   concat from=0          (layer index; -1 is the network input)
//   nonlin act=relu
std::vector<LayerSpec> parse_layer_stack(const std::string& text);

// Full run configuration: requires the [network], [evolution], [training],
// [data], [metrics] and [output] sections, rejects unknown sections and
// keys, and validates every value. Throws ConfigError.
EvolutionConfig load_run_config(const std::string& path);

}  // namespace evo
