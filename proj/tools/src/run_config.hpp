#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "calibra/dataset.hpp"
#include "calibra/property.hpp"

namespace calibra::cli {

// Parses the --config file: must be a JSON object with schema_version 1.
nlohmann::json load_config(const std::string& path);

// Key whitelist check; any key outside required+optional rejects the config.
void require_keys(const nlohmann::json& obj, const std::vector<std::string>& required,
                  const std::vector<std::string>& optional, const std::string& where);

double get_double(const nlohmann::json& obj, const std::string& key,
                  const std::string& where);
int get_int(const nlohmann::json& obj, const std::string& key,
            const std::string& where);
std::string get_string(const nlohmann::json& obj, const std::string& key,
                       const std::string& where);

// "mean" or "quantile(tau=..., m2=...)"; m2 is the density upper bound.
PropertySpec parse_property(const std::string& text);

// "mean_variance" or "quantile_cvar(tau=..., m1=..., m2=...)".
std::pair<PropertySpec, ConditionalIdFamily> parse_pair_property(
    const std::string& text);

// Dataset source: {"exact": path} | {"csv": path, "features": [...],
// "label": col} | {"generator": "synth_bounded_density", cells, atoms, m1,
// m2, seed} | {"generator": "variance_counterexample"}. Relative paths
// resolve against the config file's directory.
ExactDataset load_dataset(const nlohmann::json& spec, const std::string& base_dir);

// [{"id", "column", "op": "in_range"|"equals", "args": [...]}, ...].
std::vector<GroupPredicate> parse_group_predicates(const nlohmann::json& arr);

// CALIBRA_THREADS when set (must be a positive integer), else the hardware
// concurrency, else 1.
int env_threads();

std::string dirname_of(const std::string& path);
std::string resolve_path(const std::string& base_dir, const std::string& path);

}  // namespace calibra::cli
