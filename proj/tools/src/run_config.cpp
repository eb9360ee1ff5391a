#include "run_config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <thread>

#include "calibra/errors.hpp"
#include "calibra/io.hpp"

namespace calibra::cli {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_number(const std::string& text, const std::string& where) {
  std::size_t pos = 0;
  double v = 0.0;
  bool ok = true;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    ok = false;
  }
  if (ok && trim(text.substr(pos)).empty() == false) ok = false;
  if (!ok) throw ConfigError(where + ": expected a number, got '" + text + "'");
  return v;
}

struct PropertyText {
  std::string name;
  std::map<std::string, double> params;
};

// name | name(k=v, k=v, ...)
PropertyText parse_property_text(const std::string& raw) {
  const std::string text = trim(raw);
  PropertyText out;
  const std::size_t open = text.find('(');
  if (open == std::string::npos) {
    out.name = text;
    return out;
  }
  if (text.empty() || text.back() != ')')
    throw ConfigError("property '" + raw + "': unbalanced parentheses");
  out.name = trim(text.substr(0, open));
  const std::string body = text.substr(open + 1, text.size() - open - 2);
  std::size_t start = 0;
  while (start <= body.size()) {
    std::size_t comma = body.find(',', start);
    const std::string item =
        trim(body.substr(start, comma == std::string::npos ? comma : comma - start));
    if (!item.empty()) {
      const std::size_t eq = item.find('=');
      if (eq == std::string::npos)
        throw ConfigError("property '" + raw + "': expected key=value, got '" + item +
                          "'");
      const std::string key = trim(item.substr(0, eq));
      if (key.empty() || out.params.count(key))
        throw ConfigError("property '" + raw + "': bad or duplicate key '" + key + "'");
      out.params[key] = parse_number(trim(item.substr(eq + 1)), "property " + key);
    } else if (comma != std::string::npos) {
      throw ConfigError("property '" + raw + "': empty parameter");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void check_param_names(const PropertyText& p, const std::vector<std::string>& names) {
  for (const auto& n : names)
    if (!p.params.count(n))
      throw ConfigError("property '" + p.name + "': missing parameter '" + n + "'");
  for (const auto& [k, v] : p.params) {
    (void)v;
    if (std::find(names.begin(), names.end(), k) == names.end())
      throw ConfigError("property '" + p.name + "': unknown parameter '" + k + "'");
  }
}

}  // namespace

nlohmann::json load_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config " + path + ": expected a JSON object");
  if (!j.contains("schema_version"))
    throw ConfigError("config " + path + ": missing schema_version");
  if (!j.at("schema_version").is_number_integer() ||
      j.at("schema_version").get<int>() != 1)
    throw ConfigError("config " + path + ": unsupported schema_version, expected 1");
  return j;
}

void require_keys(const nlohmann::json& obj, const std::vector<std::string>& required,
                  const std::vector<std::string>& optional, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& k : required)
    if (!obj.contains(k)) throw ConfigError(where + ": missing key '" + k + "'");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string& k = it.key();
    if (std::find(required.begin(), required.end(), k) == required.end() &&
        std::find(optional.begin(), optional.end(), k) == optional.end())
      throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

double get_double(const nlohmann::json& obj, const std::string& key,
                  const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

int get_int(const nlohmann::json& obj, const std::string& key,
            const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer())
    throw ConfigError(where + "." + key + ": expected an integer");
  return v.get<int>();
}

std::string get_string(const nlohmann::json& obj, const std::string& key,
                       const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

PropertySpec parse_property(const std::string& text) {
  const PropertyText p = parse_property_text(text);
  if (p.name == "mean") {
    check_param_names(p, {});
    return mean_property();
  }
  if (p.name == "quantile") {
    check_param_names(p, {"tau", "m2"});
    return quantile_property(p.params.at("tau"), p.params.at("m2"));
  }
  throw ConfigError("unknown property '" + p.name +
                    "', expected mean or quantile(tau=..., m2=...)");
}

std::pair<PropertySpec, ConditionalIdFamily> parse_pair_property(
    const std::string& text) {
  const PropertyText p = parse_property_text(text);
  if (p.name == "mean_variance") {
    check_param_names(p, {});
    return mean_variance_pair();
  }
  if (p.name == "quantile_cvar") {
    check_param_names(p, {"tau", "m1", "m2"});
    return quantile_cvar_pair(p.params.at("tau"), p.params.at("m1"),
                              p.params.at("m2"));
  }
  throw ConfigError("unknown pair '" + p.name +
                    "', expected mean_variance or quantile_cvar(tau=..., m1=..., "
                    "m2=...)");
}

ExactDataset load_dataset(const nlohmann::json& spec, const std::string& base_dir) {
  if (!spec.is_object()) throw ConfigError("dataset: expected an object");
  if (spec.contains("exact")) {
    require_keys(spec, {"exact"}, {}, "dataset");
    return exact_dataset_from_json(
        read_file(resolve_path(base_dir, get_string(spec, "exact", "dataset"))));
  }
  if (spec.contains("csv")) {
    require_keys(spec, {"csv", "features", "label"}, {}, "dataset");
    const auto& feats = spec.at("features");
    if (!feats.is_array() || feats.empty())
      throw ConfigError("dataset.features: expected a non-empty array");
    std::vector<std::string> columns;
    for (const auto& f : feats) {
      if (!f.is_string()) throw ConfigError("dataset.features: expected strings");
      columns.push_back(f.get<std::string>());
    }
    return collapse(load_csv(resolve_path(base_dir, get_string(spec, "csv", "dataset")),
                             columns, get_string(spec, "label", "dataset")));
  }
  if (spec.contains("generator")) {
    const std::string name = get_string(spec, "generator", "dataset");
    if (name == "variance_counterexample") {
      require_keys(spec, {"generator"}, {}, "dataset");
      return make_variance_counterexample();
    }
    if (name == "synth_bounded_density") {
      require_keys(spec, {"generator", "cells", "atoms", "m1", "m2", "seed"}, {},
                   "dataset");
      const auto& sv = spec.at("seed");
      if (!sv.is_number_integer() || sv.get<long long>() < 0)
        throw ConfigError("dataset.seed: expected a non-negative integer");
      return synth_bounded_density(get_int(spec, "cells", "dataset"),
                                   get_int(spec, "atoms", "dataset"),
                                   get_double(spec, "m1", "dataset"),
                                   get_double(spec, "m2", "dataset"),
                                   sv.get<std::uint64_t>());
    }
    throw ConfigError("dataset.generator: unknown generator '" + name + "'");
  }
  throw ConfigError("dataset: expected one of 'exact', 'csv', 'generator'");
}

std::vector<GroupPredicate> parse_group_predicates(const nlohmann::json& arr) {
  if (!arr.is_array()) throw ConfigError("groups: expected an array");
  std::vector<GroupPredicate> out;
  for (const auto& g : arr) {
    require_keys(g, {"id", "column", "op", "args"}, {}, "groups[]");
    GroupPredicate p;
    p.id = get_string(g, "id", "groups[]");
    p.column = get_string(g, "column", "groups[]");
    const std::string op = get_string(g, "op", "groups[]");
    const auto& args = g.at("args");
    if (!args.is_array()) throw ConfigError("groups[].args: expected an array");
    for (const auto& a : args) {
      if (!a.is_number()) throw ConfigError("groups[].args: expected numbers");
      p.args.push_back(a.get<double>());
    }
    if (op == "in_range") {
      p.op = GroupPredicate::Op::in_range;
      if (p.args.size() != 2)
        throw ConfigError("groups[].args: in_range takes [lo, hi)");
    } else if (op == "equals") {
      p.op = GroupPredicate::Op::equals;
      if (p.args.size() != 1) throw ConfigError("groups[].args: equals takes [value]");
    } else {
      throw ConfigError("groups[].op: expected in_range or equals, got '" + op + "'");
    }
    out.push_back(std::move(p));
  }
  return out;
}

int env_threads() {
  if (const char* v = std::getenv("CALIBRA_THREADS")) {
    const std::string text(v);
    std::size_t pos = 0;
    int n = 0;
    bool ok = true;
    try {
      n = std::stoi(text, &pos);
    } catch (const std::exception&) {
      ok = false;
    }
    if (ok && (pos != text.size() || n < 1)) ok = false;
    if (!ok)
      throw ConfigError("CALIBRA_THREADS: expected a positive integer, got '" + text +
                        "'");
    return n;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

std::string dirname_of(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  return parent.empty() ? std::string(".") : parent.string();
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

}  // namespace calibra::cli
