#include "calibra/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "calibra/errors.hpp"

namespace calibra {

void ExactDataset::validate() const {
  if (cells.empty()) throw DataError("dataset: no cells");
  std::set<std::string> seen;
  double total = 0.0;
  for (const Cell& c : cells) {
    if (c.id.empty()) throw DataError("dataset: empty cell id");
    if (!seen.insert(c.id).second) throw DataError("dataset: duplicate cell id " + c.id);
    if (!(c.weight > 0.0)) throw DataError("dataset: cell " + c.id + " has non-positive weight");
    total += c.weight;
    for (double y : c.dist.support)
      if (!(y >= 0.0 && y <= 1.0))
        throw DataError("dataset: cell " + c.id + " has label outside [0,1]");
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw DataError("dataset: cell weights sum to " + std::to_string(total));
  for (const auto& [id, _] : tags)
    if (!seen.count(id)) throw DataError("dataset: tags reference unknown cell " + id);
}

std::optional<std::size_t> ExactDataset::cell_index(const std::string& id) const {
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (cells[i].id == id) return i;
  return std::nullopt;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, int file_line, const std::string& what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw DataError("csv row " + std::to_string(file_line) + ": " + what +
                    " is not a number: '" + s + "'");
  }
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  if (pos != s.size())
    throw DataError("csv row " + std::to_string(file_line) + ": " + what +
                    " is not a number: '" + s + "'");
  return v;
}

}  // namespace

SampleDataset load_csv(const std::string& path,
                       const std::vector<std::string>& feature_columns,
                       const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw DataError("csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: empty file " + path);
  const std::vector<std::string> header = split_csv_line(line);

  auto column_of = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("csv: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> fcols;
  for (const std::string& f : feature_columns) fcols.push_back(column_of(f));
  const std::size_t lcol = column_of(label_column);

  SampleDataset s;
  s.feature_names = feature_columns;
  int file_line = 1;
  while (std::getline(in, line)) {
    ++file_line;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw DataError("csv row " + std::to_string(file_line) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    std::vector<double> fv;
    for (std::size_t k = 0; k < fcols.size(); ++k)
      fv.push_back(parse_number(fields[fcols[k]], file_line,
                                "feature '" + feature_columns[k] + "'"));
    const double y = parse_number(fields[lcol], file_line, "label");
    if (!(y >= 0.0 && y <= 1.0))
      throw DataError("csv row " + std::to_string(file_line) +
                      ": label outside [0,1]: " + fields[lcol]);
    s.features.push_back(std::move(fv));
    s.labels.push_back(y);
  }
  if (s.labels.empty()) throw DataError("csv: no data rows in " + path);
  return s;
}

ExactDataset collapse(const SampleDataset& s) {
  ExactDataset d;
  std::map<std::vector<double>, std::size_t> index;  // feature vector -> cell
  std::vector<std::vector<double>> cell_labels;
  std::vector<std::vector<double>> cell_features;
  for (std::size_t r = 0; r < s.labels.size(); ++r) {
    auto [it, fresh] = index.try_emplace(s.features[r], cell_labels.size());
    if (fresh) {
      cell_labels.emplace_back();
      cell_features.push_back(s.features[r]);
    }
    cell_labels[it->second].push_back(s.labels[r]);
  }
  // try_emplace assigned slots in first-occurrence order already.
  const double n = static_cast<double>(s.labels.size());
  for (std::size_t c = 0; c < cell_labels.size(); ++c) {
    ExactDataset::Cell cell;
    cell.id = "c" + std::to_string(c);
    cell.weight = static_cast<double>(cell_labels[c].size()) / n;
    std::vector<double> probs(cell_labels[c].size(),
                              1.0 / static_cast<double>(cell_labels[c].size()));
    cell.dist = FiniteDistribution::from_atoms(cell_labels[c], probs);
    for (std::size_t k = 0; k < s.feature_names.size(); ++k)
      d.tags[cell.id][s.feature_names[k]] = cell_features[c][k];
    d.cells.push_back(std::move(cell));
  }
  d.validate();
  return d;
}

const Group* GroupFamily::find(const std::string& id) const {
  for (const Group& g : groups)
    if (g.id == id) return &g;
  return nullptr;
}

GroupFamily groups_from_config(const std::vector<GroupPredicate>& preds,
                               const ExactDataset& data) {
  GroupFamily fam;
  Group all;
  all.id = "all";
  all.mask.assign(data.cells.size(), 1);
  fam.groups.push_back(std::move(all));

  std::set<std::string> seen{"all"};
  for (const GroupPredicate& p : preds) {
    if (p.id.empty()) throw ConfigError("group predicate with empty id");
    if (p.id == "all") throw ConfigError("group id 'all' is reserved");
    if (!seen.insert(p.id).second) throw ConfigError("duplicate group id " + p.id);
    if (p.op == GroupPredicate::Op::in_range && p.args.size() != 2)
      throw ConfigError("group " + p.id + ": in_range takes [lo, hi)");
    if (p.op == GroupPredicate::Op::equals && p.args.size() != 1)
      throw ConfigError("group " + p.id + ": equals takes one value");

    Group g;
    g.id = p.id;
    g.mask.assign(data.cells.size(), 0);
    std::size_t members = 0;
    for (std::size_t c = 0; c < data.cells.size(); ++c) {
      auto ti = data.tags.find(data.cells[c].id);
      if (ti == data.tags.end() || !ti->second.count(p.column))
        throw ConfigError("group " + p.id + ": cell " + data.cells[c].id +
                          " has no attribute '" + p.column + "'");
      const double v = ti->second.at(p.column);
      bool in = false;
      if (p.op == GroupPredicate::Op::in_range)
        in = v >= p.args[0] && v < p.args[1];
      else
        in = v == p.args[0];
      if (in) {
        g.mask[c] = 1;
        ++members;
      }
    }
    if (members == 0) throw ConfigError("group " + p.id + " matches no cells");
    fam.groups.push_back(std::move(g));
  }
  return fam;
}

std::string exact_dataset_json(const ExactDataset& data) {
  nlohmann::json j;
  j["cells"] = nlohmann::json::array();
  for (const ExactDataset::Cell& c : data.cells)
    j["cells"].push_back({{"id", c.id},
                          {"weight", c.weight},
                          {"dist", {{"support", c.dist.support}, {"probs", c.dist.probs}}}});
  j["tags"] = nlohmann::json::object();
  for (const auto& [id, cols] : data.tags) {
    nlohmann::json row = nlohmann::json::object();
    for (const auto& [col, val] : cols) row[col] = val;
    j["tags"][id] = row;
  }
  return j.dump(2) + "\n";
}

ExactDataset exact_dataset_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad dataset JSON: ") + e.what());
  }
  ExactDataset data;
  try {
    for (const auto& cj : j.at("cells")) {
      ExactDataset::Cell c;
      c.id = cj.at("id").get<std::string>();
      c.weight = cj.at("weight").get<double>();
      c.dist = FiniteDistribution::from_atoms(
          cj.at("dist").at("support").get<std::vector<double>>(),
          cj.at("dist").at("probs").get<std::vector<double>>());
      data.cells.push_back(std::move(c));
    }
    if (j.contains("tags"))
      for (const auto& [id, row] : j.at("tags").items())
        for (const auto& [col, val] : row.items())
          data.tags[id][col] = val.get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad dataset JSON: ") + e.what());
  }
  data.validate();
  return data;
}

double region_mass(const ExactDataset& data, const std::vector<std::size_t>& idx) {
  double w = 0.0;
  for (std::size_t i : idx) w += data.cells.at(i).weight;
  return w;
}

FiniteDistribution mixture_distribution(const ExactDataset& data,
                                        const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw EmptyRegionError("mixture over empty region");
  std::vector<const FiniteDistribution*> parts;
  std::vector<double> weights;
  for (std::size_t i : idx) {
    parts.push_back(&data.cells.at(i).dist);
    weights.push_back(data.cells.at(i).weight);
  }
  return mix(parts, weights);
}

ExactDataset make_variance_counterexample() {
  ExactDataset d;
  d.cells.push_back({"x0", 0.5, FiniteDistribution::from_atoms({0.0}, {1.0})});
  d.cells.push_back({"x1", 0.5, FiniteDistribution::from_atoms({1.0}, {1.0})});
  d.tags["x0"]["idx"] = 0.0;
  d.tags["x1"]["idx"] = 1.0;
  d.validate();
  return d;
}

ExactDataset make_two_point_dataset(const FiniteDistribution& p1,
                                    const FiniteDistribution& p2, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw ConfigError("make_two_point_dataset: lambda must lie in (0,1)");
  ExactDataset d;
  d.cells.push_back({"x0", lambda, p1});
  d.cells.push_back({"x1", 1.0 - lambda, p2});
  d.tags["x0"]["idx"] = 0.0;
  d.tags["x1"]["idx"] = 1.0;
  d.validate();
  return d;
}

namespace {

double unit_from_bits(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace

ExactDataset synth_bounded_density(int cells, int atoms, double m1, double m2,
                                   std::uint64_t seed) {
  if (cells < 1) throw ConfigError("synth_bounded_density: need at least one cell");
  if (atoms < 2) throw ConfigError("synth_bounded_density: need at least two atoms");
  if (!(m1 > 0.0 && m1 <= 1.0 && m2 >= 1.0))
    throw ConfigError("synth_bounded_density: density band must satisfy 0 < m1 <= 1 <= m2");

  std::mt19937_64 rng(seed);
  const double lo = m1 / atoms, hi = m2 / atoms;
  ExactDataset d;
  for (int c = 0; c < cells; ++c) {
    std::vector<double> ys(atoms), ps(atoms);
    double used = 0.0;
    for (int i = 0; i < atoms; ++i) {
      ys[i] = (i + 0.5) / atoms;
      const int rest = atoms - i - 1;
      if (rest == 0) {
        ps[i] = 1.0 - used;
        break;
      }
      // Keep the remaining mass reachable with per-atom masses in [lo, hi].
      const double lb = std::max(lo, 1.0 - used - rest * hi);
      const double ub = std::min(hi, 1.0 - used - rest * lo);
      ps[i] = lb + (ub - lb) * unit_from_bits(rng());
      used += ps[i];
    }
    ExactDataset::Cell cell;
    cell.id = "c" + std::to_string(c);
    cell.weight = 1.0 / cells;
    cell.dist = FiniteDistribution::from_atoms(ys, ps);
    d.tags[cell.id]["idx"] = static_cast<double>(c);
    d.cells.push_back(std::move(cell));
  }
  d.validate();
  return d;
}

std::vector<double> default_cxls_atom_grid() { return {0.0, 0.25, 0.5, 0.75, 1.0}; }

std::vector<double> default_cxls_prob_grid() { return {0.0, 0.25, 0.5, 0.75, 1.0}; }

std::optional<CvarCxlsWitness> find_cvar_cxls_violation(
    double tau, const std::vector<double>& atom_grid,
    const std::vector<double>& prob_grid) {
  if (!(tau >= 0.0 && tau < 1.0))
    throw ConfigError("find_cvar_cxls_violation: tau must lie in [0,1)");
  if (atom_grid.size() < 3) throw ConfigError("find_cvar_cxls_violation: need >= 3 atoms");

  std::vector<FiniteDistribution> candidates;
  for (std::size_t a = 0; a < atom_grid.size(); ++a)
    for (std::size_t b = a + 1; b < atom_grid.size(); ++b)
      for (std::size_t c = b + 1; c < atom_grid.size(); ++c)
        for (double pa : prob_grid)
          for (double pb : prob_grid) {
            const double pc = 1.0 - pa - pb;
            if (pc < -1e-9) continue;
            bool on_grid = false;
            for (double g : prob_grid)
              if (std::abs(pc - g) <= 1e-9) on_grid = true;
            if (!on_grid) continue;
            FiniteDistribution d = FiniteDistribution::from_atoms(
                {atom_grid[a], atom_grid[b], atom_grid[c]},
                {pa, pb, std::max(pc, 0.0)});
            if (std::none_of(candidates.begin(), candidates.end(),
                             [&](const FiniteDistribution& e) { return e == d; }))
              candidates.push_back(std::move(d));
          }

  for (std::size_t i = 0; i < candidates.size(); ++i)
    for (std::size_t j = i + 1; j < candidates.size(); ++j) {
      const double c1 = candidates[i].cvar(tau);
      const double c2 = candidates[j].cvar(tau);
      if (std::abs(c1 - c2) > 1e-9) continue;
      const double cm = mix2(candidates[i], candidates[j], 0.5).cvar(tau);
      const double gap = std::abs(cm - c1);
      if (gap > 1e-3)
        return CvarCxlsWitness{candidates[i], candidates[j], c1, c2, cm, gap};
    }
  return std::nullopt;
}

}  // namespace calibra
