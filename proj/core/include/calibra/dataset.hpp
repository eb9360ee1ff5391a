#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "calibra/distribution.hpp"

namespace calibra {

// Population model with exact conditional label distributions: a finite set
// of cells (distinct feature profiles), each carrying a weight and a label
// distribution on [0,1]. Weights are positive and sum to 1 within 1e-12.
struct ExactDataset {
  struct Cell {
    std::string id;
    double weight = 0.0;
    FiniteDistribution dist;
  };
  std::vector<Cell> cells;
  // Optional per-cell numeric attributes, keyed cell id -> column -> value.
  // Group predicates evaluate against these.
  std::map<std::string, std::map<std::string, double>> tags;

  void validate() const;  // throws DataError
  std::optional<std::size_t> cell_index(const std::string& id) const;
};

// Row-level dataset as loaded from CSV; collapses to an ExactDataset whose
// cells are the distinct feature vectors with empirical label distributions.
struct SampleDataset {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> features;  // one row per sample
  std::vector<double> labels;
};

SampleDataset load_csv(const std::string& path,
                       const std::vector<std::string>& feature_columns,
                       const std::string& label_column);

// Cells ordered by first occurrence; ids c0, c1, ...; feature values become
// tags under their column names.
ExactDataset collapse(const SampleDataset& s);

struct Group {
  std::string id;
  std::vector<std::uint8_t> mask;  // one flag per cell
};

// Ordered collection of overlapping groups; the order is the tie-break order
// used by the calibration loops.
struct GroupFamily {
  std::vector<Group> groups;
  const Group* find(const std::string& id) const;
};

struct GroupPredicate {
  enum class Op { in_range, equals };
  std::string id;
  std::string column;
  Op op = Op::in_range;
  std::vector<double> args;  // in_range: [lo, hi), half-open; equals: [value]
};

// Materializes predicate masks over the dataset's tags and prepends the
// mandatory whole-population group with reserved id "all". Every group must
// match at least one cell.
GroupFamily groups_from_config(const std::vector<GroupPredicate>& preds,
                               const ExactDataset& data);

// `{cells: [{id, weight, dist: {support, probs}}], tags: {id: {col: val}}}`.
std::string exact_dataset_json(const ExactDataset& data);
ExactDataset exact_dataset_from_json(const std::string& text);

double region_mass(const ExactDataset& data, const std::vector<std::size_t>& idx);

// Weight-renormalized label mixture over the given cells. Throws
// EmptyRegionError when the region has zero mass.
FiniteDistribution mixture_distribution(const ExactDataset& data,
                                        const std::vector<std::size_t>& idx);

// Two half-weight cells with point masses at 0 and 1: every cell has zero
// label variance while the pooled mixture has variance 1/4.
ExactDataset make_variance_counterexample();

ExactDataset make_two_point_dataset(const FiniteDistribution& p1,
                                    const FiniteDistribution& p2, double lambda);

// `cells` independent label distributions on `atoms` equispaced atoms
// (centers (i+1/2)/atoms), per-atom mass in [m1/atoms, m2/atoms], masses
// summing to 1; uniform cell weights; tag "idx" = cell index. Requires
// 0 < m1 <= 1 <= m2. Deterministic in `seed`.
ExactDataset synth_bounded_density(int cells, int atoms, double m1, double m2,
                                   std::uint64_t seed);

// Witness that CVaR level sets are not convex: two distributions with equal
// CVaR_tau whose even mixture has a different CVaR.
struct CvarCxlsWitness {
  FiniteDistribution p1, p2;
  double cvar1 = 0.0, cvar2 = 0.0, cvar_mix = 0.0;
  double gap = 0.0;  // |cvar_mix - cvar1|
};

// Exhaustive scan over pairs of (up to) 3-atom distributions with atoms from
// atom_grid and probabilities from prob_grid (triples summing to 1 within
// 1e-9). Returns the first pair, in enumeration order, with equal CVaR within
// 1e-9 and mixture gap above 1e-3; nullopt when no pair qualifies.
std::optional<CvarCxlsWitness> find_cvar_cxls_violation(
    double tau, const std::vector<double>& atom_grid,
    const std::vector<double>& prob_grid);

std::vector<double> default_cxls_atom_grid();  // {0, .25, .5, .75, 1}
std::vector<double> default_cxls_prob_grid();  // multiples of 0.25

}  // namespace calibra
