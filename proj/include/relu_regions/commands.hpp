// Dataset-level drivers behind the command line tool: per-point pipelines,
// a worker pool that keeps results in input order, and the report writers.

#ifndef RELU_REGIONS_COMMANDS_HPP
#define RELU_REGIONS_COMMANDS_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "relu_regions/attacks.hpp"
#include "relu_regions/dataset.hpp"
#include "relu_regions/network.hpp"
#include "relu_regions/oracle.hpp"

namespace relu_regions {

enum class WarmStartMode { deepfool, none, file };

struct RunOptions {
  AttackConfig attack;  // attack.seed is the run seed; each point derives its own
  DeepFoolOptions deepfool;
  int refine_iters = 40;
  WarmStartMode warm_start = WarmStartMode::deepfool;
  std::vector<Vector> warm_deltas;  // one per point, for WarmStartMode::file
  int workers = 1;
};

/// Seed for point `index` of a run; independent of scheduling.
std::uint64_t point_seed(std::uint64_t seed, std::size_t index);

/// RELU_REGIONS_WORKERS, else 1.
int default_workers();

struct AttackRow {
  std::size_t point = 0;
  int label = 0;
  int predicted = -1;
  std::string warm_source;  // deepfool | fallback | box-search | file | none | failed
  std::optional<double> deepfool_norm;
  AttackResult result;
  std::string error;
  double wall_ms = 0.0;
};

AttackRow attack_point(const Network& net, const DataPoint& point, std::size_t index,
                       const RunOptions& options);
std::vector<AttackRow> attack_dataset(const Network& net, const Dataset& data,
                                      const RunOptions& options);
void write_attack_report(const std::vector<AttackRow>& rows, const RunOptions& options,
                         std::ostream& out);

enum class Method { oracle, rlr_qp, deepfool };
Method parse_method(const std::string& name);
const char* to_string(Method method);

struct CompareOptions {
  RunOptions run;
  std::vector<Method> methods{Method::oracle, Method::rlr_qp, Method::deepfool};
  OracleOptions oracle;

  bool has(Method m) const;
};

struct CompareRow {
  std::size_t point = 0;
  int label = 0;
  int predicted = -1;
  std::optional<OracleResult> oracle;
  std::optional<AttackRow> rlr_qp;
  bool deepfool_ran = false;
  std::optional<Vector> deepfool;
  std::string error;
  double wall_ms = 0.0;
};

std::vector<CompareRow> compare_dataset(const Network& net, const Dataset& data,
                                        const CompareOptions& options);
void write_compare_report(const std::vector<CompareRow>& rows, const CompareOptions& options,
                          std::ostream& out);

struct IterateRow {
  std::size_t point = 0;
  int label = 0;
  int predicted = -1;
  int round = 1;
  AttackResult result;
  std::optional<double> improvement_pct;  // relative to the previous round
  std::string error;
  double wall_ms = 0.0;
};

/// rows[i][r] is point i after round r + 1. Round one is the attack pipeline;
/// later rounds start from the previous result and target only its class.
std::vector<std::vector<IterateRow>> iterate_dataset(const Network& net, const Dataset& data,
                                                     const RunOptions& options, int rounds);
void write_iterate_report(const std::vector<std::vector<IterateRow>>& rows,
                          const RunOptions& options, int rounds, std::ostream& out);

std::string describe_network(const Network& net, const AttackConfig& cfg);

/// Throws DimensionError / DatasetError when the data cannot be attacked with net.
void check_compatible(const Network& net, const Dataset& data);

}  // namespace relu_regions

#endif  // RELU_REGIONS_COMMANDS_HPP
