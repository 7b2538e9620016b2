#include "relu_regions/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include "relu_regions/report.hpp"

namespace relu_regions {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, n); ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

const char* to_string(TargetPolicy p) {
  switch (p) {
    case TargetPolicy::automatic: return "auto";
    case TargetPolicy::all_classes: return "all";
    case TargetPolicy::warm_start_class: return "warm";
    case TargetPolicy::explicit_list: return "list";
  }
  return "unknown";
}

const char* to_string(WarmStartMode m) {
  switch (m) {
    case WarmStartMode::deepfool: return "deepfool";
    case WarmStartMode::none: return "none";
    case WarmStartMode::file: return "file";
  }
  return "unknown";
}

std::string config_line(const std::string& command, const RunOptions& o) {
  const AttackConfig& c = o.attack;
  std::ostringstream s;
  s << "command=" << command << " seed=" << c.seed << " n1=" << c.n1 << " n2=" << c.n2
    << " n3=" << c.n3 << " n4=" << c.n4 << " alpha=" << format_real(c.alpha)
    << " targets=" << to_string(c.targets);
  if (c.targets == TargetPolicy::explicit_list) {
    for (std::size_t i = 0; i < c.explicit_targets.size(); ++i) {
      s << (i == 0 ? ":" : ";") << c.explicit_targets[i];
    }
  }
  if (c.box) {
    s << " box=" << format_real(c.box->lower.minCoeff()) << ";" << format_real(c.box->upper.maxCoeff());
  } else {
    s << " box=none";
  }
  s << " warm_start=" << to_string(o.warm_start) << " boundary_tol=" << format_real(c.boundary_tol)
    << " deepfool_iters=" << o.deepfool.max_iters
    << " overshoot=" << format_real(o.deepfool.overshoot) << " refine_iters=" << o.refine_iters;
  return s.str();
}

std::optional<double> success_norm(const AttackResult& r) {
  if (!r.success) return std::nullopt;
  return r.norm;
}

std::string flag(bool b) { return b ? "true" : "false"; }

std::string error_message(const std::exception& e) { return sanitize_cell(e.what()); }

}  // namespace

std::uint64_t point_seed(std::uint64_t seed, std::size_t index) {
  // splitmix64 finalizer over (seed, index)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

int default_workers() {
  if (const char* env = std::getenv("RELU_REGIONS_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

void check_compatible(const Network& net, const Dataset& data) {
  for (std::size_t i = 0; i < data.points.size(); ++i) {
    const DataPoint& p = data.points[i];
    if (p.x.size() != net.input_dim()) {
      throw DimensionError("point " + std::to_string(i) + " has dimension " +
                           std::to_string(p.x.size()) + ", network expects " +
                           std::to_string(net.input_dim()));
    }
    if (p.label >= net.num_classes()) {
      throw DatasetError("point " + std::to_string(i) + " has label " + std::to_string(p.label) +
                         " but the network has " + std::to_string(net.num_classes()) + " classes");
    }
  }
}

// attack ------------------------------------------------------------------

AttackRow attack_point(const Network& net, const DataPoint& point, std::size_t index,
                       const RunOptions& options) {
  const auto start = Clock::now();
  AttackRow row;
  row.point = index;
  row.label = point.label;
  row.result.warm_start_norm = std::numeric_limits<double>::quiet_NaN();
  try {
    row.predicted = classify(net, point.x);
    std::optional<Vector> warm;
    switch (options.warm_start) {
      case WarmStartMode::deepfool: {
        WarmStart ws = compute_warm_start(net, point.x, options.attack.box, options.deepfool,
                                          options.refine_iters);
        if (ws.deepfool) row.deepfool_norm = ws.deepfool->norm();
        warm = std::move(ws.refined);
        row.warm_source = ws.deepfool          ? "deepfool"
                          : ws.used_fallback   ? "fallback"
                          : ws.used_box_search ? "box-search"
                                               : "failed";
        break;
      }
      case WarmStartMode::none:
        row.warm_source = "none";
        break;
      case WarmStartMode::file: {
        if (index >= options.warm_deltas.size()) {
          throw std::invalid_argument("warm-start file has no row for point " + std::to_string(index));
        }
        const Vector& delta = options.warm_deltas[index];
        if (delta.size() != point.x.size()) throw DimensionError("warm-start row dimension mismatch");
        if (is_adversarial(net, point.x, row.predicted, delta, 0.0)) {
          warm = boundary_refine(net, point.x, delta, options.refine_iters);
          row.warm_source = "file";
        } else {
          row.warm_source = "failed";
        }
        break;
      }
    }
    AttackConfig cfg = options.attack;
    cfg.seed = point_seed(options.attack.seed, index);
    row.result = rlr_qp(net, point.x, warm, cfg);
  } catch (const std::exception& e) {
    row.error = error_message(e);
    row.result.success = false;
  }
  row.wall_ms = elapsed_ms(start);
  return row;
}

std::vector<AttackRow> attack_dataset(const Network& net, const Dataset& data,
                                      const RunOptions& options) {
  options.attack.validate();
  check_compatible(net, data);
  std::vector<AttackRow> rows(data.points.size());
  parallel_for(rows.size(), options.workers,
               [&](std::size_t i) { rows[i] = attack_point(net, data.points[i], i, options); });
  return rows;
}

void write_attack_report(const std::vector<AttackRow>& rows, const RunOptions& options,
                         std::ostream& out) {
  out << kReportSchema << '\n';
  CsvWriter csv(out);
  csv.comment(config_line("attack", options));
  csv.row({"point", "label", "predicted", "success", "adversarial_class", "norm", "warm_start",
           "warm_start_norm", "deepfool_norm", "ratio_deepfool", "first_region_norm",
           "regions_checked", "qp_calls", "solver_errors", "error", "wall_time_ms"});

  std::vector<std::optional<double>> ours;
  std::vector<std::optional<double>> deepfool;
  std::size_t successes = 0;
  for (const AttackRow& r : rows) {
    const auto norm = success_norm(r.result);
    ours.push_back(norm);
    deepfool.push_back(r.deepfool_norm);
    if (norm) ++successes;
    std::optional<double> ratio;
    if (norm && r.deepfool_norm) ratio = *r.deepfool_norm / *norm;
    const double warm = r.result.warm_start_norm;
    const double first = r.result.first_region_norm;
    csv.row({std::to_string(r.point), std::to_string(r.label), std::to_string(r.predicted),
             flag(r.result.success),
             r.result.success ? std::to_string(r.result.adversarial_class) : "",
             format_real(norm), r.warm_source,
             std::isnan(warm) ? "" : format_real(warm), format_real(r.deepfool_norm),
             format_real(ratio), std::isinf(first) || !r.error.empty() ? "" : format_real(first),
             std::to_string(r.result.regions_checked), std::to_string(r.result.qp_calls),
             std::to_string(r.result.solver_errors), r.error, format_real(r.wall_ms)});
  }
  // Table-style comparison: ratio |delta_DF| / |delta_rLR-QP|, IR = % of points
  // where rLR-QP is strictly smaller.
  csv.comment(summary_line("method=deepfool", ratio_stats(deepfool, ours)));
  csv.comment("summary method=rlr-qp points=" + std::to_string(rows.size()) +
              " success=" + std::to_string(successes) +
              " failures=" + std::to_string(rows.size() - successes));
}

// compare-oracle ----------------------------------------------------------

Method parse_method(const std::string& name) {
  if (name == "oracle") return Method::oracle;
  if (name == "rlr-qp" || name == "rlrqp") return Method::rlr_qp;
  if (name == "deepfool") return Method::deepfool;
  throw std::invalid_argument("unknown method '" + name + "' (expected oracle, rlr-qp, deepfool)");
}

const char* to_string(Method method) {
  switch (method) {
    case Method::oracle: return "oracle";
    case Method::rlr_qp: return "rlr-qp";
    case Method::deepfool: return "deepfool";
  }
  return "unknown";
}

bool CompareOptions::has(Method m) const {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

std::vector<CompareRow> compare_dataset(const Network& net, const Dataset& data,
                                        const CompareOptions& options) {
  options.run.attack.validate();
  check_compatible(net, data);
  if (options.has(Method::oracle)) {
    // Surface the pattern cap once, before any work.
    const int n = net.hidden_units();
    if (n > options.oracle.max_hidden_units || n >= 64 ||
        (std::uint64_t{1} << n) > options.oracle.budget) {
      OracleOptions probe = options.oracle;
      exact_min_adversarial(net, Vector::Zero(net.input_dim()), std::nullopt, probe);
    }
  }

  std::vector<CompareRow> rows(data.points.size());
  parallel_for(rows.size(), options.run.workers, [&](std::size_t i) {
    const auto start = Clock::now();
    const DataPoint& p = data.points[i];
    CompareRow& row = rows[i];
    row.point = i;
    row.label = p.label;
    try {
      row.predicted = classify(net, p.x);
      if (options.has(Method::oracle)) {
        row.oracle = exact_min_adversarial(net, p.x, options.run.attack.box, options.oracle);
      }
      if (options.has(Method::deepfool)) {
        row.deepfool_ran = true;
        row.deepfool = deepfool(net, p.x, options.run.deepfool, options.run.attack.box);
      }
      if (options.has(Method::rlr_qp)) {
        row.rlr_qp = attack_point(net, p, i, options.run);
        if (!row.rlr_qp->error.empty()) row.error = row.rlr_qp->error;
      }
    } catch (const std::exception& e) {
      row.error = error_message(e);
    }
    row.wall_ms = elapsed_ms(start);
  });
  return rows;
}

void write_compare_report(const std::vector<CompareRow>& rows, const CompareOptions& options,
                          std::ostream& out) {
  const bool with_oracle = options.has(Method::oracle);
  const bool with_rlr = options.has(Method::rlr_qp);
  const bool with_df = options.has(Method::deepfool);

  out << kReportSchema << '\n';
  CsvWriter csv(out);
  std::string methods;
  for (Method m : options.methods) methods += std::string(methods.empty() ? "" : ";") + to_string(m);
  csv.comment(config_line("compare-oracle", options.run) + " methods=" + methods +
              " oracle_budget=" + std::to_string(options.oracle.budget));

  std::vector<std::string> header{"point", "label", "predicted"};
  if (with_oracle) {
    header.insert(header.end(), {"oracle_found", "oracle_norm", "oracle_target", "oracle_patterns",
                                 "oracle_feasible_patterns"});
  }
  if (with_rlr) {
    header.insert(header.end(), {"rlrqp_success", "rlrqp_norm"});
    if (with_oracle) header.emplace_back("rlrqp_ratio");
    header.insert(header.end(), {"regions_checked", "qp_calls"});
  }
  if (with_df) {
    header.insert(header.end(), {"deepfool_success", "deepfool_norm"});
    if (with_oracle) header.emplace_back("deepfool_ratio");
  }
  header.insert(header.end(), {"error", "wall_time_ms"});
  csv.row(header);

  std::vector<std::optional<double>> oracle_norms;
  std::vector<std::optional<double>> rlr_norms;
  std::vector<std::optional<double>> df_norms;
  for (const CompareRow& r : rows) {
    std::optional<double> on;
    if (r.oracle && r.oracle->found) on = r.oracle->norm;
    std::optional<double> rn;
    if (r.rlr_qp) rn = success_norm(r.rlr_qp->result);
    std::optional<double> dn;
    if (r.deepfool) dn = r.deepfool->norm();
    oracle_norms.push_back(on);
    rlr_norms.push_back(rn);
    df_norms.push_back(dn);
    auto ratio = [&](const std::optional<double>& n) -> std::optional<double> {
      if (!n || !on) return std::nullopt;
      return *n / *on;
    };

    std::vector<std::string> cells{std::to_string(r.point), std::to_string(r.label),
                                   std::to_string(r.predicted)};
    if (with_oracle) {
      cells.push_back(r.oracle ? flag(r.oracle->found) : "");
      cells.push_back(format_real(on));
      cells.push_back(on ? std::to_string(r.oracle->target) : "");
      cells.push_back(r.oracle ? std::to_string(r.oracle->patterns_enumerated) : "");
      cells.push_back(r.oracle ? std::to_string(r.oracle->feasible_patterns) : "");
    }
    if (with_rlr) {
      cells.push_back(r.rlr_qp ? flag(r.rlr_qp->result.success) : "");
      cells.push_back(format_real(rn));
      if (with_oracle) cells.push_back(format_real(ratio(rn)));
      cells.push_back(r.rlr_qp ? std::to_string(r.rlr_qp->result.regions_checked) : "");
      cells.push_back(r.rlr_qp ? std::to_string(r.rlr_qp->result.qp_calls) : "");
    }
    if (with_df) {
      cells.push_back(r.deepfool_ran ? flag(r.deepfool.has_value()) : "");
      cells.push_back(format_real(dn));
      if (with_oracle) cells.push_back(format_real(ratio(dn)));
    }
    cells.push_back(r.error);
    cells.push_back(format_real(r.wall_ms));
    csv.row(cells);
  }

  if (with_oracle) {
    std::size_t found = 0;
    for (const auto& n : oracle_norms) found += n.has_value();
    csv.comment("summary method=oracle points=" + std::to_string(rows.size()) +
                " found=" + std::to_string(found));
    // Ratios are |delta_method| / |delta_oracle|; ir counts points where the
    // oracle is strictly smaller.
    if (with_rlr) csv.comment(summary_line("method=rlr-qp", ratio_stats(rlr_norms, oracle_norms)));
    if (with_df) csv.comment(summary_line("method=deepfool", ratio_stats(df_norms, oracle_norms)));
  }
}

// iterate -----------------------------------------------------------------

std::vector<std::vector<IterateRow>> iterate_dataset(const Network& net, const Dataset& data,
                                                     const RunOptions& options, int rounds) {
  if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  options.attack.validate();
  check_compatible(net, data);
  std::vector<std::vector<IterateRow>> rows(data.points.size());
  parallel_for(rows.size(), options.workers, [&](std::size_t i) {
    const DataPoint& p = data.points[i];
    const AttackRow first = attack_point(net, p, i, options);
    IterateRow r1;
    r1.point = i;
    r1.label = p.label;
    r1.predicted = first.predicted;
    r1.round = 1;
    r1.result = first.result;
    r1.error = first.error;
    r1.wall_ms = first.wall_ms;
    rows[i].push_back(std::move(r1));

    for (int round = 2; round <= rounds; ++round) {
      const IterateRow& prev = rows[i].back();
      IterateRow row;
      row.point = i;
      row.label = p.label;
      row.predicted = prev.predicted;
      row.round = round;
      const auto start = Clock::now();
      if (!prev.result.success) {
        row.result = prev.result;
        row.error = prev.error.empty() ? "no adversarial point to restart from" : prev.error;
      } else {
        try {
          AttackConfig cfg = options.attack;
          cfg.targets = TargetPolicy::explicit_list;
          cfg.explicit_targets = {prev.result.adversarial_class};
          cfg.seed = point_seed(point_seed(options.attack.seed, i), static_cast<std::size_t>(round));
          // The previous answer is on the boundary; restart from its validated pushed point.
          const Vector restart = (1.0 + cfg.boundary_tol) * prev.result.delta;
          row.result = rlr_qp(net, p.x, restart, cfg);
          if (!row.result.success || row.result.norm >= prev.result.norm) {
            row.result.delta = prev.result.delta;
            row.result.norm = prev.result.norm;
            row.result.success = true;
            row.result.adversarial_class = prev.result.adversarial_class;
          }
          row.improvement_pct = 100.0 * (prev.result.norm - row.result.norm) / prev.result.norm;
        } catch (const std::exception& e) {
          row.error = error_message(e);
          row.result = prev.result;
        }
      }
      row.wall_ms = elapsed_ms(start);
      rows[i].push_back(std::move(row));
    }
  });
  return rows;
}

void write_iterate_report(const std::vector<std::vector<IterateRow>>& rows,
                          const RunOptions& options, int rounds, std::ostream& out) {
  out << kReportSchema << '\n';
  CsvWriter csv(out);
  csv.comment(config_line("iterate", options) + " rounds=" + std::to_string(rounds));
  csv.row({"point", "label", "predicted", "round", "success", "norm", "adversarial_class",
           "improvement_pct", "regions_checked", "qp_calls", "error", "wall_time_ms"});
  for (const auto& per_point : rows) {
    for (const IterateRow& r : per_point) {
      csv.row({std::to_string(r.point), std::to_string(r.label), std::to_string(r.predicted),
               std::to_string(r.round), flag(r.result.success), format_real(success_norm(r.result)),
               r.result.success ? std::to_string(r.result.adversarial_class) : "",
               format_real(r.improvement_pct), std::to_string(r.result.regions_checked),
               std::to_string(r.result.qp_calls), r.error, format_real(r.wall_ms)});
    }
  }
  for (int round = 1; round <= rounds; ++round) {
    std::size_t success = 0;
    double sum = 0.0;
    std::size_t improved = 0;
    double imp_sum = 0.0;
    double imp_max = -std::numeric_limits<double>::infinity();
    for (const auto& per_point : rows) {
      const IterateRow& r = per_point[static_cast<std::size_t>(round - 1)];
      if (r.result.success) {
        ++success;
        sum += r.result.norm;
      }
      if (r.improvement_pct) {
        ++improved;
        imp_sum += *r.improvement_pct;
        imp_max = std::max(imp_max, *r.improvement_pct);
      }
    }
    std::string line = "summary round=" + std::to_string(round) +
                       " points=" + std::to_string(rows.size()) +
                       " success=" + std::to_string(success) + " mean_norm=" +
                       (success ? format_real(sum / static_cast<double>(success)) : "nan");
    if (round > 1) {
      line += " progressive_mean_pct=" +
              (improved ? format_real(imp_sum / static_cast<double>(improved)) : "nan") +
              " progressive_max_pct=" + (improved ? format_real(imp_max) : "nan");
    }
    csv.comment(line);
  }
}

// inspect-net -------------------------------------------------------------

std::string describe_network(const Network& net, const AttackConfig& cfg) {
  std::ostringstream s;
  s << "input_dim: " << net.input_dim() << '\n';
  s << "classes: " << net.num_classes() << '\n';
  s << "hidden_layers: " << net.num_hidden_layers() << '\n';
  s << "hidden_widths: [";
  const auto widths = net.hidden_widths();
  for (std::size_t i = 0; i < widths.size(); ++i) s << (i ? ", " : "") << widths[i];
  s << "]\n";
  const int n = net.hidden_units();
  s << "hidden_units: " << n << '\n';
  std::size_t params = 0;
  for (const Layer& l : net.layers()) params += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  s << "parameters: " << params << '\n';
  s << "region_rows: " << n << '\n';
  s << "region_budget: " << cfg.region_budget() << " (n1=" << cfg.n1 << " n2=" << cfg.n2
    << " n3=" << cfg.n3 << " n4=" << cfg.n4 << ")\n";
  if (n < 63) {
    s << "activation_patterns: " << (std::uint64_t{1} << n) << '\n';
  } else {
    s << "activation_patterns: 2^" << n << '\n';
  }
  return s.str();
}

}  // namespace relu_regions
