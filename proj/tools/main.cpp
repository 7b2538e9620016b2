// relu-regions-attack: minimum-norm adversarial perturbations for fully
// connected ReLU classifiers.
//
//   relu-regions-attack attack         --net net.json --data points.csv [--out report.csv]
//   relu-regions-attack compare-oracle --net net.json --data points.csv
//   relu-regions-attack iterate        --net net.json --data points.csv --rounds 5
//   relu-regions-attack inspect-net    --net net.json

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relu_regions/commands.hpp"
#include "relu_regions/dataset.hpp"
#include "relu_regions/network.hpp"
#include "relu_regions/report.hpp"

namespace rr = relu_regions;

namespace {

constexpr int kExitData = 2;
constexpr int kExitConfig = 3;

struct CommonFlags {
  std::string net_path;
  std::string data_path;
  std::string idx_images;
  std::string idx_labels;
  std::size_t limit = 0;
  std::string out_path;

  int n1 = 10, n2 = 10, n3 = 5, n4 = 3;
  double alpha = 1.5;
  std::uint64_t seed = 0;
  std::string targets;
  std::vector<double> box{0.0, 1.0};
  std::string warm_start = "deepfool";
  std::string warm_file;
  double boundary_tol = 1e-6;
  int deepfool_iters = 50;
  double overshoot = 0.02;
  int refine_iters = 40;
  int workers = 0;
};

void add_data_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--net", f.net_path, "Network JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--data", f.data_path, "Dataset CSV (label,x1,...,xd)")->check(CLI::ExistingFile);
  cmd->add_option("--idx-images", f.idx_images, "IDX3 image file")->check(CLI::ExistingFile);
  cmd->add_option("--idx-labels", f.idx_labels, "IDX1 label file")->check(CLI::ExistingFile);
  cmd->add_option("--limit", f.limit, "Use only the first N points (0 = all)");
  cmd->add_option("-o,--out", f.out_path, "Report path (default: stdout)");

  cmd->add_option("--n1", f.n1, "Working-set size")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--n2", f.n2, "Samples per working-set point")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--n3", f.n3, "Exploration rounds per outer iteration")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--n4", f.n4, "Outer iterations")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--alpha", f.alpha, "Working-set suboptimality factor (> 1)")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Run seed")->capture_default_str();
  cmd->add_option("--targets", f.targets,
                  "auto | all | warm | comma-separated class list");
  cmd->add_option("--box", f.box, "Input box lo,hi")->delimiter(',')->expected(2)->capture_default_str();
  cmd->add_option("--warm-start", f.warm_start, "deepfool | none | file")
      ->check(CLI::IsMember({"deepfool", "none", "file"}))
      ->capture_default_str();
  cmd->add_option("--warm-file", f.warm_file, "Perturbations for --warm-start file, one row per point")
      ->check(CLI::ExistingFile);
  cmd->add_option("--boundary-tol", f.boundary_tol, "Push factor used to validate adversarial points")
      ->capture_default_str();
  cmd->add_option("--deepfool-iters", f.deepfool_iters)->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--overshoot", f.overshoot)->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd->add_option("--refine-iters", f.refine_iters, "Bisection steps onto the boundary")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--workers", f.workers, "Worker threads (default: RELU_REGIONS_WORKERS or 1)");
}

rr::TargetPolicy parse_targets(const std::string& text, std::vector<int>& list) {
  if (text.empty() || text == "auto") return rr::TargetPolicy::automatic;
  if (text == "all") return rr::TargetPolicy::all_classes;
  if (text == "warm") return rr::TargetPolicy::warm_start_class;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const int v = std::stoi(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad target class '" + item + "'");
    list.push_back(v);
  }
  return rr::TargetPolicy::explicit_list;
}

rr::Dataset load_data(const CommonFlags& f) {
  const double lo = f.box.at(0);
  const double hi = f.box.at(1);
  rr::Dataset data;
  if (!f.data_path.empty()) {
    data = rr::load_dataset_csv(f.data_path, lo, hi);
    if (f.limit > 0 && data.points.size() > f.limit) data.points.resize(f.limit);
  } else if (!f.idx_images.empty() && !f.idx_labels.empty()) {
    data = rr::load_idx(f.idx_images, f.idx_labels,
                        f.limit > 0 ? std::optional<std::size_t>(f.limit) : std::nullopt);
    for (std::size_t i = 0; i < data.points.size(); ++i) {
      const auto& x = data.points[i].x;
      if (x.size() > 0 && (x.minCoeff() < lo || x.maxCoeff() > hi)) {
        throw rr::DatasetError("image " + std::to_string(i) + " lies outside the box");
      }
    }
    data.feature_lower = lo;
    data.feature_upper = hi;
  } else {
    throw rr::DatasetError("provide --data or both --idx-images and --idx-labels");
  }
  return data;
}

rr::RunOptions make_run_options(const CommonFlags& f, int dim, rr::TargetPolicy default_targets) {
  rr::RunOptions o;
  o.attack.n1 = f.n1;
  o.attack.n2 = f.n2;
  o.attack.n3 = f.n3;
  o.attack.n4 = f.n4;
  o.attack.alpha = f.alpha;
  o.attack.seed = f.seed;
  o.attack.boundary_tol = f.boundary_tol;
  o.attack.targets = f.targets.empty() ? default_targets
                                       : parse_targets(f.targets, o.attack.explicit_targets);
  o.attack.box = rr::BoxConstraint::uniform(dim, f.box.at(0), f.box.at(1));
  o.attack.validate();
  o.deepfool.max_iters = f.deepfool_iters;
  o.deepfool.overshoot = f.overshoot;
  o.refine_iters = f.refine_iters;
  if (f.warm_start == "none") {
    o.warm_start = rr::WarmStartMode::none;
  } else if (f.warm_start == "file") {
    if (f.warm_file.empty()) throw std::invalid_argument("--warm-start file needs --warm-file");
    o.warm_start = rr::WarmStartMode::file;
    o.warm_deltas = rr::load_perturbations_csv(f.warm_file);
  }
  o.workers = f.workers > 0 ? f.workers : rr::default_workers();
  return o;
}

// Writes to --out or stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw std::runtime_error("cannot write report: " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-norm adversarial perturbations for ReLU networks via linear regions"};
  app.require_subcommand(1);

  CommonFlags attack_flags;
  auto* attack = app.add_subcommand("attack", "DeepFool warm start, then the randomized region search");
  add_data_flags(attack, attack_flags);

  CommonFlags cmp_flags;
  std::string methods = "oracle,rlr-qp,deepfool";
  std::uint64_t oracle_budget = std::uint64_t{1} << 20;
  int oracle_max_units = 20;
  auto* compare = app.add_subcommand("compare-oracle", "Compare attacks against the exact enumeration oracle");
  add_data_flags(compare, cmp_flags);
  compare->add_option("--methods", methods, "Comma-separated subset of oracle,rlr-qp,deepfool")
      ->capture_default_str();
  compare->add_option("--oracle-budget", oracle_budget, "Maximum activation patterns")->capture_default_str();
  compare->add_option("--oracle-max-units", oracle_max_units, "Maximum hidden units")->capture_default_str();

  CommonFlags it_flags;
  int rounds = 5;
  auto* iterate = app.add_subcommand("iterate", "Re-apply the search, warm-started from the previous round");
  add_data_flags(iterate, it_flags);
  iterate->add_option("--rounds", rounds, "Number of applications")->capture_default_str()->check(CLI::PositiveNumber);

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect-net", "Print network dimensions and search budget");
  inspect->add_option("--net", inspect_path, "Network JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (inspect->parsed()) {
      std::cout << rr::describe_network(rr::load_network_file(inspect_path), rr::AttackConfig{});
      return 0;
    }

    CommonFlags& flags = attack->parsed() ? attack_flags : compare->parsed() ? cmp_flags : it_flags;
    const rr::Network net = rr::load_network_file(flags.net_path);
    const rr::Dataset data = load_data(flags);
    rr::RunOptions run;
    try {
      run = make_run_options(flags, net.input_dim(),
                             compare->parsed() ? rr::TargetPolicy::all_classes
                                               : rr::TargetPolicy::automatic);
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitConfig;
    }
    Output out(flags.out_path);

    if (attack->parsed()) {
      rr::write_attack_report(rr::attack_dataset(net, data, run), run, out.stream());
    } else if (compare->parsed()) {
      rr::CompareOptions opts;
      opts.run = run;
      opts.methods.clear();
      std::stringstream ss(methods);
      std::string m;
      while (std::getline(ss, m, ',')) opts.methods.push_back(rr::parse_method(m));
      opts.oracle.budget = oracle_budget;
      opts.oracle.max_hidden_units = oracle_max_units;
      rr::write_compare_report(rr::compare_dataset(net, data, opts), opts, out.stream());
    } else {
      rr::write_iterate_report(rr::iterate_dataset(net, data, run, rounds), run, rounds, out.stream());
    }
  } catch (const rr::BudgetExceededError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
