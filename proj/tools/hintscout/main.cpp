// hintscout: pick hint positions for distillation by clustering teacher layers.
//
//   hintscout similarity --manifest dump/manifest.json --out results/
//   hintscout select     --manifest dump/manifest.json --metric r2cca --k 3 --out results/
//   hintscout check-losses
//
// Exit codes: 0 ok, 1 check failure, 2 input format, 3 numerical degeneracy, 64 usage.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hintscout/hintscout.hpp"
#include "hintscout/pipeline.hpp"

namespace {

constexpr int kExitUsage = 64;

struct CommonFlags {
  std::string manifest;
  std::string out = ".";
  std::string metric = "cka-linear";
  double rbf_fraction = 0.5;
  bool normalize = false;
  std::size_t max_samples = hintscout::kDefaultSampleBudget;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--manifest", f.manifest, "Dump manifest (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
  cmd->add_option("--metric", f.metric, "Similarity metric")
      ->check(CLI::IsMember({"cka-linear", "cka-rbf", "r2cca"}))
      ->capture_default_str();
  cmd->add_option("--rbf-fraction", f.rbf_fraction, "RBF bandwidth as a fraction of the median row distance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_flag("--normalize", f.normalize, "Column z-score before clustering");
  cmd->add_option("--max-samples", f.max_samples, "Use at most this many samples (0 = all)")->capture_default_str();
}

hintscout::PipelineOptions to_options(const CommonFlags& f) {
  hintscout::PipelineOptions opts;
  if (f.metric == "cka-linear") opts.metric.kind = hintscout::MetricKind::cka_linear;
  if (f.metric == "cka-rbf") opts.metric.kind = hintscout::MetricKind::cka_rbf;
  if (f.metric == "r2cca") opts.metric.kind = hintscout::MetricKind::r2_cca;
  opts.metric.rbf_bandwidth_fraction = f.rbf_fraction;
  opts.normalize = f.normalize;
  opts.max_samples = f.max_samples;
  return opts;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s;
}

int check_losses() {
  hintscout::SoftenFn impl = [](std::span<const double> z, double t) { return hintscout::soften(z, t); };
  if (const char* hook = std::getenv("HINTSCOUT_TEST_CORRUPT_SOFTEN"); hook != nullptr && std::string(hook) == "1") {
    impl = [](std::span<const double> z, double t) {
      auto p = hintscout::soften(z, t);
      for (auto& v : p) v *= 1.01;
      return p;
    };
  }
  const auto results = hintscout::run_loss_checks(impl);
  int passed = 0;
  const hintscout::CheckResult* first_failure = nullptr;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS  " : "FAIL  ") << r.name;
    if (!r.passed && !r.detail.empty()) std::cout << "  (" << r.detail << ")";
    std::cout << '\n';
    if (r.passed) {
      ++passed;
    } else if (first_failure == nullptr) {
      first_failure = &r;
    }
  }
  std::cout << passed << "/" << results.size() << " checks passed\n";
  if (first_failure != nullptr) {
    std::cerr << "check failed: " << first_failure->name << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Select informative hint positions by clustering teacher layers"};
  app.require_subcommand(1);

  CommonFlags sim_flags;
  auto* sim = app.add_subcommand("similarity", "Export the pairwise layer similarity matrix");
  add_common(sim, sim_flags);

  CommonFlags sel_flags;
  int k = 3;
  int max_iters = 100;
  std::string rule = "center";
  bool record_timings = false;
  auto* sel = app.add_subcommand("select", "Cluster layers and emit hint positions");
  add_common(sel, sel_flags);
  sel->add_option("--k", k, "Number of clusters (hints)")->check(CLI::Range(2, 1 << 20))->capture_default_str();
  sel->add_option("--rule", rule, "Position within each cluster")
      ->check(CLI::IsMember({"center", "last"}))
      ->capture_default_str();
  sel->add_option("--max-iters", max_iters, "k-means iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
  sel->add_flag("--record-timings", record_timings, "Store wall-clock stage timings in the run record");

  auto* chk = app.add_subcommand("check-losses", "Self-test the distillation loss kernels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (chk->parsed()) return check_losses();

    if (sim->parsed()) {
      const auto r = hintscout::run_similarity(sim_flags.manifest, sim_flags.out, to_options(sim_flags));
      std::cout << "layers: " << r.matrix.values.rows() << '\n'
                << "step 1 (representations): " << r.timings.representation_ms << " ms\n"
                << "step 2 (similarity): " << r.timings.clustering_ms << " ms\n"
                << "wrote " << r.output_path.string() << '\n';
      return 0;
    }

    auto opts = to_options(sel_flags);
    opts.k = k;
    opts.rule = hintscout::parse_rule_name(rule);
    opts.max_iterations = max_iters;
    opts.record_timings = record_timings;
    const auto r = hintscout::run_select(sel_flags.manifest, sel_flags.out, opts);
    if (!r.assignment.converged) {
      std::cerr << "warning: k-means stopped at " << r.assignment.iterations_run << " iterations without converging\n";
    }
    std::cout << "layers: " << r.layer_count << '\n'
              << "positions: " << join(r.hint_config.hint_positions) << '\n'
              << "cost: " << r.assignment.cost << " after " << r.assignment.iterations_run << " iterations\n"
              << "step 1 (representations): " << r.timings.representation_ms << " ms\n"
              << "step 2 (clustering): " << r.timings.clustering_ms << " ms\n"
              << "wrote " << r.hint_config_path.string() << '\n';
    return 0;
  } catch (const hintscout::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
