#pragma once

// End-to-end drivers behind the CLI: load a dump, build representations,
// then either export the similarity matrix or cluster and emit hint
// positions.  Every output is a pure function of the inputs and flags;
// wall-clock timings are only written when explicitly requested.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "hintscout/dump.hpp"
#include "hintscout/errors.hpp"
#include "hintscout/hint_selection.hpp"
#include "hintscout/kmeans.hpp"
#include "hintscout/layer_repr.hpp"
#include "hintscout/similarity.hpp"

namespace hintscout {

struct PipelineOptions {
  MetricSpec metric;
  int k = 3;
  PositionRule rule = PositionRule::center;
  bool normalize = false;
  int max_iterations = 100;
  std::size_t max_samples = kDefaultSampleBudget;
  bool record_timings = false;
};

struct StageTimings {
  double representation_ms = 0.0;
  double clustering_ms = 0.0;
};

struct SelectResult {
  HintConfig hint_config;
  ClusterAssignment assignment;
  std::size_t layer_count = 0;
  StageTimings timings;
  std::filesystem::path hint_config_path;
  std::filesystem::path assignment_path;
  std::filesystem::path run_record_path;
};

struct SimilarityResult {
  SimilarityMatrix matrix;
  StageTimings timings;
  std::filesystem::path output_path;
};

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return hex.str();
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

struct LoadedDump {
  DumpManifest manifest;
  std::string digest;
  std::vector<LayerRepresentation> reps;
};

inline LoadedDump load_representations(const std::filesystem::path& manifest_path, const PipelineOptions& opts) {
  LoadedDump out;
  const std::string text = read_text_file(manifest_path);
  out.digest = sha256_hex(text);
  out.manifest = parse_manifest(text);
  const auto layers = load_dump(out.manifest, manifest_path.parent_path());
  out.reps.resize(layers.size());
  parallel_for(layers.size(), [&](std::size_t i) {
    out.reps[i] = make_representation(layers[i].meta.index, layers[i].blob, opts.normalize, opts.max_samples);
  });
  out.reps = pad_channels(std::move(out.reps));
  return out;
}

}  // namespace detail

inline SimilarityResult run_similarity(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                                       const PipelineOptions& opts) {
  validate(opts.metric);
  SimilarityResult result;
  auto t0 = detail::Clock::now();
  const auto dump = detail::load_representations(manifest_path, opts);
  result.timings.representation_ms = detail::elapsed_ms(t0);

  t0 = detail::Clock::now();
  result.matrix = similarity_matrix(dump.reps, opts.metric);
  result.timings.clustering_ms = detail::elapsed_ms(t0);

  auto doc = similarity_to_json(result.matrix);
  doc["teacher"] = dump.manifest.model_name;
  doc["manifest_sha256"] = dump.digest;
  doc["normalized"] = opts.normalize;
  std::filesystem::create_directories(out_dir);
  result.output_path = out_dir / "similarity.json";
  detail::write_text(result.output_path, doc.dump(2) + "\n");
  return result;
}

inline nlohmann::ordered_json options_to_json(const PipelineOptions& opts) {
  nlohmann::ordered_json j;
  j["metric"] = metric_to_json(opts.metric);
  j["k"] = opts.k;
  j["rule"] = std::string(rule_name(opts.rule));
  j["normalize"] = opts.normalize;
  j["max_iterations"] = opts.max_iterations;
  j["max_samples"] = opts.max_samples;
  return j;
}

inline SelectResult run_select(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                               const PipelineOptions& opts) {
  validate(opts.metric);
  SelectResult result;
  auto t0 = detail::Clock::now();
  const auto dump = detail::load_representations(manifest_path, opts);
  result.timings.representation_ms = detail::elapsed_ms(t0);
  result.layer_count = dump.reps.size();

  ClusterConfig config;
  config.k = opts.k;
  config.metric = opts.metric;
  config.max_iterations = opts.max_iterations;

  t0 = detail::Clock::now();
  result.assignment = kmeans(dump.reps, config);
  result.timings.clustering_ms = detail::elapsed_ms(t0);

  result.hint_config = select_positions(result.assignment, opts.rule);
  result.hint_config.teacher_name = dump.manifest.model_name;

  std::filesystem::create_directories(out_dir);
  result.hint_config_path = out_dir / "hint_config.json";
  result.assignment_path = out_dir / "assignment.json";
  result.run_record_path = out_dir / "run_record.json";

  {
    std::ofstream out(result.hint_config_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + result.hint_config_path.string() + " for writing");
    emit_hint_config(result.hint_config, out);
  }
  detail::write_text(result.assignment_path, assignment_to_json(result.assignment).dump(2) + "\n");

  nlohmann::ordered_json record;
  record["tool_version"] = std::string(kToolVersion);
  record["command"] = "select";
  record["config"] = options_to_json(opts);
  record["manifest"] = {{"path", manifest_path.generic_string()}, {"sha256", dump.digest}};
  record["layer_count"] = result.layer_count;
  record["result"] = {{"positions", result.hint_config.hint_positions},
                      {"cost", result.assignment.cost},
                      {"iterations", result.assignment.iterations_run},
                      {"converged", result.assignment.converged}};
  record["outputs"] = {{"hint_config", result.hint_config_path.filename().string()},
                       {"assignment", result.assignment_path.filename().string()}};
  if (opts.record_timings) {
    record["timings_ms"] = {{"representation", result.timings.representation_ms},
                            {"clustering", result.timings.clustering_ms}};
  }
  detail::write_text(result.run_record_path, record.dump(2) + "\n");
  return result;
}

}  // namespace hintscout
