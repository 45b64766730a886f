#pragma once

// Activation dump: a JSON manifest listing one tensor container per
// candidate layer.
//
//   {
//     "model_name": "resnet110",
//     "dataset_name": "cifar100-train",
//     "sample_count": 10000,
//     "metadata": { ... free-form ... },
//     "layers": [ {"index": 1, "name": "layer1.0", "file": "l001.hnt", "channels": 16}, ... ]
//   }
//
// `file` is resolved relative to the manifest's directory.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hintscout/errors.hpp"
#include "hintscout/tensor_blob.hpp"

namespace hintscout {

struct LayerEntry {
  int index = 0;
  std::string name;
  std::string file;
  std::uint64_t channels = 0;
};

struct DumpManifest {
  std::string model_name;
  std::string dataset_name;
  std::uint64_t sample_count = 0;
  std::vector<LayerEntry> layers;
  nlohmann::json metadata = nlohmann::json::object();
};

struct LoadedLayer {
  LayerEntry meta;
  TensorBlob blob;
};

namespace detail {

template <typename T>
T required_field(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw FormatError(where + ": missing key \"" + key + "\"");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(where + ": key \"" + std::string(key) + "\" has the wrong type");
  }
}

}  // namespace detail

inline DumpManifest parse_manifest(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
  DumpManifest m;
  m.model_name = detail::required_field<std::string>(doc, "model_name", "manifest");
  m.dataset_name = detail::required_field<std::string>(doc, "dataset_name", "manifest");
  const auto n = detail::required_field<std::int64_t>(doc, "sample_count", "manifest");
  if (n <= 0) throw FormatError("manifest: sample_count must be positive");
  m.sample_count = static_cast<std::uint64_t>(n);
  if (doc.contains("metadata")) m.metadata = doc["metadata"];

  if (!doc.contains("layers") || !doc["layers"].is_array()) {
    throw FormatError("manifest: \"layers\" must be an array");
  }
  for (const auto& entry : doc["layers"]) {
    LayerEntry e;
    e.name = detail::required_field<std::string>(entry, "name", "manifest layer");
    const std::string where = "layer '" + e.name + "'";
    e.index = detail::required_field<int>(entry, "index", where);
    e.file = detail::required_field<std::string>(entry, "file", where);
    const auto c = detail::required_field<std::int64_t>(entry, "channels", where);
    if (c <= 0) throw DumpError(where + ": channels must be positive");
    e.channels = static_cast<std::uint64_t>(c);
    m.layers.push_back(std::move(e));
  }
  if (m.layers.empty()) throw FormatError("manifest lists no layers");

  std::stable_sort(m.layers.begin(), m.layers.end(),
                   [](const LayerEntry& a, const LayerEntry& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    if (m.layers[i].index != static_cast<int>(i) + 1) {
      throw DumpError("layer '" + m.layers[i].name + "': index " + std::to_string(m.layers[i].index) +
                      " breaks contiguity (expected " + std::to_string(i + 1) + ")");
    }
  }
  return m;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline DumpManifest read_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_text_file(path));
}

/// Loads every layer blob named by the manifest, in layer_index order, and
/// checks each against the manifest's N and per-layer C.
inline std::vector<LoadedLayer> load_dump(const DumpManifest& manifest, const std::filesystem::path& base_dir) {
  std::vector<LoadedLayer> out;
  out.reserve(manifest.layers.size());
  for (const auto& layer : manifest.layers) {
    const std::string where = "layer " + std::to_string(layer.index) + " '" + layer.name + "'";
    const auto path = base_dir / layer.file;
    if (!std::filesystem::is_regular_file(path)) {
      throw DumpError(where + ": missing file " + path.string());
    }
    TensorBlob blob;
    try {
      blob = read_blob_file(path);
    } catch (const LengthError& e) {
      throw LengthError(where + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(where + ": " + e.what());
    } catch (const IoError& e) {
      throw DumpError(where + ": " + e.what());
    }
    if (blob.shape[0] != manifest.sample_count) {
      throw DumpError(where + ": N mismatch, blob has " + std::to_string(blob.shape[0]) +
                      " samples but manifest says " + std::to_string(manifest.sample_count));
    }
    if (blob.shape[1] != layer.channels) {
      throw DumpError(where + ": C mismatch, blob has " + std::to_string(blob.shape[1]) +
                      " channels but manifest says " + std::to_string(layer.channels));
    }
    out.push_back({layer, std::move(blob)});
  }
  return out;
}

inline std::vector<LoadedLayer> load_dump(const std::filesystem::path& manifest_path) {
  return load_dump(read_manifest(manifest_path), manifest_path.parent_path());
}

/// Serializes a manifest with a fixed key order.  Used by tests and by
/// fixtures that synthesize dumps.
inline std::string manifest_to_json(const DumpManifest& m) {
  nlohmann::ordered_json doc;
  doc["model_name"] = m.model_name;
  doc["dataset_name"] = m.dataset_name;
  doc["sample_count"] = m.sample_count;
  if (!m.metadata.empty()) doc["metadata"] = m.metadata;
  doc["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : m.layers) {
    nlohmann::ordered_json e;
    e["index"] = l.index;
    e["name"] = l.name;
    e["file"] = l.file;
    e["channels"] = l.channels;
    doc["layers"].push_back(std::move(e));
  }
  return doc.dump(2) + "\n";
}

}  // namespace hintscout
