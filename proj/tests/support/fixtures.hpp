#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hintscout/dump.hpp"
#include "hintscout/tensor_blob.hpp"

namespace hintscout::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("hintscout-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Writes one blob per layer plus a manifest; returns the manifest path.
inline std::filesystem::path write_dump(const std::filesystem::path& dir, const std::string& model,
                                        const std::vector<TensorBlob>& blobs) {
  DumpManifest m;
  m.model_name = model;
  m.dataset_name = "synthetic";
  m.sample_count = blobs.front().shape[0];
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    LayerEntry e;
    e.index = static_cast<int>(i) + 1;
    e.name = "block" + std::to_string(i + 1);
    e.file = "layer_" + std::to_string(i + 1) + ".hnt";
    e.channels = blobs[i].shape[1];
    write_blob_file(blobs[i], dir / e.file);
    m.layers.push_back(e);
  }
  const auto path = dir / "manifest.json";
  std::ofstream(path, std::ios::binary) << manifest_to_json(m);
  return path;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
}

inline TensorBlob blob_from_matrix(const Eigen::MatrixXd& m) {
  TensorBlob t{{static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())}, {}};
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.data.push_back(static_cast<float>(m(i, j)));
  return t;
}

}  // namespace hintscout::testing
