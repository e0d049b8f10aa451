#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>

#include "json.hpp"

#include "r2n2/serialization.hpp"
#include "r2n2/timeseries.hpp"

namespace r2n2::testing {

inline const nlohmann::json& oracle() {
  static const nlohmann::json j = io::read_json(std::filesystem::path(R2N2_FIXTURE_DIR) / "oracle.json");
  return j;
}

inline Matrix to_matrix(const nlohmann::json& j) {
  const auto rows = static_cast<Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Index>(j[0].size()) : 0;
  return io::matrix_from_json(j, rows, cols, "fixture");
}

inline Vector to_vector(const nlohmann::json& j) {
  return io::vector_from_json(j, static_cast<Index>(j.size()), "fixture");
}

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

/// Removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("r2n2_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace r2n2::testing
