#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sshlab {

enum class Role { Train, Validation, Test, Sweep };

std::string to_string(Role role);
Role role_from_string(const std::string& name);

// One input image: column i holds the squared moduli of the i-th eigenstate
// (ascending energy) of the open chain; label is the winding number of the
// periodic chain with the same parameters.
struct EigenSample {
  Eigen::MatrixXd pixels;
  int label = 0;
  double v = 0.0;
  double W = 0.0;
  int realization = 0;
};

struct Stratum {
  double W = 0.0;
  int count = 0;
};

struct DatasetManifest {
  Role role = Role::Train;
  int n_cells = 16;
  double w = 1.0;
  std::vector<Stratum> strata;
  double v_offset = 0.001;
  std::optional<std::pair<double, double>> excluded_v_band;
  std::uint64_t master_seed = 0;
  std::string tensor_file;
  int k_points = 256;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<EigenSample> samples;

  [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
  [[nodiscard]] int rows() const noexcept;
  [[nodiscard]] int cols() const noexcept;
};

// Per-role v offset and allowed v/w range.
double role_offset(Role role);
std::optional<std::pair<double, double>> role_excluded_band(Role role);

// Evenly spaced points over the allowed union of intervals inside (0, 2 w),
// split between intervals proportionally to their length; the first point
// of every interval sits at lower end + offset.
std::vector<double> role_v_grid(Role role, int count, double w = 1.0);

struct GenerationPlan {
  Role role = Role::Train;
  int n_cells = 16;
  int n_clean = 5000;
  std::vector<Stratum> disordered;
  std::uint64_t master_seed = 0;
  double w = 1.0;
  int k_points = 256;

  // Sample counts from the published data-set table.
  static GenerationPlan defaults(Role role, bool with_disorder = true);
};

// Largest disorder amplitude that may inherit the clean label in training
// and validation data.
inline constexpr double kPerturbativeDisorderLimit = 0.05;

Dataset generate_dataset(const GenerationPlan& plan, unsigned threads = 0);

// One open-chain sample with its periodic winding label.
EigenSample make_sample(int n_cells, double v, double w, double W, std::optional<std::uint64_t> seed,
                        int realization, int k_points);

// bins x rows x cols channel-major tensor; channel b is 1 where pixel >= b / bins.
std::vector<double> thermometer_encode(const Eigen::MatrixXd& pixels, int bins);
// Midpoint of the highest filled bin for each pixel.
Eigen::MatrixXd thermometer_decode(const std::vector<double>& encoded, int bins, int rows, int cols);

// Tensor file layout: "SSHD", u16 version, u16 flags, u32 count, u32 rows,
// u32 cols, per sample rows*cols f64 (row-major) and one label byte, then a
// CRC32 of everything before it. The manifest is a JSON sidecar at
// <path>.json.
inline constexpr std::uint16_t kDatasetVersion = 1;

std::vector<std::uint8_t> encode_tensors(const std::vector<EigenSample>& samples, int rows, int cols);
std::vector<EigenSample> decode_tensors(std::span<const std::uint8_t> bytes);

std::string manifest_to_json(const DatasetManifest& manifest, const std::vector<EigenSample>& samples);
// Restores the manifest and per-sample metadata (v, W, realization) into samples.
DatasetManifest manifest_from_json(const std::string& text, std::vector<EigenSample>* samples = nullptr);

std::filesystem::path manifest_path(const std::filesystem::path& tensor_path);
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace sshlab
