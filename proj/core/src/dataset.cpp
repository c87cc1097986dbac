#include "sshlab/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sshlab/binary_io.hpp"
#include "sshlab/errors.hpp"
#include "sshlab/parallel.hpp"
#include "sshlab/rng.hpp"
#include "sshlab/ssh.hpp"
#include "sshlab/topology.hpp"

namespace sshlab {

namespace {

using json = nlohmann::json;

constexpr double kBandLow = 0.8;
constexpr double kBandHigh = 1.2;
constexpr double kRangeHigh = 2.0;
constexpr std::size_t kHeaderBytes = 4 + 2 + 2 + 4 + 4 + 4;

std::uint64_t role_tag(Role role) { return static_cast<std::uint64_t>(role) + 1; }

}  // namespace

std::string to_string(Role role) {
  switch (role) {
    case Role::Train: return "train";
    case Role::Validation: return "validation";
    case Role::Test: return "test";
    case Role::Sweep: return "sweep";
  }
  return "unknown";
}

Role role_from_string(const std::string& name) {
  if (name == "train") return Role::Train;
  if (name == "validation" || name == "val") return Role::Validation;
  if (name == "test") return Role::Test;
  if (name == "sweep") return Role::Sweep;
  throw InvalidArgument("unknown dataset role \"" + name + "\"");
}

int Dataset::rows() const noexcept {
  return samples.empty() ? 2 * manifest.n_cells : static_cast<int>(samples.front().pixels.rows());
}

int Dataset::cols() const noexcept {
  return samples.empty() ? 2 * manifest.n_cells : static_cast<int>(samples.front().pixels.cols());
}

double role_offset(Role role) {
  switch (role) {
    case Role::Train: return 0.001;
    case Role::Validation: return 0.002;
    case Role::Test: return 0.003;
    case Role::Sweep: return 0.003;
  }
  return 0.0;
}

std::optional<std::pair<double, double>> role_excluded_band(Role role) {
  if (role == Role::Train || role == Role::Validation) return std::pair{kBandLow, kBandHigh};
  return std::nullopt;
}

std::vector<double> role_v_grid(Role role, int count, double w) {
  if (count < 0) throw InvalidArgument("sample count must be non-negative");
  std::vector<std::pair<double, double>> intervals;
  if (role_excluded_band(role)) {
    intervals = {{0.0, kBandLow}, {kBandHigh, kRangeHigh}};
  } else {
    intervals = {{0.0, kRangeHigh}};
  }
  double total = 0.0;
  for (const auto& [lo, hi] : intervals) total += hi - lo;

  // Largest-remainder split of count between intervals.
  std::vector<int> share(intervals.size(), 0);
  int assigned = 0;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    share[i] = static_cast<int>(std::floor(count * (intervals[i].second - intervals[i].first) / total));
    assigned += share[i];
  }
  for (std::size_t i = 0; assigned < count; i = (i + 1) % intervals.size(), ++assigned) ++share[i];

  const double offset = role_offset(role);
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto [lo, hi] = intervals[i];
    // Shrinking the span by the offset keeps the last point inside the
    // interval and keeps grids of different roles from landing on each other.
    const double step = share[i] > 0 ? (hi - lo - offset) / share[i] : 0.0;
    for (int j = 0; j < share[i]; ++j) grid.push_back(w * (lo + offset + step * j));
  }
  return grid;
}

GenerationPlan GenerationPlan::defaults(Role role, bool with_disorder) {
  GenerationPlan plan;
  plan.role = role;
  switch (role) {
    case Role::Train:
      plan.n_clean = 5000;
      if (with_disorder) plan.disordered = {{0.01, 1000}, {0.05, 1000}};
      break;
    case Role::Validation:
      plan.n_clean = 1000;
      if (with_disorder) plan.disordered = {{0.01, 250}, {0.05, 250}};
      break;
    case Role::Test:
    case Role::Sweep:
      plan.n_clean = 1000;
      break;
  }
  return plan;
}

EigenSample make_sample(int n_cells, double v, double w, double W, std::optional<std::uint64_t> seed,
                        int realization, int k_points) {
  HamiltonianSpec spec;
  spec.n_cells = n_cells;
  spec.v = v;
  spec.w = w;
  spec.disorder_amplitude = W;
  spec.disorder_seed = seed;
  spec.boundary = Boundary::Open;
  EigenSample s;
  s.pixels = squared_moduli(diagonalize(build_hamiltonian(spec).matrix));
  s.label = winding_number(spec, k_points).rounded;
  s.v = v;
  s.W = W;
  s.realization = realization;
  return s;
}

Dataset generate_dataset(const GenerationPlan& plan, unsigned threads) {
  if (plan.n_cells < 2) throw InvalidArgument("n_cells must be >= 2");
  if (plan.n_clean < 0) throw InvalidArgument("n_clean must be non-negative");
  const bool perturbative = plan.role == Role::Train || plan.role == Role::Validation;
  std::vector<Stratum> strata;
  strata.push_back({0.0, plan.n_clean});
  for (const auto& s : plan.disordered) {
    if (!(s.W > 0.0)) throw InvalidArgument("disordered strata need W > 0");
    if (s.count < 0) throw InvalidArgument("stratum count must be non-negative");
    if (perturbative && s.W > kPerturbativeDisorderLimit) {
      throw PolicyError("training/validation disorder W/w=" + std::to_string(s.W / plan.w) +
                        " exceeds the perturbative labeling limit 0.05");
    }
    strata.push_back(s);
  }
  for (const auto& s : strata) {
    if (s.count % 2 != 0) throw InvalidArgument("stratum counts must be even for class balance");
  }

  struct Job {
    std::size_t stratum;
    int index;
    double v;
  };
  std::vector<Job> jobs;
  for (std::size_t si = 0; si < strata.size(); ++si) {
    const auto grid = role_v_grid(plan.role, strata[si].count, plan.w);
    for (int j = 0; j < strata[si].count; ++j) jobs.push_back({si, j, grid[static_cast<std::size_t>(j)]});
  }

  const std::uint64_t base = mix_seed(plan.master_seed, role_tag(plan.role));
  std::vector<EigenSample> samples(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const Job& job = jobs[i];
    const double W = strata[job.stratum].W;
    std::optional<std::uint64_t> seed;
    if (W > 0.0) seed = mix_seed(base, job.stratum, static_cast<std::uint64_t>(job.index));
    EigenSample s = make_sample(plan.n_cells, job.v, plan.w, W, seed, job.index, plan.k_points);
    if (perturbative && W > 0.0) {
      HamiltonianSpec clean;
      clean.n_cells = plan.n_cells;
      clean.v = job.v;
      clean.w = plan.w;
      s.label = winding_number(clean, plan.k_points).rounded;
    }
    samples[i] = std::move(s);
  });

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Pcg32 rng(mix_seed(plan.master_seed, role_tag(plan.role)));
  shuffle(std::span<std::size_t>(order), rng);

  Dataset ds;
  ds.samples.reserve(samples.size());
  for (std::size_t i : order) ds.samples.push_back(std::move(samples[i]));
  ds.manifest.role = plan.role;
  ds.manifest.n_cells = plan.n_cells;
  ds.manifest.w = plan.w;
  ds.manifest.strata = strata;
  ds.manifest.v_offset = role_offset(plan.role);
  ds.manifest.excluded_v_band = role_excluded_band(plan.role);
  ds.manifest.master_seed = plan.master_seed;
  ds.manifest.k_points = plan.k_points;
  return ds;
}

std::vector<double> thermometer_encode(const Eigen::MatrixXd& pixels, int bins) {
  if (bins < 2) throw InvalidArgument("thermometer encoding needs bins >= 2");
  const Eigen::Index rows = pixels.rows();
  const Eigen::Index cols = pixels.cols();
  std::vector<double> out(static_cast<std::size_t>(bins * rows * cols), 0.0);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double p = pixels(r, c);
      if (!(p >= 0.0 && p <= 1.0)) throw RangeError("thermometer input outside [0, 1]");
      for (int b = 0; b < bins; ++b) {
        if (p >= static_cast<double>(b) / bins) {
          out[static_cast<std::size_t>((b * rows + r) * cols + c)] = 1.0;
        }
      }
    }
  }
  return out;
}

Eigen::MatrixXd thermometer_decode(const std::vector<double>& encoded, int bins, int rows, int cols) {
  if (encoded.size() != static_cast<std::size_t>(bins) * rows * cols) {
    throw ShapeError("thermometer tensor size does not match bins x rows x cols");
  }
  Eigen::MatrixXd out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      int filled = 0;
      for (int b = 0; b < bins; ++b) {
        if (encoded[static_cast<std::size_t>((b * rows + r) * cols + c)] != 0.0) filled = b + 1;
      }
      // Filled channels 0..filled-1 place the value in [(filled-1)/bins, filled/bins).
      out(r, c) = (static_cast<double>(filled) - 0.5) / bins;
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_tensors(const std::vector<EigenSample>& samples, int rows, int cols) {
  ByteWriter out;
  out.raw("SSHD");
  out.u16(kDatasetVersion);
  out.u16(0);
  out.u32(static_cast<std::uint32_t>(samples.size()));
  out.u32(static_cast<std::uint32_t>(rows));
  out.u32(static_cast<std::uint32_t>(cols));
  for (const auto& s : samples) {
    if (s.pixels.rows() != rows || s.pixels.cols() != cols) throw ShapeError("sample shape differs from dataset");
    if (s.label < 0 || s.label > 255) throw RangeError("label does not fit in one byte");
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) out.f64(s.pixels(r, c));
    }
    out.u8(static_cast<std::uint8_t>(s.label));
  }
  out.seal();
  return out.bytes();
}

std::vector<EigenSample> decode_tensors(std::span<const std::uint8_t> bytes) {
  ByteReader header(bytes);
  header.expect_magic("SSHD");
  const std::uint16_t version = header.u16();
  if (version != kDatasetVersion) throw FormatError("unsupported dataset version " + std::to_string(version));
  header.u16();
  const std::uint32_t count = header.u32();
  const std::uint32_t rows = header.u32();
  const std::uint32_t cols = header.u32();
  const std::size_t per_sample = 8ULL * rows * cols + 1;
  const std::size_t expected = kHeaderBytes + per_sample * count + 4;
  if (bytes.size() < expected) throw FormatError("truncated dataset file");
  if (bytes.size() > expected) throw FormatError("trailing bytes after dataset payload");
  const auto payload = verify_crc(bytes);

  ByteReader in(payload);
  in.expect_magic("SSHD");
  in.u16();
  in.u16();
  in.u32();
  in.u32();
  in.u32();
  std::vector<EigenSample> samples(count);
  for (auto& s : samples) {
    s.pixels.resize(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) s.pixels(r, c) = in.f64();
    }
    s.label = in.u8();
  }
  return samples;
}

std::string manifest_to_json(const DatasetManifest& m, const std::vector<EigenSample>& samples) {
  json j;
  j["format"] = "sshlab-dataset";
  j["version"] = kDatasetVersion;
  j["role"] = to_string(m.role);
  j["n_cells"] = m.n_cells;
  j["w"] = m.w;
  j["v_offset"] = m.v_offset;
  if (m.excluded_v_band) {
    j["excluded_v_band"] = {m.excluded_v_band->first, m.excluded_v_band->second};
  } else {
    j["excluded_v_band"] = nullptr;
  }
  j["master_seed"] = m.master_seed;
  j["k_points"] = m.k_points;
  j["tensor_file"] = m.tensor_file;
  json strata = json::array();
  for (const auto& s : m.strata) strata.push_back({{"W", s.W}, {"count", s.count}});
  j["strata"] = strata;
  json meta = json::array();
  for (const auto& s : samples) meta.push_back({s.v, s.W, s.realization});
  j["samples"] = meta;
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text, std::vector<EigenSample>* samples) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "sshlab-dataset") throw FormatError("not a dataset manifest");
    if (j.at("version").get<int>() != kDatasetVersion) throw FormatError("unsupported manifest version");
    m.role = role_from_string(j.at("role").get<std::string>());
    m.n_cells = j.at("n_cells").get<int>();
    m.w = j.at("w").get<double>();
    m.v_offset = j.at("v_offset").get<double>();
    if (!j.at("excluded_v_band").is_null()) {
      m.excluded_v_band = std::pair{j["excluded_v_band"][0].get<double>(), j["excluded_v_band"][1].get<double>()};
    }
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    m.k_points = j.at("k_points").get<int>();
    m.tensor_file = j.at("tensor_file").get<std::string>();
    for (const auto& s : j.at("strata")) m.strata.push_back({s.at("W").get<double>(), s.at("count").get<int>()});
    if (samples != nullptr) {
      const auto& meta = j.at("samples");
      if (meta.size() != samples->size()) throw FormatError("manifest sample count differs from tensor file");
      for (std::size_t i = 0; i < meta.size(); ++i) {
        (*samples)[i].v = meta[i][0].get<double>();
        (*samples)[i].W = meta[i][1].get<double>();
        (*samples)[i].realization = meta[i][2].get<int>();
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

std::filesystem::path manifest_path(const std::filesystem::path& tensor_path) {
  auto p = tensor_path;
  p += ".json";
  return p;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  DatasetManifest m = dataset.manifest;
  m.tensor_file = path.filename().string();
  write_file(path, encode_tensors(dataset.samples, dataset.rows(), dataset.cols()));
  write_text_file(manifest_path(path), manifest_to_json(m, dataset.samples));
}

Dataset read_dataset(const std::filesystem::path& path) {
  Dataset ds;
  ds.samples = decode_tensors(read_file(path));
  ds.manifest = manifest_from_json(read_text_file(manifest_path(path)), &ds.samples);
  return ds;
}

}  // namespace sshlab
