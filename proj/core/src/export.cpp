#include "sshlab/export.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sshlab/binary_io.hpp"
#include "sshlab/errors.hpp"

namespace sshlab {

namespace {

std::vector<std::uint8_t> pgm(int width, int height, const std::vector<std::uint8_t>& pixels) {
  const std::string header = fmt::format("P5\n{} {}\n255\n", width, height);
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

}  // namespace

std::string phase_diagram_to_csv(const PhaseDiagram& d) {
  if (d.nu_mean.size() != d.v_grid.size() * d.W_grid.size()) throw ShapeError("diagram is not reduced");
  std::string out = "v_over_w,W_over_w,nu_mean\n";
  for (std::size_t iW = 0; iW < d.W_grid.size(); ++iW) {
    for (std::size_t iv = 0; iv < d.v_grid.size(); ++iv) {
      out += fmt::format("{:.17g},{:.17g},{:.17g}\n", d.v_grid[iv] / d.w, d.W_grid[iW] / d.w, d.mean(iW, iv));
    }
  }
  return out;
}

std::vector<std::uint8_t> phase_diagram_to_pgm(const PhaseDiagram& d) {
  std::vector<std::uint8_t> pixels;
  pixels.reserve(d.nu_mean.size());
  for (double nu : d.nu_mean) {
    pixels.push_back(std::isnan(nu) ? 128
                                    : static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - std::clamp(nu, 0.0, 1.0)))));
  }
  return pgm(static_cast<int>(d.v_grid.size()), static_cast<int>(d.W_grid.size()), pixels);
}

std::string matrix_to_csv(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += fmt::format("{:.17g}", m(r, c));
    }
    out += '\n';
  }
  return out;
}

std::vector<std::uint8_t> matrix_to_pgm(const Eigen::MatrixXd& m) {
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(m.size()), 0);
  if (m.size() > 0) {
    const double lo = m.minCoeff();
    const double span = m.maxCoeff() - lo;
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        pixels[i++] = span > 0 ? static_cast<std::uint8_t>(std::lround(255.0 * (m(r, c) - lo) / span)) : 0;
      }
    }
  }
  return pgm(static_cast<int>(m.cols()), static_cast<int>(m.rows()), pixels);
}

void write_phase_diagram(const std::filesystem::path& csv_path, const PhaseDiagram& diagram, bool with_pgm) {
  write_text_file(csv_path, phase_diagram_to_csv(diagram));
  if (with_pgm) {
    auto pgm_path = csv_path;
    pgm_path.replace_extension(".pgm");
    write_file(pgm_path, phase_diagram_to_pgm(diagram));
  }
}

}  // namespace sshlab
