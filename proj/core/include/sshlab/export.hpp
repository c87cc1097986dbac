#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sshlab/topology.hpp"

namespace sshlab {

// Header v_over_w,W_over_w,nu_mean; rows run over W, then v.
std::string phase_diagram_to_csv(const PhaseDiagram& diagram);

// P5 heatmap, one row per W, pixel = round(255 (1 - nu_mean)). Undefined
// cells are drawn mid-grey (128).
std::vector<std::uint8_t> phase_diagram_to_pgm(const PhaseDiagram& diagram);

// Plain numeric matrix, one line per row, %.17g.
std::string matrix_to_csv(const Eigen::MatrixXd& m);

// P5 image of a matrix scaled linearly from its own min..max to 0..255.
std::vector<std::uint8_t> matrix_to_pgm(const Eigen::MatrixXd& m);

void write_phase_diagram(const std::filesystem::path& csv_path, const PhaseDiagram& diagram, bool with_pgm);

}  // namespace sshlab
