#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "sshlab/cnn.hpp"
#include "sshlab/dataset.hpp"

namespace sshlab {

enum class CamMethod { Cam, GradCam };

// Attribution heatmap. coarse is rectifier(sum_k alpha_k A_k) at the
// resolution of the explained layer; values is coarse upsampled to the
// input resolution. Neither is normalized.
struct CamMap {
  Eigen::MatrixXd values;
  Eigen::MatrixXd coarse;
  std::vector<double> alphas;
  int class_index = 0;
  int layer = kConvLayers - 1;
  CamMethod method = CamMethod::Cam;
};

// rectifier(sum_k alpha_k A_k) for the channels of one activation image.
Eigen::MatrixXd weighted_activation_map(const Image& activations, const std::vector<double>& alphas);

// Bilinear resize with corner alignment; identity when shapes already match.
Eigen::MatrixXd upsample_bilinear(const Eigen::MatrixXd& src, int rows, int cols);

// Channel weights are the head weights from GAP unit k to the class logit.
CamMap cam(const CnnModel& model, const Image& input, int class_index);

// Channel weights are the summed spatial gradients of the class logit with
// respect to the activations of `layer` (default: last conv). On a GAP +
// linear head this reproduces the CAM weights exactly.
CamMap grad_cam(const CnnModel& model, const Image& input, int class_index, int layer = kConvLayers - 1);

// Toy data: every pixel U[0, 0.1]; even-indexed samples are "topological"
// (label 1) and carry 1.0 at rows 0 and 2N-1 of columns N-1 and N.
Dataset make_toy_dataset(int n_samples, int n_cells, std::uint64_t seed);
std::set<std::pair<int, int>> toy_target_pixels(int n_cells);

// Share of the |targets| highest map entries (ties by row-major index) that
// fall on targets.
double cam_peak_alignment(const CamMap& map, const std::set<std::pair<int, int>>& targets);

double pearson_correlation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Mean pairwise Pearson correlation of CAM maps of the open chain at (v, W)
// across disorder realizations; low values flag unstable explanations.
double cam_fragility(const CnnModel& model, int n_cells, double v, double W, int n_realizations,
                     std::uint64_t master_seed, int class_index);

}  // namespace sshlab
