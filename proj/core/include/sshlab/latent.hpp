#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "sshlab/cnn.hpp"

namespace sshlab {

enum class LayerTag { Conv1, Conv2, Conv3, Gap };

std::string to_string(LayerTag tag);
LayerTag layer_tag_from_string(const std::string& name);

struct SampleMeta {
  double v = 0.0;
  double W = 0.0;
  int label = 0;
};

// One row per input, in input order.
struct ActivationMatrix {
  LayerTag tag = LayerTag::Gap;
  Eigen::MatrixXd values;
  std::vector<SampleMeta> meta;
};

// Number of columns a layer tag yields for an architecture.
int activation_width(const Architecture& arch, LayerTag tag);

ActivationMatrix capture(const CnnModel& model, std::span<const Image> inputs, std::span<const SampleMeta> meta,
                         LayerTag tag, unsigned threads = 1);

struct PcaModel {
  Eigen::RowVectorXd mean;
  Eigen::MatrixXd components;  // n_components x cols, orthonormal rows
  Eigen::VectorXd eigenvalues;  // descending, >= 0
  double total_variance = 0.0;
};

// Covariance (divisor rows - 1) eigendecomposition. When cols > rows the
// equivalent rows x rows Gram problem is solved instead.
PcaModel pca_fit(const Eigen::MatrixXd& X, int n_components);
Eigen::MatrixXd pca_project(const PcaModel& model, const Eigen::MatrixXd& X);

// Mean silhouette coefficient with Euclidean distance.
double cluster_separation(const Eigen::MatrixXd& points, std::span<const int> labels);

// Header pc1,pc2,v,W,label,stratum; stratum is the index of the row's W among
// the distinct W values in ascending order.
std::string projection_to_csv(const Eigen::MatrixXd& projected, std::span<const SampleMeta> meta);

}  // namespace sshlab
