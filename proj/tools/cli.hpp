#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sshlab/cnn.hpp"
#include "sshlab/dataset.hpp"
#include "sshlab/evaluation.hpp"
#include "sshlab/topology.hpp"
#include "sshlab/train.hpp"

namespace sshlab::cli {

// Runs one subcommand. args excludes the program name. Returns the process
// exit code; failures print a single "error: <Kind>: message" line.
int run(const std::vector<std::string>& args);

// Data sets and grid of a seed sweep.
struct SweepSetup {
  Dataset train;
  Dataset validation;
  Dataset test;
  LabeledImages train_images;
  LabeledImages validation_images;
  LabeledImages test_images;
  SweepGrid grid;
  TrainConfig config;
  PhaseDiagram target;
  std::vector<Image> silhouette_inputs;
  std::vector<SampleMeta> silhouette_meta;
};

// plan is "default" (desk scale) or "published" (full data-set table).
SweepSetup make_sweep_setup(const std::string& plan, int n_cells, std::uint64_t master_seed, unsigned threads);

// Parses "a,b,c" into numbers.
std::vector<double> parse_list(const std::string& text);
std::array<int, kConvLayers> parse_widths(const std::string& text);

}  // namespace sshlab::cli
