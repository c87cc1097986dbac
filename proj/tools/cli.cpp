#include "cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sshlab/binary_io.hpp"
#include "sshlab/errors.hpp"
#include "sshlab/explain.hpp"
#include "sshlab/export.hpp"
#include "sshlab/latent.hpp"
#include "sshlab/log.hpp"
#include "sshlab/parallel.hpp"
#include "sshlab/rng.hpp"
#include "sshlab/ssh.hpp"

namespace sshlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw InvalidArgument("not a number: '" + item + "'");
    out.push_back(value);
  }
  return out;
}

std::array<int, kConvLayers> parse_widths(const std::string& text) {
  const auto values = parse_list(text);
  if (values.size() != kConvLayers) throw InvalidArgument("--widths needs three comma-separated integers");
  std::array<int, kConvLayers> out{};
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (values[i] < 1 || values[i] != std::floor(values[i])) throw InvalidArgument("widths must be positive integers");
    out[i] = static_cast<int>(values[i]);
  }
  return out;
}

namespace {

struct Common {
  std::string out;
  unsigned threads = 0;
  std::string config;
  std::string log_level = "warn";
};

struct GridOptions {
  int cells = 16;
  double v_min = 0.0;
  double v_max = 2.0;
  int v_points = 50;
  double W_min = 0.0;
  double W_max = 5.0;
  int W_points = 50;
  int nr = 5;
  std::uint64_t seed = 0;
  int k_points = kDefaultSweepKPoints;

  [[nodiscard]] SweepGrid grid() const {
    if (v_points < 1 || W_points < 1) throw InvalidArgument("grids need at least one point");
    SweepGrid g;
    g.v_grid = linspace(v_min, v_max, static_cast<std::size_t>(v_points));
    g.W_grid = linspace(W_min, W_max, static_cast<std::size_t>(W_points));
    g.n_realizations = nr;
    g.n_cells = cells;
    g.master_seed = seed;
    return g;
  }
};

struct TrainOptions {
  std::string widths = "4,8,8";
  double lr = TrainConfig{}.lr;
  double momentum = TrainConfig{}.momentum;
  double weight_decay = TrainConfig{}.weight_decay;
  int batch = TrainConfig{}.batch_size;
  int epochs = TrainConfig{}.max_epochs;
  int patience = TrainConfig{}.patience;
  int warmup = TrainConfig{}.warmup_epochs;
  bool published = false;
  std::vector<CLI::Option*> rate_options;

  [[nodiscard]] TrainConfig config(std::uint64_t seed) const {
    TrainConfig c;
    if (published) c = TrainConfig::published();
    auto given = [&](std::size_t i) { return rate_options[i]->count() > 0; };
    if (!published || given(0)) c.lr = lr;
    if (!published || given(1)) c.momentum = momentum;
    if (!published || given(2)) c.weight_decay = weight_decay;
    c.batch_size = batch;
    c.max_epochs = epochs;
    c.patience = patience;
    c.warmup_epochs = warmup;
    c.seed = seed;
    c.validate();
    return c;
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out", c.out, "Run directory for every output")->required();
  app->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
  app->add_option("--config", c.config, "JSON file with option values");
  app->add_option("--log-level", c.log_level, "trace, debug, info, warn, error or off");
}

void add_grid(CLI::App* app, GridOptions& g) {
  app->add_option("--cells", g.cells, "Unit cells N");
  app->add_option("--v-min", g.v_min);
  app->add_option("--v-max", g.v_max);
  app->add_option("--v-grid", g.v_points, "Number of v/w points");
  app->add_option("--w-min", g.W_min, "Smallest disorder W/w");
  app->add_option("--w-max", g.W_max, "Largest disorder W/w");
  app->add_option("--w-grid", g.W_points, "Number of W/w points");
  app->add_option("--nr", g.nr, "Disorder realizations per cell");
  app->add_option("--seed", g.seed, "Master seed of the disorder realizations");
  app->add_option("--k-points", g.k_points, "Brillouin-zone points of the winding integral");
}

void add_train(CLI::App* app, TrainOptions& t) {
  app->add_option("--widths", t.widths, "Conv channel widths");
  t.rate_options.push_back(app->add_option("--lr", t.lr));
  t.rate_options.push_back(app->add_option("--momentum", t.momentum));
  t.rate_options.push_back(app->add_option("--weight-decay", t.weight_decay));
  app->add_option("--batch", t.batch);
  app->add_option("--epochs", t.epochs, "Maximum epochs");
  app->add_option("--patience", t.patience);
  app->add_option("--warmup", t.warmup);
  app->add_flag("--published", t.published, "Start from the published lr / momentum / weight decay");
}

std::string option_key(const CLI::Option* opt) {
  std::string name = opt->get_single_name();
  while (!name.empty() && name.front() == '-') name.erase(name.begin());
  return name;
}

std::string env_name(const std::string& key) {
  std::string out = "SSHLAB_";
  for (char c : key) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string json_scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) return fmt::format("{:.17g}", v.get<double>());
  throw FormatError("config values must be scalars");
}

// Fills options absent from the command line and the environment from a
// JSON config: keys may sit at top level or under the command name.
void merge_config(CLI::App* sub, const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("config {}: {}", path.string(), e.what()));
  }
  if (!doc.is_object()) throw FormatError("config must be a JSON object");
  const json& section = doc.contains(sub->get_name()) && doc[sub->get_name()].is_object() ? doc[sub->get_name()] : doc;
  for (CLI::Option* opt : sub->get_options()) {
    const std::string key = option_key(opt);
    if (key == "help" || key == "config" || opt->count() > 0 || !section.contains(key)) continue;
    opt->add_result(json_scalar(section[key]));
    opt->run_callback();
  }
}

json snapshot(CLI::App* sub) {
  json opts = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string key = option_key(opt);
    if (key == "help" || key == "config") continue;
    if (opt->get_expected_min() == 0) {
      opts[key] = opt->count() > 0 && opt->as<bool>();
    } else if (opt->count() > 0) {
      opts[key] = opt->results().back();
    } else {
      opts[key] = opt->get_default_str();
    }
  }
  json doc;
  doc["command"] = sub->get_name();
  doc[sub->get_name()] = opts;
  return doc;
}

void write_json(const fs::path& path, const json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

CnnModel load_model(const std::string& path) {
  if (path.empty()) throw InvalidArgument("--model is required");
  return load_checkpoint(path);
}

Dataset load_data(const std::string& path, const char* flag) {
  if (path.empty()) throw InvalidArgument(fmt::format("{} is required", flag));
  return read_dataset(path);
}

std::vector<std::size_t> parse_indices(const std::string& text, std::size_t limit) {
  std::vector<std::size_t> out;
  for (double x : parse_list(text)) {
    if (x < 0 || x != std::floor(x) || x >= static_cast<double>(limit)) {
      throw RangeError(fmt::format("sample index {} out of range", x));
    }
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

void print(const std::string& line) { std::fputs((line + "\n").c_str(), stdout); }

// ---- commands --------------------------------------------------------------

struct GenerateOptions {
  std::string role = "train";
  int cells = 16;
  std::string plan = "default";
  int n_clean = 0;
  std::uint64_t seed = 0;
  int k_points = kDefaultSweepKPoints;
};

void run_generate(const GenerateOptions& o, const Common& c) {
  const Role role = role_from_string(o.role);
  if (o.plan != "default" && o.plan != "clean") throw InvalidArgument("--plan must be default or clean");
  GenerationPlan plan = GenerationPlan::defaults(role, o.plan == "default");
  plan.n_cells = o.cells;
  plan.master_seed = o.seed;
  plan.k_points = o.k_points;
  if (o.n_clean > 0) plan.n_clean = o.n_clean;
  const Dataset ds = generate_dataset(plan, c.threads);
  const fs::path path = fs::path(c.out) / (to_string(role) + ".sshd");
  write_dataset(path, ds);
  print(fmt::format("wrote {} ({} samples)", path.string(), ds.size()));
}

struct LabelOptions {
  GridOptions grid{.v_points = 100, .W_points = 1, .nr = 1};
  bool pgm = false;
};

void run_label(const LabelOptions& o, const Common& c) {
  const PhaseDiagram d = label_phase_diagram(o.grid.grid(), o.grid.k_points, c.threads);
  const fs::path path = fs::path(c.out) / "phase_diagram.csv";
  write_phase_diagram(path, d, o.pgm);
  print(fmt::format("wrote {}", path.string()));
}

struct TrainCmdOptions {
  std::string train_data;
  std::string val_data;
  std::uint64_t seed = 0;
  TrainOptions train;
};

void run_train(const TrainCmdOptions& o, const Common& c) {
  const Dataset tr = load_data(o.train_data, "--train-data");
  const Dataset va = load_data(o.val_data, "--val-data");
  if (tr.manifest.n_cells != va.manifest.n_cells) throw ShapeError("train and validation sizes differ");
  Architecture arch = Architecture::for_cells(tr.manifest.n_cells);
  arch.widths = parse_widths(o.train.widths);
  const TrainConfig cfg = o.train.config(o.seed);
  const TrainResult r = train(init_model(arch, o.seed), to_images(tr), to_images(va), cfg,
                              [](const EpochRecord& e) {
                                spdlog::info("epoch {}: train {:.5f}/{:.4f} val {:.5f}/{:.4f}", e.epoch, e.train_loss,
                                             e.train_acc, e.val_loss, e.val_acc);
                              },
                              c.threads);
  const fs::path out(c.out);
  save_checkpoint(out / "model.sshw", r.model);
  write_text_file(out / "history.csv", history_to_csv(r.history));
  json summary;
  summary["best_epoch"] = r.best_epoch;
  summary["epochs_run"] = r.history.size();
  summary["early_stopped"] = r.early_stopped;
  if (!r.history.empty()) {
    const auto& best = r.history[static_cast<std::size_t>(std::max(r.best_epoch - 1, 0))];
    summary["val_loss"] = best.val_loss;
    summary["val_acc"] = best.val_acc;
  }
  write_json(out / "summary.json", summary);
  print(fmt::format("trained {} epochs, best epoch {}", r.history.size(), r.best_epoch));
}

struct EvaluateOptions {
  std::string model;
  std::string test_data;
  GridOptions grid;
  bool pgm = false;
};

void run_evaluate(const EvaluateOptions& o, const Common& c) {
  const CnnModel m = load_model(o.model);
  const fs::path out(c.out);
  json metrics;
  if (!o.test_data.empty()) {
    const LabeledImages test = to_images(read_dataset(o.test_data));
    const Evaluation e = evaluate(m, test.inputs, test.labels, c.threads);
    metrics["test_loss"] = e.loss;
    metrics["test_accuracy"] = e.accuracy;
  }
  SweepGrid grid = o.grid.grid();
  if (grid.n_cells * 2 != m.arch.height) throw ShapeError("--cells does not match the model input size");
  const PhaseDiagram target = label_phase_diagram(grid, o.grid.k_points, c.threads);
  const PhaseDiagram predicted = predict_phase_diagram(m, grid, c.threads);
  const double err = rmse(target, predicted);
  metrics["rmse"] = err;
  metrics["ood_accuracy"] = ood_accuracy(target, predicted);
  metrics["class"] = to_string(err < kWellRmseThreshold ? Generalization::Well : Generalization::Poor);
  write_phase_diagram(out / "target.csv", target, o.pgm);
  write_phase_diagram(out / "predicted.csv", predicted, o.pgm);
  write_json(out / "metrics.json", metrics);
  print(metrics.dump());
}

struct PhaseOptions {
  std::string model;
  GridOptions grid;
  bool pgm = false;
};

void run_phase(const PhaseOptions& o, const Common& c) {
  const CnnModel m = load_model(o.model);
  if (o.grid.cells * 2 != m.arch.height) throw ShapeError("--cells does not match the model input size");
  const PhaseDiagram predicted = predict_phase_diagram(m, o.grid.grid(), c.threads);
  const fs::path path = fs::path(c.out) / "predicted.csv";
  write_phase_diagram(path, predicted, o.pgm);
  print(fmt::format("wrote {}", path.string()));
}

struct CamOptions {
  std::string model;
  std::string data;
  std::string indices = "0";
  int klass = -1;
  int layer = kConvLayers;
  std::string fragility_v;
  std::string fragility_W;
  int fragility_nr = 25;
  std::uint64_t seed = 0;
};

void run_cam(const CamOptions& o, const Common& c, CamMethod method) {
  const CnnModel m = load_model(o.model);
  const fs::path out(c.out);
  if (!o.data.empty()) {
    const Dataset ds = read_dataset(o.data);
    const auto indices = parse_indices(o.indices, ds.size());
    std::vector<CamMap> maps(indices.size());
    parallel_for(indices.size(), c.threads, [&](std::size_t i) {
      const Image img = image_from_matrix(ds.samples[indices[i]].pixels);
      const int k = o.klass >= 0 ? o.klass : predict(m, img);
      maps[i] = method == CamMethod::Cam ? cam(m, img, k) : grad_cam(m, img, k, o.layer - 1);
    });
    const std::string stem = method == CamMethod::Cam ? "cam" : "gradcam";
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const std::string name = fmt::format("{}_{}", stem, indices[i]);
      write_text_file(out / (name + ".csv"), matrix_to_csv(maps[i].values));
      write_file(out / (name + ".pgm"), matrix_to_pgm(maps[i].values));
    }
    print(fmt::format("wrote {} maps", indices.size()));
  }
  if (!o.fragility_v.empty() || !o.fragility_W.empty()) {
    const auto vs = parse_list(o.fragility_v.empty() ? "0.5" : o.fragility_v);
    const auto Ws = parse_list(o.fragility_W.empty() ? "0" : o.fragility_W);
    const int n_cells = m.arch.height / 2;
    std::vector<double> corr(vs.size() * Ws.size());
    parallel_for(corr.size(), c.threads, [&](std::size_t i) {
      const double v = vs[i % vs.size()];
      const double W = Ws[i / vs.size()];
      const int k = o.klass >= 0 ? o.klass : (v < 1.0 ? 1 : 0);
      corr[i] = cam_fragility(m, n_cells, v, W, o.fragility_nr, o.seed, k);
    });
    std::string csv = "v,W,mean_pairwise_corr\n";
    for (std::size_t i = 0; i < corr.size(); ++i) {
      csv += fmt::format("{:.17g},{:.17g},{:.17g}\n", vs[i % vs.size()], Ws[i / vs.size()], corr[i]);
    }
    write_text_file(out / "fragility.csv", csv);
    print(fmt::format("wrote {}", (out / "fragility.csv").string()));
  }
}

struct PcaOptions {
  std::string model;
  std::string data;
  std::string layer = "gap";
  int components = 2;
  std::string exclude_band;
};

void run_pca(const PcaOptions& o, const Common& c) {
  const CnnModel m = load_model(o.model);
  const Dataset ds = load_data(o.data, "--data");
  const LayerTag tag = layer_tag_from_string(o.layer);
  std::vector<Image> inputs;
  std::vector<SampleMeta> meta;
  const auto band = parse_list(o.exclude_band);
  if (!band.empty() && band.size() != 2) throw InvalidArgument("--exclude-band needs lo,hi");
  for (const auto& s : ds.samples) {
    if (band.size() == 2 && s.v >= band[0] && s.v <= band[1]) continue;
    inputs.push_back(image_from_matrix(s.pixels));
    meta.push_back({s.v, s.W, s.label});
  }
  const ActivationMatrix acts = capture(m, inputs, meta, tag, c.threads);
  const PcaModel pca = pca_fit(acts.values, std::max(o.components, 2));
  const Eigen::MatrixXd xy = pca_project(pca, acts.values);
  const fs::path out(c.out);
  write_text_file(out / fmt::format("pca_{}.csv", o.layer), projection_to_csv(xy, meta));
  json summary;
  summary["layer"] = o.layer;
  summary["rows"] = acts.values.rows();
  summary["columns"] = acts.values.cols();
  summary["eigenvalues"] = std::vector<double>(pca.eigenvalues.data(), pca.eigenvalues.data() + pca.eigenvalues.size());
  summary["total_variance"] = pca.total_variance;
  std::vector<int> labels;
  for (const auto& mm : meta) labels.push_back(mm.label);
  summary["silhouette"] = cluster_separation(xy.leftCols(2), labels);
  write_json(out / fmt::format("pca_{}.json", o.layer), summary);
  print(summary.dump());
}

struct FidelityOptions {
  int cells = 16;
  double v_max = 2.0;
  int v_points = 50;
  double W = 0.0;
  std::uint64_t seed = 0;
};

void run_fidelity(const FidelityOptions& o, const Common& c) {
  const auto grid = linspace(0.0, o.v_max, static_cast<std::size_t>(o.v_points));
  const Eigen::MatrixXd f = fidelity_map(o.cells, grid, o.W, o.seed);
  const fs::path out(c.out);
  std::string csv = "state";
  for (double v : grid) csv += fmt::format(",{:.17g}", v);
  csv += "\n";
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    csv += std::to_string(i);
    for (Eigen::Index j = 0; j < f.cols(); ++j) csv += fmt::format(",{:.17g}", f(i, j));
    csv += "\n";
  }
  write_text_file(out / "fidelity.csv", csv);
  write_file(out / "fidelity.pgm", matrix_to_pgm(f));
  print(fmt::format("wrote {}", (out / "fidelity.csv").string()));
}

struct ToyOptions {
  int n = 500;
  int cells = 16;
  std::uint64_t seed = 0;
  bool train = false;
  bool cam = false;
  TrainOptions train_opts;
};

void run_toy(const ToyOptions& o, const Common& c) {
  const fs::path out(c.out);
  const int n_holdout = std::max(2, (o.n / 5) & ~1);
  const Dataset tr = make_toy_dataset(o.n, o.cells, mix_seed(o.seed, 1));
  const Dataset va = make_toy_dataset(n_holdout, o.cells, mix_seed(o.seed, 2));
  const Dataset te = make_toy_dataset(n_holdout, o.cells, mix_seed(o.seed, 3));
  write_dataset(out / "toy_train.sshd", tr);
  json report;
  report["samples"] = o.n;
  if (!o.train) {
    write_json(out / "report.json", report);
    print(report.dump());
    return;
  }
  Architecture arch = Architecture::for_cells(o.cells);
  arch.widths = parse_widths(o.train_opts.widths);
  const TrainResult r = train(init_model(arch, o.seed), to_images(tr), to_images(va), o.train_opts.config(o.seed), {},
                              c.threads);
  save_checkpoint(out / "model.sshw", r.model);
  write_text_file(out / "history.csv", history_to_csv(r.history));
  const LabeledImages tri = to_images(tr);
  const LabeledImages tei = to_images(te);
  report["train_accuracy"] = evaluate(r.model, tri.inputs, tri.labels, c.threads).accuracy;
  report["test_accuracy"] = evaluate(r.model, tei.inputs, tei.labels, c.threads).accuracy;
  report["best_epoch"] = r.best_epoch;
  report["epochs_run"] = r.history.size();
  if (o.cam) {
    const auto targets = toy_target_pixels(o.cells);
    std::vector<double> align;
    Eigen::MatrixXd mean_map = Eigen::MatrixXd::Zero(2 * o.cells, 2 * o.cells);
    for (std::size_t i = 0; i < tei.size(); ++i) {
      if (tei.labels[i] != 1) continue;
      const CamMap map = cam(r.model, tei.inputs[i], 1);
      align.push_back(cam_peak_alignment(map, targets));
      mean_map += map.values;
    }
    double mean_align = 0.0;
    for (double a : align) mean_align += a;
    mean_align /= static_cast<double>(std::max<std::size_t>(align.size(), 1));
    report["peak_alignment"] = mean_align;
    write_file(out / "cam_mean.pgm", matrix_to_pgm(mean_map));
  }
  write_json(out / "report.json", report);
  print(report.dump());
}

struct SweepOptions {
  int seeds = 20;
  std::uint64_t first_seed = 1;
  std::string plan = "default";
  std::uint64_t master_seed = 0;
  int cells = 16;
  int epochs = 0;
};

void run_sweep(const SweepOptions& o, const Common& c) {
  if (o.seeds < 1) throw InvalidArgument("--seeds must be >= 1");
  SweepSetup setup = make_sweep_setup(o.plan, o.cells, o.master_seed, c.threads);
  SeedSweepPlan plan;
  for (int i = 0; i < o.seeds; ++i) plan.seeds.push_back(o.first_seed + static_cast<std::uint64_t>(i));
  plan.arch = Architecture::for_cells(o.cells);
  plan.config = setup.config;
  if (o.epochs > 0) plan.config.max_epochs = o.epochs;
  plan.train = &setup.train_images;
  plan.validation = &setup.validation_images;
  plan.test = &setup.test_images;
  plan.grid = setup.grid;
  plan.target = &setup.target;
  plan.silhouette_inputs = setup.silhouette_inputs;
  plan.silhouette_meta = setup.silhouette_meta;
  plan.threads = c.threads;
  const SweepReport report = seed_sweep(plan);
  const fs::path out(c.out);
  write_text_file(out / "sweep.csv", report.to_csv());
  write_text_file(out / "table.txt", report.to_table());
  write_phase_diagram(out / "target.csv", setup.target, true);
  print(report.to_table());
}

}  // namespace

SweepSetup make_sweep_setup(const std::string& plan_name, int n_cells, std::uint64_t master_seed, unsigned threads) {
  SweepSetup s;
  GenerationPlan train = GenerationPlan::defaults(Role::Train);
  GenerationPlan val = GenerationPlan::defaults(Role::Validation);
  GenerationPlan test = GenerationPlan::defaults(Role::Test);
  s.config = TrainConfig{};
  s.grid.v_grid = linspace(0.0, 2.0, 50);
  s.grid.W_grid = linspace(0.0, 5.0, 50);
  s.grid.n_realizations = 5;
  if (plan_name == "default") {
    train.n_clean = 1000;
    train.disordered = {{0.01, 200}, {0.05, 200}};
    val.n_clean = 200;
    val.disordered = {{0.01, 50}, {0.05, 50}};
    s.config.max_epochs = 60;
  } else if (plan_name != "published") {
    throw InvalidArgument("--plan must be default or published");
  }
  for (GenerationPlan* p : {&train, &val, &test}) {
    p->n_cells = n_cells;
    p->master_seed = master_seed;
  }
  s.train = generate_dataset(train, threads);
  s.validation = generate_dataset(val, threads);
  s.test = generate_dataset(test, threads);
  s.train_images = to_images(s.train);
  s.validation_images = to_images(s.validation);
  s.test_images = to_images(s.test);
  s.grid.n_cells = n_cells;
  s.grid.master_seed = master_seed;
  s.target = label_phase_diagram(s.grid, kDefaultSweepKPoints, threads);
  for (const auto& sample : s.test.samples) {
    if (sample.W != 0.0 || (sample.v >= 0.9 && sample.v <= 1.1)) continue;
    s.silhouette_inputs.push_back(image_from_matrix(sample.pixels));
    s.silhouette_meta.push_back({sample.v, sample.W, sample.label});
  }
  return s;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"sshlab: SSH eigenstate data, winding labels and CNN auditing"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  std::map<std::string, Common> common;
  auto sub = [&](const std::string& name, const std::string& about) {
    CLI::App* s = app.add_subcommand(name, about);
    add_common(s, common[name]);
    return s;
  };

  GenerateOptions gen;
  CLI::App* gen_cmd = sub("generate", "Build a data set");
  gen_cmd->add_option("--role", gen.role, "train, validation, test or sweep");
  gen_cmd->add_option("--cells", gen.cells);
  gen_cmd->add_option("--plan", gen.plan, "default (with disordered strata) or clean");
  gen_cmd->add_option("--n-clean", gen.n_clean, "Override the clean sample count");
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--k-points", gen.k_points);

  LabelOptions label;
  CLI::App* label_cmd = sub("label", "Winding-number phase diagram");
  add_grid(label_cmd, label.grid);
  label_cmd->add_flag("--pgm", label.pgm, "Also write a PGM heatmap");

  TrainCmdOptions tr;
  CLI::App* train_cmd = sub("train", "Train a classifier");
  train_cmd->add_option("--train-data", tr.train_data);
  train_cmd->add_option("--val-data", tr.val_data);
  train_cmd->add_option("--seed", tr.seed);
  add_train(train_cmd, tr.train);

  EvaluateOptions ev;
  CLI::App* eval_cmd = sub("evaluate", "Test accuracy, RMSE and OOD accuracy of a model");
  eval_cmd->add_option("--model", ev.model);
  eval_cmd->add_option("--test-data", ev.test_data);
  add_grid(eval_cmd, ev.grid);
  eval_cmd->add_flag("--pgm", ev.pgm);

  PhaseOptions ph;
  CLI::App* phase_cmd = sub("phase-diagram", "Predicted phase diagram of a model");
  phase_cmd->add_option("--model", ph.model);
  add_grid(phase_cmd, ph.grid);
  phase_cmd->add_flag("--pgm", ph.pgm);

  CamOptions cam_opts;
  CamOptions gradcam_opts;
  auto add_cam = [](CLI::App* s, CamOptions& o, bool with_layer) {
    s->add_option("--model", o.model);
    s->add_option("--data", o.data);
    s->add_option("--indices", o.indices, "Comma-separated sample indices");
    s->add_option("--class", o.klass, "Explained class (-1 = predicted)");
    if (with_layer) s->add_option("--layer", o.layer, "Conv layer 1..3");
    s->add_option("--fragility-v", o.fragility_v, "v values of the fragility study");
    s->add_option("--fragility-w", o.fragility_W, "W values of the fragility study");
    s->add_option("--fragility-nr", o.fragility_nr);
    s->add_option("--seed", o.seed);
  };
  CLI::App* cam_cmd = sub("cam", "Class activation maps");
  add_cam(cam_cmd, cam_opts, false);
  CLI::App* gradcam_cmd = sub("gradcam", "Gradient-weighted class activation maps");
  add_cam(gradcam_cmd, gradcam_opts, true);

  PcaOptions pca;
  CLI::App* pca_cmd = sub("pca", "Principal components of layer activations");
  pca_cmd->add_option("--model", pca.model);
  pca_cmd->add_option("--data", pca.data);
  pca_cmd->add_option("--layer", pca.layer, "conv1, conv2, conv3 or gap");
  pca_cmd->add_option("--components", pca.components);
  pca_cmd->add_option("--exclude-band", pca.exclude_band, "lo,hi band of v/w to leave out");

  FidelityOptions fid;
  CLI::App* fid_cmd = sub("fidelity", "Eigenstate fidelity against v = 0");
  fid_cmd->add_option("--cells", fid.cells);
  fid_cmd->add_option("--v-max", fid.v_max);
  fid_cmd->add_option("--v-grid", fid.v_points);
  fid_cmd->add_option("--w", fid.W, "Disorder W/w");
  fid_cmd->add_option("--seed", fid.seed);

  ToyOptions toy;
  CLI::App* toy_cmd = sub("toy", "Bright-pixel toy data, training and CAM check");
  toy_cmd->add_option("--n", toy.n, "Training samples");
  toy_cmd->add_option("--cells", toy.cells);
  toy_cmd->add_option("--seed", toy.seed);
  toy_cmd->add_flag("--train", toy.train);
  toy_cmd->add_flag("--cam", toy.cam);
  add_train(toy_cmd, toy.train_opts);

  SweepOptions sw;
  CLI::App* sweep_cmd = sub("sweep", "Train many seeds and classify their generalization");
  sweep_cmd->add_option("--seeds", sw.seeds);
  sweep_cmd->add_option("--first-seed", sw.first_seed);
  sweep_cmd->add_option("--plan", sw.plan, "default (desk scale) or published");
  sweep_cmd->add_option("--master-seed", sw.master_seed);
  sweep_cmd->add_option("--cells", sw.cells);
  sweep_cmd->add_option("--epochs", sw.epochs, "Override the plan's epoch cap");

  const std::map<std::string, std::function<void(const Common&)>> handlers{
      {"generate", [&](const Common& c) { run_generate(gen, c); }},
      {"label", [&](const Common& c) { run_label(label, c); }},
      {"train", [&](const Common& c) { run_train(tr, c); }},
      {"evaluate", [&](const Common& c) { run_evaluate(ev, c); }},
      {"phase-diagram", [&](const Common& c) { run_phase(ph, c); }},
      {"cam", [&](const Common& c) { run_cam(cam_opts, c, CamMethod::Cam); }},
      {"gradcam", [&](const Common& c) { run_cam(gradcam_opts, c, CamMethod::GradCam); }},
      {"pca", [&](const Common& c) { run_pca(pca, c); }},
      {"fidelity", [&](const Common& c) { run_fidelity(fid, c); }},
      {"toy", [&](const Common& c) { run_toy(toy, c); }},
      {"sweep", [&](const Common& c) { run_sweep(sw, c); }},
  };

  for (CLI::App* s : app.get_subcommands({})) {
    for (CLI::Option* opt : s->get_options()) {
      const std::string key = option_key(opt);
      if (key != "help") opt->envname(env_name(key));
    }
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    std::fputs(app.help().c_str(), stdout);
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::fputs(app.help("", CLI::AppFormatMode::All).c_str(), stdout);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: UsageError: %s\n", e.what());
    return 2;
  }

  CLI::App* selected = app.get_subcommands().front();
  const std::string name = selected->get_name();
  try {
    Common& c = common[name];
    if (!c.config.empty()) merge_config(selected, c.config);
    const fs::path out(c.out);
    fs::create_directories(out);
    configure_logging(c.log_level, out / "run.log");
    write_json(out / "config.json", snapshot(selected));
    spdlog::info("sshlab {} -> {}", name, c.out);
    handlers.at(name)(c);
    spdlog::default_logger()->flush();
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %.*s: %s\n", static_cast<int>(e.kind().size()), e.kind().data(), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: IoError: %s\n", e.what());
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "error: UsageError: %s\n", e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: InternalError: %s\n", e.what());
  }
  return 1;
}

}  // namespace sshlab::cli
