#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "probekit/dataset.hpp"
#include "probekit/probe.hpp"

namespace probekit {

inline constexpr int kReportFormatVersion = 1;

struct SweepCell {
  std::string layer_id;
  int step = 1;
  ModelTag model_tag = ModelTag::trained;
  ProbeTask task = ProbeTask::classifier;
  // Mean test Dice or RMSE; empty unless status is "ok".
  std::optional<double> value;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t n_excluded = 0;
  // "ok", "missing" (some sample lacks the dump) or "no_valid_samples"
  // (every test sample was excluded from the metric).
  std::string status = "ok";

  bool operator==(const SweepCell&) const = default;
};

struct SweepReport {
  int format_version = kReportFormatVersion;
  TrainConfig config;
  std::vector<SweepCell> cells;

  // Mean value over "ok" cells on decoder-side layers.
  std::optional<double> decoder_side_mean() const;
  bool operator==(const SweepReport&) const = default;
};

struct SweepOptions {
  // nullopt selects every layer / step / tag present in the dataset; an
  // empty list selects nothing.
  std::optional<std::vector<std::string>> layers;
  std::optional<std::vector<int>> steps;
  std::optional<ModelTag> model_tag;
  std::size_t workers = 1;
  // If set, each trained probe is saved here.
  std::optional<std::filesystem::path> checkpoint_dir;
};

struct SweepResult {
  SweepReport report;
  std::map<CellKey, LinearProbe> probes;
  std::vector<std::string> warnings;
};

// Trains one probe per (layer, step, tag) cell on the train split and
// evaluates it on the test split. Cells are independent, all use cfg.seed,
// and are reported in (layer, step, tag) order whatever the worker count.
SweepResult run_probe_sweep(const Dataset& data, ProbeTask task, const TrainConfig& cfg,
                            const SweepOptions& options = {});

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, const CellKey& cell,
                                      ProbeTask task);

struct ControlCell {
  std::string layer_id;
  int step = 1;
  ProbeTask task = ProbeTask::classifier;
  std::optional<double> trained;
  std::optional<double> random;
  // trained - random for Dice, random - trained for RMSE: positive when the
  // trained model carries more signal.
  std::optional<double> gap;

  bool operator==(const ControlCell&) const = default;
};

struct ControlReport {
  int format_version = kReportFormatVersion;
  TrainConfig config;
  ModelTag trained_tag = ModelTag::trained;
  ModelTag random_tag = ModelTag::randomized;
  std::vector<ControlCell> cells;

  bool operator==(const ControlReport&) const = default;
};

struct ControlOptions {
  std::optional<std::vector<std::string>> layers;
  std::optional<std::vector<int>> steps;
  // Default to the single tag found in each dataset.
  std::optional<ModelTag> trained_tag;
  std::optional<ModelTag> random_tag;
  std::size_t workers = 1;
};

// Runs identically configured sweeps on both datasets. Throws
// ValidationError unless both share sample ids, splits and (layer, step) cells.
ControlReport run_control(const Dataset& trained, const Dataset& random, ProbeTask task,
                          const TrainConfig& cfg, const ControlOptions& options = {});

struct EmergencePoint {
  int step = 1;
  std::optional<double> value;  // empty when the step's dumps are missing
  std::size_t n_excluded = 0;

  bool operator==(const EmergencePoint&) const = default;
};

struct EmergenceCurve {
  int format_version = kReportFormatVersion;
  std::string layer_id;
  ModelTag model_tag = ModelTag::trained;
  ProbeTask task = ProbeTask::classifier;
  TrainConfig config;
  std::vector<EmergencePoint> points;  // steps 1..total_steps

  bool operator==(const EmergenceCurve&) const = default;
};

struct EmergenceOptions {
  std::optional<ModelTag> model_tag;
  std::size_t workers = 1;
};

// Per-step metric of the step-t probe against each sample's label (the
// label of the final generated image).
EmergenceCurve emergence_curve(const Dataset& data, const std::string& layer_id, ProbeTask task,
                               const TrainConfig& cfg, const EmergenceOptions& options = {});

// First step from which every later value stays within tolerance of the
// final value; empty if the final value is missing.
std::optional<int> convergence_step(const EmergenceCurve& curve, double tolerance);

}  // namespace probekit
