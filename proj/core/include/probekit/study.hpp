#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "probekit/dataset.hpp"
#include "probekit/intervention.hpp"
#include "probekit/probe.hpp"
#include "probekit/sweep.hpp"

namespace probekit {

// Fixture mode scores the frozen probes' prediction on the intervened
// activations; real mode scores labels produced by resuming generation.
enum class StudyMode { fixture, real };

std::string_view to_string(StudyMode m);
StudyMode study_mode_from_string(std::string_view s);

struct StudyRecord {
  std::string sample_id;
  int variant = 0;
  TranslationSample translation;
  int attempts = 1;
  bool degenerate = false;
  bool aborted = false;
  double effect = 0.0;
  double null_baseline = 0.0;
  // Mean over policy cells of the final intervention loss.
  double final_loss = 0.0;

  bool operator==(const StudyRecord&) const = default;
};

struct StudyReport {
  int format_version = kReportFormatVersion;
  StudyMode mode = StudyMode::fixture;
  InterventionSpec spec;
  ModelTag model_tag = ModelTag::trained;
  std::size_t n_variants = 0;
  std::vector<StudyRecord> records;  // ordered by (sample_id, variant)
  // Medians over non-degenerate records; empty if there are none.
  std::optional<double> median_effect;
  std::optional<double> median_null;
  std::size_t n_degenerate = 0;

  bool operator==(const StudyReport&) const = default;
};

struct StudyOptions {
  InterventionSpec spec;
  std::size_t n_variants = 5;
  // Intervened dumps go to <output_dir>/<sample>.v<k>/<layer>__t<step>.apkd.
  std::optional<std::filesystem::path> output_dir;
  // Real mode reads <resumed_dir>/<sample>.v<k>.<label kind>.apkd; it is
  // used only if that file exists for every record.
  std::optional<std::filesystem::path> resumed_dir;
  std::optional<ModelTag> model_tag;
  std::size_t workers = 1;
};

std::filesystem::path intervened_dump_path(const std::filesystem::path& dir,
                                           const std::string& sample_id, int variant,
                                           const std::string& layer_id, int step);
std::filesystem::path resumed_label_path(const std::filesystem::path& dir,
                                         const std::string& sample_id, int variant,
                                         LabelKind kind);

// For each test sample and variant: draws a modified label (translated mask
// or depth map), intervenes at every (layer, step) of the spec's policy,
// and scores the result with evaluate_intervention. In fixture mode the
// output label is the average of the policy layers' probe outputs at the
// final policy step (probabilities then argmax, or depth values).
StudyReport run_intervention_study(const Dataset& data,
                                   const std::map<CellKey, LinearProbe>& probes,
                                   const StudyOptions& options);

}  // namespace probekit
