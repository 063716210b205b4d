#include "probekit/study.hpp"

#include <algorithm>

#include "parallel.hpp"
#include "probekit/dump_io.hpp"
#include "probekit/errors.hpp"
#include "probekit/metrics.hpp"
#include "probekit/rng.hpp"

namespace fs = std::filesystem;

namespace probekit {

namespace {

const LinearProbe& probe_for(const std::map<CellKey, LinearProbe>& probes, const CellKey& key) {
  auto it = probes.find(key);
  if (it == probes.end()) {
    throw ValidationError("no probe for policy cell " + key.layer_id + " step " +
                          std::to_string(key.step));
  }
  return it->second;
}

// Mean of the policy layers' outputs at one step, in label space.
LabelMap fixture_output(const std::vector<std::pair<const LinearProbe*, ActivationTensor>>& cells,
                        ProbeTask task, std::size_t h, std::size_t w, const std::string& id) {
  RealTensor sum;
  for (const auto& [probe, act] : cells) {
    RealTensor out = task == ProbeTask::classifier
                         ? probe_forward_classifier(*probe, act, h, w).probabilities.to_real()
                         : probe_forward_regressor(*probe, act, h, w).to_real();
    if (sum.data.empty()) {
      sum = std::move(out);
    } else {
      for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += out.data[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(cells.size());
  for (double& v : sum.data) v *= inv;
  if (task == ProbeTask::classifier) return mask_from_probabilities(sum, id);
  return label_from_real(LabelKind::depth_map, sum, id);
}

}  // namespace

std::string_view to_string(StudyMode m) { return m == StudyMode::fixture ? "fixture" : "real"; }

StudyMode study_mode_from_string(std::string_view s) {
  if (s == "fixture") return StudyMode::fixture;
  if (s == "real") return StudyMode::real;
  throw ValidationError("unknown study mode '" + std::string(s) + "'");
}

std::filesystem::path intervened_dump_path(const std::filesystem::path& dir,
                                           const std::string& sample_id, int variant,
                                           const std::string& layer_id, int step) {
  return dir / (sample_id + ".v" + std::to_string(variant)) /
         (layer_id + "__t" + std::to_string(step) + ".apkd");
}

std::filesystem::path resumed_label_path(const std::filesystem::path& dir,
                                         const std::string& sample_id, int variant,
                                         LabelKind kind) {
  return dir / (sample_id + ".v" + std::to_string(variant) + "." + std::string(to_string(kind)) +
                ".apkd");
}

StudyReport run_intervention_study(const Dataset& data,
                                   const std::map<CellKey, LinearProbe>& probes,
                                   const StudyOptions& options) {
  const InterventionSpec& spec = options.spec;
  const ProbeTask task = spec.task;
  const LabelKind kind = target_kind(task);

  StudyReport report;
  report.spec = spec;
  report.n_variants = options.n_variants;
  if (options.model_tag) {
    report.model_tag = *options.model_tag;
  } else {
    const auto tags = data.model_tags();
    if (tags.size() != 1) throw ValidationError("study dataset must carry exactly one model tag");
    report.model_tag = tags.front();
  }

  const auto test_ids = data.sample_ids(Split::test);
  if (options.n_variants == 0 || test_ids.empty()) return report;
  if (spec.layer_policy.empty() || spec.step_policy.empty()) {
    throw ValidationError("intervention policy selects no (layer, step) cell");
  }
  for (int s : spec.step_policy) {
    if (s < 1 || s > data.total_steps()) {
      throw ValidationError("policy step " + std::to_string(s) + " outside 1.." +
                            std::to_string(data.total_steps()));
    }
  }
  const int final_step = *std::max_element(spec.step_policy.begin(), spec.step_policy.end());
  for (const auto& l : spec.layer_policy) {
    for (int s : spec.step_policy) {
      const LinearProbe& p = probe_for(probes, {l, s, report.model_tag});
      if (p.task != task) throw ValidationError("probe for " + l + " has the wrong task");
    }
  }
  if (options.output_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*options.output_dir, ec);
    if (ec) throw IoError("cannot create intervention output directory: " + ec.message());
  }

  const std::size_t nv = options.n_variants;
  bool real = options.resumed_dir.has_value();
  for (std::size_t si = 0; real && si < test_ids.size(); ++si) {
    for (std::size_t k = 0; k < nv; ++k) {
      if (!std::filesystem::exists(
              resumed_label_path(*options.resumed_dir, test_ids[si], static_cast<int>(k), kind))) {
        real = false;
        break;
      }
    }
  }
  report.mode = real ? StudyMode::real : StudyMode::fixture;

  std::vector<StudyRecord> records(test_ids.size() * nv);
  detail::parallel_for(test_ids.size(), options.workers, [&](std::size_t si) {
    const std::string& id = test_ids[si];
    if (!data.has_label(id, kind)) {
      throw ValidationError("sample '" + id + "' has no " + std::string(to_string(kind)) + " label");
    }
    const LabelMap original = data.label(id, kind);
    for (std::size_t k = 0; k < nv; ++k) {
      StudyRecord& rec = records[si * nv + k];
      rec.sample_id = id;
      rec.variant = static_cast<int>(k);
      const std::uint64_t vseed = derive_seed(derive_seed(spec.seed, id), k);

      std::optional<LabelMap> target;
      if (task == ProbeTask::classifier) {
        MaskTarget mt = draw_mask_target(original, vseed);
        rec.translation = mt.translation;
        rec.attempts = mt.attempts;
        rec.degenerate = mt.degenerate;
        target = std::move(mt.mask);
      } else {
        rec.translation = sample_translation(vseed);
        target = translate_depth(original, rec.translation);
      }

      InterventionSpec stamped = spec;
      stamped.target_sample_id = id;
      stamped.translation = rec.translation;
      stamped.variant = rec.variant;
      const std::string stamp = intervention_spec_to_json(stamped);

      std::vector<std::pair<const LinearProbe*, ActivationTensor>> final_cells;
      double loss_sum = 0.0;
      std::size_t n_cells = 0;
      for (const auto& l : spec.layer_policy) {
        for (int s : spec.step_policy) {
          const CellKey key{l, s, report.model_tag};
          const LinearProbe& probe = probe_for(probes, key);
          InterventionResult r =
              intervene_activation(data.activation(id, key), probe, *target, spec.options);
          rec.aborted = rec.aborted || r.aborted;
          loss_sum += r.loss_trace.back();
          ++n_cells;
          DumpMeta meta = r.activation.meta();
          meta.intervention_json = stamp;
          ActivationTensor act(r.activation.shape(),
                               std::vector<float>(r.activation.data().begin(), r.activation.data().end()),
                               std::move(meta));
          if (options.output_dir) {
            const fs::path path = intervened_dump_path(*options.output_dir, id, rec.variant, l, s);
            std::error_code ec;
            fs::create_directories(path.parent_path(), ec);
            if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
            write_dump(act, path);
          }
          if (s == final_step) final_cells.emplace_back(&probe, std::move(act));
        }
      }
      rec.final_loss = loss_sum / static_cast<double>(n_cells);

      const LabelMap output =
          real ? read_label(resumed_label_path(*options.resumed_dir, id, rec.variant, kind))
               : fixture_output(final_cells, task, original.height(), original.width(), id);
      if (output.kind() != kind || output.sample_id() != id) {
        throw ValidationError("resumed label for '" + id + "' does not match the study");
      }
      const InterventionEffect e = evaluate_intervention(*target, output, original);
      rec.effect = e.effect;
      rec.null_baseline = e.null_baseline;
    }
  });

  std::vector<double> effects, nulls;
  for (const auto& rec : records) {
    if (rec.degenerate) {
      ++report.n_degenerate;
    } else {
      effects.push_back(rec.effect);
      nulls.push_back(rec.null_baseline);
    }
  }
  if (!effects.empty()) {
    report.median_effect = median(effects);
    report.median_null = median(nulls);
  }
  report.records = std::move(records);
  return report;
}

}  // namespace probekit
