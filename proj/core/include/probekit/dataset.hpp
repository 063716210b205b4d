#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "probekit/tensor.hpp"

namespace probekit {

struct CellKey {
  std::string layer_id;
  int step = 1;
  ModelTag model_tag = ModelTag::trained;

  auto operator<=>(const CellKey&) const = default;
};

enum class Split { train, test };

std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

struct SampleRef {
  std::string sample_id;
  Split split = Split::train;
};

// Read access to activations and labels keyed by sample and cell.
// Implementations load on demand; nothing is mutated after construction.
class Dataset {
 public:
  virtual ~Dataset() = default;

  virtual const std::vector<SampleRef>& samples() const = 0;
  virtual int total_steps() const = 0;
  // Union of cells over all samples, sorted.
  virtual std::vector<CellKey> cells() const = 0;
  virtual bool has_activation(const std::string& sample_id, const CellKey& cell) const = 0;
  virtual ActivationTensor activation(const std::string& sample_id, const CellKey& cell) const = 0;
  virtual bool has_label(const std::string& sample_id, LabelKind kind) const = 0;
  virtual LabelMap label(const std::string& sample_id, LabelKind kind) const = 0;

  std::vector<std::string> sample_ids(Split split) const;
  std::vector<ModelTag> model_tags() const;
  std::vector<std::string> layer_ids() const;
};

class InMemoryDataset final : public Dataset {
 public:
  explicit InMemoryDataset(int total_steps) : total_steps_(total_steps) {}

  void add_sample(const std::string& sample_id, Split split);
  void add_activation(ActivationTensor act);
  void add_label(LabelMap label);

  const std::vector<SampleRef>& samples() const override { return samples_; }
  int total_steps() const override { return total_steps_; }
  std::vector<CellKey> cells() const override;
  bool has_activation(const std::string& sample_id, const CellKey& cell) const override;
  ActivationTensor activation(const std::string& sample_id, const CellKey& cell) const override;
  bool has_label(const std::string& sample_id, LabelKind kind) const override;
  LabelMap label(const std::string& sample_id, LabelKind kind) const override;

 private:
  int total_steps_;
  std::vector<SampleRef> samples_;
  std::map<std::pair<std::string, CellKey>, ActivationTensor> acts_;
  std::map<std::pair<std::string, LabelKind>, LabelMap> labels_;
};

struct ManifestSample {
  std::string sample_id;
  std::map<CellKey, std::string> activations;  // paths relative to root
  std::map<LabelKind, std::string> labels;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestSample> samples;
  std::map<std::string, Split> split;
  int total_steps = 1;
};

// Manifest JSON:
//   {"format_version": 1, "total_steps": T, "root": "<dir, optional>",
//    "split": {"<sample_id>": "train"|"test", ...},
//    "samples": [{"sample_id": ..., "activations": [{"layer_id", "step",
//                 "model_tag", "path"}], "labels": {"<kind>": "<path>"}}]}
// root defaults to the manifest's directory. load_manifest checks that the
// split is a partition of the samples and that every referenced file exists.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Lazily reads dumps referenced by a manifest.
class ManifestDataset final : public Dataset {
 public:
  explicit ManifestDataset(DatasetManifest manifest);

  const DatasetManifest& manifest() const { return manifest_; }

  const std::vector<SampleRef>& samples() const override { return refs_; }
  int total_steps() const override { return manifest_.total_steps; }
  std::vector<CellKey> cells() const override;
  bool has_activation(const std::string& sample_id, const CellKey& cell) const override;
  ActivationTensor activation(const std::string& sample_id, const CellKey& cell) const override;
  bool has_label(const std::string& sample_id, LabelKind kind) const override;
  LabelMap label(const std::string& sample_id, LabelKind kind) const override;

 private:
  const ManifestSample& find(const std::string& sample_id) const;

  DatasetManifest manifest_;
  std::vector<SampleRef> refs_;
  std::map<std::string, std::size_t> index_;
};

// Writes every activation and label of `data` under dir (activations/,
// labels/) plus dir/manifest.json, and returns the manifest.
DatasetManifest write_dataset(const Dataset& data, const std::filesystem::path& dir);

}  // namespace probekit
