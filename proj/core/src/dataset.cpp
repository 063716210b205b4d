#include "probekit/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "probekit/dump_io.hpp"
#include "probekit/errors.hpp"

namespace fs = std::filesystem;

namespace probekit {

namespace {

using json = nlohmann::json;

constexpr int kManifestVersion = 1;

std::string activation_filename(const std::string& sample_id, const CellKey& cell) {
  return sample_id + "__" + cell.layer_id + "__t" + std::to_string(cell.step) + "__" +
         std::string(to_string(cell.model_tag)) + ".apkd";
}

std::string label_filename(const std::string& sample_id, LabelKind kind) {
  return sample_id + "__" + std::string(to_string(kind)) + ".apkd";
}

}  // namespace

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw ValidationError("unknown split '" + std::string(s) + "'");
}

std::vector<std::string> Dataset::sample_ids(Split split) const {
  std::vector<std::string> out;
  for (const auto& s : samples()) {
    if (s.split == split) out.push_back(s.sample_id);
  }
  return out;
}

std::vector<ModelTag> Dataset::model_tags() const {
  std::set<ModelTag> tags;
  for (const auto& c : cells()) tags.insert(c.model_tag);
  return {tags.begin(), tags.end()};
}

std::vector<std::string> Dataset::layer_ids() const {
  std::set<std::string> ids;
  for (const auto& c : cells()) ids.insert(c.layer_id);
  return {ids.begin(), ids.end()};
}

// ---- InMemoryDataset ----

void InMemoryDataset::add_sample(const std::string& sample_id, Split split) {
  for (const auto& s : samples_) {
    if (s.sample_id == sample_id) throw ValidationError("duplicate sample '" + sample_id + "'");
  }
  samples_.push_back({sample_id, split});
}

void InMemoryDataset::add_activation(ActivationTensor act) {
  const auto& m = act.meta();
  if (m.total_steps != total_steps_) {
    throw ValidationError("activation total_steps " + std::to_string(m.total_steps) +
                          " differs from dataset total_steps " + std::to_string(total_steps_));
  }
  CellKey key{m.layer_id, m.step, m.model_tag};
  acts_.insert_or_assign({m.sample_id, key}, std::move(act));
}

void InMemoryDataset::add_label(LabelMap label) {
  std::pair<std::string, LabelKind> key{label.sample_id(), label.kind()};
  labels_.insert_or_assign(std::move(key), std::move(label));
}

std::vector<CellKey> InMemoryDataset::cells() const {
  std::set<CellKey> keys;
  for (const auto& [k, _] : acts_) keys.insert(k.second);
  return {keys.begin(), keys.end()};
}

bool InMemoryDataset::has_activation(const std::string& sample_id, const CellKey& cell) const {
  return acts_.contains({sample_id, cell});
}

ActivationTensor InMemoryDataset::activation(const std::string& sample_id,
                                             const CellKey& cell) const {
  auto it = acts_.find({sample_id, cell});
  if (it == acts_.end()) {
    throw ValidationError("no activation for sample '" + sample_id + "' at " + cell.layer_id +
                          " step " + std::to_string(cell.step));
  }
  return it->second;
}

bool InMemoryDataset::has_label(const std::string& sample_id, LabelKind kind) const {
  return labels_.contains({sample_id, kind});
}

LabelMap InMemoryDataset::label(const std::string& sample_id, LabelKind kind) const {
  auto it = labels_.find({sample_id, kind});
  if (it == labels_.end()) {
    throw ValidationError("no " + std::string(to_string(kind)) + " label for sample '" +
                          sample_id + "'");
  }
  return it->second;
}

// ---- manifest I/O ----

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest '" + path.string() + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw FormatError("manifest '" + path.string() + "' is not valid JSON: " + e.what(), 0);
  }

  DatasetManifest m;
  try {
    const int version = j.value("format_version", kManifestVersion);
    if (version != kManifestVersion) {
      throw FormatError("unsupported manifest format_version " + std::to_string(version), 0);
    }
    const fs::path base = path.parent_path();
    m.root = j.contains("root") ? base / j["root"].get<std::string>() : base;
    m.total_steps = j.at("total_steps").get<int>();
    for (const auto& js : j.at("samples")) {
      ManifestSample s;
      s.sample_id = js.at("sample_id").get<std::string>();
      const json acts = js.value("activations", json::array());
      const json labels = js.value("labels", json::object());
      for (const auto& ja : acts) {
        CellKey key{ja.at("layer_id").get<std::string>(), ja.at("step").get<int>(),
                    model_tag_from_string(ja.at("model_tag").get<std::string>())};
        s.activations[key] = ja.at("path").get<std::string>();
      }
      for (const auto& [kind, p] : labels.items()) {
        s.labels[label_kind_from_string(kind)] = p.get<std::string>();
      }
      m.samples.push_back(std::move(s));
    }
    for (const auto& [id, sp] : j.at("split").items()) {
      m.split[id] = split_from_string(sp.get<std::string>());
    }
  } catch (const json::exception& e) {
    throw FormatError("manifest '" + path.string() + "' is malformed: " + e.what(), 0);
  }

  if (m.total_steps < 1) throw ValidationError("manifest total_steps must be >= 1");
  std::set<std::string> ids;
  for (const auto& s : m.samples) {
    if (!ids.insert(s.sample_id).second) {
      throw ValidationError("manifest lists sample '" + s.sample_id + "' twice");
    }
    if (!m.split.contains(s.sample_id)) {
      throw ValidationError("sample '" + s.sample_id + "' has no split assignment");
    }
    for (const auto& [key, rel] : s.activations) {
      if (key.step < 1 || key.step > m.total_steps) {
        throw ValidationError("sample '" + s.sample_id + "' has step " + std::to_string(key.step) +
                              " outside 1.." + std::to_string(m.total_steps));
      }
      if (!fs::exists(m.root / rel)) throw IoError("missing activation file " + (m.root / rel).string());
    }
    for (const auto& [kind, rel] : s.labels) {
      if (!fs::exists(m.root / rel)) throw IoError("missing label file " + (m.root / rel).string());
    }
  }
  for (const auto& [id, _] : m.split) {
    if (!ids.contains(id)) throw ValidationError("split names unknown sample '" + id + "'");
  }
  return m;
}

void save_manifest(const DatasetManifest& m, const fs::path& path) {
  json samples = json::array();
  for (const auto& s : m.samples) {
    json acts = json::array();
    for (const auto& [key, rel] : s.activations) {
      acts.push_back({{"layer_id", key.layer_id},
                      {"step", key.step},
                      {"model_tag", to_string(key.model_tag)},
                      {"path", rel}});
    }
    json labels = json::object();
    for (const auto& [kind, rel] : s.labels) labels[std::string(to_string(kind))] = rel;
    samples.push_back({{"sample_id", s.sample_id}, {"activations", acts}, {"labels", labels}});
  }
  json split = json::object();
  for (const auto& [id, sp] : m.split) split[id] = to_string(sp);
  json j = {{"format_version", kManifestVersion},
            {"total_steps", m.total_steps},
            {"samples", samples},
            {"split", split}};
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write manifest '" + path.string() + "'");
  f << j.dump(2) << '\n';
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

// ---- ManifestDataset ----

ManifestDataset::ManifestDataset(DatasetManifest manifest) : manifest_(std::move(manifest)) {
  for (std::size_t i = 0; i < manifest_.samples.size(); ++i) {
    const auto& s = manifest_.samples[i];
    auto it = manifest_.split.find(s.sample_id);
    if (it == manifest_.split.end()) {
      throw ValidationError("sample '" + s.sample_id + "' has no split assignment");
    }
    refs_.push_back({s.sample_id, it->second});
    index_[s.sample_id] = i;
  }
}

const ManifestSample& ManifestDataset::find(const std::string& sample_id) const {
  auto it = index_.find(sample_id);
  if (it == index_.end()) throw ValidationError("unknown sample '" + sample_id + "'");
  return manifest_.samples[it->second];
}

std::vector<CellKey> ManifestDataset::cells() const {
  std::set<CellKey> keys;
  for (const auto& s : manifest_.samples) {
    for (const auto& [k, _] : s.activations) keys.insert(k);
  }
  return {keys.begin(), keys.end()};
}

bool ManifestDataset::has_activation(const std::string& sample_id, const CellKey& cell) const {
  return find(sample_id).activations.contains(cell);
}

ActivationTensor ManifestDataset::activation(const std::string& sample_id,
                                             const CellKey& cell) const {
  const auto& s = find(sample_id);
  auto it = s.activations.find(cell);
  if (it == s.activations.end()) {
    throw ValidationError("no activation for sample '" + sample_id + "' at " + cell.layer_id +
                          " step " + std::to_string(cell.step));
  }
  ActivationTensor act = read_activation(manifest_.root / it->second);
  const auto& m = act.meta();
  if (m.sample_id != sample_id || m.layer_id != cell.layer_id || m.step != cell.step ||
      m.model_tag != cell.model_tag) {
    throw ValidationError("dump " + (manifest_.root / it->second).string() +
                          " does not match its manifest entry");
  }
  return act;
}

bool ManifestDataset::has_label(const std::string& sample_id, LabelKind kind) const {
  return find(sample_id).labels.contains(kind);
}

LabelMap ManifestDataset::label(const std::string& sample_id, LabelKind kind) const {
  const auto& s = find(sample_id);
  auto it = s.labels.find(kind);
  if (it == s.labels.end()) {
    throw ValidationError("no " + std::string(to_string(kind)) + " label for sample '" +
                          sample_id + "'");
  }
  LabelMap l = read_label(manifest_.root / it->second);
  if (l.sample_id() != sample_id || l.kind() != kind) {
    throw ValidationError("dump " + (manifest_.root / it->second).string() +
                          " does not match its manifest entry");
  }
  return l;
}

DatasetManifest write_dataset(const Dataset& data, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "activations", ec);
  fs::create_directories(dir / "labels", ec);
  if (ec) throw IoError("cannot create dataset directory '" + dir.string() + "': " + ec.message());

  DatasetManifest m;
  m.root = dir;
  m.total_steps = data.total_steps();
  const auto cells = data.cells();
  constexpr LabelKind kKinds[] = {LabelKind::saliency_mask, LabelKind::depth_map,
                                  LabelKind::saliency_logits};
  for (const auto& ref : data.samples()) {
    ManifestSample s;
    s.sample_id = ref.sample_id;
    for (const auto& cell : cells) {
      if (!data.has_activation(ref.sample_id, cell)) continue;
      const std::string rel = "activations/" + activation_filename(ref.sample_id, cell);
      write_dump(data.activation(ref.sample_id, cell), dir / rel);
      s.activations[cell] = rel;
    }
    for (LabelKind kind : kKinds) {
      if (!data.has_label(ref.sample_id, kind)) continue;
      const std::string rel = "labels/" + label_filename(ref.sample_id, kind);
      write_dump(data.label(ref.sample_id, kind), dir / rel);
      s.labels[kind] = rel;
    }
    m.split[ref.sample_id] = ref.split;
    m.samples.push_back(std::move(s));
  }
  save_manifest(m, dir / "manifest.json");
  return m;
}

}  // namespace probekit
