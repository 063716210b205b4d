#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "probekit/dataset.hpp"
#include "probekit/dump_io.hpp"
#include "probekit/errors.hpp"
#include "probekit/layers.hpp"

using namespace probekit;
using testing::activation_from;

namespace {

InMemoryDataset small_dataset() {
  InMemoryDataset ds(3);
  ds.add_sample("a", Split::train);
  ds.add_sample("b", Split::test);
  for (const char* id : {"a", "b"}) {
    for (int step : {1, 3}) {
      ds.add_activation(activation_from(testing::random_tensor(2, 2, 3, static_cast<std::uint64_t>(step)), id,
                                        "decoder2.sa1", step, 3));
    }
    ds.add_label(testing::mask_from(4, 4, std::vector<int>(16, 1), id));
  }
  return ds;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p) << s;
}

}  // namespace

TEST_CASE("layer registry") {
  const auto layers = self_attention_layers();
  CHECK(layers.size() == 16);
  std::size_t decoder = 0;
  for (const auto& l : layers) decoder += l.side == UNetSide::decoder;
  CHECK(decoder == 9);
  const auto bottleneck = find_layer("bottleneck.sa1");
  REQUIRE(bottleneck);
  CHECK(bottleneck->height == 8);
  CHECK(bottleneck->width == 8);
  CHECK(bottleneck->channels == 1280);
  const auto d4 = find_layer("decoder4.sa3");
  REQUIRE(d4);
  CHECK(d4->height == 64);
  CHECK(d4->channels == 320);
  CHECK_FALSE(find_layer("decoder5.sa1"));
  CHECK(is_decoder_side("decoder3.sa2"));
  CHECK(is_decoder_side("decoder_custom"));
  CHECK_FALSE(is_decoder_side("encoder1.sa1"));
}

TEST_CASE("in-memory dataset bookkeeping") {
  InMemoryDataset ds = small_dataset();
  CHECK(ds.sample_ids(Split::train) == std::vector<std::string>{"a"});
  CHECK(ds.sample_ids(Split::test) == std::vector<std::string>{"b"});
  CHECK(ds.cells().size() == 2);
  CHECK(ds.layer_ids() == std::vector<std::string>{"decoder2.sa1"});
  CHECK(ds.model_tags() == std::vector<ModelTag>{ModelTag::synthetic});
  CHECK(ds.has_label("a", LabelKind::saliency_mask));
  CHECK_FALSE(ds.has_label("a", LabelKind::depth_map));
  CHECK_THROWS_AS(ds.label("a", LabelKind::depth_map), ValidationError);
  CHECK_THROWS_AS(ds.add_sample("a", Split::test), ValidationError);
  CHECK_THROWS_AS(ds.add_activation(activation_from(testing::random_tensor(1, 1, 1, 0), "a", "x", 1, 5)),
                  ValidationError);
  CHECK(split_from_string("test") == Split::test);
  CHECK_THROWS_AS(split_from_string("val"), ValidationError);
}

TEST_CASE("written datasets load back identically") {
  testing::TempDir dir("ds");
  const InMemoryDataset ds = small_dataset();
  write_dataset(ds, dir.path());
  const ManifestDataset back(load_manifest(dir / "manifest.json"));
  CHECK(back.total_steps() == 3);
  CHECK(back.cells() == ds.cells());
  CHECK(back.sample_ids(Split::test) == ds.sample_ids(Split::test));
  for (const auto& s : ds.samples()) {
    for (const auto& cell : ds.cells()) CHECK(back.activation(s.sample_id, cell) == ds.activation(s.sample_id, cell));
    CHECK(back.label(s.sample_id, LabelKind::saliency_mask) == ds.label(s.sample_id, LabelKind::saliency_mask));
  }

  // save_manifest followed by load_manifest is stable.
  save_manifest(back.manifest(), dir / "copy.json");
  const DatasetManifest again = load_manifest(dir / "copy.json");
  CHECK(again.samples.size() == 2);
  CHECK(again.split == back.manifest().split);
  CHECK(testing::slurp(dir / "copy.json") == testing::slurp(dir / "manifest.json"));
}

TEST_CASE("manifest errors") {
  testing::TempDir dir("manifest");
  write_dataset(small_dataset(), dir.path());
  const auto p = dir / "m.json";

  CHECK_THROWS_AS(load_manifest(dir / "absent.json"), IoError);

  write_text(p, "{not json");
  CHECK_THROWS_AS(load_manifest(p), FormatError);

  write_text(p, R"({"format_version": 2, "total_steps": 1, "samples": [], "split": {}})");
  CHECK_THROWS_AS(load_manifest(p), FormatError);

  write_text(p, R"({"format_version": 1, "total_steps": 1, "samples": [{"sample_id": "a"}], "split": {}})");
  CHECK_THROWS_AS(load_manifest(p), ValidationError);

  write_text(p, R"({"format_version": 1, "total_steps": 1, "samples": [], "split": {"ghost": "train"}})");
  CHECK_THROWS_AS(load_manifest(p), ValidationError);

  write_text(p, R"({"format_version": 1, "total_steps": 1, "split": {"a": "train"},
    "samples": [{"sample_id": "a", "labels": {"saliency_mask": "labels/nope.apkd"}}]})");
  CHECK_THROWS_AS(load_manifest(p), IoError);

  write_text(p, R"({"format_version": 1, "total_steps": 2, "split": {"a": "train"},
    "samples": [{"sample_id": "a", "activations": [{"layer_id": "decoder2.sa1", "step": 3,
    "model_tag": "synthetic", "path": "x.apkd"}]}]})");
  CHECK_THROWS_AS(load_manifest(p), ValidationError);

  write_text(p, R"({"format_version": 1, "total_steps": 1, "split": {"a": "train", "a2": "test"},
    "samples": [{"sample_id": "a"}, {"sample_id": "a"}]})");
  CHECK_THROWS_AS(load_manifest(p), ValidationError);
}

TEST_CASE("manifest entries must match their dumps") {
  testing::TempDir dir("mismatch");
  const DatasetManifest m = write_dataset(small_dataset(), dir.path());
  // Overwrite sample a's step-1 dump with one claiming another sample.
  const CellKey key{"decoder2.sa1", 1, ModelTag::synthetic};
  const auto& rel = m.samples.front().activations.at(key);
  write_dump(activation_from(testing::random_tensor(2, 2, 3, 1), "zzz", "decoder2.sa1", 1, 3), m.root / rel);
  const ManifestDataset ds(load_manifest(dir / "manifest.json"));
  CHECK_THROWS_AS(ds.activation("a", key), ValidationError);
}
