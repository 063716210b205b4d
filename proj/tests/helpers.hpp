#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <unistd.h>
#include <string>
#include <vector>

#include "probekit/rng.hpp"
#include "probekit/tensor.hpp"

namespace testing {

// Fresh directory under TMPDIR (or /tmp), removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const char* base = std::getenv("TMPDIR");
    static int counter = 0;
    path_ = std::filesystem::path(base ? base : "/tmp") /
            ("probekit_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline probekit::RealTensor random_tensor(std::size_t h, std::size_t w, std::size_t k,
                                          std::uint64_t seed, double scale = 1.0) {
  probekit::Rng rng(seed);
  probekit::RealTensor t(h, w, k);
  for (double& v : t.data) v = scale * rng.normal();
  return t;
}

inline probekit::LabelMap mask_from(std::size_t h, std::size_t w, const std::vector<int>& bits,
                                    const std::string& id = "m") {
  std::vector<float> d(bits.begin(), bits.end());
  return probekit::LabelMap(probekit::LabelKind::saliency_mask, h, w, std::move(d), id);
}

inline probekit::LabelMap depth_from(std::size_t h, std::size_t w, std::vector<float> v,
                                     const std::string& id = "d") {
  return probekit::LabelMap(probekit::LabelKind::depth_map, h, w, std::move(v), id);
}

inline probekit::ActivationTensor activation_from(const probekit::RealTensor& t,
                                                  const std::string& id = "a",
                                                  const std::string& layer = "decoder2.sa1",
                                                  int step = 1, int total_steps = 1) {
  std::vector<float> d(t.data.begin(), t.data.end());
  probekit::DumpMeta meta;
  meta.sample_id = id;
  meta.layer_id = layer;
  meta.step = step;
  meta.total_steps = total_steps;
  meta.model_tag = probekit::ModelTag::synthetic;
  return probekit::ActivationTensor({t.height, t.width, t.channels}, std::move(d), std::move(meta));
}

}  // namespace testing
