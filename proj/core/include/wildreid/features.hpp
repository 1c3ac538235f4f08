#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "wildreid/catalog.hpp"

namespace wildreid {

struct FeatureParams {
  int max_keypoints = 300;       // 0 = unlimited
  int octave_layers = 3;         // scales per octave
  double contrast_threshold = 0.04;
  double edge_threshold = 10.0;
  double sigma = 1.6;

  std::uint64_t hash() const;
};

struct Keypoint {
  float x = 0;      // bbox-relative pixels when a crop was used
  float y = 0;
  float scale = 0;  // sigma in pixels
  float angle = 0;  // dominant orientation, radians
};

using Descriptor = std::array<float, 128>;  // L2-normalized

struct FeatureSet {
  std::string image_id;
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;

  std::size_t size() const { return keypoints.size(); }
};

struct Correspondence {
  Keypoint a;
  Keypoint b;
  int index_a = -1;
  int index_b = -1;
  double similarity = 0.0;  // -(euclidean descriptor distance)
};

struct CorrespondenceSet {
  std::string image_a;
  std::string image_b;
  std::vector<Correspondence> pairs;  // descending similarity, one-to-one
};

class FeatureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scale-space keypoints + gradient-histogram descriptors on the (optionally
/// bbox-cropped) image. Color input is converted to luminance first.
/// Deterministic for identical input. Throws FeatureError when the cropped
/// image is smaller than 16 px on a side or the bbox leaves the image.
FeatureSet extract_features(const cv::Mat& image, std::optional<BBox> bbox = {},
                            const FeatureParams& params = {});

/// Convenience overload: decodes `image_path` then extracts.
FeatureSet extract_features_from_file(const std::string& image_path,
                                      std::optional<BBox> bbox = {},
                                      const FeatureParams& params = {});

/// Greedy one-to-one selection of the highest-similarity descriptor pairs,
/// at most `max_pairs` of them (the geometric check runs on the top ten).
CorrespondenceSet match_descriptors(const FeatureSet& fs_a, const FeatureSet& fs_b,
                                    int max_pairs = 10);

// Binary cache file, little-endian: magic "WRFS", version u32, count u32,
// then per keypoint x,y,scale,angle and 128 descriptor floats.
void save_feature_set(const FeatureSet& fs, const std::string& path);
FeatureSet load_feature_set(const std::string& path, std::string image_id = {});

/// Cache key for one image: content hash x bbox x parameter hash.
std::string feature_cache_key(const std::string& image_path,
                              const std::optional<BBox>& bbox,
                              const FeatureParams& params);

}  // namespace wildreid
