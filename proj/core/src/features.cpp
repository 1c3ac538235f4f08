#include "wildreid/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>

#include <opencv2/features2d.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "wildreid/rng.hpp"

namespace wildreid {

std::uint64_t FeatureParams::hash() const {
  char buf[160];
  int n = std::snprintf(buf, sizeof(buf), "mk=%d;ol=%d;ct=%.17g;et=%.17g;s=%.17g",
                        max_keypoints, octave_layers, contrast_threshold,
                        edge_threshold, sigma);
  return fnv1a(std::string_view(buf, std::size_t(n)));
}

FeatureSet extract_features(const cv::Mat& image, std::optional<BBox> bbox,
                            const FeatureParams& params) {
  if (image.empty()) throw FeatureError("empty image");

  cv::Mat gray;
  if (image.channels() == 3)
    cv::cvtColor(image, gray, cv::COLOR_BGR2GRAY);  // BT.601 luminance
  else if (image.channels() == 1)
    gray = image;
  else
    throw FeatureError("unsupported channel count " + std::to_string(image.channels()));

  if (bbox) {
    const int x = int(std::lround(bbox->x)), y = int(std::lround(bbox->y));
    const int w = int(std::lround(bbox->w)), h = int(std::lround(bbox->h));
    if (w <= 0 || h <= 0 || x < 0 || y < 0 || x + w > gray.cols || y + h > gray.rows)
      throw FeatureError("bbox outside image bounds");
    gray = gray(cv::Rect(x, y, w, h)).clone();
  }
  if (gray.cols < 16 || gray.rows < 16)
    throw FeatureError("image too small for one octave (< 16 px per side)");

  auto sift = cv::SIFT::create(params.max_keypoints, params.octave_layers,
                               params.contrast_threshold, params.edge_threshold,
                               params.sigma);
  std::vector<cv::KeyPoint> kps;
  cv::Mat desc;
  sift->detectAndCompute(gray, cv::noArray(), kps, desc);

  // Stable order so cache files and downstream tie-breaks are reproducible.
  std::vector<int> order(kps.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    const auto& a = kps[i];
    const auto& b = kps[j];
    if (a.response != b.response) return a.response > b.response;
    if (a.pt.x != b.pt.x) return a.pt.x < b.pt.x;
    if (a.pt.y != b.pt.y) return a.pt.y < b.pt.y;
    if (a.size != b.size) return a.size < b.size;
    return a.angle < b.angle;
  });

  FeatureSet fs;
  fs.keypoints.reserve(kps.size());
  fs.descriptors.reserve(kps.size());
  for (int idx : order) {
    const auto& kp = kps[idx];
    Keypoint k;
    k.x = kp.pt.x;
    k.y = kp.pt.y;
    k.scale = kp.size * 0.5f;
    k.angle = kp.angle * float(std::numbers::pi / 180.0);
    Descriptor d{};
    const float* row = desc.ptr<float>(idx);
    double norm2 = 0;
    for (int c = 0; c < 128; ++c) norm2 += double(row[c]) * double(row[c]);
    const float inv = norm2 > 0 ? float(1.0 / std::sqrt(norm2)) : 0.f;
    for (int c = 0; c < 128; ++c) d[c] = row[c] * inv;
    fs.keypoints.push_back(k);
    fs.descriptors.push_back(d);
  }
  return fs;
}

FeatureSet extract_features_from_file(const std::string& image_path,
                                      std::optional<BBox> bbox,
                                      const FeatureParams& params) {
  cv::Mat img = cv::imread(image_path, cv::IMREAD_UNCHANGED);
  if (img.empty()) throw FeatureError("cannot decode image '" + image_path + "'");
  auto fs = extract_features(img, bbox, params);
  fs.image_id = image_path;
  return fs;
}

CorrespondenceSet match_descriptors(const FeatureSet& fs_a, const FeatureSet& fs_b,
                                    int max_pairs) {
  if (fs_a.size() == 0 || fs_b.size() == 0)
    throw FeatureError("match_descriptors: empty feature set");

  const int na = int(fs_a.size()), nb = int(fs_b.size());
  std::vector<float> dist2(std::size_t(na) * nb);
  for (int i = 0; i < na; ++i) {
    const float* da = fs_a.descriptors[i].data();
    float* row = &dist2[std::size_t(i) * nb];
    for (int j = 0; j < nb; ++j) {
      const float* db = fs_b.descriptors[j].data();
      float dot = 0;
      for (int c = 0; c < 128; ++c) dot += da[c] * db[c];
      // unit vectors: |a-b|^2 = 2 - 2 a.b
      row[j] = std::max(0.f, 2.f - 2.f * dot);
    }
  }

  CorrespondenceSet cs;
  cs.image_a = fs_a.image_id;
  cs.image_b = fs_b.image_id;
  std::vector<char> used_a(na, 0), used_b(nb, 0);
  const int want = std::min({max_pairs, na, nb});
  for (int k = 0; k < want; ++k) {
    float best = std::numeric_limits<float>::infinity();
    int bi = -1, bj = -1;
    for (int i = 0; i < na; ++i) {
      if (used_a[i]) continue;
      const float* row = &dist2[std::size_t(i) * nb];
      for (int j = 0; j < nb; ++j) {
        if (used_b[j]) continue;
        if (row[j] < best) {
          best = row[j];
          bi = i;
          bj = j;
        }
      }
    }
    used_a[bi] = used_b[bj] = 1;
    Correspondence c;
    c.a = fs_a.keypoints[bi];
    c.b = fs_b.keypoints[bj];
    c.index_a = bi;
    c.index_b = bj;
    c.similarity = -std::sqrt(double(best));
    cs.pairs.push_back(c);
  }
  return cs;
}

namespace {
constexpr char kMagic[4] = {'W', 'R', 'F', 'S'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_feature_set(const FeatureSet& fs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FeatureError("cannot write feature cache '" + path + "'");
  out.write(kMagic, 4);
  std::uint32_t v = kVersion, n = std::uint32_t(fs.size());
  out.write(reinterpret_cast<const char*>(&v), 4);
  out.write(reinterpret_cast<const char*>(&n), 4);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const auto& k = fs.keypoints[i];
    float head[4] = {k.x, k.y, k.scale, k.angle};
    out.write(reinterpret_cast<const char*>(head), sizeof(head));
    out.write(reinterpret_cast<const char*>(fs.descriptors[i].data()),
              128 * sizeof(float));
  }
  if (!out) throw FeatureError("short write on feature cache '" + path + "'");
}

FeatureSet load_feature_set(const std::string& path, std::string image_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FeatureError("cannot open feature cache '" + path + "'");
  char magic[4];
  std::uint32_t v = 0, n = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&v), 4);
  in.read(reinterpret_cast<char*>(&n), 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw FeatureError("'" + path + "' is not a WRFS feature cache");
  if (v != kVersion)
    throw FeatureError("unsupported WRFS version " + std::to_string(v));
  FeatureSet fs;
  fs.image_id = std::move(image_id);
  fs.keypoints.resize(n);
  fs.descriptors.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    float head[4];
    in.read(reinterpret_cast<char*>(head), sizeof(head));
    in.read(reinterpret_cast<char*>(fs.descriptors[i].data()), 128 * sizeof(float));
    fs.keypoints[i] = {head[0], head[1], head[2], head[3]};
  }
  if (!in) throw FeatureError("truncated feature cache '" + path + "'");
  return fs;
}

std::string feature_cache_key(const std::string& image_path,
                              const std::optional<BBox>& bbox,
                              const FeatureParams& params) {
  std::ifstream in(image_path, std::ios::binary);
  if (!in) throw FeatureError("cannot open image '" + image_path + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a(std::string_view(buf, std::size_t(in.gcount())), h);
  if (bbox) {
    char bb[128];
    int n = std::snprintf(bb, sizeof(bb), "bbox=%.17g,%.17g,%.17g,%.17g", bbox->x,
                          bbox->y, bbox->w, bbox->h);
    h = fnv1a(std::string_view(bb, std::size_t(n)), h);
  }
  h = mix_seed(h, params.hash());
  char out[32];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace wildreid
