#include "wildreid/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "wildreid/rng.hpp"

namespace wildreid {

namespace {

namespace fs = std::filesystem;

double span_years(const SynthConfig& c) {
  return double((c.date_end - c.date_start).count()) / 365.25;
}

double years_since_start(Date d, const SynthConfig& c) {
  return double((d - c.date_start).count()) / 365.25;
}

void validate(const SynthConfig& c) {
  if (c.n_individuals < 1 || c.encounters_per_individual < 1 ||
      c.images_per_encounter < 1)
    throw SynthError("degenerate config: all counts must be >= 1");
  if (c.date_end < c.date_start) throw SynthError("degenerate config: empty date range");
  if (c.image_size < 32) throw SynthError("degenerate config: image_size < 32");
  if (c.min_cells < 3 || c.max_cells < c.min_cells)
    throw SynthError("degenerate config: bad cell count range");
}

// Label map and border mask depend only on the cell geometry; computed once
// per render (cheap relative to warping/blur at 256 px).
struct CellMaps {
  cv::Mat labels;  // CV_32S
  cv::Mat border;  // CV_8U, 255 on cell boundaries
};

CellMaps make_cell_maps(const IndividualPattern& p, int size) {
  CellMaps m;
  m.labels.create(size, size, CV_32S);
  m.border.create(size, size, CV_8U);
  const double border_width = 0.012;
  for (int y = 0; y < size; ++y) {
    int* lrow = m.labels.ptr<int>(y);
    uchar* brow = m.border.ptr<uchar>(y);
    const double py = (y + 0.5) / size;
    for (int x = 0; x < size; ++x) {
      const double px = (x + 0.5) / size;
      double d1 = 1e18, d2 = 1e18;
      int best = 0;
      for (int c = 0; c < int(p.sites.size()); ++c) {
        const double dx = px - p.sites[c].x, dy = py - p.sites[c].y;
        const double d = dx * dx + dy * dy;
        if (d < d1) {
          d2 = d1;
          d1 = d;
          best = c;
        } else if (d < d2) {
          d2 = d;
        }
      }
      lrow[x] = best;
      brow[x] = (std::sqrt(d2) - std::sqrt(d1) < border_width) ? 255 : 0;
    }
  }
  return m;
}

}  // namespace

IndividualPattern make_individual_pattern(const std::string& individual_id,
                                          std::uint64_t pattern_seed,
                                          const SynthConfig& config) {
  IndividualPattern p;
  p.individual_id = individual_id;
  p.pattern_seed = pattern_seed;

  auto rng = make_rng(mix_seed(pattern_seed, 0xA1));
  std::uniform_int_distribution<int> cell_count(config.min_cells, config.max_cells);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> gray(60.0, 190.0);
  std::uniform_real_distribution<double> chroma(-25.0, 25.0);
  std::normal_distribution<double> trend(0.0, 10.0);

  const int n = cell_count(rng);
  p.sites.reserve(n);
  for (int i = 0; i < n; ++i) p.sites.emplace_back(unit(rng), unit(rng));
  for (int i = 0; i < n; ++i) {
    const double g = gray(rng);
    p.cell_shade.emplace_back(g + chroma(rng), g + chroma(rng), g + chroma(rng));
    p.drift_trend.emplace_back(trend(rng), trend(rng), trend(rng));
  }

  // Scratch arrivals over the lifetime; a scratch stays visible once it
  // appears, so nearby dates share almost the same scratch set.
  auto srng = make_rng(mix_seed(pattern_seed, 0xB2));
  const double span = std::max(span_years(config), 1e-6);
  if (config.drift_rate > 0) {
    std::poisson_distribution<int> count(config.drift_rate * 2.5 * span);
    std::uniform_real_distribution<double> arrival(0.0, span);
    std::uniform_real_distribution<double> len(0.08, 0.30);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> thick(0.8, 2.0);
    std::uniform_real_distribution<double> dark(0.35, 0.7);
    const int n_scratch = count(srng);
    for (int i = 0; i < n_scratch; ++i) {
      Scratch s;
      s.arrival_years = arrival(srng);
      const double cx = unit(srng), cy = unit(srng);
      const double l = len(srng), a = angle(srng);
      s.p1 = {cx - 0.5 * l * std::cos(a), cy - 0.5 * l * std::sin(a)};
      s.p2 = {cx + 0.5 * l * std::cos(a), cy + 0.5 * l * std::sin(a)};
      s.thickness = thick(srng);
      s.darkness = dark(srng);
      p.scratches.push_back(s);
    }
    std::sort(p.scratches.begin(), p.scratches.end(),
              [](const Scratch& a, const Scratch& b) {
                return a.arrival_years < b.arrival_years;
              });
  }
  return p;
}

EncounterFactors make_encounter_factors(Date date, std::uint64_t encounter_seed,
                                        const SynthConfig& config) {
  EncounterFactors f;
  f.date = date;
  auto rng = make_rng(mix_seed(encounter_seed, 0xC3));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  // Three camera eras across the date range: early low-res dull, middle
  // high-res dull, late high-res flash.
  const double span = std::max(span_years(config), 1e-6);
  const double pos = std::clamp(years_since_start(date, config) / span, 0.0, 1.0);
  const int era = pos < 1.0 / 3 ? 0 : (pos < 2.0 / 3 ? 1 : 2);
  static const double era_tint[3] = {0.88, 0.97, 1.10};
  static const double era_blur[3] = {1.0, 0.35, 0.15};

  if (config.tint_magnitude > 0) {
    for (int c = 0; c < 3; ++c)
      f.tint[c] = era_tint[era] * (1.0 + config.tint_magnitude * u(rng));
  }
  if (config.blur_max_sigma > 0)
    f.blur_sigma = config.blur_max_sigma * (era_blur[era] + 0.3 * u01(rng));
  f.noise_sigma = config.noise_sigma;
  f.warp_magnitude = config.warp_magnitude;
  return f;
}

cv::Mat render_individual(const IndividualPattern& pattern,
                          const EncounterFactors& factors, std::uint64_t image_seed,
                          const SynthConfig& config) {
  const int size = config.image_size;
  const CellMaps maps = make_cell_maps(pattern, size);
  const double t = years_since_start(factors.date, config);

  // Base tessellation with drifted per-cell shading.
  std::vector<cv::Vec3f> shade(pattern.sites.size());
  for (std::size_t c = 0; c < shade.size(); ++c)
    for (int ch = 0; ch < 3; ++ch)
      shade[c][ch] = float(pattern.cell_shade[c][ch] +
                           config.drift_rate * pattern.drift_trend[c][ch] * t);

  cv::Mat img(size, size, CV_32FC3);
  for (int y = 0; y < size; ++y) {
    const int* lrow = maps.labels.ptr<int>(y);
    const uchar* brow = maps.border.ptr<uchar>(y);
    cv::Vec3f* row = img.ptr<cv::Vec3f>(y);
    for (int x = 0; x < size; ++x)
      row[x] = brow[x] ? shade[lrow[x]] * 0.3f : shade[lrow[x]];
  }

  // Scratches present by this date, blended as darkened strokes.
  for (const auto& s : pattern.scratches) {
    if (s.arrival_years > t) break;
    cv::Mat mask = cv::Mat::zeros(size, size, CV_8U);
    const cv::Point p1(int(std::lround(s.p1.x * size)), int(std::lround(s.p1.y * size)));
    const cv::Point p2(int(std::lround(s.p2.x * size)), int(std::lround(s.p2.y * size)));
    const int th = std::max(1, int(std::lround(s.thickness * size / 256.0)));
    cv::line(mask, p1, p2, cv::Scalar(255), th, cv::LINE_8);
    cv::Mat darkened;
    cv::multiply(img, cv::Scalar::all(s.darkness), darkened);
    darkened.copyTo(img, mask);
  }

  auto rng = make_rng(mix_seed(image_seed, 0xD4));

  // Projective capture perturbation: jitter the four corners.
  if (factors.warp_magnitude > 0) {
    std::uniform_real_distribution<double> jitter(-factors.warp_magnitude * size,
                                                  factors.warp_magnitude * size);
    const cv::Point2f src[4] = {{0, 0}, {float(size), 0},
                                {float(size), float(size)}, {0, float(size)}};
    cv::Point2f dst[4];
    for (int i = 0; i < 4; ++i) {
      const double dx = jitter(rng), dy = jitter(rng);
      dst[i] = {src[i].x + float(dx), src[i].y + float(dy)};
    }
    const cv::Mat h = cv::getPerspectiveTransform(src, dst);
    cv::Mat warped;
    cv::warpPerspective(img, warped, h, img.size(), cv::INTER_LINEAR,
                        cv::BORDER_REFLECT_101);
    img = warped;
  }

  cv::multiply(img, cv::Scalar(factors.tint[0], factors.tint[1], factors.tint[2]), img);

  if (factors.blur_sigma > 0)
    cv::GaussianBlur(img, img, cv::Size(0, 0), factors.blur_sigma);

  if (factors.noise_sigma > 0) {
    std::normal_distribution<float> noise(0.f, float(factors.noise_sigma));
    for (int y = 0; y < size; ++y) {
      cv::Vec3f* row = img.ptr<cv::Vec3f>(y);
      for (int x = 0; x < size; ++x)
        for (int c = 0; c < 3; ++c) row[x][c] += noise(rng);
    }
  }

  cv::Mat out;
  img.convertTo(out, CV_8UC3);
  return out;
}

SynthResult generate_dataset(const SynthConfig& config, const std::string& out_dir) {
  validate(config);
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  if (ec) throw SynthError("cannot create output directory '" + out_dir + "': " +
                           ec.message());

  const long span_days = (config.date_end - config.date_start).count();
  std::vector<ImageRecord> records;

  for (int i = 0; i < config.n_individuals; ++i) {
    char indiv[32];
    std::snprintf(indiv, sizeof(indiv), "ind%03d", i);
    const std::uint64_t indiv_seed = mix_seed(config.master_seed, std::uint64_t(i));
    const IndividualPattern pattern =
        make_individual_pattern(indiv, indiv_seed, config);

    // Distinct encounter days for this individual, kept at least
    // encounter_min_gap_days apart (shrunk when the range is too short).
    auto drng = make_rng(mix_seed(indiv_seed, 0xE5));
    const int n_enc = config.encounters_per_individual;
    std::set<long> sampled_days;
    if (n_enc == 1) {
      std::uniform_int_distribution<long> day(0, span_days);
      sampled_days.insert(day(drng));
    } else {
      const long gap = std::max<long>(
          1, std::min<long>(config.encounter_min_gap_days, span_days / (n_enc - 1)));
      const long slack = span_days - gap * (n_enc - 1);
      if (slack >= 0) {
        std::uniform_int_distribution<long> offset(0, slack);
        std::vector<long> offsets(n_enc);
        for (auto& v : offsets) v = offset(drng);
        std::sort(offsets.begin(), offsets.end());
        for (int k = 0; k < n_enc; ++k) sampled_days.insert(offsets[k] + gap * k);
      } else {
        std::uniform_int_distribution<long> day(0, span_days);
        while (int(sampled_days.size()) < n_enc &&
               int(sampled_days.size()) <= span_days)
          sampled_days.insert(day(drng));
      }
    }

    int e = 0;
    for (long d : sampled_days) {
      const Date date = config.date_start + std::chrono::days(d);
      const std::uint64_t enc_seed = mix_seed(indiv_seed, 0x100 + std::uint64_t(e));
      const EncounterFactors factors = make_encounter_factors(date, enc_seed, config);
      for (int k = 0; k < config.images_per_encounter; ++k) {
        const std::uint64_t img_seed = mix_seed(enc_seed, 0x1000 + std::uint64_t(k));
        const cv::Mat img = render_individual(pattern, factors, img_seed, config);

        char image_id[64];
        std::snprintf(image_id, sizeof(image_id), "%s_e%02d_i%d", indiv, e, k);
        const std::string rel = std::string("images/") + image_id + ".png";
        if (!cv::imwrite((fs::path(out_dir) / rel).string(), img))
          throw SynthError("cannot write image '" + rel + "'");

        ImageRecord r;
        r.image_id = image_id;
        r.individual_id = indiv;
        r.date = date;
        r.orientation = Orientation::left;
        r.image_path = rel;
        records.push_back(std::move(r));
      }
      ++e;
    }
  }

  SynthResult result;
  result.n_images = records.size();
  const Catalog catalog = Catalog::from_records(std::move(records));
  result.manifest_path = (fs::path(out_dir) / "manifest.csv").string();
  catalog.save(result.manifest_path);

  nlohmann::json meta;
  meta["generator"] = "wildreid-synthgen";
  meta["rng"] = kRngName;
  meta["config"] = {
      {"n_individuals", config.n_individuals},
      {"encounters_per_individual", config.encounters_per_individual},
      {"images_per_encounter", config.images_per_encounter},
      {"date_start", format_date(config.date_start)},
      {"date_end", format_date(config.date_end)},
      {"image_size", config.image_size},
      {"drift_rate", config.drift_rate},
      {"warp_magnitude", config.warp_magnitude},
      {"tint_magnitude", config.tint_magnitude},
      {"blur_max_sigma", config.blur_max_sigma},
      {"noise_sigma", config.noise_sigma},
      {"min_cells", config.min_cells},
      {"max_cells", config.max_cells},
      {"encounter_min_gap_days", config.encounter_min_gap_days},
      {"master_seed", config.master_seed},
  };
  result.meta_path = (fs::path(out_dir) / "synth-meta.json").string();
  std::ofstream meta_out(result.meta_path);
  meta_out << meta.dump(2) << '\n';
  return result;
}

}  // namespace wildreid
