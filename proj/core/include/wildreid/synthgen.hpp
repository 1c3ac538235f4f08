#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "wildreid/catalog.hpp"

namespace wildreid {

// Deterministic synthetic encounter dataset: per individual a fixed Voronoi
// cell pattern (the stable identity signal), on top of which appearance
// drifts with time (cell shading, accumulating scratches) and every
// encounter draws its own capture factors (tint, blur, noise, warp).

struct SynthConfig {
  int n_individuals = 50;
  int encounters_per_individual = 10;
  int images_per_encounter = 3;
  Date date_start = parse_date("2015-01-01");
  Date date_end = parse_date("2019-12-31");
  int image_size = 256;
  double drift_rate = 5.0;       // scales shade drift and scratch arrivals
  double warp_magnitude = 0.03;  // corner perturbation, fraction of image size
  double tint_magnitude = 0.08;
  double blur_max_sigma = 1.2;
  double noise_sigma = 4.0;
  int min_cells = 20;
  int max_cells = 40;
  // Minimum days between two encounters of one individual, so time-gap
  // statistics are not dominated by near-duplicate revisits.
  int encounter_min_gap_days = 45;
  std::uint64_t master_seed = 1;
};

class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Scratch {
  double arrival_years = 0;  // visible from this point in the lifetime on
  cv::Point2d p1, p2;        // unit coordinates
  double thickness = 1.0;    // pixels at 256; scaled with image size
  double darkness = 0.5;     // multiplicative shade on the stroke
};

struct IndividualPattern {
  std::string individual_id;
  std::uint64_t pattern_seed = 0;
  std::vector<cv::Point2d> sites;        // unit coordinates
  std::vector<cv::Vec3d> cell_shade;     // base BGR per cell
  std::vector<cv::Vec3d> drift_trend;    // BGR shade change per year per cell
  std::vector<Scratch> scratches;        // arrival-ordered
};

struct EncounterFactors {
  Date date;
  cv::Vec3d tint{1, 1, 1};    // per-channel multiplier
  double blur_sigma = 0;      // pixels
  double noise_sigma = 0;     // intensity units
  double warp_magnitude = 0;  // corner perturbation, fraction of image size
};

/// Pattern (cell geometry, drift schedule, scratch arrivals) is a pure
/// function of the individual seed; geometry never changes over a lifetime.
IndividualPattern make_individual_pattern(const std::string& individual_id,
                                          std::uint64_t pattern_seed,
                                          const SynthConfig& config);

/// One capture-factor draw shared by all images of an encounter.
EncounterFactors make_encounter_factors(Date date, std::uint64_t encounter_seed,
                                        const SynthConfig& config);

/// Renders one image: tessellation + drift shading + scratches, then warp,
/// tint, blur, noise. `image_seed` drives the per-image warp and noise
/// realization; identical inputs render identical bytes.
cv::Mat render_individual(const IndividualPattern& pattern,
                          const EncounterFactors& factors, std::uint64_t image_seed,
                          const SynthConfig& config);

struct SynthResult {
  std::string manifest_path;
  std::string meta_path;
  std::size_t n_images = 0;
};

/// Writes PNGs under out_dir/images/, a catalog-format manifest.csv, and a
/// synth-meta.json sidecar with the config and seeds.
SynthResult generate_dataset(const SynthConfig& config, const std::string& out_dir);

}  // namespace wildreid
