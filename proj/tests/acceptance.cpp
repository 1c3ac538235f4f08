// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion is self-contained and rebuilds what it needs.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <opencv2/imgcodecs.hpp>

#include "wildreid/catalog.hpp"
#include "wildreid/evaluation.hpp"
#include "wildreid/features.hpp"
#include "wildreid/geomverify.hpp"
#include "wildreid/matchgraph.hpp"
#include "wildreid/pipeline.hpp"
#include "wildreid/splitgen.hpp"
#include "wildreid/synthgen.hpp"

using namespace wildreid;
namespace fs = std::filesystem;

namespace {

struct AcceptanceFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw AcceptanceFailure(what);
}

void require_pct(double value, double expected_pct, const std::string& what) {
  // expected_pct in percent, tolerance +-0.05 percentage points
  const double diff = std::fabs(value * 100.0 - expected_pct);
  require(diff <= 0.05, what + ": got " + std::to_string(value * 100.0) +
                            "%, want " + std::to_string(expected_pct) +
                            "% +-0.05pp");
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "wildreid-acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ImageRecord rec(std::string id, std::string indiv, const char* date) {
  ImageRecord r;
  r.image_id = std::move(id);
  r.individual_id = std::move(indiv);
  if (date) r.date = parse_date(date);
  r.image_path = r.image_id + ".png";
  return r;
}

VerificationDecision edge(std::string a, std::string b) {
  VerificationDecision d;
  if (b < a) std::swap(a, b);
  d.image_a = std::move(a);
  d.image_b = std::move(b);
  d.accepted = true;
  d.cond_T = 10;
  d.cond_T_tilde = 2;
  d.n_correspondences = 10;
  d.residual = 1;
  return d;
}

// --- criterion 1: closed-set metric oracle ---------------------------------

void criterion_closed_oracle() {
  const ClosedSetReport a = closed_report_from_counts(781, 2, 2554);
  require(a.n_query == 3337, "closed oracle A: n_query != 3337");
  require_pct(a.precision(), 99.7, "closed oracle A precision");
  require_pct(a.recall(), 23.4, "closed oracle A recall");

  const ClosedSetReport b = closed_report_from_counts(1792, 1, 1544);
  require(b.n_query == 3337, "closed oracle B: n_query != 3337");
  require_pct(b.precision(), 99.9, "closed oracle B precision");
  require_pct(b.recall(), 53.7, "closed oracle B recall");
}

// --- criterion 2: open-set metric oracle -----------------------------------

void criterion_open_oracle() {
  const OpenSetReport a = open_report_from_counts(638, 10, 3800, 3053);
  require_pct(a.precision(), 98.5, "open oracle A precision");
  require_pct(a.recall(), 17.3, "open oracle A recall");

  const OpenSetReport b = open_report_from_counts(1973, 7, 3800, 1721);
  require_pct(b.precision(), 99.6, "open oracle B precision");
  require_pct(b.recall(), 53.4, "open oracle B recall");
}

// --- criterion 3: two-identity toy graph -----------------------------------

void criterion_toy_graph() {
  std::vector<ImageRecord> records;
  Split split;
  for (int i = 0; i < 5; ++i) {
    records.push_back(rec("blue_r" + std::to_string(i), "blue", "2020-01-01"));
    records.push_back(rec("orange_r" + std::to_string(i), "orange", "2020-01-01"));
    split.reference_ids.insert("blue_r" + std::to_string(i));
    split.reference_ids.insert("orange_r" + std::to_string(i));
  }
  for (int i = 0; i < 4; ++i) {
    records.push_back(rec("blue_q" + std::to_string(i), "blue", "2020-01-01"));
    split.query_ids.insert("blue_q" + std::to_string(i));
  }
  for (int i = 0; i < 6; ++i) {
    records.push_back(rec("orange_q" + std::to_string(i), "orange", "2020-01-01"));
    split.query_ids.insert("orange_q" + std::to_string(i));
  }
  const Catalog catalog = Catalog::from_records(std::move(records));

  std::vector<VerificationDecision> decisions = {
      edge("blue_r0", "blue_q0"),     edge("blue_q0", "blue_q1"),
      edge("blue_r2", "blue_q2"),     edge("blue_r3", "blue_q3"),
      edge("orange_r1", "orange_q0"), edge("orange_q0", "orange_q1"),
      edge("blue_r0", "blue_r1"),     edge("orange_r0", "orange_r1")};

  const MatchGraph g = build_match_graph(decisions, catalog);
  const PredictionSet p = propagate_identities(g, split, catalog);

  int blue = 0, orange = 0, none = 0;
  for (const auto& [q, pred] : p.by_query) {
    if (pred.status == Prediction::predicted) {
      if (pred.individual_id == "blue") ++blue;
      if (pred.individual_id == "orange") ++orange;
    } else {
      ++none;
    }
  }
  require(blue == 4, "toy graph: expected 4 blue predictions, got " +
                         std::to_string(blue));
  require(orange == 2, "toy graph: expected 2 orange predictions, got " +
                           std::to_string(orange));
  require(none == 4, "toy graph: expected 4 no_predictions, got " +
                         std::to_string(none));

  const ClosedSetReport report = score_closed(p, split, catalog);
  require_pct(report.precision(), 100.0, "toy graph precision");
  require_pct(report.recall(), 60.0, "toy graph recall");
}

// --- criterion 4: homography suite -----------------------------------------

Correspondence corr(double xa, double ya, double xb, double yb) {
  Correspondence c;
  c.a = Keypoint{float(xa), float(ya), 1.0f, 0.0f};
  c.b = Keypoint{float(xb), float(yb), 1.0f, 0.0f};
  return c;
}

void criterion_homography() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coord(0.0, 1000.0);
  std::normal_distribution<double> noise(0.0, 0.5);

  // Known homographies with sigma = 0.5 px noise recovered within 1%.
  // Translations are kept at a few hundred pixels: with near-zero
  // translation the matrix norm is so small that sub-pixel estimation noise
  // alone dominates the relative error, even though the fitted map is
  // geometrically accurate.
  std::uniform_real_distribution<double> pert(-0.05, 0.05);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
    h(0, 0) += pert(rng);
    h(1, 1) += pert(rng);
    h(0, 1) = pert(rng);
    h(1, 0) = pert(rng);
    h(0, 2) = 200.0 + 2000.0 * pert(rng);
    h(1, 2) = -200.0 + 2000.0 * pert(rng);
    h(2, 0) = pert(rng) * 1e-4;
    h(2, 1) = pert(rng) * 1e-4;
    h.normalize();

    std::vector<Correspondence> cs;
    for (int i = 0; i < 40; ++i) {
      const double xa = coord(rng);
      const double ya = coord(rng);
      const Eigen::Vector3d q = h * Eigen::Vector3d(xa, ya, 1.0);
      cs.push_back(corr(xa, ya, q.x() / q.z() + noise(rng),
                        q.y() / q.z() + noise(rng)));
    }
    const ProjectiveTransform t = fit_projective(cs);
    const double err = std::min((t.T - h).norm(), (t.T + h).norm()) / h.norm();
    require(err < 0.01, "noisy homography trial " + std::to_string(trial) +
                            ": relative error " + std::to_string(err));
  }

  // Collinear configurations are rejected.
  std::vector<Correspondence> collinear;
  for (int i = 0; i < 8; ++i)
    collinear.push_back(corr(10.0 * i, 20.0 * i, 10.0 * i + 5, 20.0 * i + 5));
  bool threw = false;
  try {
    fit_projective(collinear);
  } catch (const DegenerateConfigurationError&) {
    threw = true;
  }
  require(threw, "collinear correspondences were not rejected");

  // Random correspondences rejected by the condition-number gates >= 95%.
  const VerifyThresholds gates;
  int rejected = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Correspondence> cs;
    for (int i = 0; i < 10; ++i)
      cs.push_back(corr(coord(rng), coord(rng), coord(rng), coord(rng)));
    try {
      const ProjectiveTransform t = fit_projective(cs);
      if (condition_number(t.T) >= gates.max_cond_T ||
          condition_number(Eigen::MatrixXd(t.top_left())) >=
              gates.max_cond_T_tilde)
        ++rejected;
    } catch (const FitError&) {
      ++rejected;
    }
  }
  require(rejected >= 950, "random correspondences: only " +
                               std::to_string(rejected) + "/1000 rejected");

  // Exact condition numbers.
  require(std::fabs(condition_number(Eigen::Matrix3d::Identity()) - 1.0) < 1e-9,
          "cond(I) != 1");
  Eigen::Matrix2d d = Eigen::Matrix2d::Zero();
  d(0, 0) = 100.0;
  d(1, 1) = 1.0;
  require(std::fabs(condition_number(d) - 100.0) < 1e-9, "cond(diag(100,1)) != 100");
}

// --- criterion 5: split invariants over 1000 randomized catalogs -----------

Catalog random_catalog(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_indiv(1, 8);
  std::uniform_int_distribution<int> n_days(1, 5);
  std::uniform_int_distribution<int> n_imgs(1, 3);
  std::uniform_int_distribution<long> day(0, 1200);

  std::vector<ImageRecord> records;
  const int ni = n_indiv(rng);
  for (int i = 0; i < ni; ++i) {
    std::set<long> days;
    const int nd = n_days(rng);
    while (int(days.size()) < nd) days.insert(day(rng));
    int img = 0;
    for (long d : days) {
      const Date date = parse_date("2015-01-01") + std::chrono::days(d);
      for (int k = 0; k < n_imgs(rng); ++k) {
        ImageRecord r = rec("i" + std::to_string(i) + "_" + std::to_string(img++),
                            "indiv" + std::to_string(i), nullptr);
        r.date = date;
        records.push_back(std::move(r));
      }
    }
  }
  return Catalog::from_records(std::move(records));
}

void criterion_split_invariants() {
  std::mt19937_64 rng(31);
  int tp_checked = 0, tc_checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Catalog c = random_catalog(rng);

    Split tp;
    try {
      tp = time_proportion_split(c, 0.3 + 0.4 * (trial % 5) / 4.0);
    } catch (const SplitError&) {
      continue;  // no multi-day individual in this draw
    }
    ++tp_checked;

    // No (individual, day) group straddles the reference/query boundary.
    std::map<std::pair<std::string, Date>, std::pair<bool, bool>> sides;
    for (const auto& r : c.records()) {
      if (!r.has_identity() || !r.date) continue;
      auto& [in_ref, in_query] = sides[{r.individual_id, *r.date}];
      in_ref = in_ref || tp.reference_ids.count(r.image_id);
      in_query = in_query || tp.query_ids.count(r.image_id);
    }
    for (const auto& [key, flags] : sides)
      require(!(flags.first && flags.second),
              "time-proportion straddles a day for " + key.first);

    // Single-day individuals are always excluded.
    std::map<std::string, std::set<Date>> days;
    for (const auto& r : c.records())
      if (r.has_identity() && r.date) days[r.individual_id].insert(*r.date);
    for (const auto& r : c.records()) {
      if (!r.has_identity() || !r.date) continue;
      if (days[r.individual_id].size() == 1)
        require(tp.excluded_ids.count(r.image_id) == 1,
                "single-day image " + r.image_id + " not excluded");
    }

    // Matched random split preserves per-individual reference counts.
    const Split rm = random_split_matched(c, tp, rng());
    std::map<std::string, int> want, got;
    for (const auto& id : tp.reference_ids) want[c.record(id).individual_id]++;
    for (const auto& id : rm.reference_ids) got[c.record(id).individual_id]++;
    require(want == got, "matched-random changed per-individual reference counts");

    // Time-cutoff ordering: max(ref dates) < cutoff <= min(query dates).
    const DatasetStats stats = c.stats();
    if (stats.span_days > 1) {
      std::optional<Date> lo;
      for (const auto& r : c.records())
        if (r.date && (!lo || *r.date < *lo)) lo = r.date;
      const Date cutoff = *lo + std::chrono::days(stats.span_days / 2 + 1);
      try {
        const Split tc = time_cutoff_split(c, cutoff, std::nullopt);
        ++tc_checked;
        for (const auto& id : tc.reference_ids)
          require(*c.record(id).date < cutoff, "reference image on/after cutoff");
        for (const auto& id : tc.query_ids)
          require(*c.record(id).date >= cutoff, "query image before cutoff");
      } catch (const SplitError&) {
        // an empty side is a legal outcome for this cutoff
      }
    }
  }
  require(tp_checked >= 500, "too few time-proportion trials exercised");
  require(tc_checked >= 250, "too few time-cutoff trials exercised");
}

// --- criterion 6: bias reproduction on the synthetic corpus ----------------

PipelineConfig bias_config() {
  PipelineConfig cfg;
  cfg.synth = SynthConfig{};  // 50 individuals x 10 encounters x 3 images, 5 years
  cfg.features.max_keypoints = 150;
  cfg.verify.max_residual = 10.0;
  cfg.pair_blocking = true;
  cfg.blocking_k = 50;

  SplitSpec tp;
  tp.name = "timeprop";
  tp.policy = SplitPolicy::time_proportion;
  tp.proportion = 0.5;
  SplitSpec rm;
  rm.name = "random";
  rm.policy = SplitPolicy::random_matched;
  rm.template_name = "timeprop";
  rm.seed = 11;
  cfg.splits = {tp, rm};
  return cfg;
}

void criterion_bias(const RunResult& res) {
  const double recall_time = res.splits.at("timeprop").closed.recall();
  const double recall_random = res.splits.at("random").closed.recall();
  require(recall_random - recall_time >= 0.20,
          "recall gap " + std::to_string((recall_random - recall_time) * 100.0) +
              "pp < 20pp (random " + std::to_string(recall_random * 100.0) +
              "%, time-aware " + std::to_string(recall_time * 100.0) + "%)");

  // Time-gap curve: non-increasing over populated buckets, with a clear
  // same-day vs. beyond-a-year drop.
  double prev = 2.0;
  for (const auto& b : res.curve.buckets) {
    if (b.n_pairs == 0) continue;
    require(b.proportion() <= prev + 1e-12,
            "time-gap curve increases at bucket '" + b.label + "'");
    prev = b.proportion();
  }
  const auto& first = res.curve.buckets.front();
  const auto& last = res.curve.buckets.back();
  require(first.n_pairs > 0 && last.n_pairs > 0,
          "same-day or >1-year bucket is empty");
  require(first.proportion() - last.proportion() >= 0.2,
          "same-day minus >1-year proportion " +
              std::to_string(first.proportion() - last.proportion()) + " < 0.2");
}

// --- criterion 7: byte-identical report bundles ----------------------------

void criterion_determinism() {
  PipelineConfig cfg;
  SynthConfig synth;
  synth.n_individuals = 10;
  synth.encounters_per_individual = 4;
  synth.images_per_encounter = 2;
  synth.image_size = 128;
  cfg.synth = synth;
  cfg.features.max_keypoints = 100;
  cfg.verify.max_residual = 10.0;
  SplitSpec tp;
  tp.name = "timeprop";
  tp.policy = SplitPolicy::time_proportion;
  tp.proportion = 0.5;
  SplitSpec rm;
  rm.name = "random";
  rm.policy = SplitPolicy::random_matched;
  rm.template_name = "timeprop";
  rm.seed = 3;
  cfg.splits = {tp, rm};

  const fs::path out1 = temp_dir("determinism1");
  const fs::path out2 = temp_dir("determinism2");
  run_pipeline(cfg, out1.string());
  run_pipeline(cfg, out2.string());

  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(out1 / "reports")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), out1);
    require(slurp(entry.path()) == slurp(out2 / rel),
            "report differs between runs: " + rel.string());
    ++compared;
  }
  require(compared >= 6, "report bundle unexpectedly small");
  require(slurp(out1 / "decisions" / "decisions.csv") ==
              slurp(out2 / "decisions" / "decisions.csv"),
          "decision files differ between runs");
}

// --- criterion 8: self-match sanity ----------------------------------------

void criterion_self_match() {
  SynthConfig synth;
  synth.n_individuals = 10;
  synth.encounters_per_individual = 5;
  synth.images_per_encounter = 2;
  synth.image_size = 128;
  const fs::path dir = temp_dir("selfmatch");
  const SynthResult gen = generate_dataset(synth, dir.string());
  const Catalog catalog = Catalog::load(gen.manifest_path);
  require(catalog.size() == 100, "expected 100 synthetic images");

  for (const auto& r : catalog.records()) {
    FeatureSet a = extract_features_from_file((dir / r.image_path).string());
    a.image_id = r.image_id;
    FeatureSet b = a;
    b.image_id = r.image_id + "+";
    const VerificationDecision d = verify_pair(a, b);
    require(d.accepted, "self-match rejected for " + r.image_id +
                            " (reason: " + d.reason + ")");
    require(d.cond_T < 1.01 && d.cond_T_tilde < 1.01,
            "self-match conditioning for " + r.image_id + ": cond_T " +
                std::to_string(d.cond_T) + ", cond_T_tilde " +
                std::to_string(d.cond_T_tilde));
  }
}

// --- driver ----------------------------------------------------------------

int run_criterion(int number, const std::string& name, double budget_s,
                  const std::function<void()>& body) {
  const auto start = std::chrono::steady_clock::now();
  std::string failure;
  try {
    body();
  } catch (const std::exception& e) {
    failure = e.what();
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  if (failure.empty() && elapsed > budget_s)
    failure = "runtime " + std::to_string(elapsed) + "s exceeds budget " +
              std::to_string(budget_s) + "s";
  std::printf("criterion %d (%s): %s (%.2fs)\n", number, name.c_str(),
              failure.empty() ? "PASS" : "FAIL", elapsed);
  if (!failure.empty()) std::printf("  -> %s\n", failure.c_str());
  std::fflush(stdout);
  return failure.empty() ? 0 : 1;
}

}  // namespace

int main() {
  int failures = 0;
  failures += run_criterion(1, "closed-set metric oracle", 1.0,
                            criterion_closed_oracle);
  failures += run_criterion(2, "open-set metric oracle", 1.0,
                            criterion_open_oracle);
  failures += run_criterion(3, "two-identity toy graph", 1.0, criterion_toy_graph);
  failures += run_criterion(4, "homography suite", 10.0, criterion_homography);
  failures += run_criterion(5, "split policy invariants", 30.0,
                            criterion_split_invariants);

  // Criterion 6 runs the full pipeline once; its wall time also bounds 7.
  RunResult bias_result;
  double bias_elapsed = 0;
  failures += run_criterion(6, "temporal bias reproduction", 900.0, [&] {
    const auto start = std::chrono::steady_clock::now();
    bias_result = run_pipeline(bias_config(), temp_dir("bias").string());
    bias_elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    criterion_bias(bias_result);
  });
  failures += run_criterion(7, "byte-identical report bundles",
                            std::max(2.0 * bias_elapsed, 60.0),
                            criterion_determinism);
  failures += run_criterion(8, "self-match sanity", 60.0, criterion_self_match);

  std::printf("%s: %d/8 criteria passed\n", failures ? "FAILURE" : "SUCCESS",
              8 - failures);
  return failures ? 1 : 0;
}
