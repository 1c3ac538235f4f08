#include "wildreid/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wildreid/parallel.hpp"
#include "wildreid/rng.hpp"

namespace wildreid {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

SynthConfig synth_from_json(const json& j) {
  SynthConfig c;
  if (j.contains("n_individuals")) c.n_individuals = j["n_individuals"];
  if (j.contains("encounters_per_individual"))
    c.encounters_per_individual = j["encounters_per_individual"];
  if (j.contains("images_per_encounter"))
    c.images_per_encounter = j["images_per_encounter"];
  if (j.contains("date_start")) c.date_start = parse_date(j["date_start"]);
  if (j.contains("date_end")) c.date_end = parse_date(j["date_end"]);
  if (j.contains("image_size")) c.image_size = j["image_size"];
  if (j.contains("drift_rate")) c.drift_rate = j["drift_rate"];
  if (j.contains("warp_magnitude")) c.warp_magnitude = j["warp_magnitude"];
  if (j.contains("tint_magnitude")) c.tint_magnitude = j["tint_magnitude"];
  if (j.contains("blur_max_sigma")) c.blur_max_sigma = j["blur_max_sigma"];
  if (j.contains("noise_sigma")) c.noise_sigma = j["noise_sigma"];
  if (j.contains("min_cells")) c.min_cells = j["min_cells"];
  if (j.contains("max_cells")) c.max_cells = j["max_cells"];
  if (j.contains("encounter_min_gap_days"))
    c.encounter_min_gap_days = j["encounter_min_gap_days"];
  if (j.contains("master_seed")) c.master_seed = j["master_seed"];
  return c;
}

std::string synth_fingerprint(const SynthConfig& c) {
  std::ostringstream ss;
  ss << c.n_individuals << '|' << c.encounters_per_individual << '|'
     << c.images_per_encounter << '|' << format_date(c.date_start) << '|'
     << format_date(c.date_end) << '|' << c.image_size << '|' << c.drift_rate << '|'
     << c.warp_magnitude << '|' << c.tint_magnitude << '|' << c.blur_max_sigma << '|'
     << c.noise_sigma << '|' << c.min_cells << '|' << c.max_cells << '|'
     << c.encounter_min_gap_days << '|' << c.master_seed;
  return ss.str();
}

std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a(std::string_view(buf, std::size_t(in.gcount())), h);
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }

  PipelineConfig c;
  try {
    if (j.contains("manifest")) c.manifest_path = j["manifest"].get<std::string>();
    if (j.contains("synth")) c.synth = synth_from_json(j["synth"]);
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("workers")) c.workers = j["workers"].get<unsigned>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("pair_blocking")) c.pair_blocking = j["pair_blocking"].get<bool>();
    if (j.contains("blocking_k")) c.blocking_k = j["blocking_k"].get<int>();
    if (j.contains("max_hops") && !j["max_hops"].is_null())
      c.max_hops = j["max_hops"].get<std::size_t>();

    if (j.contains("features")) {
      const auto& f = j["features"];
      if (f.contains("max_keypoints")) c.features.max_keypoints = f["max_keypoints"];
      if (f.contains("octave_layers")) c.features.octave_layers = f["octave_layers"];
      if (f.contains("contrast_threshold"))
        c.features.contrast_threshold = f["contrast_threshold"];
      if (f.contains("edge_threshold")) c.features.edge_threshold = f["edge_threshold"];
      if (f.contains("sigma")) c.features.sigma = f["sigma"];
    }
    if (j.contains("verify")) {
      const auto& v = j["verify"];
      if (v.contains("max_cond_T")) c.verify.max_cond_T = v["max_cond_T"];
      if (v.contains("max_cond_T_tilde"))
        c.verify.max_cond_T_tilde = v["max_cond_T_tilde"];
      if (v.contains("max_residual") && !v["max_residual"].is_null())
        c.verify.max_residual = v["max_residual"].get<double>();
      if (v.contains("top_pairs")) c.verify.top_pairs = v["top_pairs"];
    }
    for (const auto& s : j.value("splits", json::array())) {
      SplitSpec spec;
      spec.name = s.at("name").get<std::string>();
      spec.policy = parse_split_policy(s.at("policy").get<std::string>());
      if (s.contains("proportion")) spec.proportion = s["proportion"];
      if (s.contains("cutoff")) spec.cutoff = parse_date(s["cutoff"]);
      if (s.contains("window_days")) {
        if (s["window_days"].is_null()) spec.window_days = std::nullopt;
        else spec.window_days = s["window_days"].get<long>();
      }
      if (s.contains("template")) spec.template_name = s["template"].get<std::string>();
      if (s.contains("seed")) spec.seed = s["seed"].get<std::uint64_t>();
      c.splits.push_back(std::move(spec));
    }
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }

  if (c.splits.empty()) throw ConfigError("config needs at least one split spec");
  if (bool(c.manifest_path) == bool(c.synth))
    throw ConfigError("config needs exactly one of 'manifest' or 'synth'");
  std::set<std::string> names;
  for (const auto& s : c.splits) {
    if (!names.insert(s.name).second)
      throw ConfigError("duplicate split name '" + s.name + "'");
    if (s.policy == SplitPolicy::random_matched && s.template_name.empty())
      throw ConfigError("split '" + s.name + "': random_matched needs a template");
    if (s.policy == SplitPolicy::time_cutoff && !s.cutoff)
      throw ConfigError("split '" + s.name + "': time_cutoff needs a cutoff date");
  }
  return c;
}

RunResult run_pipeline(const PipelineConfig& config,
                       const std::string& out_dir_override) {
  const std::string out_dir =
      out_dir_override.empty() ? config.out_dir : out_dir_override;
  if (config.splits.empty()) throw ConfigError("no split specs");
  if (bool(config.manifest_path) == bool(config.synth))
    throw ConfigError("exactly one of manifest_path or synth must be set");

  const char* cache_env = std::getenv("WILDREID_CACHE_ROOT");
  const fs::path cache_root = cache_env && *cache_env ? fs::path(cache_env)
                                                      : fs::path(out_dir);
  for (const char* sub : {"catalog", "splits", "decisions", "graph", "reports"})
    fs::create_directories(fs::path(out_dir) / sub);
  for (const char* sub : {"features", "decisions"})
    fs::create_directories(cache_root / sub);

  RunResult result;
  result.out_dir = out_dir;

  // --- catalog stage -------------------------------------------------------
  std::string manifest_path;
  std::string data_root;  // image paths are relative to this
  try {
    if (config.synth) {
      const fs::path data_dir = fs::path(out_dir) / "data";
      const fs::path meta = data_dir / "synth-meta.json";
      const std::string fingerprint = synth_fingerprint(*config.synth);
      bool reuse = false;
      if (fs::exists(meta) && fs::exists(data_dir / "manifest.csv")) {
        std::ifstream min(meta);
        json m = json::parse(min, nullptr, false);
        reuse = !m.is_discarded() && m.value("fingerprint", "") == fingerprint;
      }
      if (!reuse) {
        generate_dataset(*config.synth, data_dir.string());
        // Append the fingerprint used for cache reuse.
        std::ifstream min(meta);
        json m;
        min >> m;
        min.close();
        m["fingerprint"] = fingerprint;
        std::ofstream mout(meta);
        mout << m.dump(2) << '\n';
      }
      manifest_path = (data_dir / "manifest.csv").string();
      data_root = data_dir.string();
    } else {
      manifest_path = *config.manifest_path;
      data_root = fs::path(manifest_path).parent_path().string();
    }
    result.catalog = Catalog::load(manifest_path);
    result.catalog.save((fs::path(out_dir) / "catalog" / "catalog.csv").string());
  } catch (const std::exception& e) {
    throw StageError("catalog", e.what());
  }
  const Catalog& catalog = result.catalog;

  // --- split stage ---------------------------------------------------------
  std::map<std::string, Split> splits;
  try {
    for (const auto& spec : config.splits) {
      Split s;
      switch (spec.policy) {
        case SplitPolicy::time_proportion:
          s = time_proportion_split(catalog, spec.proportion);
          break;
        case SplitPolicy::time_cutoff:
          s = time_cutoff_split(catalog, *spec.cutoff, spec.window_days);
          break;
        case SplitPolicy::random_matched: {
          auto it = splits.find(spec.template_name);
          if (it == splits.end())
            throw SplitError("split '" + spec.name + "': template '" +
                             spec.template_name + "' not generated yet");
          s = random_split_matched(catalog, it->second,
                                   spec.seed ? spec.seed : config.seed);
          break;
        }
      }
      save_split(s, (fs::path(out_dir) / "splits" / (spec.name + ".csv")).string());
      splits.emplace(spec.name, std::move(s));
    }
  } catch (const std::exception& e) {
    throw StageError("split", e.what());
  }

  // --- extract stage -------------------------------------------------------
  std::vector<FeatureSet> features(catalog.size());
  std::atomic<std::size_t> cache_hits{0};
  try {
    const auto& records = catalog.records();
    parallel_for(
        records.size(),
        [&](std::size_t i) {
          const auto& r = records[i];
          const fs::path img_path = fs::path(data_root) / r.image_path;
          const std::string key =
              feature_cache_key(img_path.string(), r.bbox, config.features);
          const fs::path cache_file = cache_root / "features" / (key + ".wrfs");
          if (fs::exists(cache_file)) {
            features[i] = load_feature_set(cache_file.string(), r.image_id);
            cache_hits.fetch_add(1);
          } else {
            features[i] =
                extract_features_from_file(img_path.string(), r.bbox, config.features);
            features[i].image_id = r.image_id;
            save_feature_set(features[i], cache_file.string());
          }
        },
        config.workers);
  } catch (const std::exception& e) {
    throw StageError("extract", e.what());
  }
  result.cached_features = cache_hits.load();

  // --- verify stage --------------------------------------------------------
  std::vector<VerificationDecision> decisions;
  try {
    // Order feature sets by image id so pair enumeration is canonical.
    std::vector<std::size_t> order(features.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return features[a].image_id < features[b].image_id;
    });

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (config.pair_blocking && int(features.size()) > config.blocking_k) {
      // Cheap global-descriptor prefilter: mean descriptor per image,
      // keep the blocking_k nearest neighbours of every image.
      const std::size_t n = features.size();
      std::vector<std::array<float, 128>> mean(n);
      for (std::size_t i = 0; i < n; ++i) {
        mean[i].fill(0.f);
        for (const auto& d : features[i].descriptors)
          for (int c = 0; c < 128; ++c) mean[i][c] += d[c];
        if (!features[i].descriptors.empty())
          for (int c = 0; c < 128; ++c) mean[i][c] /= float(features[i].size());
      }
      std::set<std::pair<std::size_t, std::size_t>> keep;
      for (std::size_t oi = 0; oi < n; ++oi) {
        std::vector<std::pair<float, std::size_t>> near;
        for (std::size_t oj = 0; oj < n; ++oj) {
          if (oi == oj) continue;
          float d2 = 0;
          for (int c = 0; c < 128; ++c) {
            const float d = mean[order[oi]][c] - mean[order[oj]][c];
            d2 += d * d;
          }
          near.emplace_back(d2, oj);
        }
        const std::size_t k = std::min<std::size_t>(config.blocking_k, near.size());
        std::partial_sort(near.begin(), near.begin() + k, near.end());
        for (std::size_t t = 0; t < k; ++t)
          keep.insert(std::minmax(oi, near[t].second));
      }
      pairs.assign(keep.begin(), keep.end());
    } else {
      for (std::size_t i = 0; i < features.size(); ++i)
        for (std::size_t j = i + 1; j < features.size(); ++j)
          pairs.emplace_back(i, j);
    }

    std::uint64_t key = file_hash(manifest_path);
    key = mix_seed(key, config.features.hash());
    {
      std::ostringstream vs;
      vs << config.verify.max_cond_T << '|' << config.verify.max_cond_T_tilde << '|'
         << (config.verify.max_residual ? *config.verify.max_residual : -1.0) << '|'
         << config.verify.top_pairs << '|' << config.pair_blocking << '|'
         << config.blocking_k;
      key = mix_seed(key, fnv1a(vs.str()));
    }
    const fs::path dec_file = cache_root / "decisions" / (hex64(key) + ".csv");
    if (fs::exists(dec_file)) {
      decisions = load_decisions(dec_file.string());
      result.cached_decisions = 1;
    } else {
      decisions.resize(pairs.size());
      parallel_for(
          pairs.size(),
          [&](std::size_t p) {
            decisions[p] = verify_pair(features[order[pairs[p].first]],
                                       features[order[pairs[p].second]],
                                       config.verify);
          },
          config.workers);
      save_decisions(decisions, dec_file.string());
    }
    save_decisions(decisions,
                   (fs::path(out_dir) / "decisions" / "decisions.csv").string());
  } catch (const std::exception& e) {
    throw StageError("verify", e.what());
  }

  // --- predict + score stages ----------------------------------------------
  try {
    for (const auto& spec : config.splits) {
      const Split& split = splits.at(spec.name);
      SplitOutcome outcome;
      outcome.split = split;
      outcome.kind = classify_problem(split, catalog);

      // Only images of this split's universe take part in its graph.
      std::vector<VerificationDecision> in_split;
      auto in_universe = [&](const std::string& id) {
        return split.reference_ids.count(id) || split.query_ids.count(id);
      };
      for (const auto& d : decisions)
        if (in_universe(d.image_a) && in_universe(d.image_b)) in_split.push_back(d);

      const MatchGraph graph = build_match_graph(in_split, catalog);
      const PredictionSet preds =
          propagate_identities(graph, split, catalog, config.max_hops);

      const fs::path gdir = fs::path(out_dir) / "graph";
      save_edge_list(graph, (gdir / (spec.name + ".edges.txt")).string());
      save_component_summary(graph, split, catalog,
                             (gdir / (spec.name + ".components.csv")).string());
      {
        std::ofstream pout((gdir / (spec.name + ".predictions.csv")).string());
        pout << "image_id,status,predicted_id\n";
        for (const auto& [id, p] : preds.by_query) {
          const char* status = p.status == Prediction::predicted ? "predicted"
                               : p.status == Prediction::conflict ? "conflict"
                                                                  : "no_prediction";
          pout << id << ',' << status << ',' << p.individual_id << '\n';
        }
      }

      outcome.closed = score_closed(preds, split, catalog);
      outcome.open = score_open(preds, split, catalog);
      const fs::path rdir = fs::path(out_dir) / "reports";
      save_closed_report(outcome.closed, (rdir / (spec.name + ".closed.csv")).string());
      save_open_report(outcome.open, (rdir / (spec.name + ".open.csv")).string());
      result.splits.emplace(spec.name, std::move(outcome));
    }

    result.curve = time_gap_curve(decisions, catalog);
    save_time_gap_curve(result.curve,
                        (fs::path(out_dir) / "reports" / "timegap.csv").string());

    // Bias summaries: every matched random split vs its template.
    for (const auto& spec : config.splits) {
      if (spec.policy != SplitPolicy::random_matched) continue;
      const auto& a = result.splits.at(spec.name);
      const auto& b = result.splits.at(spec.template_name);
      const bool open = a.kind.kind == ProblemKind::open_set ||
                        b.kind.kind == ProblemKind::open_set;
      const BiasSummary bias =
          open ? compare_splits(metrics_of(a.open), metrics_of(b.open))
               : compare_splits(metrics_of(a.closed), metrics_of(b.closed));
      save_bias_summary(bias, (fs::path(out_dir) / "reports" /
                               ("compare_" + spec.name + "_vs_" + spec.template_name +
                                ".csv"))
                                  .string());
    }

    // Run manifest: everything needed to reproduce, nothing time-dependent.
    json manifest;
    manifest["version"] = kVersion;
    manifest["rng"] = kRngName;
    manifest["seed"] = config.seed;
    manifest["catalog_hash"] = hex64(file_hash(manifest_path));
    manifest["feature_params_hash"] = hex64(config.features.hash());
    manifest["n_images"] = catalog.size();
    manifest["pair_blocking"] = config.pair_blocking;
    for (const auto& spec : config.splits) manifest["splits"].push_back(spec.name);
    std::ofstream mout((fs::path(out_dir) / "reports" / "run-manifest.json").string());
    mout << manifest.dump(2) << '\n';
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("score", e.what());
  }

  return result;
}

MetricSummary metrics_of(const ClosedSetReport& r) {
  return {r.precision(), r.recall(), r.n_query};
}

MetricSummary metrics_of(const OpenSetReport& r) {
  return {r.precision(), r.recall(), r.n_query};
}

BiasSummary compare_splits(const MetricSummary& a, const MetricSummary& b) {
  if (a.n_query != b.n_query)
    throw ConfigError("compare_splits: mismatched query universes (" +
                      std::to_string(a.n_query) + " vs " + std::to_string(b.n_query) +
                      ")");
  BiasSummary s;
  s.precision_a = a.precision;
  s.precision_b = b.precision;
  s.recall_a = a.recall;
  s.recall_b = b.recall;
  s.recall_delta = a.recall - b.recall;
  s.overestimation_ratio =
      b.recall > 0 ? a.recall / b.recall : std::numeric_limits<double>::infinity();
  return s;
}

void save_bias_summary(const BiasSummary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write bias summary '" + path + "'");
  out << "metric,time_unaware,time_aware,delta,ratio\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "precision,%.6f,%.6f,%.6f,\n", summary.precision_a,
                summary.precision_b, summary.precision_a - summary.precision_b);
  out << buf;
  std::snprintf(buf, sizeof(buf), "recall,%.6f,%.6f,%.6f,%.6f\n", summary.recall_a,
                summary.recall_b, summary.recall_delta, summary.overestimation_ratio);
  out << buf;
}

}  // namespace wildreid
