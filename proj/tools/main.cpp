// wildreid command-line front end: runs the full re-identification pipeline
// or any single stage on prior stage outputs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "wildreid/evaluation.hpp"
#include "wildreid/parallel.hpp"
#include "wildreid/pipeline.hpp"

namespace fs = std::filesystem;
using namespace wildreid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitStage = 2;

struct DateOption {
  std::string text;
  std::optional<Date> value() const {
    if (text.empty()) return std::nullopt;
    return parse_date(text);
  }
};

void print_stats(const Catalog& catalog) {
  const DatasetStats s = catalog.stats();
  std::cout << "images:             " << s.n_image << '\n'
            << "individuals:        " << s.n_indiv << '\n'
            << "encounters:         " << s.n_enc << '\n'
            << "span (days):        " << s.span_days << '\n'
            << "timestamp coverage: " << format_percent(s.timestamp_coverage) << '\n';
}

PredictionSet load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty predictions file '" + path + "'");
  PredictionSet ps;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id, status, pred;
    std::getline(ss, id, ',');
    std::getline(ss, status, ',');
    std::getline(ss, pred, ',');
    Prediction p;
    if (status == "predicted") {
      p.status = Prediction::predicted;
      p.individual_id = pred;
    } else if (status == "conflict") {
      p.status = Prediction::conflict;
    }
    ps.by_query.emplace(id, std::move(p));
  }
  return ps;
}

// First data row of a report CSV written by save_closed_report/save_open_report.
MetricSummary load_report_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report '" + path + "'");
  std::string header, row;
  if (!std::getline(in, header) || !std::getline(in, row))
    throw std::runtime_error("report '" + path + "' has no data row");
  std::vector<long> counts;
  std::istringstream ss(row);
  std::string field;
  while (std::getline(ss, field, ',')) {
    if (field.empty() || field.find('%') != std::string::npos || field == "NA") break;
    counts.push_back(std::stol(field));
  }
  if (header.rfind("correct,wrong,no_prediction", 0) == 0 && counts.size() >= 4) {
    const auto r = closed_report_from_counts(counts[0], counts[1], counts[2]);
    return metrics_of(r);
  }
  if (header.rfind("pred_correct,", 0) == 0 && counts.size() >= 5) {
    const auto r =
        open_report_from_counts(counts[0], counts[1], counts[2], counts[3]);
    return metrics_of(r);
  }
  throw std::runtime_error("unrecognized report layout in '" + path + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wildlife photo re-identification toolkit"};
  app.require_subcommand(1);

  // --- synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic encounter dataset");
  SynthConfig synth_cfg;
  std::string synth_out = "synth-data";
  DateOption synth_start{format_date(synth_cfg.date_start)};
  DateOption synth_end{format_date(synth_cfg.date_end)};
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--individuals", synth_cfg.n_individuals);
  synth->add_option("--encounters", synth_cfg.encounters_per_individual);
  synth->add_option("--images", synth_cfg.images_per_encounter);
  synth->add_option("--start", synth_start.text, "first date (YYYY-MM-DD)");
  synth->add_option("--end", synth_end.text, "last date (YYYY-MM-DD)");
  synth->add_option("--size", synth_cfg.image_size);
  synth->add_option("--drift", synth_cfg.drift_rate);
  synth->add_option("--warp", synth_cfg.warp_magnitude);
  synth->add_option("--tint", synth_cfg.tint_magnitude);
  synth->add_option("--blur", synth_cfg.blur_max_sigma);
  synth->add_option("--noise", synth_cfg.noise_sigma);
  synth->add_option("--seed", synth_cfg.master_seed);

  // --- ingest --------------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "validate a manifest and print stats");
  std::string ingest_manifest, ingest_out;
  ingest->add_option("--manifest", ingest_manifest)->required();
  ingest->add_option("--out", ingest_out, "write the normalized catalog here");

  // --- split ---------------------------------------------------------------
  auto* split_cmd = app.add_subcommand("split", "generate a reference/query split");
  std::string split_manifest, split_policy = "time_proportion", split_out = "split.csv";
  std::string split_template;
  double split_p = 0.5;
  DateOption split_cutoff;
  long split_window = 365;
  std::uint64_t split_seed = 1;
  split_cmd->add_option("--manifest", split_manifest)->required();
  split_cmd->add_option("--policy", split_policy,
                        "time_proportion | time_cutoff | random_matched");
  split_cmd->add_option("--proportion", split_p);
  split_cmd->add_option("--cutoff", split_cutoff.text, "cutoff date (YYYY-MM-DD)");
  split_cmd->add_option("--window-days", split_window,
                        "query window after cutoff; -1 = everything after");
  split_cmd->add_option("--template", split_template,
                        "template split file (random_matched)");
  split_cmd->add_option("--seed", split_seed);
  split_cmd->add_option("--out", split_out);

  // --- extract -------------------------------------------------------------
  auto* extract = app.add_subcommand("extract", "extract features for all images");
  std::string ex_manifest, ex_out = "features";
  unsigned ex_workers = 0;
  FeatureParams ex_params;
  extract->add_option("--manifest", ex_manifest)->required();
  extract->add_option("--out", ex_out, "feature cache directory");
  extract->add_option("--workers", ex_workers);
  extract->add_option("--max-keypoints", ex_params.max_keypoints);
  extract->add_option("--contrast-threshold", ex_params.contrast_threshold);
  extract->add_option("--edge-threshold", ex_params.edge_threshold);

  // --- verify --------------------------------------------------------------
  auto* verify = app.add_subcommand("verify", "verify all image pairs");
  std::string vf_manifest, vf_features = "features", vf_out = "decisions.csv";
  unsigned vf_workers = 0;
  VerifyThresholds vf_thresholds;
  verify->add_option("--manifest", vf_manifest)->required();
  verify->add_option("--features", vf_features, "directory written by extract");
  verify->add_option("--out", vf_out);
  verify->add_option("--workers", vf_workers);
  verify->add_option("--max-cond-t", vf_thresholds.max_cond_T);
  verify->add_option("--max-cond-t-tilde", vf_thresholds.max_cond_T_tilde);
  double vf_residual = -1;
  verify->add_option("--max-residual", vf_residual, "optional residual gate; <0 = off");

  // --- predict -------------------------------------------------------------
  auto* predict = app.add_subcommand("predict", "propagate identities over the graph");
  std::string pr_manifest, pr_split, pr_decisions, pr_prefix = "graph/run";
  long pr_max_hops = -1;
  predict->add_option("--manifest", pr_manifest)->required();
  predict->add_option("--split", pr_split)->required();
  predict->add_option("--decisions", pr_decisions)->required();
  predict->add_option("--out-prefix", pr_prefix);
  predict->add_option("--max-hops", pr_max_hops, "hop limit; -1 = unbounded");

  // --- score ---------------------------------------------------------------
  auto* score = app.add_subcommand("score", "score predictions or the time-gap curve");
  std::string sc_manifest, sc_split, sc_predictions, sc_decisions;
  std::string sc_mode = "closed", sc_out;
  score->add_option("--manifest", sc_manifest)->required();
  score->add_option("--mode", sc_mode, "closed | open | accuracy | curve");
  score->add_option("--split", sc_split);
  score->add_option("--predictions", sc_predictions);
  score->add_option("--decisions", sc_decisions, "for --mode curve");
  score->add_option("--out", sc_out);

  // --- report --------------------------------------------------------------
  auto* report = app.add_subcommand("report", "print the report bundle of a run");
  std::string rp_dir;
  report->add_option("--run-dir", rp_dir)->required();

  // --- compare -------------------------------------------------------------
  auto* compare = app.add_subcommand("compare", "bias summary between two reports");
  std::string cp_a, cp_b, cp_out;
  compare->add_option("--report-a", cp_a, "time-unaware report CSV")->required();
  compare->add_option("--report-b", cp_b, "time-aware report CSV")->required();
  compare->add_option("--out", cp_out);

  // --- run -----------------------------------------------------------------
  auto* run = app.add_subcommand("run", "run the full pipeline from a config file");
  std::string run_config, run_out;
  unsigned run_workers = 0;
  bool run_workers_set = false;
  run->add_option("--config", run_config)->required();
  run->add_option("--out-dir", run_out, "override the config's out_dir");
  run->add_option("--workers", run_workers)->each([&](const std::string&) {
    run_workers_set = true;
  });

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      synth_cfg.date_start = *synth_start.value();
      synth_cfg.date_end = *synth_end.value();
      const SynthResult r = generate_dataset(synth_cfg, synth_out);
      std::cout << "wrote " << r.n_images << " images; manifest: " << r.manifest_path
                << '\n';
    } else if (*ingest) {
      const Catalog c = Catalog::load(ingest_manifest);
      print_stats(c);
      if (!ingest_out.empty()) c.save(ingest_out);
    } else if (*split_cmd) {
      const Catalog c = Catalog::load(split_manifest);
      Split s;
      const SplitPolicy policy = parse_split_policy(split_policy);
      if (policy == SplitPolicy::time_proportion) {
        s = time_proportion_split(c, split_p);
      } else if (policy == SplitPolicy::time_cutoff) {
        if (!split_cutoff.value()) throw SplitError("--cutoff is required");
        s = time_cutoff_split(c, *split_cutoff.value(),
                              split_window < 0 ? std::nullopt
                                               : std::optional<long>(split_window));
      } else {
        if (split_template.empty()) throw SplitError("--template is required");
        s = random_split_matched(c, load_split(split_template), split_seed);
      }
      save_split(s, split_out);
      const ProblemKind kind = classify_problem(s, c);
      std::cout << "reference: " << s.reference_ids.size()
                << "  query: " << s.query_ids.size()
                << "  excluded: " << s.excluded_ids.size() << "  ("
                << (kind.kind == ProblemKind::closed_set ? "closed" : "open")
                << "-set)\n";
    } else if (*extract) {
      const Catalog c = Catalog::load(ex_manifest);
      const fs::path root = fs::path(ex_manifest).parent_path();
      fs::create_directories(ex_out);
      const auto& records = c.records();
      std::vector<std::string> keys(records.size());
      parallel_for(
          records.size(),
          [&](std::size_t i) {
            const auto& r = records[i];
            const std::string img = (root / r.image_path).string();
            keys[i] = feature_cache_key(img, r.bbox, ex_params);
            const fs::path file = fs::path(ex_out) / (keys[i] + ".wrfs");
            if (!fs::exists(file)) {
              auto f = extract_features_from_file(img, r.bbox, ex_params);
              f.image_id = r.image_id;
              save_feature_set(f, file.string());
            }
          },
          ex_workers);
      std::ofstream index((fs::path(ex_out) / "index.csv").string());
      index << "image_id,file\n";
      for (std::size_t i = 0; i < records.size(); ++i)
        index << records[i].image_id << ',' << keys[i] << ".wrfs\n";
      std::cout << "extracted features for " << records.size() << " images\n";
    } else if (*verify) {
      const Catalog c = Catalog::load(vf_manifest);
      if (vf_residual >= 0) vf_thresholds.max_residual = vf_residual;
      std::ifstream index((fs::path(vf_features) / "index.csv").string());
      if (!index)
        throw std::runtime_error("missing index.csv in '" + vf_features +
                                 "' (run extract first)");
      std::string line;
      std::getline(index, line);
      std::vector<FeatureSet> features;
      while (std::getline(index, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        features.push_back(
            load_feature_set((fs::path(vf_features) / line.substr(comma + 1)).string(),
                             line.substr(0, comma)));
      }
      std::sort(features.begin(), features.end(),
                [](const FeatureSet& a, const FeatureSet& b) {
                  return a.image_id < b.image_id;
                });
      std::vector<std::pair<std::size_t, std::size_t>> pairs;
      for (std::size_t i = 0; i < features.size(); ++i)
        for (std::size_t j = i + 1; j < features.size(); ++j) pairs.emplace_back(i, j);
      std::vector<VerificationDecision> decisions(pairs.size());
      parallel_for(
          pairs.size(),
          [&](std::size_t p) {
            decisions[p] =
                verify_pair(features[pairs[p].first], features[pairs[p].second],
                            vf_thresholds);
          },
          vf_workers);
      save_decisions(decisions, vf_out);
      std::size_t accepted = 0;
      for (const auto& d : decisions) accepted += d.accepted;
      std::cout << "verified " << decisions.size() << " pairs, accepted " << accepted
                << '\n';
    } else if (*predict) {
      const Catalog c = Catalog::load(pr_manifest);
      const Split s = load_split(pr_split);
      auto decisions = load_decisions(pr_decisions);
      std::erase_if(decisions, [&](const VerificationDecision& d) {
        auto in = [&](const std::string& id) {
          return s.reference_ids.count(id) || s.query_ids.count(id);
        };
        return !in(d.image_a) || !in(d.image_b);
      });
      const MatchGraph g = build_match_graph(decisions, c);
      const PredictionSet preds = propagate_identities(
          g, s, c,
          pr_max_hops < 0 ? std::nullopt
                          : std::optional<std::size_t>(std::size_t(pr_max_hops)));
      fs::create_directories(fs::path(pr_prefix).parent_path());
      save_edge_list(g, pr_prefix + ".edges.txt");
      save_component_summary(g, s, c, pr_prefix + ".components.csv");
      std::ofstream pout(pr_prefix + ".predictions.csv");
      pout << "image_id,status,predicted_id\n";
      for (const auto& [id, p] : preds.by_query) {
        const char* status = p.status == Prediction::predicted ? "predicted"
                             : p.status == Prediction::conflict ? "conflict"
                                                                : "no_prediction";
        pout << id << ',' << status << ',' << p.individual_id << '\n';
      }
      std::cout << "predictions written to " << pr_prefix << ".predictions.csv\n";
    } else if (*score) {
      const Catalog c = Catalog::load(sc_manifest);
      if (sc_mode == "curve") {
        if (sc_decisions.empty()) throw std::runtime_error("--decisions is required");
        const TimeGapCurve curve = time_gap_curve(load_decisions(sc_decisions), c);
        if (!sc_out.empty()) save_time_gap_curve(curve, sc_out);
        for (const auto& b : curve.buckets)
          std::cout << b.label << ": " << b.n_accepted << '/' << b.n_pairs << " = "
                    << format_percent(b.proportion()) << '\n';
      } else {
        if (sc_split.empty() || sc_predictions.empty())
          throw std::runtime_error("--split and --predictions are required");
        const Split s = load_split(sc_split);
        const PredictionSet preds = load_predictions(sc_predictions);
        if (sc_mode == "closed") {
          const ClosedSetReport r = score_closed(preds, s, c);
          if (!sc_out.empty()) save_closed_report(r, sc_out);
          std::cout << "correct " << r.correct << ", wrong " << r.wrong
                    << ", no prediction " << r.no_prediction << "; precision "
                    << format_percent(r.precision()) << ", recall "
                    << format_percent(r.recall()) << '\n';
        } else if (sc_mode == "open") {
          const OpenSetReport r = score_open(preds, s, c);
          if (!sc_out.empty()) save_open_report(r, sc_out);
          std::cout << "predicted " << r.pred_correct << '/' << r.pred_wrong
                    << " (correct/wrong), new " << r.new_correct << '/' << r.new_wrong
                    << "; precision " << format_percent(r.precision()) << ", recall "
                    << format_percent(r.recall()) << '\n';
        } else if (sc_mode == "accuracy") {
          std::cout << "accuracy " << format_percent(score_accuracy(preds, s, c))
                    << '\n';
        } else {
          throw std::runtime_error("unknown score mode '" + sc_mode + "'");
        }
      }
    } else if (*report) {
      const fs::path rdir = fs::path(rp_dir) / "reports";
      if (!fs::exists(rdir))
        throw std::runtime_error("no reports/ under '" + rp_dir + "'");
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(rdir)) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        std::cout << "== " << f.filename().string() << " ==\n";
        std::ifstream in(f);
        std::cout << in.rdbuf() << '\n';
      }
    } else if (*compare) {
      const BiasSummary s =
          compare_splits(load_report_metrics(cp_a), load_report_metrics(cp_b));
      if (!cp_out.empty()) save_bias_summary(s, cp_out);
      std::cout << "recall " << format_percent(s.recall_a) << " vs "
                << format_percent(s.recall_b) << "; overestimation ratio "
                << (std::isinf(s.overestimation_ratio)
                        ? std::string("inf")
                        : std::to_string(s.overestimation_ratio))
                << '\n';
    } else if (*run) {
      PipelineConfig cfg = load_pipeline_config(run_config);
      if (run_workers_set) cfg.workers = run_workers;
      const RunResult r = run_pipeline(cfg, run_out);
      for (const auto& [name, outcome] : r.splits) {
        std::cout << name << " ("
                  << (outcome.kind.kind == ProblemKind::closed_set ? "closed" : "open")
                  << "-set): precision " << format_percent(outcome.closed.precision())
                  << ", recall " << format_percent(outcome.closed.recall()) << '\n';
      }
      std::cout << "artifacts under " << r.out_dir << '\n';
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}
