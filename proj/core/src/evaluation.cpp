#include "wildreid/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace wildreid {

namespace {
const Prediction& prediction_for(const PredictionSet& predictions,
                                 const std::string& image_id) {
  static const Prediction none;
  auto it = predictions.by_query.find(image_id);
  return it == predictions.by_query.end() ? none : it->second;
}
}  // namespace

ClosedSetReport score_closed(const PredictionSet& predictions, const Split& split,
                             const Catalog& catalog) {
  for (const auto& [id, p] : predictions.by_query)
    if (!split.query_ids.count(id))
      throw EvaluationError("prediction for non-query image '" + id + "'");

  ClosedSetReport r;
  r.n_query = long(split.query_ids.size());
  for (const auto& id : split.query_ids) {
    const auto& truth = catalog.record(id).individual_id;
    const auto& p = prediction_for(predictions, id);
    auto& pi = r.per_individual[truth];
    if (p.status == Prediction::predicted) {
      if (p.individual_id == truth) {
        ++r.correct;
        ++pi.correct;
      } else {
        ++r.wrong;
        ++pi.wrong;
      }
    } else {
      ++r.no_prediction;
      ++pi.no_prediction;
    }
  }
  return r;
}

ClosedSetReport closed_report_from_counts(long correct, long wrong,
                                          long no_prediction) {
  ClosedSetReport r;
  r.correct = correct;
  r.wrong = wrong;
  r.no_prediction = no_prediction;
  r.n_query = correct + wrong + no_prediction;
  return r;
}

OpenSetReport score_open(const PredictionSet& predictions, const Split& split,
                         const Catalog& catalog) {
  std::set<std::string> reference_identities;
  for (const auto& id : split.reference_ids) {
    const auto& rec = catalog.record(id);
    if (rec.has_identity()) reference_identities.insert(rec.individual_id);
  }

  OpenSetReport r;
  r.n_query = long(split.query_ids.size());
  for (const auto& id : split.query_ids) {
    const auto& truth = catalog.record(id).individual_id;
    const auto& p = prediction_for(predictions, id);
    if (p.status == Prediction::predicted) {
      if (p.individual_id == truth) ++r.pred_correct;
      else ++r.pred_wrong;
    } else {
      // No prediction reads as "newly recruited individual".
      if (reference_identities.count(truth)) ++r.new_wrong;
      else ++r.new_correct;
    }
  }
  return r;
}

OpenSetReport open_report_from_counts(long pred_correct, long pred_wrong,
                                      long new_correct, long new_wrong) {
  OpenSetReport r;
  r.pred_correct = pred_correct;
  r.pred_wrong = pred_wrong;
  r.new_correct = new_correct;
  r.new_wrong = new_wrong;
  r.n_query = pred_correct + pred_wrong + new_correct + new_wrong;
  return r;
}

double score_accuracy(const PredictionSet& predictions, const Split& split,
                      const Catalog& catalog) {
  long correct = 0;
  for (const auto& id : split.query_ids) {
    const auto& p = prediction_for(predictions, id);
    if (p.status != Prediction::predicted)
      throw EvaluationError("accuracy requires a prediction for every query image; '" +
                            id + "' has none");
    if (p.individual_id == catalog.record(id).individual_id) ++correct;
  }
  if (split.query_ids.empty()) throw EvaluationError("empty query set");
  return double(correct) / double(split.query_ids.size());
}

TimeGapCurve time_gap_curve(const std::vector<VerificationDecision>& decisions,
                            const Catalog& catalog) {
  TimeGapCurve curve;
  curve.buckets[0].label = "same_day";
  curve.buckets[1].label = "le_1_day";
  curve.buckets[2].label = "le_1_week";
  curve.buckets[3].label = "le_1_month";
  curve.buckets[4].label = "le_1_year";
  curve.buckets[5].label = "more";

  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& d : decisions) {
    const auto& a = catalog.record(d.image_a);
    const auto& b = catalog.record(d.image_b);
    if (!a.has_identity() || a.individual_id != b.individual_id) continue;
    if (a.orientation != b.orientation) continue;
    if (!a.date || !b.date)
      throw EvaluationError("pair (" + d.image_a + ", " + d.image_b +
                            ") has an undated image");
    if (!seen.insert(std::minmax(d.image_a, d.image_b)).second) continue;

    const long gap = std::abs((*a.date - *b.date).count());
    std::size_t bucket;
    if (gap == 0) bucket = 0;
    else if (gap <= 1) bucket = 1;
    else if (gap <= 7) bucket = 2;
    else if (gap <= 31) bucket = 3;
    else if (gap <= 365) bucket = 4;
    else bucket = 5;
    ++curve.buckets[bucket].n_pairs;
    if (d.accepted) ++curve.buckets[bucket].n_accepted;
  }
  return curve;
}

std::string format_percent(double fraction) {
  if (std::isnan(fraction)) return "NA";
  const double pct = fraction * 100.0;
  // Round half away from zero at one decimal.
  const double rounded = std::copysign(std::floor(std::abs(pct) * 10.0 + 0.5) / 10.0, pct);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", rounded);
  return buf;
}

void save_closed_report(const ClosedSetReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw EvaluationError("cannot write report '" + path + "'");
  out << "correct,wrong,no_prediction,n_query,precision,recall\n";
  out << report.correct << ',' << report.wrong << ',' << report.no_prediction << ','
      << report.n_query << ',' << format_percent(report.precision()) << ','
      << format_percent(report.recall()) << '\n';
  out << "# per-individual breakdown\n";
  out << "# individual_id,correct,wrong,no_prediction\n";
  for (const auto& [id, c] : report.per_individual)
    out << "# " << id << ',' << c.correct << ',' << c.wrong << ',' << c.no_prediction
        << '\n';
}

void save_open_report(const OpenSetReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw EvaluationError("cannot write report '" + path + "'");
  out << "pred_correct,pred_wrong,new_correct,new_wrong,n_query,precision,recall,"
         "recall_over_query\n";
  out << report.pred_correct << ',' << report.pred_wrong << ',' << report.new_correct
      << ',' << report.new_wrong << ',' << report.n_query << ','
      << format_percent(report.precision()) << ',' << format_percent(report.recall())
      << ',' << format_percent(report.recall_over_query()) << '\n';
  out << "# recall counts only query images whose identity exists in the reference\n"
         "# set (correct + new_wrong); recall_over_query divides by the full query\n"
         "# set instead.\n";
}

void save_time_gap_curve(const TimeGapCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw EvaluationError("cannot write curve '" + path + "'");
  out << "bucket,n_pairs,n_accepted,proportion\n";
  for (const auto& b : curve.buckets) {
    out << b.label << ',' << b.n_pairs << ',' << b.n_accepted << ',';
    if (b.n_pairs) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6f", b.proportion());
      out << buf;
    } else {
      out << "NA";
    }
    out << '\n';
  }
}

}  // namespace wildreid
