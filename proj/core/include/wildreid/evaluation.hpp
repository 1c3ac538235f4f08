#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "wildreid/catalog.hpp"
#include "wildreid/geomverify.hpp"
#include "wildreid/matchgraph.hpp"
#include "wildreid/splitgen.hpp"

namespace wildreid {

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PerIndividualCounts {
  long correct = 0;
  long wrong = 0;
  long no_prediction = 0;
};

struct ClosedSetReport {
  long correct = 0;
  long wrong = 0;
  long no_prediction = 0;  // includes conflict-flagged query images
  long n_query = 0;
  std::map<std::string, PerIndividualCounts> per_individual;

  // correct / (correct + wrong); NaN when nothing was predicted.
  double precision() const {
    const long p = correct + wrong;
    return p ? double(correct) / double(p) : std::nan("");
  }
  double recall() const {
    return n_query ? double(correct) / double(n_query) : std::nan("");
  }
};

struct OpenSetReport {
  long pred_correct = 0;
  long pred_wrong = 0;
  long new_correct = 0;  // no prediction, identity truly absent from reference
  long new_wrong = 0;    // no prediction, identity present in reference
  long n_query = 0;

  double precision() const {
    const long p = pred_correct + pred_wrong;
    return p ? double(pred_correct) / double(p) : std::nan("");
  }
  // Over query images whose identity exists in the reference set. Wrongly
  // predicted images are those whose identity is absent, so the denominator
  // is correct + new_wrong.
  double recall() const {
    const long d = pred_correct + new_wrong;
    return d ? double(pred_correct) / double(d) : std::nan("");
  }
  // The naive alternative: over the whole query set.
  double recall_over_query() const {
    return n_query ? double(pred_correct) / double(n_query) : std::nan("");
  }
};

struct TimeGapBucket {
  std::string label;
  long n_pairs = 0;
  long n_accepted = 0;
  double proportion() const {
    return n_pairs ? double(n_accepted) / double(n_pairs) : std::nan("");
  }
};

struct TimeGapCurve {
  // same day; <=1 day; <=1 week; <=1 month (31 d); <=1 year (365 d); more
  std::array<TimeGapBucket, 6> buckets;
};

ClosedSetReport score_closed(const PredictionSet& predictions, const Split& split,
                             const Catalog& catalog);
ClosedSetReport closed_report_from_counts(long correct, long wrong,
                                          long no_prediction);

OpenSetReport score_open(const PredictionSet& predictions, const Split& split,
                         const Catalog& catalog);
OpenSetReport open_report_from_counts(long pred_correct, long pred_wrong,
                                      long new_correct, long new_wrong);

/// Accuracy for always-predicting methods; throws EvaluationError if any
/// query image lacks a prediction.
double score_accuracy(const PredictionSet& predictions, const Split& split,
                      const Catalog& catalog);

/// Acceptance proportion of same-individual, same-orientation image pairs as
/// a function of the day gap between them.
TimeGapCurve time_gap_curve(const std::vector<VerificationDecision>& decisions,
                            const Catalog& catalog);

/// Percentage with one decimal, rounding half away from zero; "NA" for NaN.
std::string format_percent(double fraction);

void save_closed_report(const ClosedSetReport& report, const std::string& path);
void save_open_report(const OpenSetReport& report, const std::string& path);
void save_time_gap_curve(const TimeGapCurve& curve, const std::string& path);

}  // namespace wildreid
