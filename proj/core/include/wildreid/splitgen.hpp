#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wildreid/catalog.hpp"

namespace wildreid {

enum class SplitPolicy { random_matched, time_proportion, time_cutoff };

std::string to_string(SplitPolicy p);
SplitPolicy parse_split_policy(const std::string& text);

struct Split {
  std::set<std::string> reference_ids;
  std::set<std::string> query_ids;
  std::set<std::string> excluded_ids;
  SplitPolicy policy = SplitPolicy::time_proportion;

  // Policy parameters; only the ones relevant to `policy` are meaningful.
  double proportion = 0.0;
  std::optional<Date> cutoff;
  std::optional<long> query_window_days;  // nullopt = everything after cutoff
  std::uint64_t seed = 0;
};

struct ProblemKind {
  enum Kind { closed_set, open_set } kind = closed_set;
  std::set<std::string> new_individual_ids;
};

struct SplitFinding {
  enum Kind { overlap, unknown_image, day_straddle } kind;
  std::string message;
};

struct SplitValidation {
  std::vector<SplitFinding> findings;
  bool ok() const { return findings.empty(); }
};

class SplitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per individual, sorts observation days chronologically and sends the
/// earliest ceil(p*D) days to the reference set, the rest to the query set.
/// Individuals seen on a single day only are excluded, as are images without
/// identity or date. All images of one day always land on the same side.
Split time_proportion_split(const Catalog& catalog, double p);

/// Reference = images dated before `cutoff`; query = images from `cutoff`
/// (inclusive) up to the query window end. Default window is one calendar
/// year; pass nullopt via window_days to take everything after the cutoff.
Split time_cutoff_split(const Catalog& catalog, Date cutoff,
                        std::optional<long> window_days = 365);

/// Random (time-unaware) split matched to a template: for every individual,
/// uniformly samples the same number of its images into the reference set as
/// the template assigned. Template exclusions are kept so both splits cover
/// an identical query universe. Deterministic in `seed`.
Split random_split_matched(const Catalog& catalog, const Split& split_template,
                           std::uint64_t seed);

ProblemKind classify_problem(const Split& split, const Catalog& catalog);

SplitValidation validate_split(const Split& split, const Catalog& catalog);

/// Split file: CSV `image_id,role` preceded by `#`-prefixed metadata lines
/// carrying the policy and its parameters.
void save_split(const Split& split, const std::string& path);
Split load_split(const std::string& path);

}  // namespace wildreid
