#include "wildreid/splitgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "csv.hpp"
#include "wildreid/rng.hpp"

namespace wildreid {

std::string to_string(SplitPolicy p) {
  switch (p) {
    case SplitPolicy::random_matched: return "random_matched";
    case SplitPolicy::time_proportion: return "time_proportion";
    case SplitPolicy::time_cutoff: return "time_cutoff";
  }
  return "?";
}

SplitPolicy parse_split_policy(const std::string& text) {
  if (text == "random_matched") return SplitPolicy::random_matched;
  if (text == "time_proportion") return SplitPolicy::time_proportion;
  if (text == "time_cutoff") return SplitPolicy::time_cutoff;
  throw SplitError("unknown split policy '" + text + "'");
}

Split time_proportion_split(const Catalog& catalog, double p) {
  if (!(p > 0.0 && p < 1.0))
    throw SplitError("time-proportion split needs 0 < p < 1");

  Split split;
  split.policy = SplitPolicy::time_proportion;
  split.proportion = p;

  // individual -> day -> image ids
  std::map<std::string, std::map<Date, std::vector<std::string>>> days;
  for (const auto& r : catalog.records()) {
    if (!r.has_identity() || !r.date) {
      split.excluded_ids.insert(r.image_id);
      continue;
    }
    days[r.individual_id][*r.date].push_back(r.image_id);
  }

  bool any_usable = false;
  for (const auto& [indiv, by_day] : days) {
    if (by_day.size() < 2) {
      for (const auto& [d, ids] : by_day)
        split.excluded_ids.insert(ids.begin(), ids.end());
      continue;
    }
    any_usable = true;
    const std::size_t n_days = by_day.size();
    const std::size_t n_ref_days =
        std::size_t(std::ceil(p * double(n_days)) + 0.5);
    std::size_t i = 0;
    for (const auto& [d, ids] : by_day) {
      auto& side = (i < n_ref_days) ? split.reference_ids : split.query_ids;
      side.insert(ids.begin(), ids.end());
      ++i;
    }
  }
  if (!any_usable)
    throw SplitError("unusable split: no individual has two or more observation days");
  return split;
}

namespace {
Date add_days(Date d, long n) { return d + std::chrono::days(n); }

Date one_year_after(Date d) {
  std::chrono::year_month_day ymd(d);
  auto next = ymd + std::chrono::years(1);
  if (!next.ok()) next = next.year() / next.month() / std::chrono::last;
  return std::chrono::sys_days(next);
}
}  // namespace

Split time_cutoff_split(const Catalog& catalog, Date cutoff,
                        std::optional<long> window_days) {
  Split split;
  split.policy = SplitPolicy::time_cutoff;
  split.cutoff = cutoff;
  split.query_window_days = window_days;

  std::optional<Date> window_end;
  if (window_days) {
    window_end = (*window_days == 365) ? one_year_after(cutoff)
                                       : add_days(cutoff, *window_days);
  }

  for (const auto& r : catalog.records()) {
    if (!r.date) {
      split.excluded_ids.insert(r.image_id);
      continue;
    }
    if (*r.date < cutoff)
      split.reference_ids.insert(r.image_id);
    else if (!window_end || *r.date < *window_end)
      split.query_ids.insert(r.image_id);
    else
      split.excluded_ids.insert(r.image_id);
  }
  if (split.reference_ids.empty())
    throw SplitError("time-cutoff split: no images before cutoff " + format_date(cutoff));
  if (split.query_ids.empty())
    throw SplitError("time-cutoff split: no images in query window from " +
                     format_date(cutoff));
  return split;
}

Split random_split_matched(const Catalog& catalog, const Split& split_template,
                           std::uint64_t seed) {
  for (const auto* side : {&split_template.reference_ids, &split_template.query_ids,
                           &split_template.excluded_ids})
    for (const auto& id : *side)
      if (!catalog.contains(id))
        throw SplitError("template references unknown image '" + id + "'");

  Split split;
  split.policy = SplitPolicy::random_matched;
  split.seed = seed;
  split.excluded_ids = split_template.excluded_ids;

  // individual -> (covered images, template reference count)
  std::map<std::string, std::pair<std::vector<std::string>, std::size_t>> per_indiv;
  for (const auto& id : split_template.reference_ids) {
    auto& e = per_indiv[catalog.record(id).individual_id];
    e.first.push_back(id);
    e.second += 1;
  }
  for (const auto& id : split_template.query_ids)
    per_indiv[catalog.record(id).individual_id].first.push_back(id);

  for (auto& [indiv, entry] : per_indiv) {
    auto& [pool, n_ref] = entry;
    std::sort(pool.begin(), pool.end());
    // Per-individual child seed keeps the draw independent of which other
    // individuals are present.
    auto rng = make_rng(mix_seed(seed, fnv1a(indiv)));
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t i = 0; i < pool.size(); ++i)
      (i < n_ref ? split.reference_ids : split.query_ids).insert(pool[i]);
  }
  return split;
}

ProblemKind classify_problem(const Split& split, const Catalog& catalog) {
  std::set<std::string> ref_ids;
  for (const auto& id : split.reference_ids) {
    const auto& r = catalog.record(id);
    if (r.has_identity()) ref_ids.insert(r.individual_id);
  }
  ProblemKind pk;
  for (const auto& id : split.query_ids) {
    const auto& r = catalog.record(id);
    if (r.has_identity() && !ref_ids.count(r.individual_id))
      pk.new_individual_ids.insert(r.individual_id);
  }
  pk.kind = pk.new_individual_ids.empty() ? ProblemKind::closed_set
                                          : ProblemKind::open_set;
  return pk;
}

SplitValidation validate_split(const Split& split, const Catalog& catalog) {
  SplitValidation v;
  for (const auto& id : split.reference_ids)
    if (split.query_ids.count(id))
      v.findings.push_back({SplitFinding::overlap,
                            "image '" + id + "' in both reference and query"});
  auto check_known = [&](const std::set<std::string>& ids, const char* side) {
    for (const auto& id : ids)
      if (!catalog.contains(id))
        v.findings.push_back({SplitFinding::unknown_image,
                              std::string(side) + " image '" + id + "' not in catalog"});
  };
  check_known(split.reference_ids, "reference");
  check_known(split.query_ids, "query");
  check_known(split.excluded_ids, "excluded");

  // Same-day straddle: an encounter with images on both sides leaks
  // encounter-level appearance factors from query into reference.
  for (const auto& enc : catalog.encounters()) {
    bool in_ref = false, in_query = false;
    for (const auto& id : enc.image_ids) {
      in_ref = in_ref || split.reference_ids.count(id);
      in_query = in_query || split.query_ids.count(id);
    }
    if (in_ref && in_query)
      v.findings.push_back(
          {SplitFinding::day_straddle,
           "encounter (" + enc.individual_id + ", " + format_date(enc.date) +
               ") has images in both reference and query"});
  }
  return v;
}

void save_split(const Split& split, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SplitError("cannot write split file '" + path + "'");
  out << "# policy=" << to_string(split.policy) << '\n';
  switch (split.policy) {
    case SplitPolicy::time_proportion:
      out << "# proportion=" << split.proportion << '\n';
      break;
    case SplitPolicy::time_cutoff:
      out << "# cutoff=" << format_date(*split.cutoff) << '\n';
      out << "# query_window_days="
          << (split.query_window_days ? std::to_string(*split.query_window_days)
                                      : std::string("all"))
          << '\n';
      break;
    case SplitPolicy::random_matched:
      out << "# seed=" << split.seed << '\n';
      out << "# rng=" << kRngName << '\n';
      break;
  }
  out << "image_id,role\n";
  for (const auto& id : split.reference_ids) out << id << ",reference\n";
  for (const auto& id : split.query_ids) out << id << ",query\n";
  for (const auto& id : split.excluded_ids) out << id << ",excluded\n";
}

Split load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SplitError("cannot open split file '" + path + "'");
  Split split;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    line = csv::strip_cr(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      while (!key.empty() && key.front() == ' ') key.erase(key.begin());
      std::string val = line.substr(eq + 1);
      if (key == "policy") split.policy = parse_split_policy(val);
      else if (key == "proportion") split.proportion = std::stod(val);
      else if (key == "cutoff") split.cutoff = parse_date(val);
      else if (key == "seed") split.seed = std::stoull(val);
      else if (key == "query_window_days" && val != "all")
        split.query_window_days = std::stol(val);
      continue;
    }
    if (!header_seen) {
      if (line != "image_id,role")
        throw SplitError("split file '" + path + "': bad header '" + line + "'");
      header_seen = true;
      continue;
    }
    auto f = csv::split_row(line);
    if (f.size() != 2)
      throw SplitError("split file '" + path + "': bad row '" + line + "'");
    if (f[1] == "reference") split.reference_ids.insert(f[0]);
    else if (f[1] == "query") split.query_ids.insert(f[0]);
    else if (f[1] == "excluded") split.excluded_ids.insert(f[0]);
    else throw SplitError("split file '" + path + "': unknown role '" + f[1] + "'");
  }
  if (!header_seen) throw SplitError("split file '" + path + "': missing header");
  return split;
}

}  // namespace wildreid
