#include "wildreid/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "csv.hpp"

namespace wildreid {

namespace {

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isdigit(c);
  });
}

double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("invalid ") + what + ": '" + s + "'");
  }
}

}  // namespace

Date parse_date(const std::string& text) {
  // Strict YYYY-MM-DD.
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw std::invalid_argument("malformed date '" + text + "' (expected YYYY-MM-DD)");
  const std::string ys = text.substr(0, 4), ms = text.substr(5, 2), ds = text.substr(8, 2);
  if (!all_digits(ys) || !all_digits(ms) || !all_digits(ds))
    throw std::invalid_argument("malformed date '" + text + "' (expected YYYY-MM-DD)");
  std::chrono::year_month_day ymd{std::chrono::year(std::stoi(ys)),
                                  std::chrono::month(unsigned(std::stoi(ms))),
                                  std::chrono::day(unsigned(std::stoi(ds)))};
  if (!ymd.ok()) throw std::invalid_argument("invalid calendar date '" + text + "'");
  return std::chrono::sys_days(ymd);
}

std::string format_date(Date d) {
  std::chrono::year_month_day ymd(d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()));
  return buf;
}

Orientation parse_orientation(const std::string& text) {
  if (text == "left") return Orientation::left;
  if (text == "right") return Orientation::right;
  if (text == "top") return Orientation::top;
  if (text == "top-left") return Orientation::top_left;
  if (text == "top-right") return Orientation::top_right;
  if (text == "front") return Orientation::front;
  if (text == "bottom") return Orientation::bottom;
  if (text == "unknown" || text.empty()) return Orientation::unknown;
  throw std::invalid_argument("unknown orientation '" + text + "'");
}

std::string to_string(Orientation o) {
  switch (o) {
    case Orientation::left: return "left";
    case Orientation::right: return "right";
    case Orientation::top: return "top";
    case Orientation::top_left: return "top-left";
    case Orientation::top_right: return "top-right";
    case Orientation::front: return "front";
    case Orientation::bottom: return "bottom";
    case Orientation::unknown: return "unknown";
  }
  return "unknown";
}

Catalog Catalog::from_records(std::vector<ImageRecord> records) {
  Catalog c;
  c.records_ = std::move(records);
  c.build_indices();
  return c;
}

void Catalog::build_indices() {
  by_id_.clear();
  by_individual_.clear();
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.image_id.empty())
      throw ManifestError("record " + std::to_string(i) + ": empty image_id");
    if (!by_id_.emplace(r.image_id, i).second)
      throw ManifestError("duplicate image_id '" + r.image_id + "'");
    if (r.bbox && (r.bbox->w <= 0 || r.bbox->h <= 0))
      throw ManifestError("image '" + r.image_id + "': bbox with nonpositive extent");
    if (r.has_identity()) by_individual_[r.individual_id].push_back(r.image_id);
  }
}

Catalog Catalog::load(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ManifestError("cannot open manifest '" + manifest_path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ManifestError("manifest '" + manifest_path + "' is empty");
  auto header = csv::split_row(csv::strip_cr(line));
  const std::vector<std::string> base = {"image_id", "individual_id", "date",
                                         "orientation", "image_path"};
  const std::vector<std::string> bbox_cols = {"bbox_x", "bbox_y", "bbox_w", "bbox_h"};
  bool has_bbox = header.size() == 9;
  if (header.size() != 5 && header.size() != 9)
    throw ManifestError("manifest header must have 5 or 9 columns, got " +
                        std::to_string(header.size()));
  for (std::size_t i = 0; i < base.size(); ++i)
    if (header[i] != base[i])
      throw ManifestError("manifest column " + std::to_string(i + 1) + " must be '" +
                          base[i] + "', got '" + header[i] + "'");
  if (has_bbox)
    for (std::size_t i = 0; i < bbox_cols.size(); ++i)
      if (header[5 + i] != bbox_cols[i])
        throw ManifestError("manifest column " + std::to_string(6 + i) + " must be '" +
                            bbox_cols[i] + "', got '" + header[5 + i] + "'");

  std::vector<ImageRecord> records;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = csv::strip_cr(line);
    if (line.empty()) continue;
    auto f = csv::split_row(line);
    // Trailing empty bbox cells may be dropped by some writers.
    while (has_bbox && f.size() < 9) f.emplace_back();
    if (f.size() != (has_bbox ? 9u : 5u))
      throw ManifestError("row " + std::to_string(row) + ": expected " +
                          std::to_string(has_bbox ? 9 : 5) + " fields, got " +
                          std::to_string(f.size()));
    ImageRecord r;
    r.image_id = f[0];
    r.individual_id = f[1];
    try {
      if (!f[2].empty()) r.date = parse_date(f[2]);
      r.orientation = parse_orientation(f[3]);
    } catch (const std::invalid_argument& e) {
      throw ManifestError("row " + std::to_string(row) + ": " + e.what());
    }
    r.image_path = f[4];
    if (has_bbox) {
      const bool any = !f[5].empty() || !f[6].empty() || !f[7].empty() || !f[8].empty();
      const bool all = !f[5].empty() && !f[6].empty() && !f[7].empty() && !f[8].empty();
      if (any && !all)
        throw ManifestError("row " + std::to_string(row) + ": partial bbox");
      if (all) {
        try {
          r.bbox = BBox{parse_double(f[5], "bbox_x"), parse_double(f[6], "bbox_y"),
                        parse_double(f[7], "bbox_w"), parse_double(f[8], "bbox_h")};
        } catch (const std::invalid_argument& e) {
          throw ManifestError("row " + std::to_string(row) + ": " + e.what());
        }
        if (r.bbox->w <= 0 || r.bbox->h <= 0)
          throw ManifestError("row " + std::to_string(row) +
                              ": bbox with nonpositive extent");
      }
    }
    records.push_back(std::move(r));
  }

  try {
    return from_records(std::move(records));
  } catch (const ManifestError& e) {
    throw ManifestError(std::string(e.what()) + " in '" + manifest_path + "'");
  }
}

void Catalog::save(const std::string& manifest_path) const {
  std::ofstream out(manifest_path);
  if (!out) throw ManifestError("cannot write manifest '" + manifest_path + "'");
  out << "image_id,individual_id,date,orientation,image_path,bbox_x,bbox_y,bbox_w,bbox_h\n";
  for (const auto& r : records_) {
    out << r.image_id << ',' << r.individual_id << ','
        << (r.date ? format_date(*r.date) : "") << ',' << to_string(r.orientation)
        << ',' << r.image_path << ',';
    if (r.bbox) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g", r.bbox->x, r.bbox->y,
                    r.bbox->w, r.bbox->h);
      out << buf;
    } else {
      out << ",,,";
    }
    out << '\n';
  }
}

bool Catalog::contains(const std::string& image_id) const {
  return by_id_.count(image_id) != 0;
}

const ImageRecord& Catalog::record(const std::string& image_id) const {
  auto it = by_id_.find(image_id);
  if (it == by_id_.end())
    throw std::out_of_range("unknown image_id '" + image_id + "'");
  return records_[it->second];
}

const std::vector<std::string>& Catalog::images_of(const std::string& individual_id) const {
  static const std::vector<std::string> empty;
  auto it = by_individual_.find(individual_id);
  return it == by_individual_.end() ? empty : it->second;
}

std::vector<std::string> Catalog::individual_ids() const {
  std::vector<std::string> out;
  out.reserve(by_individual_.size());
  for (const auto& [id, _] : by_individual_) out.push_back(id);
  return out;
}

std::vector<Encounter> Catalog::encounters() const {
  std::map<std::pair<std::string, Date>, std::vector<std::string>> groups;
  for (const auto& r : records_) {
    if (!r.has_identity() || !r.date) continue;
    groups[{r.individual_id, *r.date}].push_back(r.image_id);
  }
  std::vector<Encounter> out;
  out.reserve(groups.size());
  for (auto& [key, ids] : groups)
    out.push_back(Encounter{key.first, key.second, std::move(ids)});
  return out;
}

std::size_t Catalog::n_unassignable() const {
  std::size_t n = 0;
  for (const auto& r : records_)
    if (!r.has_identity() || !r.date) ++n;
  return n;
}

DatasetStats Catalog::stats() const {
  DatasetStats s;
  s.n_image = records_.size();
  s.n_indiv = by_individual_.size();
  s.n_enc = encounters().size();
  std::optional<Date> lo, hi;
  std::size_t dated = 0;
  for (const auto& r : records_) {
    if (!r.date) continue;
    ++dated;
    if (!lo || *r.date < *lo) lo = r.date;
    if (!hi || *r.date > *hi) hi = r.date;
  }
  s.span_days = (lo && hi) ? (*hi - *lo).count() : 0;
  s.timestamp_coverage = s.n_image ? double(dated) / double(s.n_image) : 0.0;
  return s;
}

}  // namespace wildreid
