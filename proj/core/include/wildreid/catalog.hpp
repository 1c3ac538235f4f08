#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace wildreid {

// Calendar date at day granularity.
using Date = std::chrono::sys_days;

/// Parses a strict ISO-8601 date (YYYY-MM-DD). Throws std::invalid_argument
/// on malformed input or an invalid calendar day.
Date parse_date(const std::string& text);
std::string format_date(Date d);

enum class Orientation {
  left,
  right,
  top,
  top_left,
  top_right,
  front,
  bottom,
  unknown,
};

Orientation parse_orientation(const std::string& text);
std::string to_string(Orientation o);

struct BBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  bool operator==(const BBox&) const = default;
};

struct ImageRecord {
  std::string image_id;
  std::string individual_id;  // empty = unknown identity
  std::optional<Date> date;
  Orientation orientation = Orientation::unknown;
  std::string image_path;
  std::optional<BBox> bbox;

  bool has_identity() const { return !individual_id.empty(); }
  bool operator==(const ImageRecord&) const = default;
};

// All images of one individual taken on one day.
struct Encounter {
  std::string individual_id;
  Date date;
  std::vector<std::string> image_ids;
};

struct DatasetStats {
  std::size_t n_image = 0;
  std::size_t n_indiv = 0;
  std::size_t n_enc = 0;
  long span_days = 0;
  double timestamp_coverage = 0.0;
};

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable, validated image-metadata index. Safe for concurrent reads.
class Catalog {
 public:
  Catalog() = default;

  static Catalog from_records(std::vector<ImageRecord> records);

  /// Reads the manifest CSV (header row, columns image_id,individual_id,
  /// date,orientation,image_path,bbox_x,bbox_y,bbox_w,bbox_h). Throws
  /// ManifestError with row context on any invalid row.
  static Catalog load(const std::string& manifest_path);

  void save(const std::string& manifest_path) const;

  const std::vector<ImageRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool contains(const std::string& image_id) const;
  const ImageRecord& record(const std::string& image_id) const;

  /// Image ids of one individual, in record order.
  const std::vector<std::string>& images_of(const std::string& individual_id) const;
  std::vector<std::string> individual_ids() const;

  /// Groups identity-labelled, dated images by (individual, day), ordered by
  /// individual then date. Images without identity or date are skipped.
  std::vector<Encounter> encounters() const;

  /// Number of images skipped by encounters() for lack of identity or date.
  std::size_t n_unassignable() const;

  DatasetStats stats() const;

 private:
  void build_indices();

  std::vector<ImageRecord> records_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::map<std::string, std::vector<std::string>> by_individual_;
};

}  // namespace wildreid
