#include "wildreid/geomverify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "csv.hpp"

namespace wildreid {

namespace {

// Similarity transform mapping points to centroid 0, RMS distance sqrt(2).
Eigen::Matrix3d hartley_transform(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : pts) c += p;
  c /= double(pts.size());
  double rms = 0;
  for (const auto& p : pts) rms += (p - c).squaredNorm();
  rms = std::sqrt(rms / double(pts.size()));
  const double s = rms > 0 ? std::sqrt(2.0) / rms : 1.0;
  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
  t(0, 0) = t(1, 1) = s;
  t(0, 2) = -s * c.x();
  t(1, 2) = -s * c.y();
  return t;
}

void normalize_sign(Eigen::Matrix3d& t) {
  t /= t.norm();
  // Deterministic sign: make the largest-magnitude coefficient positive.
  double best = 0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (std::abs(t(r, c)) > std::abs(best)) best = t(r, c);
  if (best < 0) t = -t;
}

}  // namespace

ProjectiveTransform fit_projective(std::span<const Correspondence> correspondences) {
  const std::size_t n = correspondences.size();
  if (n < 4)
    throw InsufficientDataError("projective fit needs >= 4 correspondences, got " +
                                std::to_string(n));

  std::vector<Eigen::Vector2d> src, dst;
  src.reserve(n);
  dst.reserve(n);
  for (const auto& c : correspondences) {
    src.emplace_back(c.a.x, c.a.y);
    dst.emplace_back(c.b.x, c.b.y);
  }
  const Eigen::Matrix3d ta = hartley_transform(src);
  const Eigen::Matrix3d tb = hartley_transform(dst);

  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d p = ta * src[i].homogeneous();
    const Eigen::Vector3d q = tb * dst[i].homogeneous();
    const double x = p.x(), y = p.y(), u = q.x(), v = q.y();
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  // A unique solution needs exactly one (near-)zero singular value; a second
  // vanishing one means the configuration does not pin down the transform.
  if (sv(0) <= 0 || sv(7) < 1e-9 * sv(0))
    throw DegenerateConfigurationError(
        "degenerate correspondence configuration (collinear or coincident points)");

  Eigen::Matrix3d h_norm;
  const Eigen::VectorXd v = svd.matrixV().col(8);
  h_norm << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);

  ProjectiveTransform out;
  out.T = tb.inverse() * h_norm * ta;
  normalize_sign(out.T);
  return out;
}

double condition_number(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("matrix must be square");
  if (m.norm() == 0) throw std::invalid_argument("matrix must be nonzero");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (smin <= 0) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

double transfer_residual(const ProjectiveTransform& t,
                         std::span<const Correspondence> correspondences) {
  Eigen::Matrix3d inv;
  bool invertible = false;
  double det;
  t.T.computeInverseAndDetWithCheck(inv, det, invertible);
  if (!invertible || correspondences.empty())
    return std::numeric_limits<double>::infinity();

  double sum = 0;
  std::size_t terms = 0;
  for (const auto& c : correspondences) {
    const Eigen::Vector3d fwd = t.T * Eigen::Vector3d(c.a.x, c.a.y, 1.0);
    const Eigen::Vector3d bwd = inv * Eigen::Vector3d(c.b.x, c.b.y, 1.0);
    if (fwd.z() == 0 || bwd.z() == 0) return std::numeric_limits<double>::infinity();
    sum += (fwd.hnormalized() - Eigen::Vector2d(c.b.x, c.b.y)).squaredNorm();
    sum += (bwd.hnormalized() - Eigen::Vector2d(c.a.x, c.a.y)).squaredNorm();
    terms += 2;
  }
  return std::sqrt(sum / double(terms));
}

VerificationDecision verify_pair(const FeatureSet& fs_a, const FeatureSet& fs_b,
                                 const VerifyThresholds& thresholds) {
  // Canonical order keeps the decision identical for (a,b) and (b,a).
  const bool swap = fs_b.image_id < fs_a.image_id;
  const FeatureSet& first = swap ? fs_b : fs_a;
  const FeatureSet& second = swap ? fs_a : fs_b;

  VerificationDecision d;
  d.image_a = first.image_id;
  d.image_b = second.image_id;

  if (first.size() == 0 || second.size() == 0) {
    d.reason = "no keypoints";
    return d;
  }
  const CorrespondenceSet cs = match_descriptors(first, second, thresholds.top_pairs);
  d.n_correspondences = int(cs.pairs.size());
  if (cs.pairs.size() < 4) {
    d.reason = "insufficient correspondences";
    return d;
  }

  ProjectiveTransform t;
  try {
    t = fit_projective(cs.pairs);
  } catch (const FitError& e) {
    d.reason = e.what();
    return d;
  }
  d.cond_T = condition_number(t.T);
  d.cond_T_tilde = condition_number(t.top_left());
  d.residual = transfer_residual(t, cs.pairs);

  if (!(d.cond_T < thresholds.max_cond_T)) {
    d.reason = "cond(T) above threshold";
  } else if (!(d.cond_T_tilde < thresholds.max_cond_T_tilde)) {
    d.reason = "cond(T~) above threshold";
  } else if (thresholds.max_residual && !(d.residual < *thresholds.max_residual)) {
    d.reason = "residual above threshold";
  } else {
    d.accepted = true;
  }
  return d;
}

namespace {
std::string format_metric(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

double parse_metric(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  return std::stod(s);
}
}  // namespace

void save_decisions(const std::vector<VerificationDecision>& decisions,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write decisions file '" + path + "'");
  out << "image_a,image_b,accepted,cond_T,cond_T_tilde,n_corr,residual\n";
  for (const auto& d : decisions) {
    out << d.image_a << ',' << d.image_b << ',' << (d.accepted ? 1 : 0) << ','
        << format_metric(d.cond_T) << ',' << format_metric(d.cond_T_tilde) << ','
        << d.n_correspondences << ',' << format_metric(d.residual) << '\n';
  }
}

std::vector<VerificationDecision> load_decisions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open decisions file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) ||
      csv::strip_cr(line) != "image_a,image_b,accepted,cond_T,cond_T_tilde,n_corr,residual")
    throw std::runtime_error("bad decisions header in '" + path + "'");
  std::vector<VerificationDecision> out;
  while (std::getline(in, line)) {
    line = csv::strip_cr(line);
    if (line.empty()) continue;
    auto f = csv::split_row(line);
    if (f.size() != 7)
      throw std::runtime_error("bad decisions row '" + line + "' in '" + path + "'");
    VerificationDecision d;
    d.image_a = f[0];
    d.image_b = f[1];
    d.accepted = f[2] == "1";
    d.cond_T = parse_metric(f[3]);
    d.cond_T_tilde = parse_metric(f[4]);
    d.n_correspondences = std::stoi(f[5]);
    d.residual = parse_metric(f[6]);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace wildreid
