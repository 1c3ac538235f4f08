#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wildreid/features.hpp"

namespace wildreid {

struct ProjectiveTransform {
  // Homogeneous 3x3 map in image coordinates, Frobenius-normalized with a
  // deterministic sign.
  Eigen::Matrix3d T = Eigen::Matrix3d::Identity();

  Eigen::Matrix2d top_left() const { return T.topLeftCorner<2, 2>(); }
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class InsufficientDataError : public FitError {
 public:
  using FitError::FitError;
};
class DegenerateConfigurationError : public FitError {
 public:
  using FitError::FitError;
};

/// Least-squares projective fit by the normalized DLT: Hartley-normalize both
/// point sets, solve the homogeneous 2n x 9 system by the smallest singular
/// vector, denormalize, Frobenius-normalize. Needs >= 4 correspondences;
/// throws DegenerateConfigurationError for collinear/coincident points.
ProjectiveTransform fit_projective(std::span<const Correspondence> correspondences);

/// 2-norm condition number sigma_max/sigma_min; +infinity when singular.
double condition_number(const Eigen::MatrixXd& m);

/// RMS symmetric transfer error of `t` over the correspondences, in pixels.
double transfer_residual(const ProjectiveTransform& t,
                         std::span<const Correspondence> correspondences);

struct VerifyThresholds {
  double max_cond_T = 100000.0;
  double max_cond_T_tilde = 100.0;
  std::optional<double> max_residual;  // optional extra gate, off by default
  int top_pairs = 10;
};

struct VerificationDecision {
  std::string image_a;  // always image_a < image_b
  std::string image_b;
  bool accepted = false;
  double cond_T = std::numeric_limits<double>::infinity();
  double cond_T_tilde = std::numeric_limits<double>::infinity();
  int n_correspondences = 0;
  double residual = std::numeric_limits<double>::infinity();
  std::string reason;  // set when rejected
};

/// Same-individual decision for one image pair: match descriptors, fit the
/// projective transform to the top correspondences, gate on the condition
/// numbers of T and its 2x2 top-left block. Fit failures reject. The pair is
/// evaluated in canonical (lexicographic image-id) order so the decision is
/// symmetric.
VerificationDecision verify_pair(const FeatureSet& fs_a, const FeatureSet& fs_b,
                                 const VerifyThresholds& thresholds = {});

// Pair-decision CSV: image_a,image_b,accepted,cond_T,cond_T_tilde,n_corr,residual
void save_decisions(const std::vector<VerificationDecision>& decisions,
                    const std::string& path);
std::vector<VerificationDecision> load_decisions(const std::string& path);

}  // namespace wildreid
