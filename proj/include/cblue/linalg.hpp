#pragma once

#include <Eigen/Dense>

#include "cblue/common.hpp"

namespace cblue {

struct CholResult {
  Eigen::MatrixXd L;
  double jitter = 0.0;  // absolute value added to the diagonal
};

// Cholesky factor of a symmetric PSD matrix, escalating a diagonal jitter
// from 0 up to max_rel_jitter * mean(diag). Jitter above the cap is a hard
// error: that indicates a modeling bug, not roundoff.
CholResult chol_with_jitter(const Eigen::MatrixXd& M, double max_rel_jitter = 1e-8);

struct SpdInverse {
  Eigen::MatrixXd inverse;
  double condition = 0.0;
  double asymmetry = 0.0;  // relative ||M - M^T||
};

// Inverse of a matrix that is symmetric positive definite up to quadrature
// noise. Relative asymmetry above asym_tol or condition above cond_limit is
// rejected.
SpdInverse invert_spd(const Eigen::MatrixXd& M, double asym_tol = 1e-9,
                      double cond_limit = 1e12);

double min_eigenvalue(const Eigen::MatrixXd& sym);

}  // namespace cblue
