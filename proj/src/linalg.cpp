#include "cblue/linalg.hpp"

#include <cmath>

namespace cblue {

CholResult chol_with_jitter(const Eigen::MatrixXd& M, double max_rel_jitter) {
  const double scale = std::max(M.diagonal().mean(), 1e-300);
  double jitter = 0.0;
  for (int attempt = 0; attempt < 10; ++attempt) {
    Eigen::MatrixXd work = M;
    if (jitter > 0.0) work.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) {
      return {Eigen::MatrixXd(llt.matrixL()), jitter};
    }
    jitter = (jitter == 0.0) ? scale * 1e-15 : jitter * 10.0;
    if (jitter > max_rel_jitter * scale) break;
  }
  throw NumericalFailureError("matrix is not positive definite within the jitter budget");
}

SpdInverse invert_spd(const Eigen::MatrixXd& M, double asym_tol, double cond_limit) {
  SpdInverse out;
  double norm = M.norm();
  out.asymmetry = (norm > 0.0) ? (M - M.transpose()).norm() / norm : 0.0;
  if (out.asymmetry > asym_tol) {
    throw NumericalFailureError("matrix asymmetry " + std::to_string(out.asymmetry) +
                                " exceeds tolerance; quadrature defect suspected");
  }
  Eigen::MatrixXd S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  double lo = es.eigenvalues().minCoeff();
  double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) throw DegenerateModelError("information matrix is not positive definite");
  out.condition = hi / lo;
  if (out.condition > cond_limit) {
    throw DegenerateModelError("information matrix condition " +
                               std::to_string(out.condition) + " exceeds limit");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) {
    throw DegenerateModelError("Cholesky of information matrix failed");
  }
  out.inverse = llt.solve(Eigen::MatrixXd::Identity(S.rows(), S.cols()));
  out.inverse = 0.5 * (out.inverse + out.inverse.transpose()).eval();
  return out;
}

double min_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sym + sym.transpose()));
  return es.eigenvalues().minCoeff();
}

}  // namespace cblue
