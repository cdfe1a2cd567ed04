#include <Eigen/Eigenvalues>

#include "detail.hpp"

namespace eivscreen::detail {

void symmetric_eigen(const Eigen::MatrixXd& sym, Eigen::VectorXd& values, Eigen::MatrixXd* vectors) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw Error(ErrorCode::FactorizationFailure, "symmetric eigendecomposition did not converge");
    values = es.eigenvalues();
    if (vectors) *vectors = es.eigenvectors();
}

}  // namespace eivscreen::detail
