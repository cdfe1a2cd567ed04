#pragma once

// Internal helpers shared by the estimator translation units.

#include <Eigen/Dense>

#include <cmath>

#include "eivscreen/core.hpp"

namespace eivscreen::detail {

// Eigenvalues ascending; eigenvectors as columns when requested.
void symmetric_eigen(const Eigen::MatrixXd& sym, Eigen::VectorXd& values, Eigen::MatrixXd* vectors);

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

// Gamma * beta touching only the nonzero columns of beta.
inline Eigen::VectorXd sparse_matvec(const Eigen::MatrixXd& G, const Eigen::VectorXd& beta) {
    const IndexSet nz = support_of(beta);
    if (2 * static_cast<Index>(nz.size()) > beta.size()) return G * beta;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(G.rows());
    for (Index j : nz) out.noalias() += G.col(j) * beta(j);
    return out;
}

// W_rows * beta for a subset of rows, using only nonzero columns.
inline Eigen::VectorXd predict_rows(const Eigen::MatrixXd& W, const IndexSet& rows, const Eigen::VectorXd& beta) {
    const IndexSet nz = support_of(beta);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Index>(rows.size()));
    for (Index j : nz)
        for (std::size_t a = 0; a < rows.size(); ++a) out(static_cast<Index>(a)) += W(rows[a], j) * beta(j);
    return out;
}

inline Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& W, const IndexSet& rows) {
    Eigen::MatrixXd out(static_cast<Index>(rows.size()), W.cols());
    for (std::size_t a = 0; a < rows.size(); ++a) out.row(static_cast<Index>(a)) = W.row(rows[a]);
    return out;
}

inline Eigen::VectorXd gather(const Eigen::VectorXd& y, const IndexSet& rows) {
    Eigen::VectorXd out(static_cast<Index>(rows.size()));
    for (std::size_t a = 0; a < rows.size(); ++a) out(static_cast<Index>(a)) = y(rows[a]);
    return out;
}

// X'X, filled on both triangles.
inline Eigen::MatrixXd cross_product(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    G.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
    G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
    return G;
}

// Unnormalized sufficient statistics of the full data, and the training-split
// versions obtained by removing one held-out fold.
struct GramSums {
    Eigen::MatrixXd ww; // W'W
    Eigen::VectorXd wy; // W'y
    Index rows = 0;
};

inline GramSums gram_sums(const Eigen::MatrixXd& W, const Eigen::VectorXd& y) {
    return {cross_product(W), W.transpose() * y, W.rows()};
}

struct SplitSums {
    GramSums train;
    GramSums test;
};

inline SplitSums split_sums(const GramSums& full, const Eigen::MatrixXd& W, const Eigen::VectorXd& y,
                            const IndexSet& test_rows) {
    SplitSums s;
    const Eigen::MatrixXd Wt = gather_rows(W, test_rows);
    const Eigen::VectorXd yt = gather(y, test_rows);
    s.test = {cross_product(Wt), Wt.transpose() * yt, Wt.rows()};
    s.train = {full.ww - s.test.ww, full.wy - s.test.wy, full.rows - s.test.rows};
    return s;
}

// Geometric grid from `top` down to `top * ratio`, `count` points.
inline Eigen::VectorXd geometric_grid(double top, double ratio, int count) {
    Eigen::VectorXd g(count);
    if (count == 1) {
        g(0) = top;
        return g;
    }
    for (int k = 0; k < count; ++k) g(k) = top * std::pow(ratio, static_cast<double>(k) / (count - 1));
    return g;
}

}  // namespace eivscreen::detail
