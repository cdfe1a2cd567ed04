#include "eivscreen/core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace eivscreen {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::AsymmetricSigmaU: return "AsymmetricSigmaU";
        case ErrorCode::IndefiniteSigmaU: return "IndefiniteSigmaU";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::AllFeaturesDegenerate: return "AllFeaturesDegenerate";
        case ErrorCode::DTooLarge: return "DTooLarge";
        case ErrorCode::MTooLarge: return "MTooLarge";
        case ErrorCode::NonPositiveV: return "NonPositiveV";
        case ErrorCode::FoldsExceedN: return "FoldsExceedN";
        case ErrorCode::NonPositiveDiagonal: return "NonPositiveDiagonal";
        case ErrorCode::BlockSizeIncompatible: return "BlockSizeIncompatible";
        case ErrorCode::FactorizationFailure: return "FactorizationFailure";
        case ErrorCode::EmptyTrueSupport: return "EmptyTrueSupport";
        case ErrorCode::UnrankedTrueFeature: return "UnrankedTrueFeature";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

SigmaU SigmaU::diagonal(Eigen::VectorXd diag) {
    SigmaU s;
    s.form_ = Form::Diagonal;
    s.diag_ = std::move(diag);
    return s;
}

SigmaU SigmaU::full(Eigen::MatrixXd matrix) {
    SigmaU s;
    s.form_ = Form::Full;
    s.full_ = std::move(matrix);
    return s;
}

Eigen::VectorXd SigmaU::variances() const {
    return is_diagonal() ? diag_ : Eigen::VectorXd(full_.diagonal());
}

Eigen::MatrixXd SigmaU::dense() const {
    if (is_diagonal()) return diag_.asDiagonal();
    return full_;
}

double SigmaU::quad_form(const Eigen::VectorXd& beta) const {
    if (is_diagonal()) return (beta.array().square() * diag_.array()).sum();
    // Only the nonzero block matters; estimates are sparse.
    IndexSet nz = support_of(beta);
    double acc = 0.0;
    for (Index a : nz)
        for (Index b : nz) acc += beta(a) * full_(a, b) * beta(b);
    return acc;
}

SigmaU SigmaU::restrict(const IndexSet& idx) const {
    const Index k = static_cast<Index>(idx.size());
    if (is_diagonal()) {
        Eigen::VectorXd sub(k);
        for (Index a = 0; a < k; ++a) sub(a) = diag_(idx[a]);
        return diagonal(std::move(sub));
    }
    Eigen::MatrixXd sub(k, k);
    for (Index a = 0; a < k; ++a)
        for (Index b = 0; b < k; ++b) sub(a, b) = full_(idx[a], idx[b]);
    return full(std::move(sub));
}

void SigmaU::subtract_from(Eigen::MatrixXd& gram) const {
    if (is_diagonal())
        gram.diagonal() -= diag_;
    else
        gram -= full_;
}

Index MarginalStats::valid_count() const {
    return static_cast<Index>(std::count(valid.begin(), valid.end(), true));
}

void validate_dataset(const ObservedDataset& d) {
    const Index n = d.W.rows();
    const Index p = d.W.cols();
    if (n < 2 || p < 1) {
        std::ostringstream os;
        os << "need n >= 2 and p >= 1, got n=" << n << ", p=" << p;
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }
    if (d.y.size() != n) {
        std::ostringstream os;
        os << "y has " << d.y.size() << " entries but W has " << n << " rows";
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }
    if (d.sigma_u.size() != p) {
        std::ostringstream os;
        os << "sigma_u has dimension " << d.sigma_u.size() << " but W has " << p << " columns";
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }
    if (!d.y.allFinite() || !d.W.allFinite())
        throw Error(ErrorCode::ValidationError, "y and W must be finite (missing values are not supported)");

    if (d.sigma_u.is_diagonal()) {
        const auto& diag = d.sigma_u.diag_storage();
        for (Index j = 0; j < p; ++j) {
            if (!(diag(j) >= 0.0)) {
                std::ostringstream os;
                os << "sigma_u diagonal entry " << (j + 1) << " is " << diag(j);
                throw Error(ErrorCode::IndefiniteSigmaU, os.str());
            }
        }
        return;
    }

    const auto& S = d.sigma_u.full_storage();
    if (!S.allFinite()) throw Error(ErrorCode::ValidationError, "sigma_u must be finite");
    const double asym = (S - S.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTol) {
        std::ostringstream os;
        os << "max |S - S'| = " << asym;
        throw Error(ErrorCode::AsymmetricSigmaU, os.str());
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < kEigenTol) {
        std::ostringstream os;
        os << "smallest eigenvalue " << min_eig;
        throw Error(ErrorCode::IndefiniteSigmaU, os.str());
    }
}

MarginalStats marginal_stats(const ObservedDataset& d) {
    const Index n = d.n();
    const double inv_n = 1.0 / static_cast<double>(n);
    MarginalStats s;
    s.n = n;
    s.v = d.W.colwise().squaredNorm().transpose() * inv_n - d.sigma_u.variances();
    s.c = (d.W.transpose() * d.y) * inv_n;
    s.valid.resize(static_cast<std::size_t>(d.p()));
    for (Index j = 0; j < d.p(); ++j) s.valid[static_cast<std::size_t>(j)] = s.v(j) > 0.0;
    return s;
}

namespace {

void check_indices(const IndexSet& idx, Index p) {
    for (Index j : idx) {
        if (j < 0 || j >= p) {
            std::ostringstream os;
            os << "index " << (j + 1) << " outside 1.." << p;
            throw Error(ErrorCode::IndexOutOfRange, os.str());
        }
    }
}

}  // namespace

ObservedDataset restrict_columns(const ObservedDataset& d, const IndexSet& idx) {
    check_indices(idx, d.p());
    ObservedDataset out;
    out.y = d.y;
    out.W.resize(d.n(), static_cast<Index>(idx.size()));
    for (std::size_t a = 0; a < idx.size(); ++a) out.W.col(static_cast<Index>(a)) = d.W.col(idx[a]);
    out.sigma_u = d.sigma_u.restrict(idx);
    return out;
}

Eigen::VectorXd embed_coefficients(const Eigen::VectorXd& beta_sub, const IndexSet& idx, Index p) {
    if (static_cast<Index>(idx.size()) != beta_sub.size()) {
        std::ostringstream os;
        os << "beta_sub has " << beta_sub.size() << " entries for " << idx.size() << " indices";
        throw Error(ErrorCode::LengthMismatch, os.str());
    }
    check_indices(idx, p);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(p);
    for (std::size_t a = 0; a < idx.size(); ++a) out(idx[a]) = beta_sub(static_cast<Index>(a));
    return out;
}

IndexSet support_of(const Eigen::VectorXd& beta) {
    IndexSet s;
    for (Index j = 0; j < beta.size(); ++j)
        if (beta(j) != 0.0) s.push_back(j);
    return s;
}

CoefEstimate make_estimate(Eigen::VectorXd beta, std::string method) {
    CoefEstimate e;
    e.support = support_of(beta);
    e.beta = std::move(beta);
    e.method = std::move(method);
    return e;
}

}  // namespace eivscreen
