#pragma once

// Empirical orthogonal functions from historical region x year probability
// matrices on the logit scale.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "attrib/core.hpp"
#include "attrib/distributions.hpp"
#include "attrib/errors.hpp"

namespace attrib {

// M x T matrix of logit posterior-mean probabilities.
struct HistoricalProbMatrix {
    Eigen::MatrixXd values;
    std::string scenario;
    int month = 0;
};

// M x p orthonormal columns with descending eigenvalues.
struct EofBasis {
    Eigen::MatrixXd vectors;
    Eigen::VectorXd eigenvalues;

    Eigen::Index regions() const { return vectors.rows(); }
    Eigen::Index count() const { return vectors.cols(); }

    EofBasis truncated(Eigen::Index p) const
    {
        if (p > count())
            throw DimensionError("requested " + std::to_string(p) + " EOFs but basis has " +
                                 std::to_string(count()));
        return {vectors.leftCols(p), eigenvalues.head(p)};
    }
};

// Entry (i, t) = logit((z + a) / (n + a + b)); finite even for z = 0 or z = n.
inline HistoricalProbMatrix estimate_historical_probs(const Eigen::MatrixXi& z, const Eigen::MatrixXi& n, double a,
                                                      double b)
{
    if (z.rows() != n.rows() || z.cols() != n.cols())
        throw DimensionError("count and ensemble-size matrices differ in shape");
    HistoricalProbMatrix out;
    out.values.resize(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index t = 0; t < z.cols(); ++t) {
            const BetaParams post = beta_binomial_posterior(z(i, t), n(i, t), a, b);
            out.values(i, t) = logit(post.mean());
        }
    return out;
}

// Subtracts each year's cross-region mean.
inline void remove_yearly_means(HistoricalProbMatrix& m)
{
    const Eigen::RowVectorXd means = m.values.colwise().mean();
    m.values.rowwise() -= means;
}

// Row-centered sample covariance across years (divisor T - 1).
inline Eigen::MatrixXd empirical_logit_cov(const HistoricalProbMatrix& m)
{
    const Eigen::Index t = m.values.cols();
    if (t < 2)
        throw DataError("empirical covariance needs at least two years (T = " + std::to_string(t) + ")");
    const Eigen::MatrixXd centered = m.values.colwise() - m.values.rowwise().mean();
    Eigen::MatrixXd s = centered * centered.transpose() / static_cast<double>(t - 1);
    return 0.5 * (s + s.transpose());
}

// Top-p eigenvectors of a symmetric PSD matrix. Eigenvalues below
// 1e-12 * lambda_max are clipped to 0; each vector is flipped so its
// largest-magnitude entry is positive.
inline EofBasis compute_eofs(const Eigen::MatrixXd& s, Eigen::Index p)
{
    if (s.rows() != s.cols())
        throw DimensionError("covariance must be square");
    if (p < 0 || p > s.rows())
        throw DimensionError("EOF count " + std::to_string(p) + " exceeds region count " + std::to_string(s.rows()));
    const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw DomainError("covariance matrix is not symmetric");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (s + s.transpose()));
    if (solver.info() != Eigen::Success)
        throw NumericalError("symmetric eigen-decomposition failed");

    const Eigen::Index m = s.rows();
    // Eigen returns ascending order; reverse it.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return solver.eigenvalues()(a) > solver.eigenvalues()(b);
    });

    const double lambda_max = m > 0 ? std::max(0.0, solver.eigenvalues()(order.front())) : 0.0;
    EofBasis out;
    out.vectors.resize(m, p);
    out.eigenvalues.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const Eigen::Index src = order[static_cast<std::size_t>(j)];
        double lambda = solver.eigenvalues()(src);
        if (lambda < 1e-12 * lambda_max)
            lambda = 0.0;
        Eigen::VectorXd v = solver.eigenvectors().col(src);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0)
            v = -v;
        out.vectors.col(j) = v;
        out.eigenvalues(j) = lambda;
    }
    return out;
}

} // namespace attrib
