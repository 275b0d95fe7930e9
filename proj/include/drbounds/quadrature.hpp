#pragma once

#include <Eigen/Core>

namespace drbounds {

// Gauss-Hermite rule transformed to the standard normal weight: integrates
// E[f(U)] = sum_k w(k) * f(x(k)) exactly for polynomials f up to degree
// 2*points-1, U ~ N(0,1). Weights sum to 1.
struct GaussHermiteRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};

// Nodes/weights via Golub-Welsch on the symmetric Jacobi tridiagonal.
GaussHermiteRule gauss_hermite_normal(int points);

// Standard normal CDF and quantile (Wichura's AS241 for the inverse).
double normal_cdf(double z);
double normal_quantile(double p);

} // namespace drbounds
