#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qrelu/dataset.hpp"

namespace qrelu {

inline double relu(double z) { return z > 0.0 ? z : 0.0; }

// (1/n) sum_i (max(0, <w, x_i>) - y_i)^2
double loss(std::span<const double> w, const dataset& ds);

// ||w - w*|| / ||w*||
double rel_error(std::span<const double> w, const dataset& ds);

// 2 * (max(0, <w,x_i>) - y_i) * (1 + sgn(<w,x_i>)) * x_i with sgn(0) = 0.
// Note this is twice the analytic derivative of the squared residual; callers
// that need the analytic object divide by 2.
std::vector<double> generalized_gradient(std::span<const double> w,
                                         const dataset& ds, std::size_t i);

// Mean of generalized_gradient over the index list, accumulated in list order.
// out must have size d and is overwritten.
void minibatch_gradient(std::span<const double> w, const dataset& ds,
                        std::span<const std::size_t> indices,
                        std::span<double> out);
std::vector<double> minibatch_gradient(std::span<const double> w,
                                       const dataset& ds,
                                       std::span<const std::size_t> indices);

// One full gradient step at zero with step size 1: w0 = (2/n) sum_i y_i x_i.
// E[w0] = w* for standard Gaussian features.
std::vector<double> spectral_init(const dataset& ds);

}  // namespace qrelu
