#include "qrelu/model.hpp"

#include <cmath>
#include <stdexcept>

#include "qrelu/kernels.hpp"

namespace qrelu {
namespace {

void check_dim(std::span<const double> w, const dataset& ds, const char* who) {
  if (w.size() != ds.d)
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}

// prefactor 2*(relu(z) - y)*(1 + sgn(z)), sgn(0) = 0
double gradient_coef(double z, double y) {
  const double s = static_cast<double>(z > 0.0) - static_cast<double>(z < 0.0);
  return 2.0 * (relu(z) - y) * (1.0 + s);
}

}  // namespace

double loss(std::span<const double> w, const dataset& ds) {
  check_dim(w, ds, "loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < ds.n; ++i) {
    const double r = relu(dot(w, ds.row(i))) - ds.labels[i];
    acc = std::fma(r, r, acc);
  }
  return acc / static_cast<double>(ds.n);
}

double rel_error(std::span<const double> w, const dataset& ds) {
  check_dim(w, ds, "rel_error");
  return std::sqrt(sqdist(w, ds.w_star)) / std::sqrt(sqnorm(ds.w_star));
}

std::vector<double> generalized_gradient(std::span<const double> w,
                                         const dataset& ds, std::size_t i) {
  check_dim(w, ds, "generalized_gradient");
  if (i >= ds.n)
    throw std::invalid_argument("generalized_gradient: index out of range");
  const std::span<const double> x = ds.row(i);
  const double coef = gradient_coef(dot(w, x), ds.labels[i]);
  std::vector<double> g(ds.d, 0.0);
  axpy(coef, x, g);
  return g;
}

void minibatch_gradient(std::span<const double> w, const dataset& ds,
                        std::span<const std::size_t> indices,
                        std::span<double> out) {
  check_dim(w, ds, "minibatch_gradient");
  if (indices.empty())
    throw std::invalid_argument("minibatch_gradient: empty index list");
  for (const std::size_t i : indices)
    if (i >= ds.n)
      throw std::invalid_argument("minibatch_gradient: index out of range");
  std::fill(out.begin(), out.end(), 0.0);
  for (const std::size_t i : indices) {
    const std::span<const double> x = ds.row(i);
    const double coef = gradient_coef(dot(w, x), ds.labels[i]);
    if (coef != 0.0) axpy(coef, x, out);
  }
  scale(out, 1.0 / static_cast<double>(indices.size()));
}

std::vector<double> minibatch_gradient(std::span<const double> w,
                                       const dataset& ds,
                                       std::span<const std::size_t> indices) {
  std::vector<double> g(ds.d);
  minibatch_gradient(w, ds, indices, g);
  return g;
}

std::vector<double> spectral_init(const dataset& ds) {
  std::vector<double> w0(ds.d, 0.0);
  for (std::size_t i = 0; i < ds.n; ++i)
    if (ds.labels[i] != 0.0) axpy(ds.labels[i], ds.row(i), w0);
  scale(w0, 2.0 / static_cast<double>(ds.n));
  return w0;
}

}  // namespace qrelu
