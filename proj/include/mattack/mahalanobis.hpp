#pragma once

#include <string>
#include <vector>

#include "mattack/matrix.hpp"

namespace mattack {

// Covariance of encoded mixed-type data with a truncated-eigenvalue
// pseudo-inverse. One-hot blocks make sigma rank-deficient, hence the
// truncation.
struct GeneralizedCovariance {
  Matrix sigma;                    // D x D, symmetric
  Matrix pseudo_inverse;           // V S^-1 V^T over retained eigenvalues
  std::vector<double> eigenvalues; // descending, full spectrum
  Matrix eigenvectors;             // column j pairs with eigenvalue j
  std::size_t retained_rank = 0;   // m
  std::vector<double> column_means;

  void save(const std::string& path) const;
  static GeneralizedCovariance load(const std::string& path);
};

// sigma = centered X^T X / (N-1); eigenvalues above 1e-6 * lambda_max are
// retained (at most max_rank when nonzero).
GeneralizedCovariance fit_covariance(const std::vector<std::vector<double>>& encoded_clean,
                                     std::size_t max_rank = 0);

enum class CovarianceCase { NumNum, NumCat, CatCat };

// Count-based closed forms for the three entry cases; used only as a
// cross-check against fit_covariance. Both mixed cases come out as
// the negation of the direct centered cross-product, so comparisons are on
// absolute values.
struct NumCatCounts {
  double n0 = 0, n1 = 0;       // samples in category 0 / 1 of feature j
  double mean0 = 0, mean1 = 0; // mean of numeric feature i per category
};
struct CatCatCounts {
  double n00 = 0, n01 = 0, n10 = 0, n11 = 0;
};

double closed_form_num_num(const std::vector<double>& xi, const std::vector<double>& xj);
double closed_form_num_cat(const NumCatCounts& c, bool* degenerate = nullptr);
double closed_form_cat_cat(const CatCatCounts& c, bool* degenerate = nullptr);

// D(x', x) = d^T P d with d = x' - x, and its gradient 2 P d w.r.t. x'.
std::pair<double, std::vector<double>> m_distance(const GeneralizedCovariance& cov,
                                                  const std::vector<double>& x_prime,
                                                  const std::vector<double>& x);
double m_distance_value(const GeneralizedCovariance& cov, const std::vector<double>& x_prime,
                        const std::vector<double>& x);

// (x - mu)^T P (x - mu) against the stored column means; diagnostics only.
double population_distance(const GeneralizedCovariance& cov, const std::vector<double>& x);

}  // namespace mattack
