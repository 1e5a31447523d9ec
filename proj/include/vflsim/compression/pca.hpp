#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vflsim/error.hpp"
#include "vflsim/linalg/matrix.hpp"

namespace vflsim::compression {

struct SymmetricEigen {
  Vector values;  ///< descending
  Matrix vectors;  ///< row i is the eigenvector for values[i]
};

/// Cyclic Jacobi rotations on a symmetric matrix. Accurate to a few ulps
/// on the small (features-per-party) sizes used here.
inline SymmetricEigen symmetric_eigen(Matrix a, int max_sweeps = 100) {
  const std::size_t n = a.rows();
  detail::require_shape(a.cols() == n, "symmetric_eigen: matrix is not square");
  Matrix v = identity(n);

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) total += a(i, j) * a(i, j);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-30 * total || off == 0.0) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (std::size_t r = 0; r < n; ++r) {
    out.values[r] = a(order[r], order[r]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(r, k) = v(k, order[r]);
  }
  return out;
}

/// Flips the sign of each row so that its largest-magnitude entry (first
/// one on ties) is positive.
inline void fix_row_signs(Matrix& w) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < w.cols(); ++c) {
      if (std::abs(w(r, c)) > std::abs(w(r, best))) best = c;
    }
    if (w(r, best) < 0) {
      for (std::size_t c = 0; c < w.cols(); ++c) w(r, c) = -w(r, c);
    }
  }
}

struct CompressionPlan {
  Matrix w;                ///< k x n, orthonormal rows
  Vector explained;        ///< eigenvalues of X^T X for the kept rows
  std::size_t k = 0;
  std::size_t n = 0;
  double ratio() const { return n == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(n); }
};

/// Uncentered PCA: the top-k eigenvectors of X^T X.
inline CompressionPlan fit_pca(const Matrix& x, std::size_t k) {
  const std::size_t n = x.cols();
  if (k < 1 || k > n) {
    throw ConfigError("fit_pca: k=" + std::to_string(k) + " must lie in [1, " +
                      std::to_string(n) + "]");
  }
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (double v : x.row(i)) {
      if (!std::isfinite(v)) throw ConfigError("fit_pca: data contains non-finite values");
    }
  }
  const Matrix gram = matmul(x.transpose(), x);
  const SymmetricEigen eig = symmetric_eigen(gram);
  CompressionPlan plan;
  plan.k = k;
  plan.n = n;
  plan.w = Matrix(k, n);
  plan.explained.assign(eig.values.begin(), eig.values.begin() + static_cast<long>(k));
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < n; ++c) plan.w(r, c) = eig.vectors(r, c);
  fix_row_signs(plan.w);
  return plan;
}

/// Target dimension for a compression ratio: round(ratio * n), at least 1.
inline std::size_t target_dimension(std::size_t n, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw ConfigError("compression ratio must lie in (0, 1]");
  }
  const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n, 1));
}

inline CompressionPlan fit_pca_ratio(const Matrix& x, double ratio) {
  return fit_pca(x, target_dimension(x.cols(), ratio));
}

/// theta_c = theta W^T
inline Vector compress_params(const CompressionPlan& plan, std::span<const double> theta) {
  detail::require_shape(theta.size() == plan.n, "compress: parameter length != plan.n");
  return matvec(plan.w, theta);
}

/// Z = X W^T
inline Matrix compress_data(const CompressionPlan& plan, const Matrix& x) {
  detail::require_shape(x.cols() == plan.n, "compress: data width != plan.n");
  return matmul_transposed(x, plan.w);
}

struct Compressed {
  Vector theta;
  Matrix z;
};

inline Compressed compress(const CompressionPlan& plan, std::span<const double> theta,
                           const Matrix& x) {
  return {compress_params(plan, theta), compress_data(plan, x)};
}

/// g = g_c W
inline Vector decompress_gradient(const CompressionPlan& plan, std::span<const double> g_c) {
  detail::require_shape(g_c.size() == plan.k, "decompress: gradient length != plan.k");
  return matvec_transposed(plan.w, g_c);
}

/// W as CSV with full round-trip precision, one row per principal direction.
inline void write_plan_csv(const CompressionPlan& plan, std::ostream& out) {
  out << std::setprecision(17);
  for (std::size_t r = 0; r < plan.k; ++r) {
    for (std::size_t c = 0; c < plan.n; ++c) {
      if (c) out << ',';
      out << plan.w(r, c);
    }
    out << '\n';
  }
}

/// Per-party compression state. The plan is fitted lazily on first use
/// and reused afterwards, since the party's local data does not change
/// during a run.
class CompressionHook {
 public:
  CompressionHook(const Matrix& local_data, double ratio) : data_(&local_data), ratio_(ratio) {
    (void)target_dimension(local_data.cols(), ratio);
  }

  const CompressionPlan& plan_for_iteration(int /*iteration*/) {
    if (!plan_) {
      plan_ = fit_pca_ratio(*data_, ratio_);
      compressed_ = compress_data(*plan_, *data_);
    }
    return *plan_;
  }

  /// Local data projected onto the plan, same rows as the input.
  const Matrix& compressed_data() {
    plan_for_iteration(1);
    return compressed_;
  }

  double ratio() const { return ratio_; }

 private:
  const Matrix* data_;
  double ratio_;
  std::optional<CompressionPlan> plan_;
  Matrix compressed_;
};

}  // namespace vflsim::compression
