#include "mldili/diagnostics.hpp"

#include <cmath>

#include "mldili/errors.hpp"
#include "mldili/simd_kernels.hpp"

namespace mldili {

AutocorrResult iact(const Eigen::VectorXd& series) {
  const auto n = series.size();
  if (n < 100) throw DimensionError("iact: need at least 100 samples");

  Eigen::VectorXd x = series.array() - series.mean();
  const int max_lag = static_cast<int>(n / 3);
  Eigen::VectorXd sums(max_lag + 1);
  // c(k) = (1/n) sum x_i x_{i+k}; computed lazily in blocks as the window
  // grows, the dot kernel does the heavy lifting.
  const auto& kern = kernels::active();
  auto autocov_at = [&](int k) {
    return kern.dot(x.data(), x.data() + k, static_cast<std::size_t>(n - k)) /
           static_cast<double>(n);
  };

  AutocorrResult out;
  const double c0 = autocov_at(0);
  if (c0 <= 0.0) {
    out.tau = 1.0;
    out.degenerate = true;
    out.window = 0;
    out.curve = Eigen::VectorXd::Ones(1);
    return out;
  }

  sums[0] = 1.0;
  double tau_hat = 1.0;
  int window = max_lag;
  bool found = false;
  for (int k = 1; k <= max_lag; ++k) {
    sums[k] = autocov_at(k) / c0;
    tau_hat += 2.0 * sums[k];
    if (static_cast<double>(k) >= 5.0 * tau_hat) {
      window = k;
      found = true;
      break;
    }
  }
  out.window = window;
  out.window_saturated = !found;
  out.tau = std::max(1.0, tau_hat);
  out.curve = sums.head(window + 1);
  return out;
}

double effective_sample_size(double tau, long n) {
  return static_cast<double>(n) / std::max(1.0, tau);
}

VarianceOfD variance_of_d(const Eigen::VectorXd& q_fine,
                          const Eigen::VectorXd& q_coarse) {
  if (q_fine.size() != q_coarse.size())
    throw DimensionError("variance_of_d: trace lengths differ");
  const auto n = q_fine.size();
  if (n < 2) throw DimensionError("variance_of_d: need at least two samples");

  const double mf = q_fine.mean();
  const double mc = q_coarse.mean();
  const Eigen::ArrayXd cf = q_fine.array() - mf;
  const Eigen::ArrayXd cc = q_coarse.array() - mc;

  VarianceOfD out;
  out.var_q_fine = cf.square().sum() / (n - 1);
  out.var_q_coarse = cc.square().sum() / (n - 1);
  out.covariance = (cf * cc).sum() / (n - 1);
  out.var_d = ((cf - cc).square()).sum() / (n - 1);
  return out;
}

CrossLevelResult cross_level_ratio(const std::vector<Eigen::VectorXd>& traces,
                                   int num_batches) {
  const int levels = static_cast<int>(traces.size());
  if (levels < 1) throw DimensionError("cross_level_ratio: no traces");
  if (num_batches < 20)
    throw DimensionError("cross_level_ratio: need at least 20 batches");
  for (const auto& t : traces)
    if (t.size() < num_batches)
      throw DimensionError("cross_level_ratio: trace shorter than the batch count");

  Eigen::MatrixXd batch_means(num_batches, levels);
  for (int l = 0; l < levels; ++l) {
    const auto len = traces[l].size() / num_batches;
    for (int b = 0; b < num_batches; ++b)
      batch_means(b, l) = traces[l].segment(b * len, len).mean();
  }

  Eigen::MatrixXd centered =
      batch_means.rowwise() - batch_means.colwise().mean();
  Eigen::MatrixXd cov =
      centered.transpose() * centered / (num_batches - 1);

  CrossLevelResult out;
  out.ratio.resize(levels, levels);
  for (int a = 0; a < levels; ++a)
    for (int b = 0; b < levels; ++b) {
      const double denom = std::max(cov(a, a), cov(b, b));
      out.ratio(a, b) = denom > 0.0 ? cov(a, b) / denom : 0.0;
      if (a != b)
        out.max_offdiag = std::max(out.max_offdiag, std::abs(out.ratio(a, b)));
    }
  return out;
}

}  // namespace mldili
