#include "mgpa/pca.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace mgpa {

PcaResult pca_baseline(const Tensor& y, std::size_t k) {
  require(y.ndim() == 2, "pca_baseline: expected a P × F matrix");
  const std::size_t np = y.rows();
  const std::size_t nf = y.cols();
  require(k >= 1 && k <= std::min(np, nf), "pca_baseline: k must satisfy 1 <= k <= min(P, F)");

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor yc = Eigen::Map<const RowMajor>(y.values().data(), static_cast<Eigen::Index>(np),
                                           static_cast<Eigen::Index>(nf));
  const Eigen::RowVectorXd mean = yc.colwise().mean();
  yc.rowwise() -= mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(yc), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXd& u = svd.matrixU();
  const Eigen::MatrixXd& v = svd.matrixV();
  const Eigen::VectorXd& s = svd.singularValues();

  PcaResult out;
  out.scores = Tensor::matrix(np, k);
  out.components = Tensor::matrix(k, nf);
  out.mean.assign(mean.data(), mean.data() + nf);
  for (std::size_t c = 0; c < k; ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    Eigen::Index arg = 0;
    v.col(ci).cwiseAbs().maxCoeff(&arg);
    const double sign = v(arg, ci) < 0.0 ? -1.0 : 1.0;
    out.singular_values.push_back(s(ci));
    for (std::size_t f = 0; f < nf; ++f) {
      out.components(c, f) = sign * v(static_cast<Eigen::Index>(f), ci);
    }
    for (std::size_t p = 0; p < np; ++p) {
      out.scores(p, c) = sign * u(static_cast<Eigen::Index>(p), ci) * s(ci);
    }
  }
  return out;
}

}  // namespace mgpa
