#pragma once

// Correlation-matrix PCA. The covariance comes from the map/reduce executor,
// is normalised to a correlation matrix and decomposed with an SVD; features
// are z-scored and projected on the leading singular vectors.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <json.hpp>

#include "sigauth/checksum.hpp"
#include "sigauth/error.hpp"
#include "sigauth/features.hpp"
#include "sigauth/mapreduce.hpp"

namespace sigauth {

inline constexpr double kDegenerateVariance = 1e-12;

struct CorrelationResult {
  Eigen::VectorXd sigma;
  Eigen::MatrixXd corr;
};

// corr_ij = cov_ij / (sigma_i sigma_j). Throws DegenerateFeature with the
// column index of the first variance at or below kDegenerateVariance.
inline CorrelationResult correlation_from_covariance(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw Error(ErrorCode::DimensionMismatch, "covariance must be square");
  const Eigen::Index d = cov.rows();
  CorrelationResult out;
  out.sigma.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(cov(i, i) > kDegenerateVariance))
      throw Error(ErrorCode::DegenerateFeature, "feature " + std::to_string(i) + " has (near) zero variance",
                  static_cast<std::size_t>(i));
    out.sigma[i] = std::sqrt(cov(i, i));
  }
  out.corr.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out.corr(i, j) = cov(i, j) / (out.sigma[i] * out.sigma[j]);
    out.corr(i, i) = 1.0;
  }
  return out;
}

struct PcaBasis {
  Eigen::MatrixXd basis;            // D x k
  Eigen::VectorXd singular_values;  // length D, nonincreasing
  std::size_t k = 0;
};

struct PcaOptions {
  double variance_target = 0.95;
  std::size_t max_components = 32;
};

// k is the smallest count whose share of the singular-value sum reaches the
// target, then capped at max_components. Each basis column is flipped so its
// largest-magnitude entry is positive.
inline PcaBasis fit_pca(const Eigen::MatrixXd& corr, double variance_target,
                        std::size_t max_components = PcaOptions{}.max_components) {
  if (!(variance_target > 0.0 && variance_target <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "variance_target must lie in (0, 1]");
  if (corr.rows() != corr.cols() || corr.rows() == 0)
    throw Error(ErrorCode::DimensionMismatch, "correlation matrix must be square and non-empty");
  if ((corr - corr.transpose()).cwiseAbs().maxCoeff() > 1e-9)
    throw Error(ErrorCode::NonSymmetric, "correlation matrix is not symmetric");
  if (max_components == 0) throw Error(ErrorCode::InvalidArgument, "max_components must be >= 1");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(corr, Eigen::ComputeFullU);
  PcaBasis out;
  out.singular_values = svd.singularValues();
  const auto d = static_cast<std::size_t>(corr.rows());

  const double total = out.singular_values.sum();
  std::size_t k = d;
  if (total > 0.0) {
    double running = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      running += out.singular_values[static_cast<Eigen::Index>(i)];
      if (running / total >= variance_target) {
        k = i + 1;
        break;
      }
    }
  }
  out.k = std::min(k, max_components);

  out.basis = svd.matrixU().leftCols(static_cast<Eigen::Index>(out.k));
  for (Eigen::Index c = 0; c < out.basis.cols(); ++c) {
    Eigen::Index at = 0;
    out.basis.col(c).cwiseAbs().maxCoeff(&at);
    if (out.basis(at, c) < 0.0) out.basis.col(c) *= -1.0;
  }
  return out;
}

// Population-level model. Columns with (near) zero variance are dropped and
// recorded in `keep`; mu/sigma stay full length, corr and basis are over the
// kept columns only.
struct PcaModel {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;
  std::vector<bool> keep;
  Eigen::MatrixXd corr;
  Eigen::MatrixXd basis;
  Eigen::VectorXd singular_values;
  std::size_t k = 0;
  double variance_target = 0.95;
  std::string id;  // content hash; ensembles reference the model by it

  std::size_t input_dim() const { return static_cast<std::size_t>(mu.size()); }
  std::size_t kept_dim() const { return static_cast<std::size_t>(corr.rows()); }

  double explained_ratio(std::size_t components) const {
    const double total = singular_values.sum();
    return total > 0.0 ? singular_values.head(static_cast<Eigen::Index>(components)).sum() / total : 1.0;
  }
};

inline nlohmann::ordered_json to_json(const PcaModel& m);
inline std::string pca_content_id(const PcaModel& m);

inline PcaModel fit_pca_model(const Eigen::MatrixXd& features, std::size_t workers, const PcaOptions& opts = {}) {
  PcaModel m;
  m.variance_target = opts.variance_target;
  const Eigen::MatrixXd cov = mapreduce_covariance(features, workers, &m.mu);
  const Eigen::Index d = cov.rows();

  m.keep.assign(static_cast<std::size_t>(d), true);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (cov(i, i) > kDegenerateVariance) kept.push_back(i);
    else m.keep[static_cast<std::size_t>(i)] = false;
  }
  if (kept.empty()) throw Error(ErrorCode::DegenerateFeature, "every feature is constant", 0);

  const auto dk = static_cast<Eigen::Index>(kept.size());
  Eigen::MatrixXd sub(dk, dk);
  for (Eigen::Index i = 0; i < dk; ++i)
    for (Eigen::Index j = 0; j < dk; ++j) sub(i, j) = cov(kept[i], kept[j]);

  auto [sigma_kept, corr] = correlation_from_covariance(sub);
  m.sigma = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < dk; ++i) m.sigma[kept[i]] = sigma_kept[i];
  m.corr = std::move(corr);

  auto fitted = fit_pca(m.corr, opts.variance_target, opts.max_components);
  m.basis = std::move(fitted.basis);
  m.singular_values = std::move(fitted.singular_values);
  m.k = fitted.k;
  m.id = pca_content_id(m);
  return m;
}

inline PcaModel fit_pca_model(const FeatureMatrix& features, std::size_t workers, const PcaOptions& opts = {}) {
  return fit_pca_model(features.values, workers, opts);
}

// z = ((x - mu) / sigma)[kept]^T * basis
inline Eigen::VectorXd project(const PcaModel& model, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != model.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "feature vector has length " + std::to_string(x.size()) +
                                                  ", model expects " + std::to_string(model.input_dim()));
  Eigen::VectorXd standardized(static_cast<Eigen::Index>(model.kept_dim()));
  Eigen::Index j = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (model.keep[static_cast<std::size_t>(i)]) standardized[j++] = (x[i] - model.mu[i]) / model.sigma[i];
  return model.basis.transpose() * standardized;
}

inline Eigen::MatrixXd project_rows(const PcaModel& model, const Eigen::MatrixXd& rows) {
  Eigen::MatrixXd out(rows.rows(), static_cast<Eigen::Index>(model.k));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) out.row(r) = project(model, rows.row(r).transpose()).transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Serialization (lossless: doubles are printed in shortest round-trip form).

namespace detail {

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Eigen::VectorXd vector_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::ordered_json matrix_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

inline Eigen::MatrixXd matrix_from(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (static_cast<std::size_t>(rows * cols) != flat.size())
    throw Error(ErrorCode::CorruptRecord, "matrix payload size does not match its shape");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
  return m;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const PcaModel& m) {
  nlohmann::ordered_json j;
  j["variance_target"] = m.variance_target;
  j["k"] = m.k;
  j["mu"] = detail::to_std(m.mu);
  j["sigma"] = detail::to_std(m.sigma);
  j["keep"] = m.keep;
  j["singular_values"] = detail::to_std(m.singular_values);
  j["corr"] = detail::matrix_json(m.corr);
  j["basis"] = detail::matrix_json(m.basis);
  return j;
}

// First 16 hex digits of the SHA-256 of the serialized model.
inline std::string pca_content_id(const PcaModel& m) { return sha256_hex(to_json(m).dump()).substr(0, 16); }

inline PcaModel pca_from_json(const nlohmann::json& j) {
  PcaModel m;
  m.variance_target = j.at("variance_target").get<double>();
  m.k = j.at("k").get<std::size_t>();
  m.mu = detail::vector_from(j.at("mu"));
  m.sigma = detail::vector_from(j.at("sigma"));
  m.keep = j.at("keep").get<std::vector<bool>>();
  m.singular_values = detail::vector_from(j.at("singular_values"));
  m.corr = detail::matrix_from(j.at("corr"));
  m.basis = detail::matrix_from(j.at("basis"));
  std::size_t kept = 0;
  for (bool b : m.keep) kept += b ? 1 : 0;
  m.id = pca_content_id(m);
  if (j.contains("id") && j.at("id").get<std::string>() != m.id)
    throw Error(ErrorCode::CorruptRecord, "PCA model id does not match its content");
  if (m.keep.size() != m.input_dim() || static_cast<std::size_t>(m.sigma.size()) != m.input_dim() ||
      kept != m.kept_dim() || static_cast<std::size_t>(m.basis.rows()) != kept ||
      static_cast<std::size_t>(m.basis.cols()) != m.k)
    throw Error(ErrorCode::CorruptRecord, "inconsistent PCA model shapes");
  return m;
}

}  // namespace sigauth
