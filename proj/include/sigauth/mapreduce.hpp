#pragma once

// In-process map/reduce for the population covariance. Mappers turn a
// partition of feature rows into (n, sum x, sum x x^T); the reducer adds
// those componentwise. Mappers may run concurrently, the fold always runs in
// ascending partition order so results are bit-stable for any worker count.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sigauth/error.hpp"
#include "sigauth/features.hpp"
#include "sigauth/parallel.hpp"

namespace sigauth {

struct PartialStats {
  std::size_t n = 0;
  Eigen::VectorXd sum;
  Eigen::MatrixXd sum_outer;

  static PartialStats zero(std::size_t dim) {
    const auto d = static_cast<Eigen::Index>(dim);
    return {0, Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
  }
  std::size_t dim() const { return static_cast<std::size_t>(sum.size()); }
};

struct Partition {
  std::size_t index = 0;
  std::vector<std::size_t> row_ids;  // positions in the source matrix
  Eigen::MatrixXd rows;              // copies of those rows, same order
};

// Round-robin: row r goes to partition r mod W.
inline std::vector<Partition> partition_rows(const Eigen::MatrixXd& matrix, std::size_t workers) {
  const auto n = static_cast<std::size_t>(matrix.rows());
  if (n == 0) throw Error(ErrorCode::EmptyData, "cannot partition an empty matrix");
  if (workers == 0) throw Error(ErrorCode::InvalidArgument, "partition count must be >= 1");
  if (workers > n)
    throw Error(ErrorCode::SplitTooFine,
                std::to_string(workers) + " partitions requested for " + std::to_string(n) + " rows");

  std::vector<Partition> parts(workers);
  for (std::size_t p = 0; p < workers; ++p) {
    parts[p].index = p;
    for (std::size_t r = p; r < n; r += workers) parts[p].row_ids.push_back(r);
    parts[p].rows.resize(static_cast<Eigen::Index>(parts[p].row_ids.size()), matrix.cols());
    for (std::size_t i = 0; i < parts[p].row_ids.size(); ++i)
      parts[p].rows.row(static_cast<Eigen::Index>(i)) = matrix.row(static_cast<Eigen::Index>(parts[p].row_ids[i]));
  }
  return parts;
}

inline std::vector<Partition> partition_rows(const FeatureMatrix& matrix, std::size_t workers) {
  return partition_rows(matrix.values, workers);
}

inline PartialStats covariance_mapper(const Partition& p) {
  if (p.rows.rows() == 0)
    throw Error(ErrorCode::EmptyPartition, "partition " + std::to_string(p.index) + " is empty", p.index);
  const Eigen::Index d = p.rows.cols();
  PartialStats out = PartialStats::zero(static_cast<std::size_t>(d));
  out.n = static_cast<std::size_t>(p.rows.rows());
  for (Eigen::Index r = 0; r < p.rows.rows(); ++r) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double xi = p.rows(r, i);
      out.sum[i] += xi;
      for (Eigen::Index j = 0; j <= i; ++j) out.sum_outer(i, j) += xi * p.rows(r, j);
    }
  }
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < i; ++j) out.sum_outer(j, i) = out.sum_outer(i, j);
  return out;
}

inline PartialStats covariance_reducer(const PartialStats& a, const PartialStats& b) {
  if (a.dim() != b.dim() || a.sum_outer.rows() != b.sum_outer.rows())
    throw Error(ErrorCode::DimensionMismatch,
                "cannot reduce stats of dimension " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
  return {a.n + b.n, a.sum + b.sum, a.sum_outer + b.sum_outer};
}

// Mapper outputs are buffered and folded as
//   reducer(...reducer(reducer(identity, out[0]), out[1])..., out[W-1]).
template <typename Mapper, typename Reducer, typename Stats>
Stats run_mapreduce(std::span<const Partition> partitions, Mapper&& mapper, Reducer&& reducer,
                    const Stats& identity, std::size_t workers = 1) {
  if (partitions.empty()) throw Error(ErrorCode::EmptyData, "run_mapreduce needs at least one partition");
  auto outputs = parallel_map(
      partitions.size(), workers, [&](std::size_t i) { return mapper(partitions[i]); },
      [&](const TaskFailure& f) {
        std::string what = "unknown error";
        try {
          std::rethrow_exception(f.error);
        } catch (const std::exception& e) {
          what = e.what();
        } catch (...) {
        }
        throw Error(ErrorCode::MapperFailure, "mapper failed on partition " + std::to_string(f.index) + ": " + what,
                    f.index);
      });
  Stats acc = identity;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    try {
      acc = reducer(acc, outputs[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "reducer failed at partition " + std::to_string(i) + ": " + e.what(), i);
    }
  }
  return acc;
}

// Sample covariance (n - 1 denominator).
inline Eigen::MatrixXd finalize_covariance(const PartialStats& stats) {
  if (stats.n < 2)
    throw Error(ErrorCode::InsufficientSamples, "covariance needs n >= 2, got " + std::to_string(stats.n));
  const double n = static_cast<double>(stats.n);
  const Eigen::VectorXd mu = stats.sum / n;
  const Eigen::Index d = mu.size();
  Eigen::MatrixXd cov(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      cov(i, j) = (stats.sum_outer(i, j) - n * mu[i] * mu[j]) / (n - 1.0);
      cov(j, i) = cov(i, j);
    }
  }
  return cov;
}

// Partition, map, reduce and finalize in one call.
inline Eigen::MatrixXd mapreduce_covariance(const Eigen::MatrixXd& matrix, std::size_t workers,
                                            Eigen::VectorXd* mean_out = nullptr) {
  const auto parts = partition_rows(matrix, std::min<std::size_t>(std::max<std::size_t>(workers, 1),
                                                                  static_cast<std::size_t>(matrix.rows())));
  const auto stats = run_mapreduce(std::span<const Partition>(parts), covariance_mapper, covariance_reducer,
                                   PartialStats::zero(static_cast<std::size_t>(matrix.cols())), workers);
  if (mean_out) *mean_out = stats.sum / static_cast<double>(stats.n);
  return finalize_covariance(stats);
}

}  // namespace sigauth
