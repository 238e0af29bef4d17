#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sigauth/error.hpp"
#include "sigauth/sigdata.hpp"

namespace sigauth {

// Five statistics per channel, then four global descriptors.
inline constexpr std::size_t kStatsPerChannel = 5;
inline constexpr std::size_t kFeatureDim = kChannels * kStatsPerChannel + 4;
static_assert(kFeatureDim == 64);

enum class Stat : std::size_t { Mean, Std, Min, Max, Rms };

constexpr std::size_t feature_slot(Channel c, Stat s) {
  return static_cast<std::size_t>(c) * kStatsPerChannel + static_cast<std::size_t>(s);
}
inline constexpr std::size_t kSlotDuration = 60;
inline constexpr std::size_t kSlotPointCount = 61;
inline constexpr std::size_t kSlotMeanAccelMagnitude = 62;
inline constexpr std::size_t kSlotMeanGyroMagnitude = 63;

struct FeatureVector {
  Eigen::VectorXd values;
  int label = 1;  // genuine = 1, forged = 0
  std::string user_id;
};

struct FeatureMatrix {
  Eigen::MatrixXd values;  // N x D, row i = sample i
  std::vector<int> labels;
  std::vector<std::string> user_ids;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

// Requires a sample that passes check_quality().
inline FeatureVector extract_features(const SignatureSample& s) {
  if (auto q = check_quality(s); !q.pass())
    throw Error(ErrorCode::QualityFailure, "sample fails quality gate: " + q.summary());

  FeatureVector fv;
  fv.user_id = s.user_id;
  fv.label = is_forgery(s.kind) ? 0 : 1;
  fv.values.resize(static_cast<Eigen::Index>(kFeatureDim));

  const std::size_t n = s.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto& x = s.channels[c];
    double sum = 0.0, sum_sq = 0.0, lo = x[0], hi = x[0];
    for (double v : x) {
      sum += v;
      sum_sq += v * v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double mean = sum * inv_n;
    double centered = 0.0;
    for (double v : x) centered += (v - mean) * (v - mean);
    const auto base = static_cast<Eigen::Index>(c * kStatsPerChannel);
    fv.values[base + 0] = mean;
    fv.values[base + 1] = std::sqrt(centered * inv_n);  // population std
    fv.values[base + 2] = lo;
    fv.values[base + 3] = hi;
    fv.values[base + 4] = std::sqrt(sum_sq * inv_n);
  }

  double accel = 0.0, gyro = 0.0;
  const auto& ax = s.channel(Channel::AccelX);
  const auto& ay = s.channel(Channel::AccelY);
  const auto& az = s.channel(Channel::AccelZ);
  const auto& gx = s.channel(Channel::GyroX);
  const auto& gy = s.channel(Channel::GyroY);
  const auto& gz = s.channel(Channel::GyroZ);
  for (std::size_t i = 0; i < n; ++i) {
    accel += std::sqrt(ax[i] * ax[i] + ay[i] * ay[i] + az[i] * az[i]);
    gyro += std::sqrt(gx[i] * gx[i] + gy[i] * gy[i] + gz[i] * gz[i]);
  }
  fv.values[kSlotDuration] = s.timestamps.back() - s.timestamps.front();
  fv.values[kSlotPointCount] = static_cast<double>(n);
  fv.values[kSlotMeanAccelMagnitude] = accel * inv_n;
  fv.values[kSlotMeanGyroMagnitude] = gyro * inv_n;
  return fv;
}

// Row i of the result is extract_features(samples[i]). A failing sample is
// reported with its row index.
inline FeatureMatrix assemble_matrix(std::span<const SignatureSample> samples) {
  FeatureMatrix m;
  m.values.resize(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(kFeatureDim));
  m.labels.reserve(samples.size());
  m.user_ids.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    FeatureVector fv;
    try {
      fv = extract_features(samples[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "row " + std::to_string(i) + ": " + e.what(), i);
    }
    m.values.row(static_cast<Eigen::Index>(i)) = fv.values.transpose();
    m.labels.push_back(fv.label);
    m.user_ids.push_back(std::move(fv.user_id));
  }
  return m;
}

// Optional dump: a header row, then one line per sample with the D values,
// the label and the user id, comma separated.
inline void write_feature_csv(std::ostream& out, const FeatureMatrix& m) {
  for (std::size_t c = 0; c < kChannels; ++c)
    for (const char* stat : {"mean", "std", "min", "max", "rms"})
      out << kChannelNames[c] << '_' << stat << ',';
  out << "duration,points,accel_mag,gyro_mag,label,user_id\n";
  out.precision(17);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j)
      out << m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << ',';
    out << m.labels[i] << ',' << m.user_ids[i] << '\n';
  }
}

}  // namespace sigauth
