#pragma once

// Signature samples: representation, synthetic generation, the capture
// quality gate and the JSON-lines sample file format.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sigauth/error.hpp"
#include "sigauth/random.hpp"

namespace sigauth {

inline constexpr std::size_t kChannels = 12;
inline constexpr double kSampleRateHz = 100.0;

// Sensor channels in capture order.
enum class Channel : std::size_t {
  AccelX, AccelY, AccelZ,        // m/s^2
  MagX, MagY, MagZ,              // mT
  Azimuth, Pitch, Roll,          // degrees
  GyroX, GyroY, GyroZ,           // rad/s
};

inline constexpr std::array<std::string_view, kChannels> kChannelNames = {
    "X_a", "Y_a", "Z_a", "X_mu", "Y_mu", "Z_mu",
    "azimuth", "pitch", "roll", "X_v", "Y_v", "Z_v"};

enum class SampleKind { Genuine, SkilledForgery, RandomForgery };

constexpr std::string_view to_string(SampleKind kind) {
  switch (kind) {
    case SampleKind::Genuine: return "genuine";
    case SampleKind::SkilledForgery: return "skilled_forgery";
    case SampleKind::RandomForgery: return "random_forgery";
  }
  return "?";
}

inline SampleKind parse_sample_kind(std::string_view s) {
  if (s == "genuine") return SampleKind::Genuine;
  if (s == "skilled_forgery") return SampleKind::SkilledForgery;
  if (s == "random_forgery") return SampleKind::RandomForgery;
  throw Error(ErrorCode::MalformedRecord, "unknown sample kind '" + std::string(s) + "'");
}

constexpr bool is_forgery(SampleKind kind) { return kind != SampleKind::Genuine; }

// One captured signature. Channels are stored channel-major: channels[c][i]
// is the reading of channel c at timestamps[i]. Nothing is enforced on
// construction; check_quality() is the gate.
struct SignatureSample {
  std::string user_id;
  SampleKind kind = SampleKind::Genuine;
  std::vector<double> timestamps;
  std::array<std::vector<double>, kChannels> channels;

  std::size_t size() const { return timestamps.size(); }
  const std::vector<double>& channel(Channel c) const {
    return channels[static_cast<std::size_t>(c)];
  }

  friend bool operator==(const SignatureSample&, const SignatureSample&) = default;
};

// ---------------------------------------------------------------------------
// Synthetic writers

inline constexpr std::size_t kHarmonics = 3;

struct ChannelCurve {
  double offset = 0.0;
  std::array<double, kHarmonics> amplitude{};
  std::array<double, kHarmonics> frequency{};  // Hz
  std::array<double, kHarmonics> phase{};      // rad

  double scale() const { return amplitude[0] + amplitude[1] + amplitude[2]; }

  double operator()(double t) const {
    double v = offset;
    for (std::size_t h = 0; h < kHarmonics; ++h)
      v += amplitude[h] * std::sin(2.0 * std::numbers::pi * frequency[h] * t + phase[h]);
    return v;
  }

  friend bool operator==(const ChannelCurve&, const ChannelCurve&) = default;
};

// A synthetic writer: every channel is a sum of three seeded sinusoids.
struct UserPrototype {
  std::string user_id;
  std::uint64_t master_seed = 0;
  double duration = 0.0;  // seconds
  std::array<ChannelCurve, kChannels> curves;

  friend bool operator==(const UserPrototype&, const UserPrototype&) = default;
};

inline nlohmann::ordered_json to_json(const UserPrototype& p) {
  nlohmann::ordered_json j;
  j["user_id"] = p.user_id;
  j["master_seed"] = p.master_seed;
  j["duration"] = p.duration;
  auto& curves = j["curves"] = nlohmann::ordered_json::array();
  for (const auto& c : p.curves)
    curves.push_back({{"offset", c.offset},
                      {"amplitude", c.amplitude},
                      {"frequency", c.frequency},
                      {"phase", c.phase}});
  return j;
}

namespace detail {

struct ChannelRange {
  double offset_lo, offset_hi, amp_lo, amp_hi;
};

// Plausible baselines and swing per channel, in capture units.
inline constexpr std::array<ChannelRange, kChannels> kChannelRanges = {{
    {-1.0, 1.0, 0.5, 3.0},       // X_a
    {-1.0, 1.0, 0.5, 3.0},       // Y_a
    {9.3, 10.3, 0.5, 3.0},       // Z_a (gravity)
    {-0.05, 0.05, 0.001, 0.01},  // X_mu
    {-0.05, 0.05, 0.001, 0.01},  // Y_mu
    {-0.05, 0.05, 0.001, 0.01},  // Z_mu
    {20.0, 340.0, 2.0, 20.0},    // azimuth
    {-30.0, 30.0, 2.0, 20.0},    // pitch
    {-30.0, 30.0, 2.0, 20.0},    // roll
    {-0.1, 0.1, 0.2, 2.0},       // X_v
    {-0.1, 0.1, 0.2, 2.0},       // Y_v
    {-0.1, 0.1, 0.2, 2.0},       // Z_v
}};

inline std::uint64_t kind_tag(SampleKind k) { return static_cast<std::uint64_t>(k) + 1; }

inline SignatureSample render(const UserPrototype& p, const std::string& user_id,
                              SampleKind kind, double duration,
                              const std::array<ChannelCurve, kChannels>& curves,
                              double jitter, Rng& rng) {
  SignatureSample s;
  s.user_id = user_id;
  s.kind = kind;
  const auto n = static_cast<std::size_t>(std::max(1.0, std::round(duration * kSampleRateHz)));
  s.timestamps.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.timestamps[i] = static_cast<double>(i) / kSampleRateHz;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t c = 0; c < kChannels; ++c) {
    auto& out = s.channels[c];
    out.resize(n);
    const double point_sigma = jitter * 0.1 * p.curves[c].scale();
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = curves[c](s.timestamps[i]);
      if (jitter > 0.0) out[i] += point_sigma * gauss(rng);
    }
  }
  return s;
}

}  // namespace detail

// Deterministic in (master_seed, user_id).
inline UserPrototype make_prototype(std::uint64_t master_seed, std::string_view user_id) {
  Rng rng(derive_seed({master_seed, 0x70726f746fULL}, user_id));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  UserPrototype p;
  p.user_id = std::string(user_id);
  p.master_seed = master_seed;
  p.duration = between(1.5, 3.0);
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto& r = detail::kChannelRanges[c];
    auto& curve = p.curves[c];
    curve.offset = between(r.offset_lo, r.offset_hi);
    for (std::size_t h = 0; h < kHarmonics; ++h) {
      curve.amplitude[h] = between(r.amp_lo, r.amp_hi) / static_cast<double>(h + 1);
      curve.frequency[h] = between(0.4, 1.2) * static_cast<double>(h + 1);
      curve.phase[h] = between(0.0, 2.0 * std::numbers::pi);
    }
  }
  return p;
}

// Genuine: prototype curves with per-sample parameter jitter and pointwise
// noise, both scaled by noise_level. SkilledForgery: the same prototype with
// a 3x stronger distortion biased towards the slow, under-sized strokes of an
// imitator, plus genuine-level jitter. RandomForgery: a different writer.
inline SignatureSample synth_sample(const UserPrototype& proto, SampleKind kind,
                                    double noise_level, std::uint64_t sample_seed) {
  if (!(noise_level >= 0.0) || !std::isfinite(noise_level))
    throw Error(ErrorCode::InvalidArgument, "noise_level must be a finite value >= 0");

  Rng rng(derive_seed({proto.master_seed, detail::kind_tag(kind), sample_seed}, proto.user_id));
  std::normal_distribution<double> gauss(0.0, 1.0);

  if (kind == SampleKind::RandomForgery) {
    const auto impostor = make_prototype(
        proto.master_seed, "impostor/" + proto.user_id + "/" + std::to_string(sample_seed));
    auto s = synth_sample(impostor, SampleKind::Genuine, noise_level, sample_seed);
    s.user_id = proto.user_id;
    s.kind = SampleKind::RandomForgery;
    return s;
  }

  auto curves = proto.curves;
  double duration = proto.duration;
  if (noise_level > 0.0) {
    const bool skilled = kind == SampleKind::SkilledForgery;
    const double eps = skilled ? 3.0 * noise_level : noise_level;
    // Imitators are slower and smaller; genuine variation is symmetric.
    const double stretch = skilled ? 1.0 + eps * std::abs(gauss(rng)) : 1.0 + eps * gauss(rng);
    duration *= std::max(0.2, stretch);
    for (std::size_t c = 0; c < kChannels; ++c) {
      auto& curve = curves[c];
      curve.offset += noise_level * 0.1 * proto.curves[c].scale() * gauss(rng);
      for (std::size_t h = 0; h < kHarmonics; ++h) {
        const double a = skilled ? 1.0 - eps * std::abs(gauss(rng)) : 1.0 + eps * gauss(rng);
        curve.amplitude[h] *= a;
        curve.frequency[h] /= std::max(0.2, stretch);
        curve.phase[h] += eps * gauss(rng);
      }
    }
  }
  return detail::render(proto, proto.user_id, kind, duration, curves, noise_level, rng);
}

// Another writer's genuine signature presented as the target's.
inline SignatureSample synth_random_forgery(const UserPrototype& target, const UserPrototype& donor,
                                            double noise_level, std::uint64_t sample_seed) {
  if (donor.user_id == target.user_id)
    throw Error(ErrorCode::InvalidArgument, "a random forgery needs a different writer");
  auto s = synth_sample(donor, SampleKind::Genuine, noise_level, sample_seed);
  s.user_id = target.user_id;
  s.kind = SampleKind::RandomForgery;
  return s;
}

// ---------------------------------------------------------------------------
// Quality gate

enum class QualityReason { TooFewPoints, TooShort, NonFinite, LowVariance, NonMonotonicTime, ShapeMismatch };

constexpr std::string_view to_string(QualityReason r) {
  switch (r) {
    case QualityReason::TooFewPoints: return "TOO_FEW_POINTS";
    case QualityReason::TooShort: return "TOO_SHORT";
    case QualityReason::NonFinite: return "NON_FINITE";
    case QualityReason::LowVariance: return "LOW_VARIANCE";
    case QualityReason::NonMonotonicTime: return "NON_MONOTONIC_TIME";
    case QualityReason::ShapeMismatch: return "SHAPE_MISMATCH";
  }
  return "?";
}

struct QualityReport {
  std::vector<QualityReason> reasons;

  bool pass() const { return reasons.empty(); }
  bool has(QualityReason r) const {
    return std::find(reasons.begin(), reasons.end(), r) != reasons.end();
  }
  std::string summary() const {
    std::string out;
    for (auto r : reasons) {
      if (!out.empty()) out += ",";
      out += to_string(r);
    }
    return out;
  }
};

struct QualityCriteria {
  std::size_t min_points = 32;
  double min_duration = 0.3;  // seconds
  std::size_t min_varying_channels = 2;
};

inline QualityReport check_quality(const SignatureSample& s, const QualityCriteria& crit = {}) {
  QualityReport report;
  const std::size_t n = s.timestamps.size();
  for (const auto& ch : s.channels) {
    if (ch.size() != n) {
      report.reasons.push_back(QualityReason::ShapeMismatch);
      return report;
    }
  }
  if (n < crit.min_points) report.reasons.push_back(QualityReason::TooFewPoints);

  bool finite = true;
  for (double t : s.timestamps) finite = finite && std::isfinite(t);
  for (const auto& ch : s.channels)
    for (double v : ch) finite = finite && std::isfinite(v);
  if (!finite) report.reasons.push_back(QualityReason::NonFinite);

  for (std::size_t i = 1; i < n; ++i) {
    if (!(s.timestamps[i] > s.timestamps[i - 1])) {
      report.reasons.push_back(QualityReason::NonMonotonicTime);
      break;
    }
  }
  if (n == 0 || !(s.timestamps.back() - s.timestamps.front() >= crit.min_duration))
    report.reasons.push_back(QualityReason::TooShort);

  std::size_t varying = 0;
  for (const auto& ch : s.channels) {
    if (ch.empty()) continue;
    const auto [lo, hi] = std::minmax_element(ch.begin(), ch.end());
    if (*hi > *lo) ++varying;
  }
  if (varying < crit.min_varying_channels) report.reasons.push_back(QualityReason::LowVariance);
  return report;
}

// ---------------------------------------------------------------------------
// Sample file: one JSON object per line, {user_id, kind, t[], ch[12][]}.
// Non-finite readings are written as null and read back as NaN so the
// quality gate, not the parser, rejects them.

inline nlohmann::ordered_json to_json(const SignatureSample& s) {
  nlohmann::ordered_json j;
  j["user_id"] = s.user_id;
  j["kind"] = to_string(s.kind);
  j["t"] = s.timestamps;
  j["ch"] = s.channels;
  return j;
}

inline std::string to_json_line(const SignatureSample& s) { return to_json(s).dump(); }

namespace detail {

inline std::vector<double> read_reals(const nlohmann::json& arr, std::size_t line) {
  if (!arr.is_array()) throw Error(ErrorCode::MalformedRecord, "expected array", line);
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (v.is_null()) out.push_back(std::numeric_limits<double>::quiet_NaN());
    else if (v.is_number()) out.push_back(v.get<double>());
    else throw Error(ErrorCode::MalformedRecord, "non-numeric reading", line);
  }
  return out;
}

}  // namespace detail

inline SignatureSample parse_sample_line(std::string_view line, std::size_t line_no = 0) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + " is not a JSON object", line_no);
  if (!j.contains("user_id") || !j.contains("kind") || !j.contains("t") || !j.contains("ch") ||
      !j["user_id"].is_string() || !j["kind"].is_string())
    throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + " lacks required fields", line_no);

  SignatureSample s;
  s.user_id = j["user_id"].get<std::string>();
  try {
    s.kind = parse_sample_kind(j["kind"].get<std::string>());
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": " + e.what(), line_no);
  }
  s.timestamps = detail::read_reals(j["t"], line_no);
  const auto& ch = j["ch"];
  if (!ch.is_array())
    throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": ch is not an array", line_no);
  if (ch.size() != kChannels)
    throw Error(ErrorCode::ChannelCount,
                "line " + std::to_string(line_no) + " has " + std::to_string(ch.size()) + " channels, expected 12",
                line_no);
  for (std::size_t c = 0; c < kChannels; ++c) s.channels[c] = detail::read_reals(ch[c], line_no);
  return s;
}

inline std::vector<SignatureSample> load_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open sample file " + path.string());
  std::vector<SignatureSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_sample_line(line, line_no));
  }
  return out;
}

inline void write_samples(const std::filesystem::path& path, std::span<const SignatureSample> samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write sample file " + path.string());
  for (const auto& s : samples) out << to_json_line(s) << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace sigauth
