#pragma once

// Verification metrics: confusion counts, sensitivity / specificity,
// FAR / FRR, the equal error rate, and parallel speedup.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sigauth/error.hpp"

namespace sigauth {

struct ScoredProbe {
  double score = 0.0;
  bool genuine = false;
};

// true_genuine:  genuine accepted      false_forged: genuine rejected
// false_genuine: forgery accepted      true_forged:  forgery rejected
struct Confusion {
  std::size_t true_genuine = 0;
  std::size_t false_genuine = 0;
  std::size_t true_forged = 0;
  std::size_t false_forged = 0;

  std::size_t total() const { return true_genuine + false_genuine + true_forged + false_forged; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

// A probe is accepted when score >= threshold (same tie rule as verify()).
inline Confusion confusion_at(std::span<const ScoredProbe> probes, double threshold) {
  if (probes.empty()) throw Error(ErrorCode::EmptyData, "confusion needs at least one probe");
  Confusion c;
  for (const auto& p : probes) {
    const bool accepted = p.score >= threshold;
    if (p.genuine) (accepted ? c.true_genuine : c.false_forged)++;
    else (accepted ? c.false_genuine : c.true_forged)++;
  }
  return c;
}

inline double sensitivity(const Confusion& c) {
  const auto denom = c.true_genuine + c.false_forged;
  if (denom == 0) throw Error(ErrorCode::NoGenuineProbes, "sensitivity undefined without genuine probes");
  return static_cast<double>(c.true_genuine) / static_cast<double>(denom);
}

// TF / (TF + FG): the share of forgeries rejected.
inline double specificity(const Confusion& c) {
  const auto denom = c.true_forged + c.false_genuine;
  if (denom == 0) throw Error(ErrorCode::NoForgedProbes, "specificity undefined without forged probes");
  return static_cast<double>(c.true_forged) / static_cast<double>(denom);
}

// TF / (TF + TG), the literal printed variant, kept for side-by-side reports.
inline double specificity_as_printed(const Confusion& c) {
  const auto denom = c.true_forged + c.true_genuine;
  if (denom == 0) throw Error(ErrorCode::NoForgedProbes, "printed specificity has a zero denominator");
  return static_cast<double>(c.true_forged) / static_cast<double>(denom);
}

inline double far(const Confusion& c) {
  const auto denom = c.false_genuine + c.true_forged;
  if (denom == 0) throw Error(ErrorCode::NoForgedProbes, "FAR undefined without forged probes");
  return static_cast<double>(c.false_genuine) / static_cast<double>(denom);
}

inline double frr(const Confusion& c) {
  const auto denom = c.false_forged + c.true_genuine;
  if (denom == 0) throw Error(ErrorCode::NoGenuineProbes, "FRR undefined without genuine probes");
  return static_cast<double>(c.false_forged) / static_cast<double>(denom);
}

struct ErrorCurvePoint {
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

// FAR / FRR at every candidate threshold: 0, each distinct score, and a final
// threshold above every score (at least 1).
inline std::vector<ErrorCurvePoint> error_curve(std::span<const ScoredProbe> probes) {
  std::size_t genuine = 0, forged = 0;
  std::vector<double> scores;
  scores.reserve(probes.size());
  for (const auto& p : probes) {
    (p.genuine ? genuine : forged)++;
    scores.push_back(p.score);
  }
  if (genuine == 0 || forged == 0) throw Error(ErrorCode::SingleClassProbes, "error curve needs both probe classes");
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

  std::vector<double> thresholds;
  if (scores.front() > 0.0) thresholds.push_back(0.0);
  thresholds.insert(thresholds.end(), scores.begin(), scores.end());
  thresholds.push_back(std::max(1.0, std::nextafter(scores.back(), std::numeric_limits<double>::infinity())));

  // Sweep: probes sorted by score, count how many of each class sit below t.
  std::vector<ScoredProbe> sorted(probes.begin(), probes.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score < b.score; });
  std::vector<ErrorCurvePoint> curve;
  curve.reserve(thresholds.size());
  std::size_t below = 0, genuine_below = 0, forged_below = 0;
  for (double t : thresholds) {
    while (below < sorted.size() && sorted[below].score < t) {
      (sorted[below].genuine ? genuine_below : forged_below)++;
      ++below;
    }
    curve.push_back({t, static_cast<double>(forged - forged_below) / static_cast<double>(forged),
                     static_cast<double>(genuine_below) / static_cast<double>(genuine)});
  }
  return curve;
}

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// FAR falls and FRR rises along the curve. Returns the first threshold where
// they are equal, otherwise the linear interpolation across the first sign
// change of FAR - FRR.
inline EerResult eer(std::span<const ScoredProbe> probes) {
  const auto curve = error_curve(probes);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double d = curve[i].far - curve[i].frr;
    if (d == 0.0) return {curve[i].far, curve[i].threshold};
    if (d < 0.0) {
      // i > 0: the first point always has FAR = 1, FRR = 0.
      const auto& a = curve[i - 1];
      const auto& b = curve[i];
      const double da = a.far - a.frr;
      const double alpha = da / (da - d);
      return {a.far + alpha * (b.far - a.far), a.threshold + alpha * (b.threshold - a.threshold)};
    }
  }
  return {curve.back().far, curve.back().threshold};  // unreachable: last point has FAR = 0, FRR = 1
}

// ---------------------------------------------------------------------------

struct Timing {
  std::size_t workers = 1;
  double seconds = 0.0;             // median of `runs`
  std::vector<double> runs;         // raw wall times
  std::string workload;
};

inline double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyData, "median of an empty set");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// S(P) = T(1) / T(P)
inline double speedup(const Timing& t1, const Timing& tp) {
  if (t1.workers != 1) throw Error(ErrorCode::MissingBaseline, "speedup baseline must be a single-worker timing");
  if (t1.workload != tp.workload)
    throw Error(ErrorCode::WorkloadMismatch, "timings were taken on different workloads");
  if (!(t1.seconds > 0.0) || !(tp.seconds > 0.0)) throw Error(ErrorCode::InvalidArgument, "timings must be positive");
  return t1.seconds / tp.seconds;
}

}  // namespace sigauth
