#pragma once

// Training benchmark: the enrollment pipeline (features, PCA, ensembles) is
// timed at several worker counts, each repeated, and the median wall times
// are turned into speedups.

#include <chrono>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sigauth/eval.hpp"
#include "sigauth/pipeline.hpp"

namespace sigauth {

struct BenchOptions {
  std::vector<std::size_t> workers{1, 2, 4, 8};
  std::size_t repetitions = 15;
  PopulationConfig population;
};

struct BenchRow {
  Timing timing;
  double speedup = 0.0;
  QualitySummary quality;
};

struct BenchReport {
  std::string workload;
  std::vector<BenchRow> rows;
};

inline std::string workload_descriptor(const DatasetSpec& spec, const PopulationConfig& cfg) {
  std::ostringstream ss;
  ss << "users=" << spec.users << " samples=" << spec.enrollment.total() << " seed=" << spec.seed
     << " locals=" << cfg.enroll.train.locals << " hidden=" << cfg.enroll.train.hidden
     << " epochs=" << cfg.enroll.train.train.max_epochs;
  return ss.str();
}

// Times enroll_population once per (worker count, repetition). Quality is
// taken from the first repetition of each worker count; probes are scored
// only when the dataset carries them.
inline BenchReport bench_training(const Dataset& ds, const BenchOptions& opts) {
  if (std::find(opts.workers.begin(), opts.workers.end(), std::size_t{1}) == opts.workers.end())
    throw Error(ErrorCode::MissingBaseline, "worker counts must include 1 for the speedup baseline");
  if (opts.repetitions == 0) throw Error(ErrorCode::InvalidArgument, "repetitions must be >= 1");
  for (auto w : opts.workers)
    if (w == 0) throw Error(ErrorCode::InvalidArgument, "worker counts must be >= 1");

  std::map<std::string, Priority> priorities;
  for (const auto& u : ds.users) priorities[u.user_id] = u.priority;

  BenchReport report;
  report.workload = workload_descriptor(ds.spec, opts.population);
  for (auto w : opts.workers) {
    auto cfg = opts.population;
    cfg.enroll.train.workers = w;
    BenchRow row;
    row.timing.workers = w;
    row.timing.workload = report.workload;
    for (std::size_t r = 0; r < opts.repetitions; ++r) {
      const auto start = std::chrono::steady_clock::now();
      auto pop = enroll_population(ds.enrollment, priorities, cfg);
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      row.timing.runs.push_back(elapsed.count());
      if (r == 0 && !ds.probes.empty()) {
        const auto scored = score_probes(ds.probes, pop.pca, pop.records, w);
        row.quality = summarize(to_probes(scored));
      }
    }
    row.timing.seconds = median(row.timing.runs);
    report.rows.push_back(std::move(row));
  }

  const auto baseline = std::find_if(report.rows.begin(), report.rows.end(),
                                     [](const BenchRow& r) { return r.timing.workers == 1; });
  for (auto& row : report.rows)
    row.speedup = &row == &*baseline ? 1.0 : speedup(baseline->timing, row.timing);
  return report;
}

inline nlohmann::ordered_json to_json(const BenchReport& report, bool with_quality) {
  nlohmann::ordered_json j;
  j["workload"] = report.workload;
  auto& rows = j["timings"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["workers"] = r.timing.workers;
    row["median_seconds"] = r.timing.seconds;
    row["speedup"] = r.speedup;
    row["runs"] = r.timing.runs;
    if (with_quality)
      row["quality"] = {{"eer", r.quality.eer.eer},
                        {"eer_threshold", r.quality.eer.threshold},
                        {"sensitivity", r.quality.sensitivity},
                        {"specificity", r.quality.specificity}};
    rows.push_back(std::move(row));
  }
  return j;
}

inline std::string format_table(const BenchReport& report) {
  std::ostringstream ss;
  ss << "workload: " << report.workload << "\n";
  ss << "  P   median T(P) [s]   S(P) = T(1)/T(P)   runs\n";
  for (const auto& r : report.rows) {
    char line[128];
    std::snprintf(line, sizeof line, "%3zu   %15.4f   %16.3f   %4zu\n", r.timing.workers, r.timing.seconds, r.speedup,
                  r.timing.runs.size());
    ss << line;
  }
  return ss.str();
}

}  // namespace sigauth
