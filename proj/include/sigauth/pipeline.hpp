#pragma once

// Whole-population workflows: synthetic dataset generation, enrollment of
// every user against one shared PCA, and scoring of held-out probes.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sigauth/auth.hpp"
#include "sigauth/checksum.hpp"
#include "sigauth/eval.hpp"
#include "sigauth/features.hpp"
#include "sigauth/parallel.hpp"
#include "sigauth/pca.hpp"
#include "sigauth/random.hpp"
#include "sigauth/sigdata.hpp"
#include "sigauth/training.hpp"

namespace sigauth {

// Jitter scale used when none is configured; see configs/calibration.json.
inline constexpr double kDefaultNoiseLevel = 0.08;

struct SampleSplit {
  std::size_t genuine = 0;
  std::size_t skilled = 0;
  std::size_t random = 0;
  std::size_t total() const { return genuine + skilled + random; }
};

struct DatasetSpec {
  std::uint64_t seed = 42;
  std::size_t users = 50;
  SampleSplit enrollment{25, 10, 5};
  SampleSplit probes{10, 5, 5};
  double noise_level = kDefaultNoiseLevel;
};

struct UserEntry {
  std::string user_id;
  Priority priority = Priority::RegularStaff;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<UserEntry> users;
  std::vector<SignatureSample> enrollment;
  std::vector<SignatureSample> probes;
};

inline std::string user_id_for(std::size_t index, std::size_t users) {
  const std::size_t width = std::max<std::size_t>(3, std::to_string(users).size());
  std::string digits = std::to_string(index + 1);
  return "u" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

// Probe sample seeds start here so they never coincide with enrollment seeds.
inline constexpr std::uint64_t kProbeSeedBase = 1'000'000;

namespace detail {

// Random forgeries borrow another user's prototype, chosen per sample.
inline void append_split(std::vector<SignatureSample>& out, std::span<const UserPrototype> protos, std::size_t user,
                         const SampleSplit& split, double noise, std::uint64_t seed_base) {
  const auto& proto = protos[user];
  std::uint64_t seed = seed_base;
  for (std::size_t i = 0; i < split.genuine; ++i) out.push_back(synth_sample(proto, SampleKind::Genuine, noise, seed++));
  for (std::size_t i = 0; i < split.skilled; ++i)
    out.push_back(synth_sample(proto, SampleKind::SkilledForgery, noise, seed++));
  for (std::size_t i = 0; i < split.random; ++i, ++seed) {
    if (protos.size() < 2) {
      out.push_back(synth_sample(proto, SampleKind::RandomForgery, noise, seed));
      continue;
    }
    Rng rng(derive_seed({proto.master_seed, seed}, "donor/" + proto.user_id));
    std::uniform_int_distribution<std::size_t> pick(0, protos.size() - 2);
    std::size_t donor = pick(rng);
    if (donor >= user) ++donor;
    out.push_back(synth_random_forgery(proto, protos[donor], noise, seed));
  }
}

}  // namespace detail

// Users get priorities 1,2,3,4,1,... in id order so every tier is populated.
inline Dataset generate_dataset(const DatasetSpec& spec) {
  if (spec.users == 0) throw Error(ErrorCode::InvalidArgument, "dataset needs at least one user");
  Dataset ds;
  ds.spec = spec;
  std::vector<UserPrototype> protos;
  for (std::size_t u = 0; u < spec.users; ++u) {
    const auto id = user_id_for(u, spec.users);
    ds.users.push_back({id, priority_from_int(static_cast<int>(u % 4) + 1)});
    protos.push_back(make_prototype(spec.seed, id));
  }
  for (std::size_t u = 0; u < spec.users; ++u) {
    detail::append_split(ds.enrollment, protos, u, spec.enrollment, spec.noise_level, 0);
    detail::append_split(ds.probes, protos, u, spec.probes, spec.noise_level, kProbeSeedBase);
  }
  return ds;
}

inline nlohmann::ordered_json manifest_json(const Dataset& ds, const std::string& enrollment_sha,
                                            const std::string& probes_sha) {
  nlohmann::ordered_json j;
  j["seed"] = ds.spec.seed;
  j["users"] = ds.spec.users;
  j["noise_level"] = ds.spec.noise_level;
  j["enrollment_split"] = {{"genuine", ds.spec.enrollment.genuine},
                           {"skilled_forgery", ds.spec.enrollment.skilled},
                           {"random_forgery", ds.spec.enrollment.random}};
  j["probe_split"] = {{"genuine", ds.spec.probes.genuine},
                      {"skilled_forgery", ds.spec.probes.skilled},
                      {"random_forgery", ds.spec.probes.random}};
  j["enrollment_samples"] = ds.enrollment.size();
  j["probe_samples"] = ds.probes.size();
  auto& users = j["user_list"] = nlohmann::ordered_json::array();
  for (const auto& u : ds.users) users.push_back({{"user_id", u.user_id}, {"priority", static_cast<int>(u.priority)}});
  j["files"] = {{"enroll.jsonl", {{"sha256", enrollment_sha}}}, {"probes.jsonl", {{"sha256", probes_sha}}}};
  return j;
}

// Writes enroll.jsonl, probes.jsonl and manifest.json into dir.
inline nlohmann::ordered_json write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create dataset directory " + dir.string());
  write_samples(dir / "enroll.jsonl", ds.enrollment);
  write_samples(dir / "probes.jsonl", ds.probes);
  auto file_sha = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
  };
  const auto manifest = manifest_json(ds, file_sha(dir / "enroll.jsonl"), file_sha(dir / "probes.jsonl"));
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "cannot write manifest in " + dir.string());
  return manifest;
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(ErrorCode::FileNotFound, "no manifest.json in " + dir.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::MalformedRecord, "manifest.json is not valid JSON");
  Dataset ds;
  try {
    ds.spec.seed = j.at("seed").get<std::uint64_t>();
    ds.spec.users = j.at("users").get<std::size_t>();
    ds.spec.noise_level = j.at("noise_level").get<double>();
    for (const auto& u : j.at("user_list"))
      ds.users.push_back({u.at("user_id").get<std::string>(), priority_from_int(u.at("priority").get<int>())});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("manifest.json: ") + e.what());
  }
  ds.enrollment = load_samples(dir / "enroll.jsonl");
  if (std::filesystem::exists(dir / "probes.jsonl")) ds.probes = load_samples(dir / "probes.jsonl");
  return ds;
}

// ---------------------------------------------------------------------------

struct PopulationConfig {
  EnrollConfig enroll;
  PcaOptions pca;
};

struct EnrolledPopulation {
  PcaModel pca;
  std::vector<UserRecord> records;  // in user order
};

inline std::vector<std::string> user_order(std::span<const SignatureSample> samples) {
  std::vector<std::string> order;
  std::set<std::string> seen;
  for (const auto& s : samples)
    if (seen.insert(s.user_id).second) order.push_back(s.user_id);
  return order;
}

// Fits one population PCA over every enrollment sample (map/reduce
// covariance), then trains all users' ensembles on one worker pool. When a
// store is given the PCA and every record are persisted.
inline EnrolledPopulation enroll_population(std::span<const SignatureSample> samples,
                                            const std::map<std::string, Priority>& priorities,
                                            const PopulationConfig& cfg, ModelStore* store = nullptr) {
  const std::size_t workers = cfg.enroll.train.workers;
  detail::check_enrollment_quality(samples);

  // Group rows per user, keeping first-appearance order.
  const auto order = user_order(samples);
  std::map<std::string, std::vector<SignatureSample>> by_user;
  for (const auto& s : samples) by_user[s.user_id].push_back(s);

  std::vector<std::vector<SignatureSample>> rows(order.size());
  std::vector<std::size_t> pooled(order.size(), 0);
  for (std::size_t u = 0; u < order.size(); ++u)
    rows[u] = enrollment_rows(order[u], by_user[order[u]], samples, cfg.enroll, &pooled[u]);

  // Features for every row, extracted in parallel.
  std::vector<std::size_t> offsets(order.size() + 1, 0);
  for (std::size_t u = 0; u < order.size(); ++u) offsets[u + 1] = offsets[u] + rows[u].size();
  const auto vectors = parallel_map(offsets.back(), workers, [&](std::size_t i) {
    const auto u = static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), i) - offsets.begin() - 1);
    return extract_features(rows[u][i - offsets[u]]);
  });

  // The PCA sees each user's own samples once; borrowed negatives are copies.
  std::vector<Eigen::Index> own_rows;
  for (std::size_t u = 0; u < order.size(); ++u)
    for (std::size_t i = 0; i < by_user[order[u]].size(); ++i) own_rows.push_back(static_cast<Eigen::Index>(offsets[u] + i));
  Eigen::MatrixXd population(static_cast<Eigen::Index>(own_rows.size()), static_cast<Eigen::Index>(kFeatureDim));
  for (std::size_t r = 0; r < own_rows.size(); ++r)
    population.row(static_cast<Eigen::Index>(r)) = vectors[static_cast<std::size_t>(own_rows[r])].values.transpose();

  EnrolledPopulation out;
  out.pca = fit_pca_model(population, workers, cfg.pca);

  std::vector<UserTrainingSet> sets(order.size());
  for (std::size_t u = 0; u < order.size(); ++u) {
    const auto n = static_cast<Eigen::Index>(rows[u].size());
    Eigen::MatrixXd feats(n, static_cast<Eigen::Index>(kFeatureDim));
    std::vector<int> labels;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& fv = vectors[offsets[u] + static_cast<std::size_t>(i)];
      feats.row(i) = fv.values.transpose();
      labels.push_back(fv.label);
    }
    try {
      sets[u] = make_training_set(order[u], feats, labels, out.pca);
    } catch (const Error& e) {
      throw Error(e.code(), "user " + order[u] + ": " + e.what(), u);
    }
  }
  auto ensembles = train_users(sets, out.pca.id, cfg.enroll.train);

  if (store) store->save_pca(out.pca);
  for (std::size_t u = 0; u < order.size(); ++u) {
    UserRecord rec;
    rec.user_id = order[u];
    const auto p = priorities.find(order[u]);
    rec.priority = p == priorities.end() ? Priority::RegularStaff : p->second;
    for (double t : sets[u].targets) (t > 0.5 ? rec.enrollment.genuine_samples : rec.enrollment.forged_samples)++;
    rec.enrollment.pooled_negatives = pooled[u];
    rec.ensemble = std::move(ensembles[u]);
    if (store) store->save(rec);
    out.records.push_back(std::move(rec));
  }
  return out;
}

// Probes must not repeat any enrollment sample (compared by content).
inline void check_disjoint(std::span<const SignatureSample> enrollment, std::span<const SignatureSample> probes) {
  std::set<std::string> seen;
  for (const auto& s : enrollment) seen.insert(sha256_hex(to_json_line(s)));
  for (std::size_t i = 0; i < probes.size(); ++i)
    if (seen.count(sha256_hex(to_json_line(probes[i]))))
      throw Error(ErrorCode::OverlappingSplit, "probe " + std::to_string(i) + " also appears in the enrollment set", i);
}

struct ScoredSample {
  std::string user_id;
  SampleKind kind = SampleKind::Genuine;
  double score = 0.0;
};

// Scores each probe against its own user's template. Probes that fail the
// quality gate or whose user is not enrolled are rejected with an error.
inline std::vector<ScoredSample> score_probes(std::span<const SignatureSample> probes, const PcaModel& pca,
                                              std::span<const UserRecord> records, std::size_t workers) {
  std::map<std::string, const UserRecord*> by_id;
  for (const auto& r : records) by_id[r.user_id] = &r;
  return parallel_map(probes.size(), workers, [&](std::size_t i) {
    const auto& p = probes[i];
    const auto it = by_id.find(p.user_id);
    if (it == by_id.end()) throw Error(ErrorCode::UnknownUser, "probe " + std::to_string(i) + ": user " + p.user_id, i);
    return ScoredSample{p.user_id, p.kind, ensemble_score(it->second->ensemble, pca, p)};
  });
}

inline std::vector<ScoredProbe> to_probes(std::span<const ScoredSample> scored) {
  std::vector<ScoredProbe> out;
  out.reserve(scored.size());
  for (const auto& s : scored) out.push_back({s.score, !is_forgery(s.kind)});
  return out;
}

struct QualitySummary {
  EerResult eer;
  Confusion at_eer;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double specificity_as_printed = 0.0;
};

inline QualitySummary summarize(std::span<const ScoredProbe> probes) {
  QualitySummary q;
  q.eer = eer(probes);
  q.at_eer = confusion_at(probes, q.eer.threshold);
  q.sensitivity = sensitivity(q.at_eer);
  q.specificity = specificity(q.at_eer);
  q.specificity_as_printed = specificity_as_printed(q.at_eer);
  return q;
}

}  // namespace sigauth
