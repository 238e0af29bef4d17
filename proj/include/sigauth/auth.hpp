#pragma once

// Enrollment, verification, the priority gate and the file-backed template
// store.
//
// Store layout:
//   <dir>/<user_id>.rec   one record per user
//   <dir>/pca.model       the population PCA shared by all records
//   <dir>/index           "<user_id> <version>" per line, sorted by id
//
// Record and model files are three lines:
//   SIGAUTH-RECORD 1 | SIGAUTH-PCA 1
//   <canonical JSON body>
//   sha256 <hex digest of the body line>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sigauth/checksum.hpp"
#include "sigauth/error.hpp"
#include "sigauth/features.hpp"
#include "sigauth/pca.hpp"
#include "sigauth/sigdata.hpp"
#include "sigauth/training.hpp"

namespace sigauth {

enum class Priority : int { RegularStaff = 1, PrivilegedStaff = 2, PrivilegedPatient = 3, VipPatient = 4 };

inline constexpr std::array<Priority, 4> kPriorities = {Priority::RegularStaff, Priority::PrivilegedStaff,
                                                        Priority::PrivilegedPatient, Priority::VipPatient};

constexpr std::string_view to_string(Priority p) {
  switch (p) {
    case Priority::RegularStaff: return "regular_staff";
    case Priority::PrivilegedStaff: return "privileged_staff";
    case Priority::PrivilegedPatient: return "privileged_patient";
    case Priority::VipPatient: return "vip_patient";
  }
  return "?";
}

inline Priority priority_from_int(int v) {
  if (v < 1 || v > 4) throw Error(ErrorCode::InvalidArgument, "priority must be 1, 2, 3 or 4");
  return static_cast<Priority>(v);
}

// Acceptance threshold per priority tier, strictly increasing with the tier.
class ThresholdPolicy {
 public:
  ThresholdPolicy() = default;
  explicit ThresholdPolicy(std::array<double, 4> thresholds) : thresholds_(thresholds) { validate(); }

  // "low,avg,high,vhigh"
  static ThresholdPolicy parse(const std::string& text) {
    std::array<double, 4> t{};
    std::stringstream ss(text);
    std::string item;
    std::size_t i = 0;
    while (std::getline(ss, item, ',')) {
      if (i >= 4) throw Error(ErrorCode::InvalidPolicy, "threshold policy needs exactly four values");
      try {
        std::size_t used = 0;
        t[i] = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidPolicy, "cannot parse threshold '" + item + "'");
      }
      ++i;
    }
    if (i != 4) throw Error(ErrorCode::InvalidPolicy, "threshold policy needs exactly four values");
    return ThresholdPolicy(t);
  }

  double operator[](Priority p) const { return thresholds_[static_cast<std::size_t>(p) - 1]; }
  const std::array<double, 4>& values() const { return thresholds_; }

 private:
  void validate() const {
    for (std::size_t i = 0; i < 4; ++i) {
      if (!(thresholds_[i] > 0.0 && thresholds_[i] < 1.0))
        throw Error(ErrorCode::InvalidPolicy, "thresholds must lie in (0, 1)");
      if (i > 0 && !(thresholds_[i] > thresholds_[i - 1]))
        throw Error(ErrorCode::InvalidPolicy, "thresholds must increase strictly with priority");
    }
  }

  std::array<double, 4> thresholds_{0.50, 0.60, 0.75, 0.90};
};

inline double threshold_for_priority(const ThresholdPolicy& policy, Priority p) { return policy[p]; }

struct EnrollmentInfo {
  std::size_t genuine_samples = 0;
  std::size_t forged_samples = 0;
  std::size_t pooled_negatives = 0;  // negatives borrowed from other writers
};

struct UserRecord {
  std::string user_id;
  Priority priority = Priority::RegularStaff;
  std::uint64_t version = 0;
  EnrollmentInfo enrollment;
  EnsembleNet ensemble;
};

struct Decision {
  std::string user_id;
  std::optional<double> score;
  double threshold = 0.0;
  Priority priority = Priority::RegularStaff;
  bool accepted = false;
  std::string reason;  // "OK" or the failure code
};

inline nlohmann::ordered_json to_json(const Decision& d) {
  nlohmann::ordered_json j;
  j["user_id"] = d.user_id;
  j["score"] = d.score ? nlohmann::ordered_json(*d.score) : nlohmann::ordered_json(nullptr);
  j["threshold"] = d.threshold;
  j["priority"] = static_cast<int>(d.priority);
  j["tier"] = to_string(d.priority);
  j["accepted"] = d.accepted;
  j["reason"] = d.reason;
  return j;
}

inline nlohmann::ordered_json to_json(const UserRecord& r) {
  nlohmann::ordered_json j;
  j["user_id"] = r.user_id;
  j["priority"] = static_cast<int>(r.priority);
  j["version"] = r.version;
  j["enrollment"] = {{"genuine_samples", r.enrollment.genuine_samples},
                     {"forged_samples", r.enrollment.forged_samples},
                     {"pooled_negatives", r.enrollment.pooled_negatives}};
  j["ensemble"] = to_json(r.ensemble);
  return j;
}

inline UserRecord record_from_json(const nlohmann::json& j) {
  UserRecord r;
  r.user_id = j.at("user_id").get<std::string>();
  r.priority = priority_from_int(j.at("priority").get<int>());
  r.version = j.at("version").get<std::uint64_t>();
  const auto& e = j.at("enrollment");
  r.enrollment = {e.at("genuine_samples").get<std::size_t>(), e.at("forged_samples").get<std::size_t>(),
                  e.at("pooled_negatives").get<std::size_t>()};
  r.ensemble = ensemble_from_json(j.at("ensemble"));
  if (r.ensemble.user_id != r.user_id) throw Error(ErrorCode::CorruptRecord, "ensemble belongs to another user");
  return r;
}

// ---------------------------------------------------------------------------

class ModelStore {
 public:
  static constexpr std::string_view kRecordMagic = "SIGAUTH-RECORD 1";
  static constexpr std::string_view kPcaMagic = "SIGAUTH-PCA 1";

  explicit ModelStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_))
      throw Error(ErrorCode::Io, "cannot create store directory " + dir_.string());
  }

  const std::filesystem::path& dir() const { return dir_; }

  static std::string serialize(const UserRecord& r) { return frame(kRecordMagic, to_json(r).dump()); }
  static std::string serialize(const PcaModel& m) {
    auto j = to_json(m);
    j["id"] = m.id;
    return frame(kPcaMagic, j.dump());
  }

  // Assigns the next version for the user and persists the record.
  void save(UserRecord& record) {
    check_user_id(record.user_id);
    std::lock_guard lock(write_mutex_);
    auto index = read_index();
    record.version = index.count(record.user_id) ? index[record.user_id] + 1 : 1;
    write_atomic(record_path(record.user_id), serialize(record));
    index[record.user_id] = record.version;
    write_index(index);
  }

  UserRecord load(const std::string& user_id) const {
    check_user_id(user_id);
    const auto path = record_path(user_id);
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::UnknownUser, "no record for user " + user_id);
    try {
      return record_from_json(nlohmann::json::parse(unframe(read_file(path), kRecordMagic, path)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::CorruptRecord, path.string() + ": " + e.what());
    }
  }

  bool contains(const std::string& user_id) const {
    return is_valid_user_id(user_id) && std::filesystem::exists(record_path(user_id));
  }

  void save_pca(const PcaModel& model) {
    std::lock_guard lock(write_mutex_);
    write_atomic(pca_path(), serialize(model));
  }

  PcaModel load_pca() const {
    if (!std::filesystem::exists(pca_path())) throw Error(ErrorCode::FileNotFound, "store has no PCA model");
    try {
      return pca_from_json(nlohmann::json::parse(unframe(read_file(pca_path()), kPcaMagic, pca_path())));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::CorruptRecord, pca_path().string() + ": " + e.what());
    }
  }

  std::map<std::string, std::uint64_t> index() const {
    std::lock_guard lock(write_mutex_);
    return read_index();
  }

  std::filesystem::path record_path(const std::string& user_id) const { return dir_ / (user_id + ".rec"); }
  std::filesystem::path pca_path() const { return dir_ / "pca.model"; }
  std::filesystem::path index_path() const { return dir_ / "index"; }

  static bool is_valid_user_id(std::string_view id) {
    if (id.empty() || id.size() > 128 || id.front() == '.') return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
  }

 private:
  static void check_user_id(std::string_view id) {
    if (!is_valid_user_id(id)) throw Error(ErrorCode::InvalidArgument, "invalid user id '" + std::string(id) + "'");
  }

  static std::string frame(std::string_view magic, const std::string& body) {
    return std::string(magic) + "\n" + body + "\nsha256 " + sha256_hex(body) + "\n";
  }

  static std::string unframe(const std::string& bytes, std::string_view magic, const std::filesystem::path& path) {
    const auto corrupt = [&](const std::string& why) {
      return Error(ErrorCode::CorruptRecord, path.string() + ": " + why);
    };
    const auto first = bytes.find('\n');
    if (first == std::string::npos || std::string_view(bytes).substr(0, first) != magic) throw corrupt("bad header");
    const auto second = bytes.find('\n', first + 1);
    if (second == std::string::npos) throw corrupt("truncated body");
    const std::string body = bytes.substr(first + 1, second - first - 1);
    const std::string trailer = bytes.substr(second + 1);
    const std::string expected = "sha256 " + sha256_hex(body) + "\n";
    if (trailer != expected) throw corrupt(trailer.empty() ? "missing checksum" : "checksum mismatch");
    return body;
  }

  static std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static void write_atomic(const std::filesystem::path& path, const std::string& bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
      out << bytes;
      out.flush();
      if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot move " + tmp.string() + " into place: " + ec.message());
  }

  std::map<std::string, std::uint64_t> read_index() const {
    std::map<std::string, std::uint64_t> index;
    std::ifstream in(index_path());
    std::string id;
    std::uint64_t version = 0;
    while (in >> id >> version) index[id] = version;
    return index;
  }

  void write_index(const std::map<std::string, std::uint64_t>& index) const {
    std::string text;
    for (const auto& [id, version] : index) text += id + " " + std::to_string(version) + "\n";
    write_atomic(index_path(), text);
  }

  std::filesystem::path dir_;
  mutable std::mutex write_mutex_;
};

// ---------------------------------------------------------------------------

struct EnrollConfig {
  TrainConfig train;
  std::size_t min_genuine = 25;
  // Negatives borrowed from other writers when the caller supplies no forgeries.
  std::size_t pooled_negatives = 15;
};

namespace detail {

inline void check_enrollment_quality(std::span<const SignatureSample> samples) {
  std::string failing;
  std::optional<std::size_t> first;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (auto q = check_quality(samples[i]); !q.pass()) {
      if (!first) first = i;
      failing += (failing.empty() ? "" : "; ") + std::string("sample ") + std::to_string(i) + " (" + q.summary() + ")";
    }
  }
  if (first) throw Error(ErrorCode::QualityFailure, "enrollment rejected: " + failing, first);
}

}  // namespace detail

// Builds the user's training rows: own samples (genuine + supplied forgeries)
// and, if no forgery was supplied, random forgeries drawn from negative_pool.
inline std::vector<SignatureSample> enrollment_rows(const std::string& user_id, std::span<const SignatureSample> samples,
                                                    std::span<const SignatureSample> negative_pool,
                                                    const EnrollConfig& cfg, std::size_t* pooled = nullptr) {
  detail::check_enrollment_quality(samples);
  std::vector<SignatureSample> rows;
  std::size_t genuine = 0, forged = 0;
  for (const auto& s : samples) {
    if (s.user_id != user_id)
      throw Error(ErrorCode::InvalidArgument, "sample of user " + s.user_id + " offered for " + user_id);
    (is_forgery(s.kind) ? forged : genuine) += 1;
  }
  if (genuine < cfg.min_genuine)
    throw Error(ErrorCode::InsufficientSamples, "need at least " + std::to_string(cfg.min_genuine) +
                                                    " genuine samples, got " + std::to_string(genuine));
  rows.assign(samples.begin(), samples.end());

  std::size_t borrowed = 0;
  if (forged == 0) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < negative_pool.size(); ++i)
      if (negative_pool[i].user_id != user_id && check_quality(negative_pool[i]).pass()) candidates.push_back(i);
    Rng rng(derive_seed({cfg.train.seed, 0x6e6567ULL}, user_id));
    std::shuffle(candidates.begin(), candidates.end(), rng);
    candidates.resize(std::min(candidates.size(), cfg.pooled_negatives));
    std::sort(candidates.begin(), candidates.end());
    for (auto i : candidates) {
      auto s = negative_pool[i];
      s.user_id = user_id;
      s.kind = SampleKind::RandomForgery;
      rows.push_back(std::move(s));
      ++borrowed;
    }
  }
  if (pooled) *pooled = borrowed;
  return rows;
}

// Quality-gates, trains and persists one user. Nothing is written unless
// every step succeeds.
inline UserRecord enroll(const std::string& user_id, Priority priority, std::span<const SignatureSample> samples,
                         ModelStore& store, const PcaModel& pca, const EnrollConfig& cfg = {},
                         std::span<const SignatureSample> negative_pool = {}) {
  std::size_t pooled = 0;
  const auto rows = enrollment_rows(user_id, samples, negative_pool, cfg, &pooled);
  const auto matrix = assemble_matrix(rows);

  UserRecord record;
  record.user_id = user_id;
  record.priority = priority;
  for (int label : matrix.labels) (label == 1 ? record.enrollment.genuine_samples : record.enrollment.forged_samples)++;
  record.enrollment.pooled_negatives = pooled;
  record.ensemble = train_user(user_id, matrix, pca, cfg.train);
  store.save(record);
  return record;
}

// Scores the probe against the stored template; accepted iff score >= threshold.
inline Decision verify_with(const UserRecord& record, const PcaModel& pca, const SignatureSample& sample,
                            double threshold) {
  Decision d;
  d.user_id = record.user_id;
  d.threshold = threshold;
  d.priority = record.priority;
  if (auto q = check_quality(sample); !q.pass()) {
    d.reason = "QUALITY_FAILURE:" + q.summary();
    return d;
  }
  d.score = ensemble_score(record.ensemble, pca, sample);
  d.accepted = *d.score >= threshold;
  d.reason = "OK";
  return d;
}

inline Decision verify(const std::string& user_id, const SignatureSample& sample, double threshold,
                       const ModelStore& store) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "threshold must lie in [0, 1]");
  const auto record = store.load(user_id);
  return verify_with(record, store.load_pca(), sample, threshold);
}

// Resolves the user's tier, picks its threshold and delegates to verify.
inline Decision security_check(const std::string& user_id, const SignatureSample& sample, const ModelStore& store,
                               const ThresholdPolicy& policy, std::optional<Priority> priority_override = {}) {
  auto record = store.load(user_id);
  if (priority_override) record.priority = *priority_override;
  return verify_with(record, store.load_pca(), sample, threshold_for_priority(policy, record.priority));
}

}  // namespace sigauth
