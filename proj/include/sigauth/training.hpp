#pragma once

// Writer-dependent ensembles: each user's projected rows are dealt round-robin
// into L shards, one network is trained per shard, and the ordered collection
// of local networks is the user's template.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sigauth/error.hpp"
#include "sigauth/features.hpp"
#include "sigauth/nnet.hpp"
#include "sigauth/parallel.hpp"
#include "sigauth/pca.hpp"
#include "sigauth/random.hpp"

namespace sigauth {

enum class Fusion { Mean, MajorityVote };

struct TrainConfig {
  std::size_t workers = hardware_workers();
  std::size_t locals = 4;
  std::size_t hidden = 16;
  TrainOptions train;
  std::uint64_t seed = 42;
  // When non-empty, one explicit init seed per local network.
  std::vector<std::uint64_t> local_seeds;
  Fusion fusion = Fusion::Mean;
};

struct EnsembleNet {
  std::string user_id;
  std::vector<Network> locals;
  std::vector<double> local_errors;
  std::vector<bool> used_fallback;  // shard was single-class, trained on all rows
  std::string pca_ref;
  Fusion fusion = Fusion::Mean;
};

// Genuine rows map to 1, forged rows to 0.
inline Eigen::VectorXd build_target_vector(std::span<const int> labels) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(labels.size()));
  bool any_genuine = false, any_forged = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    t[static_cast<Eigen::Index>(i)] = labels[i] == 1 ? 1.0 : 0.0;
    (labels[i] == 1 ? any_genuine : any_forged) = true;
  }
  if (!any_genuine || !any_forged)
    throw Error(ErrorCode::OneClass, "a verifier needs both genuine and forged rows");
  return t;
}

inline std::uint64_t local_seed(const TrainConfig& cfg, std::string_view user_id, std::size_t l) {
  if (!cfg.local_seeds.empty()) {
    if (cfg.local_seeds.size() != cfg.locals)
      throw Error(ErrorCode::InvalidArgument, "local_seeds must hold one seed per local network");
    return cfg.local_seeds[l];
  }
  return derive_seed({cfg.seed}, user_id) ^ static_cast<std::uint64_t>(l);
}

// Rows and labels of one user, already projected through the population PCA.
struct UserTrainingSet {
  std::string user_id;
  Eigen::MatrixXd inputs;  // N x k
  Eigen::VectorXd targets;
};

inline UserTrainingSet make_training_set(std::string user_id, const Eigen::MatrixXd& features,
                                         std::span<const int> labels, const PcaModel& pca) {
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw Error(ErrorCode::DimensionMismatch, "feature rows and labels differ in count");
  UserTrainingSet set;
  set.user_id = std::move(user_id);
  set.targets = build_target_vector(labels);
  set.inputs = project_rows(pca, features);
  return set;
}

namespace detail {

struct LocalResult {
  Network net;
  double error = 0.0;
  bool fallback = false;
};

inline LocalResult train_local(const UserTrainingSet& set, const TrainConfig& cfg, std::size_t l) {
  const auto n = static_cast<std::size_t>(set.inputs.rows());
  std::vector<Eigen::Index> rows;
  bool genuine = false, forged = false;
  for (std::size_t r = l; r < n; r += cfg.locals) {
    rows.push_back(static_cast<Eigen::Index>(r));
    (set.targets[static_cast<Eigen::Index>(r)] > 0.5 ? genuine : forged) = true;
  }

  LocalResult out;
  const Layout layout{static_cast<std::size_t>(set.inputs.cols()), cfg.hidden};
  Network net = netcreate(layout, local_seed(cfg, set.user_id, l));
  if (genuine && forged) {
    Eigen::MatrixXd inputs(static_cast<Eigen::Index>(rows.size()), set.inputs.cols());
    Eigen::VectorXd targets(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      inputs.row(static_cast<Eigen::Index>(i)) = set.inputs.row(rows[i]);
      targets[static_cast<Eigen::Index>(i)] = set.targets[rows[i]];
    }
    auto trained = sigtrain(std::move(net), inputs, targets, cfg.train);
    out.net = std::move(trained.net);
    out.error = trained.error;
  } else {
    auto trained = sigtrain(std::move(net), set.inputs, set.targets, cfg.train);
    out.net = std::move(trained.net);
    out.error = trained.error;
    out.fallback = true;
  }
  return out;
}

inline void check_config(const TrainConfig& cfg) {
  if (cfg.workers == 0) throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
  if (cfg.locals == 0) throw Error(ErrorCode::InvalidArgument, "locals must be >= 1");
  if (cfg.hidden == 0) throw Error(ErrorCode::InvalidArgument, "hidden width must be >= 1");
}

}  // namespace detail

// Trains every (user, local) pair as an independent task on a pool of
// cfg.workers threads, then assembles the ensembles in shard order.
inline std::vector<EnsembleNet> train_users(std::span<const UserTrainingSet> users, const std::string& pca_ref,
                                            const TrainConfig& cfg) {
  detail::check_config(cfg);
  for (const auto& u : users) {
    if (u.inputs.rows() == 0) throw Error(ErrorCode::EmptyData, "user " + u.user_id + " has no rows");
    if (u.targets.size() != u.inputs.rows())
      throw Error(ErrorCode::DimensionMismatch, "user " + u.user_id + ": inputs and targets differ");
  }

  const std::size_t tasks = users.size() * cfg.locals;
  auto results = parallel_map(tasks, cfg.workers, [&](std::size_t t) {
    return detail::train_local(users[t / cfg.locals], cfg, t % cfg.locals);
  });

  std::vector<EnsembleNet> out(users.size());
  for (std::size_t u = 0; u < users.size(); ++u) {
    auto& ens = out[u];
    ens.user_id = users[u].user_id;
    ens.pca_ref = pca_ref;
    ens.fusion = cfg.fusion;
    for (std::size_t l = 0; l < cfg.locals; ++l) {
      auto& r = results[u * cfg.locals + l];
      ens.locals.push_back(std::move(r.net));
      ens.local_errors.push_back(r.error);
      ens.used_fallback.push_back(r.fallback);
    }
  }
  return out;
}

inline EnsembleNet train_user(const UserTrainingSet& user, const std::string& pca_ref, const TrainConfig& cfg) {
  return std::move(train_users(std::span<const UserTrainingSet>(&user, 1), pca_ref, cfg).front());
}

inline EnsembleNet train_user(const std::string& user_id, const FeatureMatrix& rows, const PcaModel& pca,
                              const TrainConfig& cfg) {
  return train_user(make_training_set(user_id, rows.values, rows.labels, pca), pca.id, cfg);
}

// Mean of the local scores (or the fraction of locals voting genuine).
inline double score_projected(const EnsembleNet& ens, const Eigen::VectorXd& z) {
  if (ens.locals.empty()) throw Error(ErrorCode::EmptyData, "ensemble has no local networks");
  double acc = 0.0;
  for (const auto& net : ens.locals) {
    const double s = forward(net, z);
    acc += ens.fusion == Fusion::Mean ? s : (s >= 0.5 ? 1.0 : 0.0);
  }
  return acc / static_cast<double>(ens.locals.size());
}

inline double ensemble_score(const EnsembleNet& ens, const PcaModel& pca, const SignatureSample& sample) {
  if (ens.pca_ref != pca.id)
    throw Error(ErrorCode::PcaMismatch, "ensemble for " + ens.user_id + " was trained against PCA " + ens.pca_ref +
                                            ", got " + pca.id);
  return score_projected(ens, project(pca, extract_features(sample).values));
}

// ---------------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const EnsembleNet& ens) {
  nlohmann::ordered_json j;
  j["user_id"] = ens.user_id;
  j["pca_ref"] = ens.pca_ref;
  j["fusion"] = ens.fusion == Fusion::Mean ? "mean" : "majority_vote";
  j["local_errors"] = ens.local_errors;
  j["used_fallback"] = ens.used_fallback;
  auto& locals = j["locals"] = nlohmann::ordered_json::array();
  for (const auto& net : ens.locals) locals.push_back(to_json(net));
  return j;
}

inline EnsembleNet ensemble_from_json(const nlohmann::json& j) {
  EnsembleNet ens;
  ens.user_id = j.at("user_id").get<std::string>();
  ens.pca_ref = j.at("pca_ref").get<std::string>();
  const auto fusion = j.at("fusion").get<std::string>();
  if (fusion != "mean" && fusion != "majority_vote") throw Error(ErrorCode::CorruptRecord, "unknown fusion " + fusion);
  ens.fusion = fusion == "mean" ? Fusion::Mean : Fusion::MajorityVote;
  ens.local_errors = j.at("local_errors").get<std::vector<double>>();
  ens.used_fallback = j.at("used_fallback").get<std::vector<bool>>();
  for (const auto& n : j.at("locals")) ens.locals.push_back(network_from_json(n));
  if (ens.locals.empty() || ens.locals.size() != ens.local_errors.size() ||
      ens.locals.size() != ens.used_fallback.size())
    throw Error(ErrorCode::CorruptRecord, "inconsistent ensemble record");
  for (const auto& n : ens.locals)
    if (!(n.layout() == ens.locals.front().layout()))
      throw Error(ErrorCode::CorruptRecord, "local networks disagree on layout");
  return ens;
}

}  // namespace sigauth
