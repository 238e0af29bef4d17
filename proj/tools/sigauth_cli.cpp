// sigauth: dataset generation, enrollment, verification, evaluation and
// training benchmarks from one binary.
//
// Exit codes: 0 success / accept, 1 reject, 2 error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sigauth/sigauth.hpp"

namespace fs = std::filesystem;
using namespace sigauth;

namespace {

constexpr int kExitAccept = 0;
constexpr int kExitReject = 1;
constexpr int kExitError = 2;

struct Options {
  std::uint64_t seed = 42;
  std::size_t users = 50;
  std::size_t genuine = 25, skilled = 10, random = 5;
  std::size_t probe_genuine = 10, probe_skilled = 5, probe_random = 5;
  double noise = kDefaultNoiseLevel;
  std::size_t workers = hardware_workers();
  std::size_t locals = 4;
  std::size_t hidden = 16;
  std::size_t epochs = 200;
  double err_goal = 1e-3;
  double variance_target = 0.95;
  std::string policy = "0.50,0.60,0.75,0.90";
  std::string store = "store";
  std::string data = "data";
  std::string out = "data";
  std::string report;
  bool paper_eq2 = false;
  std::string user;
  std::string sample;
  int priority = 0;
  std::optional<double> threshold;
  std::vector<std::size_t> bench_workers{1, 2, 4, 8};
  std::size_t reps = 15;
};

void emit(const nlohmann::ordered_json& j, const std::string& path) {
  const auto text = j.dump(2);
  if (!path.empty()) {
    if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text << '\n';
    if (!out) throw Error(ErrorCode::Io, "cannot write report " + path);
  }
  std::cout << text << '\n';
}

PopulationConfig population_config(const Options& o) {
  PopulationConfig cfg;
  cfg.enroll.train.workers = o.workers;
  cfg.enroll.train.locals = o.locals;
  cfg.enroll.train.hidden = o.hidden;
  cfg.enroll.train.seed = o.seed;
  cfg.enroll.train.train.max_epochs = o.epochs;
  cfg.enroll.train.train.err_goal = o.err_goal;
  cfg.pca.variance_target = o.variance_target;
  return cfg;
}

DatasetSpec dataset_spec(const Options& o) {
  DatasetSpec spec;
  spec.seed = o.seed;
  spec.users = o.users;
  spec.enrollment = {o.genuine, o.skilled, o.random};
  spec.probes = {o.probe_genuine, o.probe_skilled, o.probe_random};
  spec.noise_level = o.noise;
  return spec;
}

int cmd_gen(const Options& o) {
  const auto ds = generate_dataset(dataset_spec(o));
  auto manifest = write_dataset(ds, o.out);
  std::cout << manifest.dump(2) << '\n';
  return kExitAccept;
}

int cmd_enroll(const Options& o) {
  const auto ds = read_dataset(o.data);
  std::map<std::string, Priority> priorities;
  for (const auto& u : ds.users) priorities[u.user_id] = u.priority;
  ModelStore store(o.store);
  const auto pop = enroll_population(ds.enrollment, priorities, population_config(o), &store);

  nlohmann::ordered_json j;
  j["store"] = o.store;
  j["pca"] = {{"id", pop.pca.id}, {"k", pop.pca.k}, {"explained", pop.pca.explained_ratio(pop.pca.k)}};
  auto& users = j["users"] = nlohmann::ordered_json::array();
  for (const auto& r : pop.records) {
    double worst = 0.0;
    for (double e : r.ensemble.local_errors) worst = std::max(worst, e);
    users.push_back({{"user_id", r.user_id},
                     {"priority", static_cast<int>(r.priority)},
                     {"version", r.version},
                     {"local_errors", r.ensemble.local_errors},
                     {"max_error", worst}});
  }
  emit(j, o.report.empty() ? (fs::path(o.store) / "enroll_report.json").string() : o.report);
  return kExitAccept;
}

int cmd_verify(const Options& o) {
  const auto samples = load_samples(o.sample);
  if (samples.empty()) throw Error(ErrorCode::MalformedRecord, "sample file " + o.sample + " is empty");
  const ModelStore store(o.store);
  Decision d;
  if (o.threshold) {
    d = verify(o.user, samples.front(), *o.threshold, store);
  } else {
    std::optional<Priority> override;
    if (o.priority != 0) override = priority_from_int(o.priority);
    d = security_check(o.user, samples.front(), store, ThresholdPolicy::parse(o.policy), override);
  }
  std::cout << to_json(d).dump() << '\n';
  return d.accepted ? kExitAccept : kExitReject;
}

nlohmann::ordered_json confusion_json(const Confusion& c) {
  return {{"true_genuine", c.true_genuine},
          {"false_genuine", c.false_genuine},
          {"true_forged", c.true_forged},
          {"false_forged", c.false_forged}};
}

int cmd_eval(const Options& o) {
  const auto ds = read_dataset(o.data);
  if (ds.probes.empty()) throw Error(ErrorCode::EmptyData, "dataset has no held-out probes");
  check_disjoint(ds.enrollment, ds.probes);

  const ModelStore store(o.store);
  const auto pca = store.load_pca();
  std::vector<UserRecord> records;
  for (const auto& id : user_order(ds.probes)) records.push_back(store.load(id));
  const auto scored = score_probes(ds.probes, pca, records, o.workers);
  const auto probes = to_probes(scored);
  const auto q = summarize(probes);
  const auto policy = ThresholdPolicy::parse(o.policy);

  nlohmann::ordered_json j;
  j["probes"] = probes.size();
  j["eer"] = q.eer.eer;
  j["eer_threshold"] = q.eer.threshold;
  j["confusion_at_eer"] = confusion_json(q.at_eer);
  j["sensitivity"] = q.sensitivity;
  j["specificity"] = q.specificity;
  if (o.paper_eq2) j["specificity_as_printed"] = q.specificity_as_printed;
  j["far"] = far(q.at_eer);
  j["frr"] = frr(q.at_eer);

  auto& tiers = j["tiers"] = nlohmann::ordered_json::array();
  for (auto p : kPriorities) {
    const auto c = confusion_at(probes, policy[p]);
    nlohmann::ordered_json t{{"priority", static_cast<int>(p)},
                             {"tier", to_string(p)},
                             {"threshold", policy[p]},
                             {"confusion", confusion_json(c)},
                             {"sensitivity", sensitivity(c)},
                             {"specificity", specificity(c)}};
    if (o.paper_eq2) t["specificity_as_printed"] = specificity_as_printed(c);
    tiers.push_back(std::move(t));
  }

  std::map<SampleKind, std::vector<double>> by_kind;
  for (const auto& s : scored) by_kind[s.kind].push_back(s.score);
  auto& kinds = j["mean_score_by_kind"] = nlohmann::ordered_json::object();
  for (const auto& [kind, scores] : by_kind) {
    double sum = 0.0;
    for (double s : scores) sum += s;
    kinds[std::string(to_string(kind))] = sum / static_cast<double>(scores.size());
  }

  auto& curve = j["curve"] = nlohmann::ordered_json::array();
  for (const auto& pt : error_curve(probes)) curve.push_back({pt.threshold, pt.far, pt.frr});
  emit(j, o.report.empty() ? (fs::path(o.store) / "eval_report.json").string() : o.report);
  return kExitAccept;
}

int cmd_bench(const Options& o) {
  BenchOptions opts;
  opts.workers = o.bench_workers;
  opts.repetitions = o.reps;
  opts.population = population_config(o);
  const auto ds = fs::exists(fs::path(o.data) / "manifest.json") ? read_dataset(o.data)
                                                                  : generate_dataset(dataset_spec(o));
  const auto report = bench_training(ds, opts);
  std::cerr << format_table(report);
  emit(to_json(report, !ds.probes.empty()), o.report.empty() ? "bench_report.json" : o.report);
  return kExitAccept;
}

void add_dataset_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--users", o.users, "Number of users")->check(CLI::PositiveNumber);
  cmd->add_option("--genuine", o.genuine, "Genuine enrollment samples per user");
  cmd->add_option("--skilled", o.skilled, "Skilled forgeries per user");
  cmd->add_option("--random", o.random, "Random forgeries per user");
  cmd->add_option("--probe-genuine", o.probe_genuine, "Held-out genuine probes per user");
  cmd->add_option("--probe-skilled", o.probe_skilled, "Held-out skilled-forgery probes per user");
  cmd->add_option("--probe-random", o.probe_random, "Held-out random-forgery probes per user");
  cmd->add_option("--noise", o.noise, "Generator jitter level")->check(CLI::NonNegativeNumber);
}

void add_training_options(CLI::App* cmd, Options& o, bool standalone) {
  if (standalone) {
    cmd->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", o.seed, "Master seed");
  }
  cmd->add_option("--locals", o.locals, "Local networks per user")->check(CLI::PositiveNumber);
  cmd->add_option("--hidden", o.hidden, "Hidden units per network")->check(CLI::PositiveNumber);
  cmd->add_option("--epochs", o.epochs, "Maximum RPROP epochs");
  cmd->add_option("--err-goal", o.err_goal, "Training error goal");
  cmd->add_option("--variance-target", o.variance_target, "PCA retained variance")->check(CLI::Range(0.0, 1.0));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic signature authentication"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI config file; command-line flags win");
  Options o;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  add_dataset_options(gen, o);
  gen->add_option("--out", o.out, "Output directory");

  auto* enroll = app.add_subcommand("enroll", "Fit the population PCA and enroll every user");
  enroll->add_option("--data", o.data, "Dataset directory");
  enroll->add_option("--store", o.store, "Template store directory");
  enroll->add_option("--report", o.report, "Report path");
  add_training_options(enroll, o, true);

  auto* ver = app.add_subcommand("verify", "Verify one sample against a stored template");
  ver->add_option("--user", o.user, "User id")->required();
  ver->add_option("--sample", o.sample, "JSON-lines file; the first sample is used")->required();
  ver->add_option("--store", o.store, "Template store directory");
  ver->add_option("--priority", o.priority, "Override the stored priority tier")->check(CLI::Range(1, 4));
  ver->add_option("--threshold", o.threshold, "Explicit threshold instead of the tier policy")
      ->check(CLI::Range(0.0, 1.0));
  ver->add_option("--threshold-policy", o.policy, "Tier thresholds low,avg,high,vhigh");

  auto* ev = app.add_subcommand("eval", "Score held-out probes and report EER, sensitivity, specificity");
  ev->add_option("--data", o.data, "Dataset directory");
  ev->add_option("--store", o.store, "Template store directory");
  ev->add_option("--report", o.report, "Report path");
  ev->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  ev->add_option("--threshold-policy", o.policy, "Tier thresholds low,avg,high,vhigh");
  ev->add_flag("--paper-eq2", o.paper_eq2, "Add the TF/(TF+TG) specificity column");

  auto* bench = app.add_subcommand("bench", "Time training at several worker counts");
  bench->add_option("--data", o.data, "Dataset directory (generated from the dataset flags if absent)");
  bench->add_option("--workers", o.bench_workers, "Worker counts, must include 1")->delimiter(',');
  bench->add_option("--reps", o.reps, "Repetitions per worker count")->check(CLI::PositiveNumber);
  bench->add_option("--report", o.report, "Report path");
  add_dataset_options(bench, o);
  add_training_options(bench, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (*gen) return cmd_gen(o);
    if (*enroll) return cmd_enroll(o);
    if (*ver) return cmd_verify(o);
    if (*ev) return cmd_eval(o);
    if (*bench) return cmd_bench(o);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
