#include <fstream>

#include <gtest/gtest.h>

#include "sigauth/bench.hpp"
#include "sigauth/pipeline.hpp"
#include "support.hpp"

using namespace sigauth;
using sigauth::test::code_of;
using sigauth::test::TempDir;

namespace {

DatasetSpec small_spec(std::size_t users = 3) {
  DatasetSpec spec;
  spec.users = users;
  spec.probes = {2, 1, 1};
  return spec;
}

PopulationConfig small_population(std::size_t workers) {
  PopulationConfig cfg;
  cfg.enroll.train.workers = workers;
  cfg.enroll.train.locals = 2;
  cfg.enroll.train.hidden = 4;
  cfg.enroll.train.train.max_epochs = 20;
  return cfg;
}

std::map<std::string, Priority> priorities_of(const Dataset& ds) {
  std::map<std::string, Priority> out;
  for (const auto& u : ds.users) out[u.user_id] = u.priority;
  return out;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Dataset, UserIdsArePadded) {
  EXPECT_EQ(user_id_for(0, 50), "u001");
  EXPECT_EQ(user_id_for(49, 50), "u050");
  EXPECT_EQ(user_id_for(999, 1000), "u1000");
  EXPECT_EQ(user_id_for(0, 1000), "u0001");
}

TEST(Dataset, SplitSizesAndPriorities) {
  const auto ds = generate_dataset(small_spec(5));
  ASSERT_EQ(ds.users.size(), 5u);
  EXPECT_EQ(ds.enrollment.size(), 5u * 40u);
  EXPECT_EQ(ds.probes.size(), 5u * 4u);
  for (std::size_t u = 0; u < 5; ++u) EXPECT_EQ(static_cast<int>(ds.users[u].priority), static_cast<int>(u % 4) + 1);
  std::map<std::string, std::array<int, 3>> kinds;
  for (const auto& s : ds.enrollment) kinds[s.user_id][static_cast<int>(s.kind)]++;
  for (const auto& [user, k] : kinds) EXPECT_EQ(k, (std::array<int, 3>{25, 10, 5})) << user;
}

TEST(Dataset, Deterministic) {
  const auto a = generate_dataset(small_spec());
  const auto b = generate_dataset(small_spec());
  ASSERT_EQ(a.enrollment.size(), b.enrollment.size());
  for (std::size_t i = 0; i < a.enrollment.size(); ++i)
    EXPECT_EQ(to_json_line(a.enrollment[i]), to_json_line(b.enrollment[i]));
  auto other = small_spec();
  other.seed = 43;
  EXPECT_NE(to_json_line(generate_dataset(other).enrollment[0]), to_json_line(a.enrollment[0]));
}

TEST(Dataset, RandomForgeriesComeFromOtherUsers) {
  // Enrollment seeds run genuine 0..24, skilled 25..34, random 35..39.
  const auto spec = small_spec(4);
  const auto ds = generate_dataset(spec);
  std::vector<UserPrototype> protos;
  for (const auto& u : ds.users) protos.push_back(make_prototype(spec.seed, u.user_id));
  for (std::size_t u = 0; u < 4; ++u)
    for (std::uint64_t seed = 35; seed < 40; ++seed) {
      const auto& s = ds.enrollment[u * 40 + seed];
      ASSERT_EQ(s.kind, SampleKind::RandomForgery);
      EXPECT_EQ(s.user_id, ds.users[u].user_id);
      int donors = 0;
      for (std::size_t d = 0; d < 4; ++d)
        if (d != u && to_json_line(synth_random_forgery(protos[u], protos[d], spec.noise_level, seed)) == to_json_line(s))
          ++donors;
      EXPECT_EQ(donors, 1);
    }
  EXPECT_EQ(code_of([] { generate_dataset(small_spec(0)); }), ErrorCode::InvalidArgument);
}

TEST(Dataset, SplitsAreDisjoint) {
  const auto ds = generate_dataset(small_spec());
  EXPECT_NO_THROW(check_disjoint(ds.enrollment, ds.probes));
  auto probes = ds.probes;
  probes[2] = ds.enrollment[11];
  const auto e = sigauth::test::error_of([&] { check_disjoint(ds.enrollment, probes); });
  EXPECT_EQ(e.code(), ErrorCode::OverlappingSplit);
  EXPECT_EQ(e.index(), 2u);
}

TEST(Dataset, WriteReadRoundTrip) {
  TempDir a("ds_a"), b("ds_b");
  const auto ds = generate_dataset(small_spec());
  const auto manifest = write_dataset(ds, a.path());
  write_dataset(ds, b.path());
  for (const char* f : {"enroll.jsonl", "probes.jsonl", "manifest.json"})
    EXPECT_EQ(file_bytes(a / f), file_bytes(b / f)) << f;
  EXPECT_EQ(manifest["files"]["enroll.jsonl"]["sha256"], sha256_hex(file_bytes(a / "enroll.jsonl")));

  const auto back = read_dataset(a.path());
  EXPECT_EQ(back.spec.seed, ds.spec.seed);
  EXPECT_EQ(back.users.size(), ds.users.size());
  EXPECT_EQ(back.users[1].priority, ds.users[1].priority);
  ASSERT_EQ(back.probes.size(), ds.probes.size());
  for (std::size_t i = 0; i < ds.probes.size(); ++i) EXPECT_EQ(to_json_line(back.probes[i]), to_json_line(ds.probes[i]));
  EXPECT_EQ(code_of([&] { read_dataset(a / "missing"); }), ErrorCode::FileNotFound);
}

TEST(Population, RerunIsByteIdentical) {
  const auto ds = generate_dataset(small_spec());
  const auto a = enroll_population(ds.enrollment, priorities_of(ds), small_population(2));
  const auto b = enroll_population(ds.enrollment, priorities_of(ds), small_population(2));
  EXPECT_EQ(ModelStore::serialize(a.pca), ModelStore::serialize(b.pca));
  ASSERT_EQ(a.records.size(), 3u);
  for (std::size_t u = 0; u < 3; ++u) EXPECT_EQ(ModelStore::serialize(a.records[u]), ModelStore::serialize(b.records[u]));
  const auto sa = score_probes(ds.probes, a.pca, a.records, 1);
  const auto sb = score_probes(ds.probes, b.pca, b.records, 2);
  ASSERT_EQ(sa.size(), ds.probes.size());
  for (std::size_t i = 0; i < sa.size(); ++i) {
    EXPECT_EQ(sa[i].score, sb[i].score);
    EXPECT_EQ(sa[i].user_id, ds.probes[i].user_id);
  }
}

TEST(Population, WorkerCountOnlyPerturbsRounding) {
  // The covariance fold follows the partition count, so models agree to
  // rounding rather than bit for bit across worker counts.
  const auto ds = generate_dataset(small_spec());
  const auto p1 = enroll_population(ds.enrollment, priorities_of(ds), small_population(1));
  const auto p2 = enroll_population(ds.enrollment, priorities_of(ds), small_population(2));
  EXPECT_EQ(p1.pca.k, p2.pca.k);
  EXPECT_LT((p1.pca.corr - p2.pca.corr).cwiseAbs().maxCoeff(), 1e-9);
  const auto s1 = score_probes(ds.probes, p1.pca, p1.records, 1);
  const auto s2 = score_probes(ds.probes, p2.pca, p2.records, 2);
  for (std::size_t i = 0; i < s1.size(); ++i) EXPECT_NEAR(s1[i].score, s2[i].score, 1e-9);
}

TEST(Population, RecordsFollowUserOrderAndPriorities) {
  const auto ds = generate_dataset(small_spec(4));
  TempDir dir("pop");
  ModelStore store(dir.path());
  const auto pop = enroll_population(ds.enrollment, priorities_of(ds), small_population(1), &store);
  for (std::size_t u = 0; u < 4; ++u) {
    EXPECT_EQ(pop.records[u].user_id, ds.users[u].user_id);
    EXPECT_EQ(pop.records[u].priority, ds.users[u].priority);
    EXPECT_EQ(pop.records[u].enrollment.genuine_samples, 25u);
    EXPECT_EQ(pop.records[u].enrollment.forged_samples, 15u);
    EXPECT_EQ(pop.records[u].enrollment.pooled_negatives, 0u);
    EXPECT_EQ(pop.records[u].ensemble.pca_ref, pop.pca.id);
    EXPECT_EQ(ModelStore::serialize(store.load(ds.users[u].user_id)), ModelStore::serialize(pop.records[u]));
  }
  EXPECT_EQ(store.load_pca().id, pop.pca.id);
}

TEST(Population, QualityFailureAborts) {
  auto ds = generate_dataset(small_spec());
  ds.enrollment[45].timestamps[3] = ds.enrollment[45].timestamps[2];
  TempDir dir("popfail");
  ModelStore store(dir.path());
  const auto e = sigauth::test::error_of([&] { enroll_population(ds.enrollment, priorities_of(ds), small_population(1), &store); });
  EXPECT_EQ(e.code(), ErrorCode::QualityFailure);
  EXPECT_EQ(e.index(), 45u);
  EXPECT_TRUE(store.index().empty());
}

TEST(Population, UnknownProbeUser) {
  const auto ds = generate_dataset(small_spec());
  const auto pop = enroll_population(ds.enrollment, priorities_of(ds), small_population(1));
  auto probes = ds.probes;
  probes[1].user_id = "u999";
  EXPECT_EQ(code_of([&] { score_probes(probes, pop.pca, pop.records, 1); }), ErrorCode::UnknownUser);
}

TEST(Population, SummaryIsConsistent) {
  const auto ds = generate_dataset(small_spec());
  const auto pop = enroll_population(ds.enrollment, priorities_of(ds), small_population(1));
  const auto probes = to_probes(score_probes(ds.probes, pop.pca, pop.records, 1));
  const auto q = summarize(probes);
  EXPECT_EQ(q.at_eer.total(), probes.size());
  EXPECT_EQ(q.sensitivity, sensitivity(q.at_eer));
  EXPECT_EQ(q.specificity, specificity(q.at_eer));
  EXPECT_GE(q.eer.eer, 0.0);
  EXPECT_LE(q.eer.eer, 1.0);
}

TEST(Bench, BaselineOnly) {
  BenchOptions opts;
  opts.workers = {1};
  opts.repetitions = 3;
  opts.population = small_population(1);
  auto spec = small_spec(2);
  const auto report = bench_training(generate_dataset(spec), opts);
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_EQ(report.rows[0].speedup, 1.0);
  EXPECT_EQ(report.rows[0].timing.runs.size(), 3u);
  EXPECT_EQ(report.rows[0].timing.seconds, median(report.rows[0].timing.runs));
  const auto j = to_json(report, true);
  EXPECT_EQ(j["timings"][0]["runs"].size(), 3u);
  EXPECT_TRUE(j["timings"][0].contains("quality"));
  EXPECT_NE(format_table(report).find("S(P)"), std::string::npos);
}

TEST(Bench, SeveralWorkerCounts) {
  BenchOptions opts;
  opts.workers = {1, 2};
  opts.repetitions = 1;
  opts.population = small_population(1);
  const auto report = bench_training(generate_dataset(small_spec(2)), opts);
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_EQ(report.rows[0].speedup, 1.0);
  EXPECT_DOUBLE_EQ(report.rows[1].speedup, report.rows[0].timing.seconds / report.rows[1].timing.seconds);
  EXPECT_NEAR(report.rows[0].quality.eer.eer, report.rows[1].quality.eer.eer, 1e-9);
}

TEST(Bench, Errors) {
  const auto ds = generate_dataset(small_spec(2));
  BenchOptions opts;
  opts.workers = {2, 4};
  EXPECT_EQ(code_of([&] { bench_training(ds, opts); }), ErrorCode::MissingBaseline);
  opts.workers = {1, 0};
  EXPECT_EQ(code_of([&] { bench_training(ds, opts); }), ErrorCode::InvalidArgument);
  opts.workers = {1};
  opts.repetitions = 0;
  EXPECT_EQ(code_of([&] { bench_training(ds, opts); }), ErrorCode::InvalidArgument);
}
