#include <algorithm>
#include <cmath>
#include <set>

#include "adaptkit/errors.hpp"
#include "adaptkit/metrics.hpp"
#include "adaptkit/trainer.hpp"
#include "doctest.h"

using namespace adaptkit;

namespace {

ToyTask small_task(const std::string& name, std::uint64_t seed = 0) {
  return generate_toy_task(name, seed, 8, 128, 64, 32);
}

Model adapter_model(std::uint64_t seed = 0) {
  Model m = Model::initialize(ModelConfig::desk(), seed);
  m.add_adapter("t", AdapterType::text_task, "pfeiffer");
  m.add_head("t", HeadKind::classification, 2);
  m.train_adapter({"t"});
  return m;
}

TrainConfig quick(TrainMode mode, std::size_t steps = 3) {
  TrainConfig c = TrainConfig::defaults(mode);
  c.batch_size = 4;
  c.max_steps = steps;
  return c;
}

std::vector<Tensor> snapshot(Model& m, Ownership owner) {
  std::vector<Tensor> out;
  m.for_each_parameter([&](const Parameter& p) {
    if (p.owner() == owner) out.push_back(p.value);
  });
  return out;
}

bool same(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!a[i].identical(b[i])) return false;
  return true;
}

}  // namespace

TEST_CASE("train config") {
  CHECK(TrainConfig::defaults(TrainMode::adapter_only).learning_rate == 1e-3);
  CHECK(TrainConfig::defaults(TrainMode::full_finetune).learning_rate == 1e-4);
  CHECK(parse_train_mode("full_finetune") == TrainMode::full_finetune);
  CHECK_THROWS_AS(parse_train_mode("partial"), ValidationError);
  TrainConfig c;
  c.learning_rate = -1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = TrainConfig{};
  c.max_steps = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = TrainConfig{};
  c.beta1 = 1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("zero learning rate") {
  Model m = adapter_model();
  const ToyTask task = small_task("majority-token");
  const auto base = snapshot(m, Ownership::base);
  const auto adapters = snapshot(m, Ownership::adapter);
  const auto heads = snapshot(m, Ownership::head);

  // Replay the sampler to recover each step's batch.
  TrainConfig cfg = quick(TrainMode::adapter_only);
  cfg.learning_rate = 0.0;
  Rng replay(cfg.seed);
  std::vector<double> expected;
  for (std::size_t s = 0; s < cfg.max_steps; ++s) {
    std::vector<Example> batch;
    for (std::size_t b = 0; b < cfg.batch_size; ++b)
      batch.push_back(task.train[replay.below(task.train.size())]);
    expected.push_back(batch_loss(m, m.head("t"), batch));
  }

  const TrainLog log = train(m, "t", task, cfg);
  CHECK(same(base, snapshot(m, Ownership::base)));
  CHECK(same(adapters, snapshot(m, Ownership::adapter)));
  CHECK(same(heads, snapshot(m, Ownership::head)));
  REQUIRE(log.steps.size() == cfg.max_steps);
  for (std::size_t s = 0; s < cfg.max_steps; ++s) {
    CHECK(log.steps[s].step == s + 1);
    CHECK(log.steps[s].loss == expected[s]);
  }
}

TEST_CASE("first step loss is the untrained batch loss") {
  Model m = adapter_model();
  const ToyTask task = small_task("copy-first-label");
  TrainConfig cfg = quick(TrainMode::adapter_only, 1);
  Rng replay(cfg.seed);
  std::vector<Example> batch;
  for (std::size_t b = 0; b < cfg.batch_size; ++b)
    batch.push_back(task.train[replay.below(task.train.size())]);
  const double before = batch_loss(m, m.head("t"), batch);
  const TrainLog log = train(m, "t", task, cfg);
  CHECK(log.steps[0].loss == before);
}

TEST_CASE("adapter-only training") {
  Model m = adapter_model();
  const ToyTask task = small_task("majority-token");
  const auto base = snapshot(m, Ownership::base);
  const auto adapters = snapshot(m, Ownership::adapter);
  const TrainLog log = train(m, "t", task, quick(TrainMode::adapter_only, 2));
  CHECK(same(base, snapshot(m, Ownership::base)));
  CHECK_FALSE(same(adapters, snapshot(m, Ownership::adapter)));
  CHECK(log.optimizer_state_owners == std::set<Ownership>{Ownership::adapter, Ownership::head});
  CHECK(log.final_dev_metric >= 0.0);
  CHECK(log.final_dev_metric <= 1.0);
}

TEST_CASE("full fine-tuning updates the backbone") {
  Model m = Model::initialize(ModelConfig::desk(), 0);
  m.add_head("t", HeadKind::classification, 2);
  const auto base = snapshot(m, Ownership::base);
  const TrainLog log = train(m, "t", small_task("majority-token"), quick(TrainMode::full_finetune, 1));
  CHECK_FALSE(same(base, snapshot(m, Ownership::base)));
  CHECK(log.optimizer_state_owners.count(Ownership::base) == 1);
  CHECK(log.optimizer_state_owners.count(Ownership::head) == 1);
}

TEST_CASE("adapter-only preconditions") {
  const ToyTask task = small_task("majority-token");
  Model bare = Model::initialize(ModelConfig::desk(), 0);
  bare.add_head("t", HeadKind::classification, 2);
  CHECK_THROWS_AS(train(bare, "t", task, quick(TrainMode::adapter_only)), ValidationError);

  bare.add_adapter("t", AdapterType::text_task, "pfeiffer");
  bare.set_active({"t"});
  CHECK_THROWS_AS(train(bare, "t", task, quick(TrainMode::adapter_only)), ValidationError);
  CHECK_THROWS_AS(train(bare, "missing", task, quick(TrainMode::adapter_only)), ValidationError);
}

TEST_CASE("training is deterministic in the seed") {
  const ToyTask task = small_task("parity-of-token");
  auto run = [&](std::uint64_t seed) {
    Model m = adapter_model();
    TrainConfig cfg = quick(TrainMode::adapter_only, 4);
    cfg.seed = seed;
    cfg.eval_every = 2;
    return train(m, "t", task, cfg);
  };
  const TrainLog a = run(5), b = run(5), c = run(6);
  CHECK(a.to_jsonl() == b.to_jsonl());
  CHECK(a.final_dev_metric == b.final_dev_metric);
  CHECK(a.to_jsonl() != c.to_jsonl());
  CHECK(a.steps[1].dev_metric.has_value());
  CHECK_FALSE(a.steps[0].dev_metric.has_value());
  CHECK(a.to_jsonl().find("\"dev_accuracy\"") != std::string::npos);
}

TEST_CASE("metrics") {
  const std::vector<int> p = {1, 0, 1, 1}, y = {1, 0, 0, 1};
  CHECK(accuracy(p, y) == 0.75);
  CHECK(f1_binary(p, y) == doctest::Approx(0.8));
  const std::vector<int> zeros = {0, 0}, ones = {1, 1};
  CHECK(f1_binary(zeros, ones) == 0.0);
  CHECK(f1_binary(zeros, zeros) == 0.0);

  const std::vector<double> a = {0.1, 0.5, 0.7, 2.0}, b = {1, 2, 3, 40};
  CHECK(spearman(a, b) == doctest::Approx(1.0));
  const std::vector<double> rev = {40, 3, 2, 1};
  CHECK(spearman(a, rev) == doctest::Approx(-1.0));
  const std::vector<double> flat = {1, 1, 1, 1};
  CHECK(spearman(a, flat) == 0.0);
  const std::vector<double> tied = {1, 1, 2, 3};
  CHECK(spearman(tied, b) == doctest::Approx(std::sqrt(0.9)));

  const std::vector<int> none;
  CHECK_THROWS_AS(accuracy(none, none), ValidationError);
  CHECK_THROWS_AS(accuracy(p, zeros), ValidationError);
  CHECK(parse_metric("f1") == Metric::f1);
  CHECK_THROWS_AS(parse_metric("bleu"), ValidationError);

  Model m = adapter_model();
  CHECK_THROWS_AS(evaluate(m, m.head("t"), {}), ValidationError);
  const ToyTask task = small_task("majority-token");
  const double s = evaluate(m, m.head("t"), task.dev, Metric::spearman);
  CHECK(std::abs(s) <= 1.0);
}

TEST_CASE("toy tasks") {
  for (const auto& name : toy_task_names()) {
    CAPTURE(name);
    const ToyTask a = generate_toy_task(name, 3);
    const ToyTask b = generate_toy_task(name, 3);
    REQUIRE(a.train.size() == 2000);
    REQUIRE(a.dev.size() == 500);
    bool equal = true;
    for (std::size_t i = 0; i < a.train.size(); ++i)
      equal &= a.train[i].token_ids == b.train[i].token_ids && a.train[i].label == b.train[i].label;
    CHECK(equal);
    CHECK(generate_toy_task(name, 4).train[0].token_ids != a.train[0].token_ids);

    std::size_t positives = 0;
    std::set<std::vector<std::size_t>> train_ids;
    for (const auto& ex : a.train) {
      positives += ex.label;
      train_ids.insert(ex.token_ids);
      CHECK(ex.token_ids.size() == 16);
      CHECK(ex.token_ids[0] == kClsToken);
      CHECK(ex.label == label_for(name, ex.token_ids));
    }
    const double share = static_cast<double>(positives) / a.train.size();
    CHECK(share > 0.4);
    CHECK(share < 0.6);
    std::size_t overlap = 0;
    for (const auto& ex : a.dev) overlap += train_ids.count(ex.token_ids);
    CHECK(overlap == 0);
  }
  CHECK_THROWS_AS(generate_toy_task("sentiment", 0), ValidationError);
}

TEST_CASE("toy task labels follow their rules") {
  std::vector<std::size_t> ids = {0, 7, 8, 9, 10};
  CHECK(label_for("parity-of-token", ids) == 0);
  ids[2] = 3;
  CHECK(label_for("parity-of-token", ids) == 1);
  ids[4] = 3;
  CHECK(label_for("parity-of-token", ids) == 0);

  CHECK(label_for("majority-token", {0, 1, 1, 2, 9}) == 1);
  CHECK(label_for("majority-token", {0, 1, 2, 2, 9}) == 0);
  CHECK(label_for("copy-first-label", {0, 5, 4, 4}) == 1);
  CHECK(label_for("copy-first-label", {0, 4, 5, 5}) == 0);
}
