#include "adaptkit/tasks.hpp"

#include <algorithm>
#include <set>

#include "adaptkit/errors.hpp"
#include "adaptkit/rng.hpp"

namespace adaptkit {
namespace {

constexpr std::size_t kTokenA = 1;
constexpr std::size_t kTokenB = 2;
constexpr std::size_t kParityToken = 3;
constexpr std::size_t kLabelToken0 = 4;
constexpr std::size_t kLabelToken1 = 5;
constexpr std::size_t kFirstFiller = 6;

std::size_t filler(Rng& rng, std::size_t vocab) {
  return kFirstFiller + rng.below(vocab - kFirstFiller);
}

void shuffle_body(std::vector<std::size_t>& ids, Rng& rng) {
  // Fisher-Yates over positions 1..n-1; position 0 stays [CLS].
  for (std::size_t i = ids.size() - 1; i > 1; --i) {
    const std::size_t j = 1 + rng.below(i);
    std::swap(ids[i], ids[j]);
  }
}

std::vector<std::size_t> sample(std::string_view name, Rng& rng, std::size_t seq_len,
                                std::size_t vocab) {
  std::vector<std::size_t> ids(seq_len, kClsToken);
  const std::size_t body = seq_len - 1;
  for (std::size_t i = 1; i < seq_len; ++i) ids[i] = filler(rng, vocab);
  if (name == "majority-token") {
    const std::size_t cap = std::min<std::size_t>(5, body / 2);
    std::size_t a, b;
    do {
      a = rng.below(cap + 1);
      b = rng.below(cap + 1);
    } while (a == b);
    for (std::size_t i = 0; i < a; ++i) ids[1 + i] = kTokenA;
    for (std::size_t i = 0; i < b; ++i) ids[1 + a + i] = kTokenB;
    shuffle_body(ids, rng);
  } else if (name == "parity-of-token") {
    // The designated token occurs at most once, so the count's parity is its
    // presence. Larger counts are not learnable through a frozen random encoder.
    if (rng.below(2)) ids[1] = kParityToken;
    shuffle_body(ids, rng);
  }
  if (name == "copy-first-label") ids[1] = rng.below(2) ? kLabelToken1 : kLabelToken0;
  return ids;
}

}  // namespace

std::vector<std::string> toy_task_names() {
  return {"majority-token", "parity-of-token", "copy-first-label"};
}

int label_for(std::string_view name, const std::vector<std::size_t>& ids, std::size_t) {
  if (name == "majority-token") {
    const auto a = std::count(ids.begin() + 1, ids.end(), kTokenA);
    const auto b = std::count(ids.begin() + 1, ids.end(), kTokenB);
    return a > b ? 1 : 0;
  }
  if (name == "parity-of-token")
    return static_cast<int>(std::count(ids.begin() + 1, ids.end(), kParityToken) % 2);
  if (name == "copy-first-label") return ids.size() > 1 && ids[1] == kLabelToken1 ? 1 : 0;
  throw ValidationError("unknown toy task '" + std::string(name) +
                        "' (expected majority-token, parity-of-token or copy-first-label)");
}

ToyTask generate_toy_task(std::string_view name, std::uint64_t seed, std::size_t seq_len,
                          std::size_t vocab_size, std::size_t train_size, std::size_t dev_size) {
  const auto names = toy_task_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw ValidationError("unknown toy task '" + std::string(name) +
                          "' (expected " + join(names, ", ") + ")");
  if (seq_len < 4) throw ValidationError("toy tasks need seq_len >= 4");
  if (vocab_size < kFirstFiller + 4) throw ValidationError("toy tasks need vocab_size >= 10");

  ToyTask task;
  task.name = std::string(name);
  task.seed = seed;
  task.seq_len = seq_len;
  task.num_classes = 2;
  if (name == "majority-token") task.label_rule = "count(1) > count(2)";
  else if (name == "parity-of-token") task.label_rule = "count(3) mod 2";
  else task.label_rule = "ids[1] == 5";

  Rng rng(seed);
  std::set<std::vector<std::size_t>> seen;
  auto fill = [&](std::vector<Example>& out, std::size_t n) {
    std::size_t attempts = 0;
    while (out.size() < n) {
      if (++attempts > 100 * n) throw ValidationError("toy task generator could not find enough unique sequences");
      auto ids = sample(name, rng, seq_len, vocab_size);
      if (!seen.insert(ids).second) continue;
      const int label = label_for(name, ids, vocab_size);
      out.push_back({std::move(ids), label});
    }
  };
  fill(task.train, train_size);
  fill(task.dev, dev_size);
  return task;
}

}  // namespace adaptkit
