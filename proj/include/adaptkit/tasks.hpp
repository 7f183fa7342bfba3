#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace adaptkit {

struct Example {
  std::vector<std::size_t> token_ids;  // position 0 is the [CLS] token
  int label = 0;
};

// Synthetic sequence-classification task standing in for a downstream dataset.
struct ToyTask {
  std::string name;
  std::uint64_t seed = 0;
  std::size_t seq_len = 16;
  std::string label_rule;
  std::size_t num_classes = 2;
  std::vector<Example> train;
  std::vector<Example> dev;  // disjoint from train
};

inline constexpr std::size_t kClsToken = 0;

std::vector<std::string> toy_task_names();

// Deterministic in (name, seed). Known names:
//   majority-token     label = count(token 1) > count(token 2)
//   parity-of-token    label = count(token 3) is odd; token 3 occurs at most once
//   copy-first-label   first body token is 4 (label 0) or 5 (label 1); fillers start at 6
ToyTask generate_toy_task(std::string_view name, std::uint64_t seed, std::size_t seq_len = 16,
                          std::size_t vocab_size = 128, std::size_t train_size = 2000,
                          std::size_t dev_size = 500);

// Recomputes the label from the token ids using the task's rule.
int label_for(std::string_view task_name, const std::vector<std::size_t>& token_ids,
              std::size_t vocab_size = 128);

}  // namespace adaptkit
