#pragma once

#include <unistd.h>

#include <atomic>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "adaptkit/parameter.hpp"
#include "adaptkit/rng.hpp"
#include "adaptkit/tensor.hpp"

namespace testing {

// Directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("adaptkit-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline adaptkit::Tensor random_tensor(adaptkit::Shape shape, adaptkit::Rng& rng, double scale = 1.0) {
  adaptkit::Tensor t(std::move(shape));
  for (auto& v : t.data()) v = scale * (2.0 * rng.uniform() - 1.0);
  return t;
}

// Max over every coordinate of `params` of |g_ad − g_fd| / max(1, |g_ad|, |g_fd|)
// for the scalar built by `loss`, with central differences of step h.
inline double parameter_gradient_error(
    const std::function<adaptkit::Var(adaptkit::Binder&)>& loss,
    const std::vector<adaptkit::Parameter*>& params, double h = 1e-6) {
  using namespace adaptkit;
  std::vector<bool> saved;
  for (Parameter* p : params) {
    saved.push_back(p->value.requires_grad());
    p->value.set_requires_grad(true);
  }
  std::vector<Tensor> analytic;
  {
    Tape tape;
    Binder bind(tape);
    const Var l = loss(bind);
    const Gradients g = tape.backward(l);
    for (Parameter* p : params) {
      Tensor grad(p->value.shape());
      for (const auto& [q, v] : bind.bound())
        if (q == p && g.get(v)) grad = *g.get(v);
      analytic.push_back(grad);
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.set_requires_grad(saved[i]);

  auto eval = [&] {
    Tape tape = Tape::no_grad();
    Binder bind(tape);
    return tape.value(loss(bind))[0];
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& x = params[i]->value;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double orig = x[k];
      x[k] = orig + h;
      const double up = eval();
      x[k] = orig - h;
      const double down = eval();
      x[k] = orig;
      const double fd = (up - down) / (2 * h);
      const double ad = analytic[i][k];
      worst = std::max(worst, std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)}));
    }
  }
  return worst;
}

}  // namespace testing
