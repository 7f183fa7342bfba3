#include "adaptkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "adaptkit/errors.hpp"

namespace adaptkit {
namespace {

double evaluate(const TapeFunction& f, const Tensor& x) {
  Tape tape = Tape::no_grad();
  Var out = f(tape, tape.constant(x));
  const Tensor& v = tape.value(out);
  if (v.size() != 1) throw ShapeError("finite_difference_check: f must return a scalar");
  return v[0];
}

}  // namespace

double finite_difference_check(const TapeFunction& f, const Tensor& x, double h) {
  if (!(h > 0.0 && h <= 1e-2))
    throw ValidationError("finite_difference_check: step must lie in (0, 1e-2]");

  const double first = evaluate(f, x);
  const double second = evaluate(f, x);
  if (std::memcmp(&first, &second, sizeof(double)) != 0)
    throw ValidationError("finite_difference_check: f is not deterministic");

  Tensor input = x;
  input.set_requires_grad(true);
  Tape tape;
  Var in = tape.leaf(input);
  Var out = f(tape, in);
  Tensor analytic(x.shape(), 0.0);
  if (tape.requires_grad(out)) {
    Gradients grads = tape.backward(out);
    if (const Tensor* g = grads.get(in)) analytic = *g;
  }

  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double plus = evaluate(f, probe);
    probe[i] = orig - h;
    const double minus = evaluate(f, probe);
    probe[i] = orig;
    const double numeric = (plus - minus) / (2.0 * h);
    const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace adaptkit
