#pragma once

#include <functional>

#include "adaptkit/tape.hpp"

namespace adaptkit {

// Scalar-valued function built on a tape from one input variable.
using TapeFunction = std::function<Var(Tape&, Var)>;

// Max over coordinates of |g_ad − g_fd| / max(1, |g_ad|, |g_fd|), where g_fd
// is the central difference (f(x+h) − f(x−h)) / 2h.
//
// Throws ValidationError for h outside (0, 1e-2] and when two evaluations of
// f at x disagree bitwise.
double finite_difference_check(const TapeFunction& f, const Tensor& x, double h);

}  // namespace adaptkit
