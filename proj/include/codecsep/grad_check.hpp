#pragma once

#include <functional>
#include <string>
#include <vector>

#include "codecsep/autodiff.hpp"
#include "codecsep/rng.hpp"

namespace codecsep::ad {

// Central-finite-difference verification of the tape's backward pass. The
// whole check (analytic backward and the FD probes) runs at double
// precision; models train at f32.
struct GradCheckReport {
  std::string op;
  bool pass = false;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::string detail;  // worst element location
};

struct GradCheckCase {
  // Draws the differentiable inputs (shapes may override defaults).
  std::function<std::vector<TensorT<double>>(Rng&, const std::vector<Shape>&)> make_inputs;
  // Builds a scalar loss from bound leaves; extra constants (kernel
  // strides, loss weights) must be drawn from the rng so rebuilds agree.
  std::function<TapeT<double>::Id(TapeT<double>&, const std::vector<TapeT<double>::Id>&,
                                  Rng&)>
      build;
};

// Named cases for every differentiable op plus the composite blocks
// (attention, transformer_block, si_sdr_loss). Tests may register extra
// cases (e.g. deliberately corrupted backwards as negative controls).
void register_grad_check(const std::string& name, GradCheckCase c);
std::vector<std::string> grad_check_ops();

GradCheckReport grad_check(const std::string& op_name, const std::vector<Shape>& shapes,
                           double tolerance, uint64_t seed = 0, double fd_step = 1e-4);

}  // namespace codecsep::ad
