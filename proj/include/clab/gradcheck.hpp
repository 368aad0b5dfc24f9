#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "clab/contrastive.hpp"
#include "clab/encoder.hpp"

namespace clab {

// Max relative error between backward() and central differences of the
// scalar L = sum(probe .* forward(inputs)) over every weight and bias.
double encoder_grad_check(const EncoderParams& params, const Eigen::MatrixXd& inputs,
                          const Eigen::MatrixXd& probe, double h = 1e-5);

struct GradcheckRow {
  std::string check;
  std::size_t trials = 0;
  double max_rel_error = 0.0;
};

// Random unit vector of the given dimension.
EmbeddingVector random_unit(std::size_t dim, RngStream& rng);

// Random instances of every loss plus small encoders. Dims <= 16, queue <= 32.
std::vector<GradcheckRow> run_gradcheck(std::size_t trials, std::uint64_t seed);

}  // namespace clab
