#pragma once

#include <string>
#include <vector>

#include "fhsc/rng.hpp"
#include "fhsc/sampler.hpp"

namespace fhsc {

// DIC from quadratic-form deviances:
//   (2/N) sum_l sum_j (y_j - theta_j^(l))^2 / D_j - sum_j (y_j - hat_theta_j)^2 / D_j.
// Pass projected draws plus the benchmarked RB estimate for the benchmarked
// score, raw draws plus the RB estimate otherwise.
double dic(const Matrix& draws, const Vector& y, const Vector& d, const Vector& point_estimate);

// One posterior predictive draw: y~_j ~ N(theta_j, D_j) independently.
Vector posterior_predictive_draw(const Vector& theta_draw, const Vector& d, Rng& rng);

enum class EpdMeasure { AAD, ASD };

// Expected predictive deviance: average over stored draws of
// sum_j |y_j - y~_j| (AAD) or sum_j (y_j - y~_j)^2 (ASD), one fresh predictive
// draw per stored draw.
double epd(const Matrix& draws, const Vector& y, const Vector& d, EpdMeasure measure, Rng& rng);

struct SelectionRow {
  std::string variant;
  bool benchmarked = false;
  double dic = 0.0;
  double epd_asd = 0.0;
  double epd_aad = 0.0;
};

}  // namespace fhsc
