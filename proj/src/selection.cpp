#include "fhsc/selection.hpp"

#include <cmath>

#include "fhsc/error.hpp"

namespace fhsc {

double dic(const Matrix& draws, const Vector& y, const Vector& d, const Vector& point_estimate) {
  if ((d.array() <= 0.0).any()) throw_validation("dic: D must be positive");
  const int total = static_cast<int>(draws.cols());
  if (total == 0) throw_validation("dic: no draws");
  const Vector dinv = d.cwiseInverse();
  double avg_dev = 0.0;
  for (int t = 0; t < total; ++t)
    avg_dev += (y - draws.col(t)).array().square().matrix().dot(dinv);
  avg_dev /= total;
  const double at_point = (y - point_estimate).array().square().matrix().dot(dinv);
  return 2.0 * avg_dev - at_point;
}

Vector posterior_predictive_draw(const Vector& theta_draw, const Vector& d, Rng& rng) {
  if ((d.array() < 0.0).any()) throw_validation("posterior predictive needs D >= 0");
  Vector out(theta_draw.size());
  for (int j = 0; j < theta_draw.size(); ++j)
    out[j] = theta_draw[j] + std::sqrt(d[j]) * rng.normal();
  return out;
}

double epd(const Matrix& draws, const Vector& y, const Vector& d, EpdMeasure measure, Rng& rng) {
  const int total = static_cast<int>(draws.cols());
  if (total == 0) throw_validation("epd: no draws");
  double acc = 0.0;
  for (int t = 0; t < total; ++t) {
    const Vector ytilde = posterior_predictive_draw(draws.col(t), d, rng);
    if (measure == EpdMeasure::AAD)
      acc += (y - ytilde).cwiseAbs().sum();
    else
      acc += (y - ytilde).squaredNorm();
  }
  return acc / total;
}

}  // namespace fhsc
