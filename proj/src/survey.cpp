#include "fhsc/survey.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fhsc/error.hpp"

namespace fhsc {

std::string to_string(GvfVariant v) { return v == GvfVariant::GVF1 ? "gvf1" : "gvf2"; }

GvfVariant gvf_variant_from_string(const std::string& s) {
  if (s == "gvf1" || s == "GVF1" || s == "1") return GvfVariant::GVF1;
  if (s == "gvf2" || s == "GVF2" || s == "2") return GvfVariant::GVF2;
  throw_validation("unknown GVF variant '" + s + "' (expected gvf1 or gvf2)");
}

DirectEstimates hajek_direct(const Microdata& micro) {
  if (micro.records.empty()) throw_validation("hajek_direct: no records");
  std::map<std::string, std::vector<const MicroRecord*>> groups;
  for (const auto& r : micro.records) {
    if (!(r.w > 0.0)) throw_validation("hajek_direct: nonpositive weight in area '" + r.area_id + "'");
    if (r.y != 0.0 && r.y != 1.0)
      throw_validation("hajek_direct: y must be 0 or 1 in area '" + r.area_id + "'");
    groups[r.area_id].push_back(&r);
  }

  DirectEstimates out;
  const int m = static_cast<int>(groups.size());
  out.area_id.reserve(m);
  out.y.resize(m);
  out.raw_var.resize(m);
  out.n.resize(m);
  out.nhat.resize(m);

  int i = 0;
  for (const auto& [id, recs] : groups) {
    if (recs.empty()) throw_validation("hajek_direct: area '" + id + "' has no records");
    double nhat = 0.0, num = 0.0;
    for (const auto* r : recs) {
      nhat += r->w;
      num += r->w * r->y;
    }
    const double yi = num / nhat;
    double var = 0.0;
    for (const auto* r : recs) var += r->w * (r->w - 1.0) * (r->y - yi) * (r->y - yi);
    var /= nhat * nhat;
    out.area_id.push_back(id);
    out.y[i] = yi;
    out.raw_var[i] = var;
    out.n[i] = static_cast<int>(recs.size());
    out.nhat[i] = nhat;
    ++i;
  }
  return out;
}

Matrix gvf_design(const DirectEstimates& direct, GvfVariant variant) {
  const int m = direct.num_areas();
  const int p = variant == GvfVariant::GVF1 ? 4 : 3;
  Matrix x(m, p);
  for (int i = 0; i < m; ++i) {
    const double sqn = std::sqrt(static_cast<double>(direct.n[i]));
    x(i, 0) = 1.0;
    x(i, 1) = direct.y[i];
    x(i, 2) = sqn;
    if (p == 4) x(i, 3) = direct.y[i] * sqn;
  }
  return x;
}

GvfModel fit_gvf(const DirectEstimates& direct, GvfVariant variant) {
  const int m = direct.num_areas();
  for (int i = 0; i < m; ++i) {
    if (!(direct.raw_var[i] > 0.0))
      throw_validation("fit_gvf: raw variance is not positive for area '" + direct.area_id[i] +
                       "' (floor it first or drop the area)");
  }
  const Matrix x = gvf_design(direct, variant);
  if (m <= x.cols())
    throw_validation("fit_gvf: need more areas than coefficients (m = " + std::to_string(m) + ")");
  const Vector logv = direct.raw_var.array().log();
  GvfModel model;
  model.variant = variant;
  model.coefficients = x.colPivHouseholderQr().solve(logv);
  const Vector resid = logv - x * model.coefficients;
  model.residual_mse = resid.squaredNorm() / m;
  return model;
}

Vector smooth_variances(const GvfModel& model, const DirectEstimates& direct) {
  const Matrix x = gvf_design(direct, model.variant);
  if (x.cols() != model.coefficients.size())
    throw_validation("smooth_variances: covariate/coefficient mismatch");
  return (x * model.coefficients).array().exp();
}

int floor_raw_variances(DirectEstimates& direct, double eps) {
  if (!(eps > 0.0)) throw_validation("variance floor must be positive");
  int floored = 0;
  for (int i = 0; i < direct.num_areas(); ++i) {
    if (direct.raw_var[i] < eps) {
      log_warning("raw variance floored at " + std::to_string(eps) + " for area '" +
                  direct.area_id[i] + "'");
      direct.raw_var[i] = eps;
      ++floored;
    }
  }
  return floored;
}

GvfModel select_gvf(const DirectEstimates& direct) {
  const GvfModel m1 = fit_gvf(direct, GvfVariant::GVF1);
  const GvfModel m2 = fit_gvf(direct, GvfVariant::GVF2);
  return m2.residual_mse <= m1.residual_mse ? m2 : m1;
}

}  // namespace fhsc
