#pragma once

#include <string>
#include <vector>

#include "fhsc/linalg.hpp"

namespace fhsc {

// One survey record: binary outcome and design weight for a household in an area.
struct MicroRecord {
  std::string area_id;
  double y = 0.0;
  double w = 0.0;
};

struct Microdata {
  std::vector<MicroRecord> records;
};

// Per-area direct estimates in canonical (sorted area_id) order. smoothed_var
// is empty until a GVF fit has been applied.
struct DirectEstimates {
  std::vector<std::string> area_id;
  Vector y;             // Hajek proportion, in [0,1]
  Vector raw_var;       // design variance estimate
  std::vector<int> n;   // sample size
  Vector nhat;          // estimated population size (sum of weights)
  Vector smoothed_var;  // D_i after GVF smoothing (may be empty)

  int num_areas() const { return static_cast<int>(area_id.size()); }
};

enum class GvfVariant { GVF1, GVF2 };

std::string to_string(GvfVariant v);
GvfVariant gvf_variant_from_string(const std::string& s);

// Log-linear variance smoothing model. GVF1 regresses log(raw_var) on
// (1, y, sqrt(n), y*sqrt(n)); GVF2 drops the interaction.
struct GvfModel {
  GvfVariant variant = GvfVariant::GVF2;
  Vector coefficients;
  double residual_mse = 0.0;
};

// Hajek direct estimator: y_i = sum(w y)/sum(w), var = sum(w(w-1)(y-y_i)^2)/nhat^2.
DirectEstimates hajek_direct(const Microdata& micro);

// Design matrix for a GVF variant (rows follow `direct` order).
Matrix gvf_design(const DirectEstimates& direct, GvfVariant variant);

// OLS of log(raw_var) on the variant covariates. Rejects areas with
// raw_var <= 0 (use floor_raw_variances first if flooring is wanted).
GvfModel fit_gvf(const DirectEstimates& direct, GvfVariant variant);

// exp(fitted log-variance) per area; strictly positive.
Vector smooth_variances(const GvfModel& model, const DirectEstimates& direct);

// Floors raw_var at eps (warning per floored area); returns number floored.
int floor_raw_variances(DirectEstimates& direct, double eps = 1e-8);

// Of the two GVF variants, the one with smaller residual_mse.
GvfModel select_gvf(const DirectEstimates& direct);

}  // namespace fhsc
