#pragma once

#include "fhsc/linalg.hpp"

namespace fhsc {

// Split-Rhat for one scalar: `series` holds draws chain-major
// (chain * per_chain + d); each chain is split in half before the
// between/within comparison.
double split_rhat(const Vector& series, int chains, int per_chain);

}  // namespace fhsc
