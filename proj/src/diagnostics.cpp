#include "fhsc/diagnostics.hpp"

#include <cmath>
#include <vector>

#include "fhsc/error.hpp"

namespace fhsc {

double split_rhat(const Vector& series, int chains, int per_chain) {
  if (series.size() != static_cast<long>(chains) * per_chain)
    throw_validation("split_rhat: series length mismatch");
  const int half = per_chain / 2;
  if (half < 2) throw_validation("split_rhat: chains too short to split");

  std::vector<Vector> seqs;
  for (int c = 0; c < chains; ++c) {
    seqs.push_back(series.segment(c * per_chain, half));
    seqs.push_back(series.segment(c * per_chain + half, half));
  }
  const int mseq = static_cast<int>(seqs.size());
  const int n = half;

  Vector means(mseq), vars(mseq);
  for (int s = 0; s < mseq; ++s) {
    means[s] = seqs[s].mean();
    vars[s] = (seqs[s].array() - means[s]).square().sum() / (n - 1);
  }
  const double w = vars.mean();
  const double grand = means.mean();
  const double b = n * (means.array() - grand).square().sum() / (mseq - 1);
  if (w <= 0.0) return 1.0;  // constant chains
  const double var_hat = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_hat / w);
}

}  // namespace fhsc
