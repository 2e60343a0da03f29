#pragma once

#include <string>
#include <vector>

#include "fhsc/cluster.hpp"
#include "fhsc/survey.hpp"

namespace fhsc {

// Minimal CSV layer: UTF-8, comma-delimited, header row required, double
// quotes for embedded commas/quotes.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
  int require_column(const std::string& name, const std::string& path) const;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::string format_double(double v);

// Schema readers/writers. Readers sort by area_id (canonical order); joins
// check that id sets match exactly.

Microdata read_microdata(const std::string& path);

DirectEstimates read_direct_estimates(const std::string& path);
void write_direct_estimates(const std::string& path, const DirectEstimates& direct);

struct CovariateTable {
  std::vector<std::string> area_id;
  std::vector<std::string> names;
  Matrix values;
};
CovariateTable read_covariates(const std::string& path);

struct ClusteringFile {
  std::vector<std::string> area_id;
  Clustering clustering;
};
ClusteringFile read_clustering(const std::string& path);
void write_clustering(const std::string& path, const std::vector<std::string>& area_id,
                      const Clustering& clustering);

// Scalar benchmark weights: columns area_id,w.
struct WeightTable {
  std::vector<std::string> area_id;
  Vector w;
};
WeightTable read_weights(const std::string& path);

// Reorders `values` (indexed like `ids`) to match `target` ids; throws when
// the id sets differ.
std::vector<int> join_permutation(const std::vector<std::string>& ids,
                                  const std::vector<std::string>& target);

}  // namespace fhsc
