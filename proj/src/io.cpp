#include "fhsc/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "fhsc/error.hpp"

namespace fhsc {

namespace {

std::vector<std::string> split_csv_line(const std::string& line, const std::string& path) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  if (quoted) throw_io("unterminated quote in " + path);
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, const std::string& context) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw_validation("cannot parse number '" + s + "' in " + context);
  }
}

int parse_int(const std::string& s, const std::string& context) {
  try {
    size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw_validation("cannot parse integer '" + s + "' in " + context);
  }
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out += "\"";
  return out;
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

int CsvTable::require_column(const std::string& name, const std::string& path) const {
  const int idx = column(name);
  if (idx < 0) throw_validation("missing column '" + name + "' in " + path);
  return idx;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw_io("empty file '" + path + "'");
  table.header = split_csv_line(line, path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line, path);
    if (fields.size() != table.header.size())
      throw_validation("row with " + std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(table.header.size()) + " in " + path);
    table.rows.push_back(std::move(fields));
  }
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw_io("cannot write '" + path + "'");
  for (size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << quote_if_needed(header[i]);
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << quote_if_needed(row[i]);
    out << "\n";
  }
  if (!out) throw_io("write failed for '" + path + "'");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

Microdata read_microdata(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int ci = t.require_column("area_id", path);
  const int cy = t.require_column("y", path);
  const int cw = t.require_column("w", path);
  Microdata micro;
  micro.records.reserve(t.rows.size());
  for (const auto& row : t.rows)
    micro.records.push_back({row[ci], parse_double(row[cy], path), parse_double(row[cw], path)});
  return micro;
}

DirectEstimates read_direct_estimates(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int ci = t.require_column("area_id", path);
  const int cy = t.require_column("y", path);
  const int cv = t.require_column("raw_var", path);
  const int cn = t.require_column("n", path);
  const int ch = t.require_column("nhat", path);
  const int cd = t.column("D");

  std::vector<int> order(t.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return t.rows[a][ci] < t.rows[b][ci]; });

  DirectEstimates d;
  const int m = static_cast<int>(t.rows.size());
  d.y.resize(m);
  d.raw_var.resize(m);
  d.n.resize(m);
  d.nhat.resize(m);
  if (cd >= 0) d.smoothed_var.resize(m);
  for (int i = 0; i < m; ++i) {
    const auto& row = t.rows[order[i]];
    if (!d.area_id.empty() && row[ci] == d.area_id.back())
      throw_validation("duplicate area_id '" + row[ci] + "' in " + path);
    d.area_id.push_back(row[ci]);
    d.y[i] = parse_double(row[cy], path);
    d.raw_var[i] = parse_double(row[cv], path);
    d.n[i] = parse_int(row[cn], path);
    d.nhat[i] = parse_double(row[ch], path);
    if (cd >= 0) d.smoothed_var[i] = parse_double(row[cd], path);
  }
  return d;
}

void write_direct_estimates(const std::string& path, const DirectEstimates& direct) {
  std::vector<std::vector<std::string>> rows;
  const bool has_d = direct.smoothed_var.size() == direct.num_areas();
  for (int i = 0; i < direct.num_areas(); ++i) {
    std::vector<std::string> row = {direct.area_id[i], format_double(direct.y[i]),
                                    format_double(direct.raw_var[i]), std::to_string(direct.n[i]),
                                    format_double(direct.nhat[i])};
    row.push_back(has_d ? format_double(direct.smoothed_var[i]) : "");
    rows.push_back(std::move(row));
  }
  write_csv(path, {"area_id", "y", "raw_var", "n", "nhat", "D"}, rows);
}

CovariateTable read_covariates(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int ci = t.require_column("area_id", path);
  CovariateTable cov;
  for (size_t j = 0; j < t.header.size(); ++j)
    if (static_cast<int>(j) != ci) cov.names.push_back(t.header[j]);
  if (cov.names.empty()) throw_validation("no covariate columns in " + path);

  std::vector<int> order(t.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return t.rows[a][ci] < t.rows[b][ci]; });

  const int m = static_cast<int>(t.rows.size());
  cov.values.resize(m, static_cast<int>(cov.names.size()));
  for (int i = 0; i < m; ++i) {
    const auto& row = t.rows[order[i]];
    if (!cov.area_id.empty() && row[ci] == cov.area_id.back())
      throw_validation("duplicate area_id '" + row[ci] + "' in " + path);
    cov.area_id.push_back(row[ci]);
    int k = 0;
    for (size_t j = 0; j < t.header.size(); ++j)
      if (static_cast<int>(j) != ci) cov.values(i, k++) = parse_double(row[j], path);
  }
  return cov;
}

ClusteringFile read_clustering(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int ci = t.require_column("area_id", path);
  const int cc = t.require_column("cluster", path);

  std::vector<int> order(t.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return t.rows[a][ci] < t.rows[b][ci]; });

  ClusteringFile f;
  std::vector<int> labels;
  for (int idx : order) {
    const auto& row = t.rows[idx];
    if (!f.area_id.empty() && row[ci] == f.area_id.back())
      throw_validation("duplicate area_id '" + row[ci] + "' in " + path);
    f.area_id.push_back(row[ci]);
    labels.push_back(parse_int(row[cc], path));
  }
  f.clustering = Clustering::from_assignment(labels);
  f.clustering.validate();
  return f;
}

void write_clustering(const std::string& path, const std::vector<std::string>& area_id,
                      const Clustering& clustering) {
  std::vector<std::vector<std::string>> rows;
  for (size_t i = 0; i < area_id.size(); ++i)
    rows.push_back({area_id[i], std::to_string(clustering.assignment[i])});
  write_csv(path, {"area_id", "cluster"}, rows);
}

WeightTable read_weights(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int ci = t.require_column("area_id", path);
  const int cw = t.require_column("w", path);

  std::vector<int> order(t.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return t.rows[a][ci] < t.rows[b][ci]; });

  WeightTable w;
  w.w.resize(static_cast<int>(t.rows.size()));
  int i = 0;
  for (int idx : order) {
    const auto& row = t.rows[idx];
    if (!w.area_id.empty() && row[ci] == w.area_id.back())
      throw_validation("duplicate area_id '" + row[ci] + "' in " + path);
    w.area_id.push_back(row[ci]);
    w.w[i++] = parse_double(row[cw], path);
  }
  return w;
}

std::vector<int> join_permutation(const std::vector<std::string>& ids,
                                  const std::vector<std::string>& target) {
  if (ids.size() != target.size())
    throw_validation("area sets differ in size (" + std::to_string(ids.size()) + " vs " +
                     std::to_string(target.size()) + ")");
  std::map<std::string, int> pos;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (!pos.emplace(ids[i], static_cast<int>(i)).second)
      throw_validation("duplicate area_id '" + ids[i] + "'");
  }
  std::vector<int> perm(target.size());
  for (size_t i = 0; i < target.size(); ++i) {
    auto it = pos.find(target[i]);
    if (it == pos.end()) throw_validation("area_id '" + target[i] + "' missing from join");
    perm[i] = it->second;
  }
  return perm;
}

}  // namespace fhsc
