#include "uvhl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "uvhl/error.hpp"
#include "uvhl/random.hpp"

namespace uvhl {

std::string_view label_name(Label l) {
  switch (l) {
    case Label::kCovid:
      return "COVID";
    case Label::kCap:
      return "CAP";
    case Label::kUnlabeled:
      return "UNKNOWN";
  }
  return "UNKNOWN";
}

std::optional<Label> parse_label(std::string_view s) {
  if (s == "COVID") return Label::kCovid;
  if (s == "CAP") return Label::kCap;
  if (s == "UNKNOWN") return Label::kUnlabeled;
  return std::nullopt;
}

void Dataset::validate() const {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  if (n < 1) throw IntegrityError("dataset has no rows");
  if (static_cast<Eigen::Index>(ids.size()) != n || static_cast<Eigen::Index>(labels.size()) != n)
    throw ShapeError("ids/labels length does not match feature rows");
  if (static_cast<Eigen::Index>(columns.size()) != d)
    throw ShapeError("column names do not match feature columns");
  if (!features.allFinite()) throw IntegrityError("non-finite feature value");
  Eigen::Index next = 0;
  for (const auto& g : groups) {
    if (g.begin != next || g.size < 1) throw IntegrityError("group '" + g.name + "' is not contiguous");
    next = g.end();
  }
  if (next != d) throw IntegrityError("groups do not cover all feature columns");
}

const ColumnRange& Dataset::group(std::string_view name) const {
  for (const auto& g : groups)
    if (g.name == name) return g;
  throw ArgumentError("unknown feature group '" + std::string(name) + "'");
}

bool Dataset::has_group(std::string_view name) const {
  return std::any_of(groups.begin(), groups.end(), [&](const auto& g) { return g.name == name; });
}

std::vector<Eigen::Index> Dataset::labeled_indices() const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (is_labeled(labels[i])) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

std::vector<Eigen::Index> Dataset::unlabeled_indices() const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (!is_labeled(labels[i])) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

Eigen::Index Dataset::count(Label l) const {
  return std::count(labels.begin(), labels.end(), l);
}

std::string Schema::group_of(std::string_view column) const {
  for (const auto& [prefix, group] : prefixes)
    if (column.starts_with(prefix)) return group;
  return fallback_group;
}

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

Dataset parse_dataset(std::string_view text, const Schema& schema) {
  std::vector<std::string_view> lines;
  {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      std::string_view line = text.substr(pos, nl - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      pos = nl + 1;
    }
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw SchemaError("missing header row");

  std::string_view header_line = lines.front();
  if (header_line.starts_with("\xEF\xBB\xBF")) header_line.remove_prefix(3);
  const auto header = split_csv_line(header_line);

  long id_col = -1;
  long label_col = -1;
  std::vector<long> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name(trim(header[c]));
    if (name == schema.id_column) {
      id_col = static_cast<long>(c);
    } else if (name == schema.label_column) {
      label_col = static_cast<long>(c);
    } else {
      feature_cols.push_back(static_cast<long>(c));
    }
  }
  if (label_col < 0) throw SchemaError("missing '" + schema.label_column + "' column");
  if (id_col < 0) throw SchemaError("missing '" + schema.id_column + "' column");
  if (feature_cols.empty()) throw SchemaError("no feature columns");

  // Group columns contiguously, groups ordered by first appearance.
  std::vector<std::string> group_order;
  std::map<std::string, std::vector<long>> by_group;
  for (long c : feature_cols) {
    const std::string g = schema.group_of(trim(header[c]));
    if (!by_group.contains(g)) group_order.push_back(g);
    by_group[g].push_back(c);
  }

  Dataset ds;
  std::vector<long> column_order;
  for (const auto& g : group_order) {
    const auto& cols = by_group[g];
    ds.groups.push_back({g, static_cast<Eigen::Index>(column_order.size()),
                         static_cast<Eigen::Index>(cols.size())});
    for (long c : cols) {
      column_order.push_back(c);
      ds.columns.emplace_back(trim(header[c]));
    }
  }

  const std::size_t n = lines.size() - 1;
  ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(column_order.size()));
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < n; ++r) {
    const long file_row = static_cast<long>(r) + 2;  // 1-based, header is row 1
    const auto cells = split_csv_line(lines[r + 1]);
    if (cells.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " cells, got " +
                           std::to_string(cells.size()),
                       file_row, static_cast<long>(cells.size()));
    std::string id(trim(cells[id_col]));
    if (!seen.insert(id).second) throw IntegrityError("duplicate id '" + id + "'");
    ds.ids.push_back(std::move(id));

    const auto label = parse_label(trim(cells[label_col]));
    if (!label)
      throw ParseError("invalid label '" + cells[label_col] + "'", file_row, label_col + 1);
    ds.labels.push_back(*label);

    for (std::size_t j = 0; j < column_order.size(); ++j) {
      const long c = column_order[j];
      const std::string_view cell = trim(cells[c]);
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size() ||
          !std::isfinite(v))
        throw ParseError("non-numeric feature value '" + std::string(cell) + "' in '" +
                             std::string(trim(header[c])) + "'",
                         file_row, c + 1);
      ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v;
    }
  }
  ds.validate();
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), schema);
}

std::string format_dataset(const Dataset& ds) {
  std::string out = "id,label";
  for (const auto& c : ds.columns) out += "," + c;
  out += '\n';
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    out += ds.ids[i];
    out += ',';
    out += label_name(ds.labels[i]);
    for (Eigen::Index j = 0; j < ds.dim(); ++j) {
      out += ',';
      out += format_double(ds.features(i, j));
    }
    out += '\n';
  }
  return out;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_dataset(ds);
}

Dataset subset_rows(const Dataset& ds, std::span<const Eigen::Index> rows) {
  Dataset out;
  out.columns = ds.columns;
  out.groups = ds.groups;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), ds.dim());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Eigen::Index i = rows[r];
    if (i < 0 || i >= ds.size()) throw ArgumentError("row index out of range");
    out.features.row(static_cast<Eigen::Index>(r)) = ds.features.row(i);
    out.ids.push_back(ds.ids[i]);
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

Dataset select_groups(const Dataset& ds, std::span<const std::string> group_names) {
  if (group_names.empty()) throw ArgumentError("no feature groups selected");
  Dataset out;
  out.ids = ds.ids;
  out.labels = ds.labels;
  Eigen::Index d = 0;
  for (const auto& name : group_names) d += ds.group(name).size;
  out.features.resize(ds.size(), d);
  Eigen::Index next = 0;
  for (const auto& name : group_names) {
    const auto& g = ds.group(name);
    out.features.middleCols(next, g.size) = ds.features.middleCols(g.begin, g.size);
    for (Eigen::Index j = 0; j < g.size; ++j) out.columns.push_back(ds.columns[g.begin + j]);
    out.groups.push_back({g.name, next, g.size});
    next += g.size;
  }
  return out;
}

// ---------------------------------------------------------------------------

NormalizationParams fit_normalization(const Eigen::MatrixXd& features,
                                      std::span<const Eigen::Index> train_rows) {
  if (train_rows.empty()) throw ArgumentError("fit_normalization: empty training rows");
  NormalizationParams p;
  p.min = features.row(train_rows.front()).transpose();
  p.max = p.min;
  for (Eigen::Index i : train_rows) {
    if (i < 0 || i >= features.rows()) throw ArgumentError("fit_normalization: row out of range");
    p.min = p.min.cwiseMin(features.row(i).transpose());
    p.max = p.max.cwiseMax(features.row(i).transpose());
  }
  p.fitted_on = static_cast<Eigen::Index>(train_rows.size());
  return p;
}

NormalizationParams fit_normalization(const Dataset& ds, std::span<const Eigen::Index> train_rows) {
  for (Eigen::Index i : train_rows)
    if (i >= 0 && i < ds.size() && !is_labeled(ds.labels[i]))
      throw ArgumentError("fit_normalization: unlabeled row in training set");
  return fit_normalization(ds.features, train_rows);
}

Eigen::MatrixXd apply_normalization(const NormalizationParams& params,
                                    const Eigen::MatrixXd& features) {
  if (features.cols() != params.min.size())
    throw ShapeError("apply_normalization: expected " + std::to_string(params.min.size()) +
                     " columns, got " + std::to_string(features.cols()));
  Eigen::MatrixXd out(features.rows(), features.cols());
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    const double range = params.max(j) - params.min(j);
    if (range > 0.0) {
      out.col(j) = (features.col(j).array() - params.min(j)) / range;
    } else {
      out.col(j).setZero();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Eigen::Index> FoldPlan::members(int fold) const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

std::vector<Eigen::Index> FoldPlan::complement(int fold) const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != fold && assignments[i] != kUnassigned)
      out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

FoldPlan stratified_kfold(std::span<const Label> labels, int k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("stratified_kfold: k must be at least 2");
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(labels.size(), FoldPlan::kUnassigned);

  Rng rng(seed);
  int offset = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == label_from_class(c)) members.push_back(i);
    if (static_cast<int>(members.size()) < k)
      throw ArgumentError("stratified_kfold: class " + std::string(label_name(label_from_class(c))) +
                          " has " + std::to_string(members.size()) + " labeled cases, fewer than k = " +
                          std::to_string(k));
    std::shuffle(members.begin(), members.end(), rng);
    // Round-robin dealing keeps each fold within one case of n_c / k; the
    // running offset balances total fold sizes across classes.
    for (std::size_t j = 0; j < members.size(); ++j)
      plan.assignments[members[j]] = static_cast<int>((offset + j) % k);
    offset = static_cast<int>((offset + members.size()) % k);
  }
  return plan;
}

}  // namespace uvhl
