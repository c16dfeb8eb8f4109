#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coxbar/error.hpp"

namespace coxbar {

/// Nonzero entries of one design column. Positions index the dataset's risk
/// order (descending time) and are strictly ascending, so a forward walk over
/// a column visits subjects in risk-set prefix order.
struct SparseColumn {
  std::vector<std::uint32_t> pos;
  std::vector<double> value;

  std::size_t nnz() const noexcept { return pos.size(); }
};

/// Affine map applied on the fly to a stored column: the represented covariate
/// is (raw - center) / scale, where rows absent from the column hold raw 0.
/// Keeping the map as metadata means centering never densifies storage.
struct ColumnTransform {
  double center = 0.0;
  double scale = 1.0;

  double multiplier() const noexcept { return 1.0 / scale; }
  double offset() const noexcept { return -center / scale; }
  bool is_identity() const noexcept { return center == 0.0 && scale == 1.0; }
};

/// Column-oriented sparse design. Columns are shared immutable blocks, so
/// copies and column subsets never duplicate the numeric payload.
struct SparseColumnMatrix {
  std::size_t rows = 0;
  std::vector<std::shared_ptr<const SparseColumn>> columns;
  std::vector<ColumnTransform> transforms;

  std::size_t cols() const noexcept { return columns.size(); }
  const SparseColumn& column(std::size_t j) const { return *columns[j]; }
  const ColumnTransform& transform(std::size_t j) const { return transforms[j]; }

  std::size_t nnz() const {
    std::size_t total = 0;
    for (const auto& c : columns) total += c->nnz();
    return total;
  }
};

/// Subjects that share an event time form one group; all of them use the
/// denominator of the risk set [0, end] (Breslow ties).
struct EventGroup {
  std::uint32_t end = 0;
  double events = 0.0;
};

/// Index over the risk order that drives every partial-likelihood scan.
struct RiskSetIndex {
  std::vector<std::uint8_t> event_at;          // status by position
  std::vector<double> time_at;                 // time by position
  std::vector<EventGroup> groups;              // ascending by end
  std::vector<std::uint32_t> first_group;      // first group with end >= pos

  std::size_t group_count() const noexcept { return groups.size(); }
};

/// Right-censored survival sample with a sparse column-major design.
/// Immutable once built; safe to share across threads as const.
struct SurvivalDataset {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<double> time;           // input order
  std::vector<std::uint8_t> status;   // input order
  std::vector<std::size_t> order;     // position -> input row
  std::vector<std::size_t> position;  // input row -> position
  SparseColumnMatrix design;
  std::size_t event_count = 0;
  RiskSetIndex risk;
};

/// One design column given in input-row coordinates, entries in any order.
struct ColumnInput {
  std::vector<std::size_t> rows;
  std::vector<double> values;
};

enum class StandardizeMode { none, scale_only, center_and_scale };

struct ValidationReport {
  bool ok = true;
  std::string message;

  explicit operator bool() const noexcept { return ok; }
};

namespace detail {

inline std::vector<std::size_t> risk_order(std::span<const double> time,
                                           std::span<const std::uint8_t> status) {
  std::vector<std::size_t> order(time.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (time[a] != time[b]) return time[a] > time[b];
    return status[a] > status[b];
  });
  return order;
}

inline RiskSetIndex build_risk_index(std::span<const double> time,
                                     std::span<const std::uint8_t> status,
                                     std::span<const std::size_t> order) {
  const std::size_t n = order.size();
  RiskSetIndex idx;
  idx.event_at.resize(n);
  idx.time_at.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    idx.event_at[k] = status[order[k]];
    idx.time_at[k] = time[order[k]];
  }
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = start;
    double events = idx.event_at[start];
    while (end + 1 < n && idx.time_at[end + 1] == idx.time_at[start]) {
      ++end;
      events += idx.event_at[end];
    }
    if (events > 0) idx.groups.push_back({static_cast<std::uint32_t>(end), events});
    start = end + 1;
  }
  idx.first_group.resize(n);
  std::size_t g = 0;
  for (std::size_t k = 0; k < n; ++k) {
    while (g < idx.groups.size() && idx.groups[g].end < k) ++g;
    idx.first_group[k] = static_cast<std::uint32_t>(g);
  }
  return idx;
}

}  // namespace detail

/// Validate inputs, sort subjects into risk order and index the design.
/// Explicit zeros are dropped; duplicate (row, column) pairs are rejected.
inline SurvivalDataset build_dataset(std::vector<double> time, std::vector<std::uint8_t> status,
                                     std::vector<ColumnInput> columns) {
  const std::size_t n = time.size();
  if (status.size() != n) throw InputError("time and status lengths differ");
  if (n == 0) throw InputError("dataset has no subjects");
  if (n > std::numeric_limits<std::uint32_t>::max()) throw InputError("too many subjects");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(time[i] > 0.0) || !std::isfinite(time[i]))
      throw InputError("nonpositive time for subject " + std::to_string(i + 1));
    if (status[i] > 1)
      throw InputError("status outside {0,1} for subject " + std::to_string(i + 1));
  }

  SurvivalDataset ds;
  ds.n = n;
  ds.p = columns.size();
  ds.order = detail::risk_order(time, status);
  ds.position.resize(n);
  for (std::size_t k = 0; k < n; ++k) ds.position[ds.order[k]] = k;
  ds.event_count = static_cast<std::size_t>(std::count(status.begin(), status.end(), 1));
  ds.risk = detail::build_risk_index(time, status, ds.order);

  ds.design.rows = n;
  ds.design.columns.reserve(columns.size());
  ds.design.transforms.assign(columns.size(), ColumnTransform{});
  std::vector<std::pair<std::uint32_t, double>> buf;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    auto& in = columns[j];
    if (in.rows.size() != in.values.size())
      throw InputError("column " + std::to_string(j + 1) + ": rows and values differ in length");
    buf.clear();
    buf.reserve(in.rows.size());
    for (std::size_t e = 0; e < in.rows.size(); ++e) {
      if (in.rows[e] >= n)
        throw InputError("column " + std::to_string(j + 1) + ": row index " +
                         std::to_string(in.rows[e] + 1) + " out of range");
      if (!std::isfinite(in.values[e]))
        throw InputError("column " + std::to_string(j + 1) + ": non-finite value");
      if (in.values[e] == 0.0) continue;
      buf.emplace_back(static_cast<std::uint32_t>(ds.position[in.rows[e]]), in.values[e]);
    }
    std::sort(buf.begin(), buf.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    auto col = std::make_shared<SparseColumn>();
    col->pos.reserve(buf.size());
    col->value.reserve(buf.size());
    for (std::size_t e = 0; e < buf.size(); ++e) {
      if (e > 0 && buf[e].first == buf[e - 1].first)
        throw InputError("column " + std::to_string(j + 1) + ": duplicate entry for row " +
                         std::to_string(ds.order[buf[e].first] + 1));
      col->pos.push_back(buf[e].first);
      col->value.push_back(buf[e].second);
    }
    ds.design.columns.push_back(std::move(col));
    in = ColumnInput{};
  }
  ds.time = std::move(time);
  ds.status = std::move(status);
  return ds;
}

/// Represented (transformed) column values in input-row order.
inline std::vector<double> dense_column(const SurvivalDataset& ds, std::size_t j) {
  const auto& col = ds.design.column(j);
  const auto& tr = ds.design.transform(j);
  std::vector<double> out(ds.n, tr.offset());
  const double a = tr.multiplier();
  for (std::size_t e = 0; e < col.nnz(); ++e) {
    const double raw = col.value[e];
    out[ds.order[col.pos[e]]] = tr.is_identity() ? raw : (raw - tr.center) * a;
  }
  return out;
}

/// View of the dataset restricted to `columns` (in the given order). Column
/// payloads are shared, not copied.
inline SurvivalDataset subset_columns(const SurvivalDataset& ds, std::span<const std::size_t> columns) {
  SurvivalDataset out = ds;
  out.design.columns.clear();
  out.design.transforms.clear();
  out.design.columns.reserve(columns.size());
  out.design.transforms.reserve(columns.size());
  for (std::size_t j : columns) {
    if (j >= ds.p) throw InputError("column index " + std::to_string(j + 1) + " out of range");
    out.design.columns.push_back(ds.design.columns[j]);
    out.design.transforms.push_back(ds.design.transforms[j]);
  }
  out.p = columns.size();
  return out;
}

/// Sets each column's transform from its raw values. The transform is always
/// derived from raw storage, so applying the same mode twice is a no-op.
inline SurvivalDataset standardize(const SurvivalDataset& ds, StandardizeMode mode) {
  if (mode == StandardizeMode::none) return ds;
  if (ds.n < 2) throw InputError("standardization needs at least two subjects");
  SurvivalDataset out = ds;
  const double n = static_cast<double>(ds.n);
  for (std::size_t j = 0; j < ds.p; ++j) {
    const auto& col = ds.design.column(j);
    double sum = 0.0, sumsq = 0.0;
    for (double v : col.value) {
      sum += v;
      sumsq += v * v;
    }
    ColumnTransform tr;
    if (mode == StandardizeMode::scale_only) {
      const double rms = std::sqrt(sumsq / n);
      tr.scale = rms > 0.0 ? rms : 1.0;
    } else {
      const double mean = sum / n;
      // sum of squares about the mean, zero rows included
      double ss = 0.0;
      for (double v : col.value) ss += (v - mean) * (v - mean);
      ss += (n - static_cast<double>(col.nnz())) * mean * mean;
      if (!(ss > 0.0)) throw InputError("constant column x" + std::to_string(j + 1) +
                                        " cannot be centered and scaled");
      tr.center = mean;
      tr.scale = std::sqrt(ss / (n - 1.0));
    }
    out.design.transforms[j] = tr;
  }
  return out;
}

/// Coefficients for the represented columns mapped back to raw-value units.
inline std::vector<double> to_original_scale(const SurvivalDataset& ds, std::span<const double> beta) {
  std::vector<double> out(beta.begin(), beta.end());
  for (std::size_t j = 0; j < out.size() && j < ds.p; ++j) out[j] /= ds.design.transform(j).scale;
  return out;
}

/// Checks every dataset invariant and reports the first violation.
inline ValidationReport validate(const SurvivalDataset& ds) {
  auto fail = [](std::string msg) { return ValidationReport{false, std::move(msg)}; };
  if (ds.time.size() != ds.n || ds.status.size() != ds.n || ds.order.size() != ds.n)
    return fail("length mismatch between n and subject vectors");
  for (std::size_t i = 0; i < ds.n; ++i) {
    if (!(ds.time[i] > 0.0) || !std::isfinite(ds.time[i]))
      return fail("nonpositive time at subject " + std::to_string(i + 1));
    if (ds.status[i] > 1) return fail("status outside {0,1} at subject " + std::to_string(i + 1));
  }
  std::vector<std::uint8_t> seen(ds.n, 0);
  for (std::size_t k = 0; k < ds.n; ++k) {
    if (ds.order[k] >= ds.n || seen[ds.order[k]]) return fail("order is not a permutation");
    seen[ds.order[k]] = 1;
  }
  for (std::size_t k = 1; k < ds.n; ++k)
    if (ds.time[ds.order[k]] > ds.time[ds.order[k - 1]])
      return fail("order not sorted by descending time at position " + std::to_string(k + 1));
  if (ds.position.size() != ds.n) return fail("position index has wrong length");
  for (std::size_t k = 0; k < ds.n; ++k)
    if (ds.position[ds.order[k]] != k) return fail("position index is not the inverse of order");
  const auto events = static_cast<std::size_t>(std::count(ds.status.begin(), ds.status.end(), 1));
  if (events != ds.event_count) return fail("event_count does not match status");

  const auto expect = detail::build_risk_index(ds.time, ds.status, ds.order);
  if (expect.event_at != ds.risk.event_at || expect.first_group != ds.risk.first_group ||
      expect.groups.size() != ds.risk.groups.size())
    return fail("risk-set index inconsistent with order");
  for (std::size_t g = 0; g < expect.groups.size(); ++g)
    if (expect.groups[g].end != ds.risk.groups[g].end ||
        expect.groups[g].events != ds.risk.groups[g].events)
      return fail("risk-set index inconsistent with order");

  if (ds.design.rows != ds.n || ds.design.cols() != ds.p || ds.design.transforms.size() != ds.p)
    return fail("design dimensions do not match n and p");
  for (std::size_t j = 0; j < ds.p; ++j) {
    const auto& col = ds.design.column(j);
    if (col.pos.size() != col.value.size())
      return fail("column x" + std::to_string(j + 1) + ": ragged storage");
    for (std::size_t e = 0; e < col.nnz(); ++e) {
      if (col.pos[e] >= ds.n) return fail("column x" + std::to_string(j + 1) + ": position out of range");
      if (e > 0 && col.pos[e] <= col.pos[e - 1])
        return fail("column x" + std::to_string(j + 1) + ": entries not in risk order or duplicated");
      if (!std::isfinite(col.value[e]) || col.value[e] == 0.0)
        return fail("column x" + std::to_string(j + 1) + ": stored value zero or non-finite");
    }
    const auto& tr = ds.design.transform(j);
    if (!(tr.scale > 0.0) || !std::isfinite(tr.scale) || !std::isfinite(tr.center))
      return fail("column x" + std::to_string(j + 1) + ": invalid transform");
  }
  return {};
}

}  // namespace coxbar
