#include <algorithm>

#include "trojanrec/data.hpp"
#include "trojanrec/error.hpp"

namespace trojanrec::data {

InteractionMatrix::InteractionMatrix(const InteractionDataset& ds)
    : InteractionMatrix(ds.num_users(), ds.num_items(), [&] {
        std::vector<std::pair<std::size_t, std::size_t>> entries;
        entries.reserve(ds.events.size());
        for (const auto& e : ds.events) entries.emplace_back(e.user, e.item);
        return entries;
      }()) {}

InteractionMatrix::InteractionMatrix(std::size_t rows, std::size_t cols,
                                     std::vector<std::pair<std::size_t, std::size_t>> entries)
    : rows_(rows), cols_(cols) {
  std::sort(entries.begin(), entries.end());
  entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
  row_sums_.assign(rows, 0);
  col_sums_.assign(cols, 0);
  for (const auto& [u, i] : entries) {
    if (u >= rows || i >= cols) throw ShapeError("interaction index out of range");
    ++row_sums_[u];
    ++col_sums_[i];
  }
  row_offsets_.assign(rows + 1, 0);
  col_offsets_.assign(cols + 1, 0);
  for (std::size_t u = 0; u < rows; ++u) row_offsets_[u + 1] = row_offsets_[u] + row_sums_[u];
  for (std::size_t i = 0; i < cols; ++i) col_offsets_[i + 1] = col_offsets_[i] + col_sums_[i];

  row_items_.resize(entries.size());
  col_users_.resize(entries.size());
  std::vector<std::size_t> row_fill(row_offsets_.begin(), row_offsets_.end() - 1);
  std::vector<std::size_t> col_fill(col_offsets_.begin(), col_offsets_.end() - 1);
  // entries are sorted by (u, i), so both layouts come out sorted
  for (const auto& [u, i] : entries) {
    row_items_[row_fill[u]++] = i;
    col_users_[col_fill[i]++] = u;
  }
}

bool InteractionMatrix::contains(std::size_t u, std::size_t i) const {
  auto items = user_items(u);
  return std::binary_search(items.begin(), items.end(), i);
}

Eigen::VectorXd InteractionMatrix::dense_row(std::size_t u) const {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cols_));
  for (std::size_t i : user_items(u)) row[static_cast<Eigen::Index>(i)] = 1.0;
  return row;
}

std::vector<std::pair<std::size_t, std::size_t>> InteractionMatrix::entries() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(nnz());
  for (std::size_t u = 0; u < rows_; ++u) {
    for (std::size_t i : user_items(u)) out.emplace_back(u, i);
  }
  return out;
}

}  // namespace trojanrec::data
