#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace trojanrec::data {

struct Event {
  std::size_t user = 0;
  std::size_t item = 0;
  std::int64_t timestamp = 0;
  double weight = 1.0;

  friend bool operator==(const Event&, const Event&) = default;
};

// Users, items and implicit feedback events. Indices are dense; at most one
// event per (user, item) pair.
struct InteractionDataset {
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::vector<Event> events;

  std::size_t num_users() const { return user_ids.size(); }
  std::size_t num_items() const { return item_ids.size(); }
  bool empty() const { return events.empty(); }
  std::int64_t max_timestamp() const;

  // Sorts events by (user, item). Every producer in this library leaves the
  // dataset canonical so dumps and comparisons are order independent.
  void canonicalize();

  friend bool operator==(const InteractionDataset&, const InteractionDataset&) = default;
};

enum class InputFormat { tsv_quad, csv_quad, colon_quad };

std::optional<InputFormat> parse_input_format(std::string_view name);
std::string_view separator_for(InputFormat format);

InteractionDataset load_interactions(const std::filesystem::path& path, InputFormat format);
InteractionDataset load_interactions(const std::filesystem::path& path, std::string_view separator);
InteractionDataset parse_interactions(std::istream& in, std::string_view separator);

InteractionDataset core_filter(const InteractionDataset& ds, std::size_t min_user = 5,
                               std::size_t min_item = 5);

// Per-user 90/10 style split used only for model sanity checks.
std::pair<InteractionDataset, InteractionDataset> holdout_split(const InteractionDataset& ds,
                                                                double holdout_fraction,
                                                                std::uint64_t seed);

// Deterministic text dump: user table, item table, then events sorted by
// (user, item). Round-trips through read_dump.
void write_dump(std::ostream& out, const InteractionDataset& ds);
InteractionDataset read_dump(std::istream& in);
void save_dump(const std::filesystem::path& path, const InteractionDataset& ds);
InteractionDataset load_dump(const std::filesystem::path& path);

// Binary user x item matrix stored in both row and column compressed form.
class InteractionMatrix {
 public:
  InteractionMatrix() = default;
  explicit InteractionMatrix(const InteractionDataset& ds);
  InteractionMatrix(std::size_t rows, std::size_t cols,
                    std::vector<std::pair<std::size_t, std::size_t>> entries);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return row_items_.size(); }

  std::span<const std::size_t> user_items(std::size_t u) const {
    return {row_items_.data() + row_offsets_[u], row_items_.data() + row_offsets_[u + 1]};
  }
  std::span<const std::size_t> item_users(std::size_t i) const {
    return {col_users_.data() + col_offsets_[i], col_users_.data() + col_offsets_[i + 1]};
  }

  bool contains(std::size_t u, std::size_t i) const;
  std::size_t row_sum(std::size_t u) const { return row_offsets_[u + 1] - row_offsets_[u]; }
  std::size_t col_sum(std::size_t i) const { return col_offsets_[i + 1] - col_offsets_[i]; }
  const std::vector<std::size_t>& row_sums() const { return row_sums_; }
  const std::vector<std::size_t>& col_sums() const { return col_sums_; }

  Eigen::VectorXd dense_row(std::size_t u) const;
  std::vector<std::pair<std::size_t, std::size_t>> entries() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> row_items_;
  std::vector<std::size_t> col_offsets_{0};
  std::vector<std::size_t> col_users_;
  std::vector<std::size_t> row_sums_;
  std::vector<std::size_t> col_sums_;
};

enum class PopularityBucket { head, upper_torso, lower_torso, tail };

std::string_view to_string(PopularityBucket bucket);
std::optional<PopularityBucket> parse_bucket(std::string_view name);

std::vector<std::size_t> item_counts(const InteractionDataset& ds);
std::vector<PopularityBucket> popularity_buckets(const InteractionDataset& ds);
std::vector<PopularityBucket> popularity_buckets(std::span<const std::size_t> counts);

// Spherical k-means over binary rows (cosine distance) with k-means++ seeding.
std::vector<std::size_t> cluster_users(const InteractionMatrix& m, std::size_t k,
                                       std::uint64_t seed, std::size_t max_iterations = 100);

enum class SelectionMode { clustered, random_third };

std::string_view to_string(SelectionMode mode);
std::optional<SelectionMode> parse_selection_mode(std::string_view name);

struct TargetSpec {
  std::size_t target_item = 0;
  std::vector<std::size_t> target_users;  // sorted ascending
  SelectionMode selection_mode = SelectionMode::clustered;
  std::uint64_t seed = 0;

  friend bool operator==(const TargetSpec&, const TargetSpec&) = default;
};

TargetSpec select_targets(const InteractionDataset& ds, SelectionMode mode,
                          PopularityBucket bucket, std::uint64_t seed,
                          std::size_t num_clusters = 10);

}  // namespace trojanrec::data
