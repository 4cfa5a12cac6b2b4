#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trojanrec/attack.hpp"
#include "trojanrec/data.hpp"
#include "trojanrec/detect.hpp"
#include "trojanrec/error.hpp"
#include "trojanrec/eval.hpp"
#include "trojanrec/models.hpp"

namespace trojanrec::harness {

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Planted block model: users and items are split into n_clusters contiguous
// blocks and every cell is an independent Bernoulli draw.
struct SyntheticSpec {
  std::size_t n_users = 600;
  std::size_t n_items = 300;
  std::size_t n_clusters = 3;
  double p_in = 0.15;
  double p_out = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t user_block(std::size_t u) const { return u * n_clusters / n_users; }
  std::size_t item_block(std::size_t i) const { return i * n_clusters / n_items; }
  double expected_events() const;
};

data::InteractionDataset generate_synthetic(const SyntheticSpec& spec);

struct DatasetSource {
  std::string name = "synthetic";
  std::optional<std::filesystem::path> path;  // absent: synthetic
  data::InputFormat format = data::InputFormat::tsv_quad;
  SyntheticSpec synthetic;
  std::size_t min_user = 5;
  std::size_t min_item = 5;
};

struct GridAxes {
  std::vector<double> ratios;
  std::vector<attack::Method> methods;
  std::vector<models::Family> victims;
  std::vector<data::PopularityBucket> buckets;
  std::vector<data::SelectionMode> modes;
  std::vector<std::uint64_t> seeds;
};

struct DetectConfig {
  std::size_t iterations = 10;
  double damping = 0.5;
  std::vector<detect::Heuristic> heuristics{detect::Heuristic::degree_anomaly,
                                            detect::Heuristic::co_rating_burst};
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::filesystem::path out_dir = "out";
  DatasetSource source;
  std::map<models::Family, models::TrainConfig> models;
  attack::AttackConfig attack;
  attack::Method method = attack::Method::indirectad;
  models::Family victim = models::Family::wrmf;
  data::SelectionMode mode = data::SelectionMode::clustered;
  data::PopularityBucket bucket = data::PopularityBucket::upper_torso;
  std::size_t num_clusters = 10;
  std::vector<std::size_t> k_list{10, 20, 50};
  GridAxes grid;
  DetectConfig detect;
  // Sorted "section.key=value" lines of everything that affects results.
  std::string canonical;

  models::TrainConfig model_config(models::Family family) const;
  std::uint64_t stage_seed(std::string_view stage) const;
};

// Command-line overrides applied on top of the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::filesystem::path> out_dir;
};

// Parses the sectioned key=value format. Unknown keys and a missing seed are
// ConfigError. Relative data paths resolve against `base_dir`.
RunConfig parse_config(std::istream& in, const Overrides& overrides = {},
                       const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

std::string sha256_hex(const std::string& bytes);

data::InteractionDataset load_source(const DatasetSource& source);

// Writes through a sibling temporary file and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body);

void write_manifest(const RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& outputs);

// Reads TROJANREC_LOG levels: trace, debug, info, warn, error, off.
void configure_logging(const char* level);

int cli(int argc, const char* const* argv);
int cli(const std::vector<std::string>& args);

}  // namespace trojanrec::harness
