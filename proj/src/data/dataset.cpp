#include "trojanrec/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "trojanrec/error.hpp"
#include "trojanrec/rng.hpp"

namespace trojanrec::data {

namespace {

std::vector<std::string_view> split(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc() && ptr == end;
}

// Collapses duplicate pairs keeping the earliest timestamp, then sorts.
void dedup_events(std::vector<Event>& events) {
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.user != b.user) return a.user < b.user;
    if (a.item != b.item) return a.item < b.item;
    return a.timestamp < b.timestamp;
  });
  auto last = std::unique(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.user == b.user && a.item == b.item;
  });
  events.erase(last, events.end());
}

}  // namespace

std::int64_t InteractionDataset::max_timestamp() const {
  std::int64_t ts = 0;
  for (const auto& e : events) ts = std::max(ts, e.timestamp);
  return ts;
}

void InteractionDataset::canonicalize() {
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  });
}

std::optional<InputFormat> parse_input_format(std::string_view name) {
  if (name == "tsv_quad" || name == "tsv") return InputFormat::tsv_quad;
  if (name == "csv_quad" || name == "csv") return InputFormat::csv_quad;
  if (name == "colon_quad" || name == "ml1m") return InputFormat::colon_quad;
  return std::nullopt;
}

std::string_view separator_for(InputFormat format) {
  switch (format) {
    case InputFormat::tsv_quad:
      return "\t";
    case InputFormat::csv_quad:
      return ",";
    case InputFormat::colon_quad:
      return "::";
  }
  return "\t";
}

InteractionDataset parse_interactions(std::istream& in, std::string_view separator) {
  InteractionDataset ds;
  std::unordered_map<std::string, std::size_t> user_index;
  std::unordered_map<std::string, std::size_t> item_index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    auto fields = split(view, separator);
    if (fields.size() != 4) {
      throw ParseError("expected 4 fields, found " + std::to_string(fields.size()), line_no);
    }
    auto user = trim(fields[0]);
    auto item = trim(fields[1]);
    double rating = 0.0;
    std::int64_t timestamp = 0;
    if (user.empty() || item.empty()) throw ParseError("empty identifier", line_no);
    if (!parse_number(trim(fields[2]), rating)) throw ParseError("bad rating", line_no);
    if (!parse_number(trim(fields[3]), timestamp)) throw ParseError("bad timestamp", line_no);

    auto [uit, u_new] = user_index.try_emplace(std::string(user), ds.user_ids.size());
    if (u_new) ds.user_ids.emplace_back(user);
    auto [iit, i_new] = item_index.try_emplace(std::string(item), ds.item_ids.size());
    if (i_new) ds.item_ids.emplace_back(item);
    // implicit feedback: any rating counts as one interaction
    ds.events.push_back({uit->second, iit->second, timestamp, 1.0});
  }
  if (ds.events.empty()) throw EmptyDatasetError("no interactions in input");
  dedup_events(ds.events);
  return ds;
}

InteractionDataset load_interactions(const std::filesystem::path& path,
                                     std::string_view separator) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_interactions(in, separator);
}

InteractionDataset load_interactions(const std::filesystem::path& path, InputFormat format) {
  return load_interactions(path, separator_for(format));
}

InteractionDataset core_filter(const InteractionDataset& ds, std::size_t min_user,
                               std::size_t min_item) {
  if (min_user < 1 || min_item < 1) throw ParameterError("core thresholds must be >= 1");
  std::vector<bool> keep_user(ds.num_users(), true);
  std::vector<bool> keep_item(ds.num_items(), true);
  std::vector<Event> live = ds.events;

  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::size_t> ucount(ds.num_users(), 0);
    std::vector<std::size_t> icount(ds.num_items(), 0);
    for (const auto& e : live) {
      ++ucount[e.user];
      ++icount[e.item];
    }
    for (std::size_t u = 0; u < ds.num_users(); ++u) {
      if (keep_user[u] && ucount[u] < min_user) {
        keep_user[u] = false;
        changed = true;
      }
    }
    for (std::size_t i = 0; i < ds.num_items(); ++i) {
      if (keep_item[i] && icount[i] < min_item) {
        keep_item[i] = false;
        changed = true;
      }
    }
    std::erase_if(live, [&](const Event& e) { return !keep_user[e.user] || !keep_item[e.item]; });
  }
  if (live.empty()) throw EmptyDatasetError("dataset empty after core filtering");

  InteractionDataset out;
  std::vector<std::size_t> user_map(ds.num_users());
  std::vector<std::size_t> item_map(ds.num_items());
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    if (keep_user[u]) {
      user_map[u] = out.user_ids.size();
      out.user_ids.push_back(ds.user_ids[u]);
    }
  }
  for (std::size_t i = 0; i < ds.num_items(); ++i) {
    if (keep_item[i]) {
      item_map[i] = out.item_ids.size();
      out.item_ids.push_back(ds.item_ids[i]);
    }
  }
  out.events.reserve(live.size());
  for (const auto& e : live) {
    out.events.push_back({user_map[e.user], item_map[e.item], e.timestamp, e.weight});
  }
  out.canonicalize();
  return out;
}

std::pair<InteractionDataset, InteractionDataset> holdout_split(const InteractionDataset& ds,
                                                                double holdout_fraction,
                                                                std::uint64_t seed) {
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) {
    throw ParameterError("holdout fraction must be in [0, 1)");
  }
  InteractionDataset train{ds.user_ids, ds.item_ids, {}};
  InteractionDataset test{ds.user_ids, ds.item_ids, {}};
  std::vector<std::vector<Event>> per_user(ds.num_users());
  for (const auto& e : ds.events) per_user[e.user].push_back(e);
  Rng rng(seed);
  for (auto& events : per_user) {
    rng.shuffle(events);
    auto n_test = static_cast<std::size_t>(holdout_fraction * static_cast<double>(events.size()));
    // every user keeps at least one training interaction
    if (n_test >= events.size() && !events.empty()) n_test = events.size() - 1;
    for (std::size_t j = 0; j < events.size(); ++j) {
      (j < n_test ? test : train).events.push_back(events[j]);
    }
  }
  train.canonicalize();
  test.canonicalize();
  return {std::move(train), std::move(test)};
}

void write_dump(std::ostream& out, const InteractionDataset& ds) {
  InteractionDataset sorted = ds;
  sorted.canonicalize();
  out << "#trojanrec-dataset v1\n";
  out << "users\t" << ds.num_users() << '\n';
  for (std::size_t u = 0; u < ds.num_users(); ++u) out << u << '\t' << ds.user_ids[u] << '\n';
  out << "items\t" << ds.num_items() << '\n';
  for (std::size_t i = 0; i < ds.num_items(); ++i) out << i << '\t' << ds.item_ids[i] << '\n';
  out << "events\t" << sorted.events.size() << '\n';
  for (const auto& e : sorted.events) {
    out << e.user << '\t' << e.item << '\t' << e.timestamp << '\n';
  }
}

InteractionDataset read_dump(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> std::string_view {
    if (!std::getline(in, line)) throw ParseError("unexpected end of dump", line_no + 1);
    ++line_no;
    return trim(line);
  };
  if (next() != "#trojanrec-dataset v1") throw ParseError("missing dump header", line_no);

  auto read_count = [&](std::string_view section) {
    auto fields = split(next(), "\t");
    std::size_t n = 0;
    if (fields.size() != 2 || fields[0] != section || !parse_number(fields[1], n)) {
      throw ParseError("expected section '" + std::string(section) + "'", line_no);
    }
    return n;
  };
  auto read_table = [&](std::string_view section, std::vector<std::string>& ids) {
    std::size_t n = read_count(section);
    ids.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      auto fields = split(next(), "\t");
      std::size_t idx = 0;
      if (fields.size() != 2 || !parse_number(fields[0], idx) || idx != k) {
        throw ParseError("bad " + std::string(section) + " row", line_no);
      }
      ids.emplace_back(fields[1]);
    }
  };

  InteractionDataset ds;
  read_table("users", ds.user_ids);
  read_table("items", ds.item_ids);
  std::size_t n_events = read_count("events");
  ds.events.reserve(n_events);
  for (std::size_t k = 0; k < n_events; ++k) {
    auto fields = split(next(), "\t");
    Event e;
    if (fields.size() != 3 || !parse_number(fields[0], e.user) ||
        !parse_number(fields[1], e.item) || !parse_number(fields[2], e.timestamp)) {
      throw ParseError("bad event row", line_no);
    }
    if (e.user >= ds.num_users() || e.item >= ds.num_items()) {
      throw ParseError("event index out of range", line_no);
    }
    ds.events.push_back(e);
  }
  dedup_events(ds.events);
  return ds;
}

void save_dump(const std::filesystem::path& path, const InteractionDataset& ds) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_dump(out, ds);
}

InteractionDataset load_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_dump(in);
}

}  // namespace trojanrec::data
