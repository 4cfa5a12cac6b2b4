#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "trojanrec/attack.hpp"
#include "trojanrec/error.hpp"

namespace trojanrec::attack {

using nlohmann::json;

void write_trace(std::ostream& out, std::span<const TraceRecord> trace) {
  for (const auto& r : trace) {
    json j = {{"iteration", r.iteration},     {"composite", r.composite},
              {"target_loss", r.target_loss}, {"trigger_loss", r.trigger_loss},
              {"grad_norm", r.grad_norm}};
    out << j.dump() << '\n';
  }
}

std::vector<TraceRecord> read_trace(std::istream& in) {
  std::vector<TraceRecord> trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      trace.push_back({j.at("iteration").get<std::size_t>(), j.at("composite").get<double>(),
                       j.at("target_loss").get<double>(), j.at("trigger_loss").get<double>(),
                       j.at("grad_norm").get<double>()});
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad trace record: ") + e.what(), line_no);
    }
  }
  return trace;
}

void write_labels(std::ostream& out, const data::InteractionDataset& ds,
                  const std::vector<bool>& fake) {
  if (fake.size() != ds.num_users()) throw ShapeError("one label per user required");
  for (std::size_t u = 0; u < fake.size(); ++u) {
    out << u << '\t' << ds.user_ids[u] << '\t' << (fake[u] ? 1 : 0) << '\n';
  }
}

std::vector<bool> read_labels(std::istream& in) {
  std::vector<bool> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto first = line.find('\t');
    const auto last = line.rfind('\t');
    if (first == std::string::npos || first == last) throw ParseError("bad label record", line_no);
    const std::string index = line.substr(0, first);
    const std::string flag = line.substr(last + 1);
    if (index != std::to_string(labels.size()) || (flag != "0" && flag != "1")) {
      throw ParseError("bad label record", line_no);
    }
    labels.push_back(flag == "1");
  }
  return labels;
}

}  // namespace trojanrec::attack
