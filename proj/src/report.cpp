#include "fjsp/report.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fjsp {

EvalReport build_report(std::vector<EvalRow> rows,
                        std::map<std::string, std::string> provenance) {
  EvalReport report;
  report.provenance = std::move(provenance);
  for (EvalRow& row : rows) {
    if (row.reference && *row.reference > 0.0)
      row.gap = (static_cast<double>(row.makespan) - *row.reference) / *row.reference;
    report.rows.push_back(std::move(row));
  }

  std::vector<std::string> order;
  std::map<std::string, PolicyAggregate> agg;
  std::map<std::string, int> gap_counts;
  for (const EvalRow& row : report.rows) {
    if (!agg.count(row.policy)) {
      order.push_back(row.policy);
      agg[row.policy].policy = row.policy;
    }
    PolicyAggregate& a = agg[row.policy];
    ++a.instances;
    a.mean_objective += static_cast<double>(row.makespan);
    a.mean_seconds += row.seconds;
    if (row.gap) {
      a.mean_gap = a.mean_gap.value_or(0.0) + *row.gap;
      ++gap_counts[row.policy];
    }
  }
  for (const std::string& policy : order) {
    PolicyAggregate a = agg[policy];
    a.mean_objective /= a.instances;
    a.mean_seconds /= a.instances;
    if (a.mean_gap) a.mean_gap = *a.mean_gap / gap_counts[policy];
    report.aggregates.push_back(std::move(a));
  }
  return report;
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "policy,instance,makespan,seconds,reference,gap\n";
  for (const EvalRow& row : report.rows) {
    out << row.policy << ',' << row.instance << ',' << row.makespan << ','
        << row.seconds << ',';
    if (row.reference) out << *row.reference;
    out << ',';
    if (row.gap) out << *row.gap;
    out << '\n';
  }
  out << "\npolicy,instances,mean_objective,mean_gap,mean_seconds\n";
  for (const PolicyAggregate& a : report.aggregates) {
    out << a.policy << ',' << a.instances << ',' << a.mean_objective << ',';
    if (a.mean_gap) out << *a.mean_gap;
    out << ',' << a.mean_seconds << '\n';
  }
  return out.str();
}

std::string report_json(const EvalReport& report) {
  nlohmann::json doc;
  nlohmann::json rows = nlohmann::json::array();
  for (const EvalRow& row : report.rows) {
    nlohmann::json r;
    r["policy"] = row.policy;
    r["instance"] = row.instance;
    r["makespan"] = row.makespan;
    r["seconds"] = row.seconds;
    if (row.reference) r["reference"] = *row.reference;
    if (row.gap) r["gap"] = *row.gap;
    rows.push_back(r);
  }
  doc["rows"] = rows;
  nlohmann::json aggregates = nlohmann::json::array();
  for (const PolicyAggregate& a : report.aggregates) {
    nlohmann::json r;
    r["policy"] = a.policy;
    r["instances"] = a.instances;
    r["mean_objective"] = a.mean_objective;
    if (a.mean_gap) r["mean_gap"] = *a.mean_gap;
    r["mean_seconds"] = a.mean_seconds;
    aggregates.push_back(r);
  }
  doc["aggregates"] = aggregates;
  doc["provenance"] = report.provenance;
  return doc.dump(2) + "\n";
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hash_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash missing file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return hash_hex(buf.str());
}

std::map<std::string, double> read_best_known(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open best-known file: " + path);
  nlohmann::json doc = nlohmann::json::parse(in);
  std::map<std::string, double> out;
  for (const auto& [key, value] : doc.items()) out[key] = value.get<double>();
  return out;
}

}  // namespace fjsp
