#include "pcnet/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace pcnet {

const char* const kMetricsHeader =
    "epoch,step,total_energy,layer_energies,train_loss,test_loss,accuracy,perplexity";

std::string format_metric(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string metrics_row(const MetricsRecord& r) {
  std::string row = std::to_string(r.epoch) + "," + std::to_string(r.step) + "," +
                    format_metric(r.total_energy) + ",";
  if (!r.layer_energies.empty()) {
    row.push_back('"');
    for (std::size_t i = 0; i < r.layer_energies.size(); ++i) {
      if (i) row.push_back(';');
      row += format_metric(r.layer_energies[i]);
    }
    row.push_back('"');
  }
  row += "," + format_metric(r.train_loss) + "," + format_metric(r.test_loss) + "," +
         format_metric(r.accuracy) + "," + format_metric(r.perplexity);
  return row;
}

MetricsWriter::MetricsWriter(const std::string& path) : f_(path), path_(path) {
  require(f_.good(), ErrorKind::io, "cannot write " + path);
  f_ << kMetricsHeader << '\n';
}

void MetricsWriter::write(const MetricsRecord& r) {
  f_ << metrics_row(r) << '\n';
  f_.flush();
  require(f_.good(), ErrorKind::io, "write to " + path_ + " failed");
}

namespace {

double parse_metric(const std::string& field, const std::string& path) {
  if (field.empty()) return MetricsRecord::nan_metric();
  std::size_t used = 0;
  const double v = std::stod(field, &used);
  require(used == field.size(), ErrorKind::io, path + ": malformed number '" + field + "'");
  return v;
}

// Splits one CSV line; only the layer_energies column may be quoted.
std::vector<std::string> split_csv(const std::string& line, const std::string& path) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (quoted) {
      if (c == '"')
        quoted = false;
      else
        cur.push_back(c);
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  require(!quoted, ErrorKind::io, path + ": unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

}  // namespace

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorKind::io, "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(f, line)), ErrorKind::io, path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == kMetricsHeader, ErrorKind::io, path + " has an unexpected header");

  std::vector<MetricsRecord> out;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv(line, path);
    require(fields.size() == 8, ErrorKind::io,
            path + ": expected 8 columns, found " + std::to_string(fields.size()));
    MetricsRecord r;
    r.epoch = static_cast<Index>(std::stoll(fields[0]));
    r.step = static_cast<Index>(std::stoll(fields[1]));
    r.total_energy = parse_metric(fields[2], path);
    if (!fields[3].empty()) {
      std::string cur;
      for (char c : fields[3]) {
        if (c == ';') {
          r.layer_energies.push_back(parse_metric(cur, path));
          cur.clear();
        } else {
          cur.push_back(c);
        }
      }
      r.layer_energies.push_back(parse_metric(cur, path));
    }
    r.train_loss = parse_metric(fields[4], path);
    r.test_loss = parse_metric(fields[5], path);
    r.accuracy = parse_metric(fields[6], path);
    r.perplexity = parse_metric(fields[7], path);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace pcnet
