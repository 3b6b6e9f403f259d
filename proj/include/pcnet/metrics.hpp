#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "pcnet/tensor.hpp"

namespace pcnet {

// One evaluation row. Metrics that do not apply to a run (e.g. accuracy for a
// language model, energies for a backprop baseline) are NaN and serialize as
// empty CSV fields. Wall-clock time lives in the JSON run summary only, so
// that reruns of the same seed produce byte-identical CSVs.
struct MetricsRecord {
  Index epoch = 0;
  Index step = 0;
  double total_energy = nan_metric();
  std::vector<double> layer_energies;
  double train_loss = nan_metric();
  double test_loss = nan_metric();
  double accuracy = nan_metric();
  double perplexity = nan_metric();
  double wall_clock = 0.0;  // seconds; never written to the CSV

  static double nan_metric() { return std::numeric_limits<double>::quiet_NaN(); }
};

// Fixed schema:
//   epoch,step,total_energy,layer_energies,train_loss,test_loss,accuracy,perplexity
// layer_energies is a double-quoted semicolon-joined list; doubles use %.17g.
extern const char* const kMetricsHeader;

std::string format_metric(double v);  // "" for NaN, %.17g otherwise
std::string metrics_row(const MetricsRecord& r);

class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void write(const MetricsRecord& r);

 private:
  std::ofstream f_;
  std::string path_;
};

// Parses a file written by MetricsWriter; validates the header.
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

}  // namespace pcnet
