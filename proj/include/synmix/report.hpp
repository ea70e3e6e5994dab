#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace synmix::report {

/// One measured value, e.g. mAP50 of YOLOv8n on "Syn10 Real90", replicate 3.
struct MetricSample {
  std::string model;
  std::string dataset_combination;
  int replicate = 0;
  std::string metric;
  double value = 0.0;
};

struct CellStats {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

/// Keyed by (model, dataset_combination).
using Aggregate = std::map<std::pair<std::string, std::string>, CellStats>;

/// Mean and sample SD (n - 1; 0 for one replicate) of every cell of `metric`.
/// Duplicate (model, combination, replicate, metric) keys are rejected.
Aggregate aggregate(std::span<const MetricSample> samples, std::string_view metric);

struct Cell {
  double mean = 0.0;
  double sd = 0.0;
  std::string letters;
  bool is_column_max = false;
};

/// Rows are dataset combinations, columns are models.
struct ResultTable {
  std::string metric;
  std::vector<std::string> rows;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> cells;  // [row][column]
};

/// Letters per column: column -> (row -> letters).
using LetterMap = std::map<std::string, std::map<std::string, std::string>>;

/// Throws MissingCell when a (row, column) has no samples. Marks exactly one
/// maximum per column; ties go to the first row with a warning.
ResultTable build_table(const Aggregate& agg, std::string metric, std::vector<std::string> rows,
                        std::vector<std::string> columns, const LetterMap& letters = {});

enum class Format { Markdown, Csv, Latex };

Format format_from_string(std::string_view s);

/// Cells read "m.mmm ± s.sss^LETTERS" with the column maximum in bold.
std::string render_table(const ResultTable& table, Format format);

struct ParsedCell {
  double mean = 0.0;
  double sd = 0.0;
  std::string letters;
  bool bold = false;
};

struct ParsedTable {
  std::vector<std::string> rows;
  std::vector<std::string> columns;
  std::vector<std::vector<ParsedCell>> cells;
};

/// Reads the CSV produced by render_table.
ParsedTable parse_table_csv(std::string_view text);

/// Type-7 (linear interpolation) quantile of sorted data.
double quantile_type7(std::span<const double> sorted, double q);

struct BoxStats {
  std::string group;
  std::size_t n = 0;
  /// Whisker ends: extreme values inside the 1.5 IQR fences.
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  std::vector<double> outliers;
};

BoxStats box_stats(std::string group, std::span<const double> values);

enum class GroupBy { Model, Combination, ModelAndCombination };

/// One box per group of `metric`, in order of first appearance.
std::vector<BoxStats> boxplot_export(std::span<const MetricSample> samples, std::string_view metric,
                                     GroupBy group_by);

/// group,n,min,q1,median,q3,max,outliers (outliers ';'-separated).
std::string boxplot_csv(std::span<const BoxStats> boxes);

/// Long format: model,dataset_combination,replicate,metric,value.
std::string metric_samples_csv(std::span<const MetricSample> samples);
std::vector<MetricSample> parse_metric_samples_csv(std::string_view text);

/// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(std::string_view s);
/// Splits one CSV record, honouring double quotes.
std::vector<std::string> csv_split(std::string_view line);

}  // namespace synmix::report
