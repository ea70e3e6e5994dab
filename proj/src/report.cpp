#include "synmix/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "synmix/error.hpp"
#include "synmix/log.hpp"
#include "synmix/stats.hpp"

namespace synmix::report {
namespace {

constexpr std::string_view kPlusMinus = "\xC2\xB1";

double parse_double(std::string_view s, Errc code, std::string_view what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(code, fmt::format("bad {} '{}'", what, s));
  }
  return v;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) out.push_back(line);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
  }
  return out;
}

std::string latex_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '&' || c == '%' || c == '$' || c == '#' || c == '_' || c == '{' || c == '}') {
      out += '\\';
    }
    out += c;
  }
  return out;
}

std::string cell_text(const Cell& c, Format f) {
  const std::string mean = fmt::format("{:.3f}", c.mean);
  const std::string sd = fmt::format("{:.3f}", c.sd);
  std::string out;
  if (f == Format::Latex) {
    out = c.is_column_max ? fmt::format("\\textbf{{{}}}", mean) : mean;
    out += fmt::format(" {} {}", kPlusMinus, sd);
    if (!c.letters.empty()) out += fmt::format("\\textsuperscript{{{}}}", c.letters);
  } else {
    out = c.is_column_max ? fmt::format("**{}**", mean) : mean;
    out += fmt::format(" {} {}", kPlusMinus, sd);
    if (!c.letters.empty()) out += "^" + c.letters;
  }
  return out;
}

}  // namespace

Aggregate aggregate(std::span<const MetricSample> samples, std::string_view metric) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  std::set<std::tuple<std::string, std::string, int>> seen;
  for (const auto& s : samples) {
    if (s.metric != metric) continue;
    if (!std::isfinite(s.value)) {
      throw Error(Errc::RangeViolation,
                  fmt::format("non-finite {} for {} / {}", s.metric, s.model, s.dataset_combination));
    }
    if (!seen.emplace(s.model, s.dataset_combination, s.replicate).second) {
      throw Error(Errc::DuplicateId, fmt::format("{} / {} / replicate {} / {} appears twice",
                                                 s.model, s.dataset_combination, s.replicate,
                                                 s.metric));
    }
    groups[{s.model, s.dataset_combination}].push_back(s.value);
  }
  Aggregate out;
  for (const auto& [key, values] : groups) {
    out[key] = {stats::mean(values), stats::sample_sd(values), values.size()};
  }
  return out;
}

ResultTable build_table(const Aggregate& agg, std::string metric, std::vector<std::string> rows,
                        std::vector<std::string> columns, const LetterMap& letters) {
  ResultTable t;
  t.metric = std::move(metric);
  t.rows = std::move(rows);
  t.columns = std::move(columns);
  t.cells.assign(t.rows.size(), std::vector<Cell>(t.columns.size()));
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    const auto col_letters = letters.find(t.columns[c]);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto it = agg.find({t.columns[c], t.rows[r]});
      if (it == agg.end() || it->second.n == 0) {
        throw Error(Errc::MissingCell, fmt::format("no {} values for {} on {}", t.metric,
                                                   t.columns[c], t.rows[r]));
      }
      Cell& cell = t.cells[r][c];
      cell.mean = it->second.mean;
      cell.sd = it->second.sd;
      if (col_letters != letters.end()) {
        const auto l = col_letters->second.find(t.rows[r]);
        if (l != col_letters->second.end()) cell.letters = l->second;
      }
    }
    if (t.rows.empty()) continue;
    std::size_t best = 0;
    bool tied = false;
    for (std::size_t r = 1; r < t.rows.size(); ++r) {
      if (t.cells[r][c].mean > t.cells[best][c].mean) {
        best = r;
        tied = false;
      } else if (t.cells[r][c].mean == t.cells[best][c].mean) {
        tied = true;
      }
    }
    if (tied) {
      warn(fmt::format("tied maximum in column {}; marking row '{}'", t.columns[c], t.rows[best]));
    }
    t.cells[best][c].is_column_max = true;
  }
  return t;
}

Format format_from_string(std::string_view s) {
  if (s == "markdown" || s == "md") return Format::Markdown;
  if (s == "csv") return Format::Csv;
  if (s == "latex" || s == "tex") return Format::Latex;
  throw Error(Errc::ConfigInvalid, fmt::format("unknown table format '{}'", s));
}

std::string render_table(const ResultTable& t, Format format) {
  std::string out;
  switch (format) {
    case Format::Markdown: {
      out += "| Dataset |";
      for (const auto& c : t.columns) out += fmt::format(" {} |", c);
      out += "\n|---|";
      for (std::size_t c = 0; c < t.columns.size(); ++c) out += "---|";
      out += '\n';
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out += fmt::format("| {} |", t.rows[r]);
        for (const auto& cell : t.cells[r]) out += fmt::format(" {} |", cell_text(cell, format));
        out += '\n';
      }
      break;
    }
    case Format::Csv: {
      out += "dataset";
      for (const auto& c : t.columns) out += "," + csv_field(c);
      out += '\n';
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out += csv_field(t.rows[r]);
        for (const auto& cell : t.cells[r]) out += "," + csv_field(cell_text(cell, format));
        out += '\n';
      }
      break;
    }
    case Format::Latex: {
      out += "\\textbf{Dataset}";
      for (const auto& c : t.columns) out += fmt::format(" & \\textbf{{{}}}", latex_escape(c));
      out += " \\\\\n\\hline\n";
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out += latex_escape(t.rows[r]);
        for (const auto& cell : t.cells[r]) out += " & " + cell_text(cell, format);
        out += " \\\\\n";
      }
      break;
    }
  }
  return out;
}

ParsedTable parse_table_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw Error(Errc::MalformedRow, "empty table");
  ParsedTable t;
  const auto header = csv_split(lines[0]);
  if (header.empty() || header[0] != "dataset") {
    throw Error(Errc::MalformedRow, "table header must start with 'dataset'");
  }
  t.columns.assign(header.begin() + 1, header.end());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = csv_split(lines[i]);
    if (fields.size() != header.size()) {
      throw Error(Errc::MalformedRow, fmt::format("line {}: {} fields, expected {}", i + 1,
                                                  fields.size(), header.size()));
    }
    t.rows.push_back(fields[0]);
    auto& row = t.cells.emplace_back();
    for (std::size_t c = 1; c < fields.size(); ++c) {
      std::string_view s = fields[c];
      ParsedCell cell;
      if (s.starts_with("**")) {
        const auto close = s.find("**", 2);
        if (close == std::string_view::npos) throw Error(Errc::MalformedRow, "unclosed bold");
        cell.bold = true;
        cell.mean = parse_double(s.substr(2, close - 2), Errc::MalformedRow, "mean");
        s.remove_prefix(close + 2);
      } else {
        const auto sp = s.find(' ');
        cell.mean = parse_double(s.substr(0, sp), Errc::MalformedRow, "mean");
        s.remove_prefix(sp == std::string_view::npos ? s.size() : sp);
      }
      const std::string sep = fmt::format(" {} ", kPlusMinus);
      if (!s.starts_with(sep)) throw Error(Errc::MalformedRow, "missing ± separator");
      s.remove_prefix(sep.size());
      const auto caret = s.find('^');
      cell.sd = parse_double(s.substr(0, caret), Errc::MalformedRow, "sd");
      if (caret != std::string_view::npos) cell.letters = std::string(s.substr(caret + 1));
      row.push_back(std::move(cell));
    }
  }
  return t;
}

double quantile_type7(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(Errc::EmptyGroup, "quantile of empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BoxStats box_stats(std::string group, std::span<const double> values) {
  if (values.empty()) throw Error(Errc::EmptyGroup, fmt::format("group '{}' is empty", group));
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  BoxStats b;
  b.group = std::move(group);
  b.n = v.size();
  b.q1 = quantile_type7(v, 0.25);
  b.median = quantile_type7(v, 0.5);
  b.q3 = quantile_type7(v, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo = b.q1 - 1.5 * iqr, hi = b.q3 + 1.5 * iqr;
  bool any = false;
  for (double x : v) {
    if (x < lo || x > hi) {
      b.outliers.push_back(x);
      continue;
    }
    if (!any) b.min = x;
    b.max = x;
    any = true;
  }
  return b;
}

std::vector<BoxStats> boxplot_export(std::span<const MetricSample> samples, std::string_view metric,
                                     GroupBy group_by) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> groups;
  for (const auto& s : samples) {
    if (s.metric != metric) continue;
    std::string key;
    switch (group_by) {
      case GroupBy::Model: key = s.model; break;
      case GroupBy::Combination: key = s.dataset_combination; break;
      case GroupBy::ModelAndCombination: key = s.model + " / " + s.dataset_combination; break;
    }
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(s.value);
  }
  if (order.empty()) throw Error(Errc::EmptyGroup, fmt::format("no values for metric '{}'", metric));
  std::vector<BoxStats> out;
  for (const auto& key : order) out.push_back(box_stats(key, groups[key]));
  return out;
}

std::string boxplot_csv(std::span<const BoxStats> boxes) {
  std::string out = "group,n,min,q1,median,q3,max,outliers\n";
  for (const auto& b : boxes) {
    std::string outliers;
    for (std::size_t i = 0; i < b.outliers.size(); ++i) {
      outliers += fmt::format("{}{}", i ? ";" : "", b.outliers[i]);
    }
    out += fmt::format("{},{},{},{},{},{},{},{}\n", csv_field(b.group), b.n, b.min, b.q1, b.median,
                       b.q3, b.max, outliers);
  }
  return out;
}

std::string metric_samples_csv(std::span<const MetricSample> samples) {
  std::string out = "model,dataset_combination,replicate,metric,value\n";
  for (const auto& s : samples) {
    out += fmt::format("{},{},{},{},{}\n", csv_field(s.model), csv_field(s.dataset_combination),
                       s.replicate, csv_field(s.metric), s.value);
  }
  return out;
}

std::vector<MetricSample> parse_metric_samples_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) return {};
  const auto header = csv_split(lines[0]);
  const std::vector<std::string> expected{"model", "dataset_combination", "replicate", "metric",
                                          "value"};
  if (header != expected) {
    throw Error(Errc::MalformedRow,
                "expected header model,dataset_combination,replicate,metric,value");
  }
  std::vector<MetricSample> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = csv_split(lines[i]);
    if (f.size() != 5) {
      throw Error(Errc::MalformedRow, fmt::format("line {}: expected 5 fields", i + 1));
    }
    MetricSample s;
    s.model = f[0];
    s.dataset_combination = f[1];
    int rep = 0;
    const auto [ptr, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), rep);
    if (ec != std::errc{} || ptr != f[2].data() + f[2].size()) {
      throw Error(Errc::MalformedRow, fmt::format("line {}: bad replicate '{}'", i + 1, f[2]));
    }
    s.replicate = rep;
    s.metric = f[3];
    s.value = parse_double(f[4], Errc::MalformedRow, "value");
    out.push_back(std::move(s));
  }
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace synmix::report
