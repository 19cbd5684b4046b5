#include "fanova/curves.hpp"

#include "fanova/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>

namespace fanova {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(b, e - b + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (const char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
      field.push_back(ch);
    } else if (ch == ',' && !quoted) {
      out.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(ch);
    }
  }
  out.push_back(trim(field));
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "na" || s == "NaN"; }

std::string where(std::size_t line) { return "line " + std::to_string(line); }

struct Builder {
  std::vector<RawCurve> curves;
  std::map<std::string, std::size_t> index;
  std::map<std::string, std::set<double>> seen;

  void add(const std::string& subject, const std::string& group, double t, double v, std::size_t line) {
    if (subject.empty()) throw ValidationError(where(line) + ": empty subject id");
    auto it = index.find(subject);
    if (it == index.end()) {
      it = index.emplace(subject, curves.size()).first;
      curves.push_back(RawCurve{subject, group, {}, {}});
    }
    RawCurve& c = curves[it->second];
    if (c.group != group) {
      throw ValidationError(where(line) + ": subject '" + subject + "' appears in groups '" + c.group + "' and '" +
                            group + "'");
    }
    if (!seen[subject].insert(t).second) {
      throw ValidationError(where(line) + ": duplicate observation for subject '" + subject + "' at time " +
                            std::to_string(t));
    }
    c.times.push_back(t);
    c.values.push_back(v);
  }

  std::vector<RawCurve> finish(const LoadOptions& options) {
    for (auto& c : curves) {
      std::vector<std::size_t> order(c.times.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return c.times[a] < c.times[b]; });
      RawCurve sorted{c.subject_id, c.group, {}, {}};
      for (const auto i : order) {
        sorted.times.push_back(c.times[i]);
        sorted.values.push_back(c.values[i]);
      }
      c = std::move(sorted);
      validate(c);
    }
    std::set<std::string> groups;
    for (const auto& c : curves) groups.insert(c.group);
    if (groups.size() < options.min_groups) {
      throw ValidationError("need at least " + std::to_string(options.min_groups) + " groups, found " +
                            std::to_string(groups.size()));
    }
    return std::move(curves);
  }
};

double numeric_or_throw(const std::string& cell, std::size_t line, const std::string& what) {
  const auto v = parse_number(cell);
  if (!v) throw ValidationError(where(line) + ": non-numeric " + what + " '" + cell + "'");
  return *v;
}

std::optional<double> wide_time(const std::string& header) {
  std::string h = header;
  if (h.size() > 2 && (h.rfind("t_", 0) == 0 || h.rfind("t=", 0) == 0)) h = h.substr(2);
  return parse_number(h);
}

}  // namespace

std::vector<RawCurve> load_dataset(std::istream& in, const LoadOptions& options) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_row(line);
      break;
    }
  }
  if (header.empty()) throw ValidationError("input is empty");
  if (line_no == 1 && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0] = header[0].substr(3);

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[lower(header[i])] = i;
  if (!col.count("subject") || !col.count("group")) {
    throw ValidationError("header must contain 'subject' and 'group' columns");
  }
  const bool has_long = col.count("time") && col.count("value");
  CsvLayout layout = options.layout;
  if (layout == CsvLayout::automatic) layout = has_long ? CsvLayout::long_format : CsvLayout::wide_format;
  if (layout == CsvLayout::long_format && !has_long) {
    throw ValidationError("long format needs columns subject,group,time,value");
  }

  std::vector<std::pair<std::size_t, double>> time_columns;
  if (layout == CsvLayout::wide_format) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i == col["subject"] || i == col["group"]) continue;
      const auto t = wide_time(header[i]);
      if (!t) throw ValidationError("wide-format header '" + header[i] + "' is not a time (expected t_<value>)");
      time_columns.emplace_back(i, *t);
    }
    if (time_columns.empty()) throw ValidationError("wide format has no time columns");
  }

  Builder builder;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != header.size()) {
      throw ValidationError(where(line_no) + ": expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(cells.size()));
    }
    const std::string& subject = cells[col["subject"]];
    const std::string& group = cells[col["group"]];
    if (layout == CsvLayout::long_format) {
      const double t = numeric_or_throw(cells[col["time"]], line_no, "time");
      const double v = numeric_or_throw(cells[col["value"]], line_no, "value");
      builder.add(subject, group, t, v, line_no);
    } else {
      for (const auto& [i, t] : time_columns) {
        if (is_missing(cells[i])) continue;
        builder.add(subject, group, t, numeric_or_throw(cells[i], line_no, "value"), line_no);
      }
    }
  }
  return builder.finish(options);
}

std::vector<RawCurve> load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  try {
    return load_dataset(in, options);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_long_csv(std::ostream& out, std::span<const RawCurve> curves) {
  // Shortest representation that reads back to the same double.
  auto put = [&out](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
  };
  out << "subject,group,time,value\n";
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.times.size(); ++i) {
      out << c.subject_id << ',' << c.group << ',';
      put(c.times[i]);
      out << ',';
      put(c.values[i]);
      out << '\n';
    }
  }
}

}  // namespace fanova
