#include "recallsurv/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "recallsurv/error.hpp"

namespace recallsurv {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    const double x = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw IoError(where + ": cannot parse number '" + s + "'");
  }
}

long parse_int(const std::string& s, const std::string& where) {
  const double x = parse_real(s, where);
  if (x != std::floor(x)) throw IoError(where + ": expected an integer, got '" + s + "'");
  return static_cast<long>(x);
}

}  // namespace

std::string format_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  const bool with_t = !data.empty() && std::all_of(data.begin(), data.end(), [](const auto& r) { return r.t.has_value(); });
  out << "id,s,delta,epsilon,v,m,d" << (with_t ? ",t" : "") << '\n';
  for (const auto& r : data) {
    out << r.id << ',' << format_real(r.s) << ',' << r.delta << ',' << r.epsilon << ',' << format_real(r.v) << ','
        << r.m << ',' << format_real(r.d);
    if (with_t) out << ',' << format_real(*r.t);
    out << '\n';
  }
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_dataset_csv(out, data);
  if (!out) throw IoError("failed writing '" + path + "'");
}

Dataset read_dataset_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw IoError(source + ": empty file");
  const auto header = split_csv_line(line);
  const std::vector<std::string> required{"id", "s", "delta", "epsilon", "v", "m", "d"};
  std::vector<int> col(8, -1);
  for (size_t k = 0; k < header.size(); ++k) {
    for (size_t r = 0; r < required.size(); ++r)
      if (header[k] == required[r]) col[r] = static_cast<int>(k);
    if (header[k] == "t") col[7] = static_cast<int>(k);
  }
  for (size_t r = 0; r < required.size(); ++r)
    if (col[r] < 0) throw IoError(source + ": missing column '" + required[r] + "'");

  Dataset data;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    const std::string where = source + ":" + std::to_string(lineno);
    auto field = [&](int c) -> const std::string& {
      if (c >= static_cast<int>(f.size())) throw IoError(where + ": too few fields");
      return f[static_cast<size_t>(c)];
    };
    SubjectRecord r;
    r.id = parse_int(field(col[0]), where);
    r.s = parse_real(field(col[1]), where);
    r.delta = static_cast<int>(parse_int(field(col[2]), where));
    r.epsilon = static_cast<int>(parse_int(field(col[3]), where));
    r.v = parse_real(field(col[4]), where);
    r.m = static_cast<int>(parse_int(field(col[5]), where));
    r.d = parse_real(field(col[6]), where);
    if (col[7] >= 0 && !field(col[7]).empty()) r.t = parse_real(field(col[7]), where);

    if (r.delta == 1 && r.epsilon == kMonth && std::abs(r.v * 12.0 - std::round(r.v * 12.0)) < 1e-6)
      r.v = std::round(r.v * 12.0) / 12.0;
    if (r.delta == 1 && r.epsilon == kYear && std::abs(r.v - std::round(r.v)) < 1e-6) r.v = std::round(r.v);
    if (r.d > kMonthLength && r.d < kMonthLength + 1e-9) r.d = kMonthLength;
    try {
      validate_record(r);
    } catch (const InvalidRecord& e) {
      throw InvalidRecord(where + ": " + e.what());
    }
    data.push_back(r);
  }
  return data;
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_dataset_csv(in, path);
}

}  // namespace recallsurv
