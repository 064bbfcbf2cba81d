#include "imbp/io.hpp"

#include <charconv>
#include <system_error>

namespace imbp {

std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return res.ec == std::errc{} ? std::string(buf, res.ptr) : std::string("nan");
}

namespace {

void header(std::ostream& out, const char* lead, const char* prefix, std::size_t d) {
  out << lead;
  for (std::size_t j = 1; j <= d; ++j) out << ',' << prefix << j;
}

void path_rows(std::ostream& out, const Path& path, const std::string& lead) {
  for (const auto& bp : path.breakpoints) {
    out << lead << format_double(bp.t);
    for (auto v : bp.state) out << ',' << v;
    out << '\n';
  }
}

void continuous_rows(std::ostream& out, const ContinuousPath& path, const std::string& lead) {
  for (std::size_t k = 0; k < path.t.size(); ++k) {
    out << lead << format_double(path.t[k]);
    for (double v : path.states[k]) out << ',' << format_double(v);
    out << ',' << (path.jumped[k] ? 1 : 0) << '\n';
  }
}

void int_array(std::ostream& out, const IntVec& v) {
  out << '[';
  for (std::size_t j = 0; j < v.size(); ++j) out << (j ? "," : "") << v[j];
  out << ']';
}

}  // namespace

void write_path_csv(std::ostream& out, const Path& path, std::size_t d) {
  header(out, "t", "z_", d);
  out << '\n';
  path_rows(out, path, "");
}

void write_paths_csv(std::ostream& out, std::span<const Path> paths, std::size_t d) {
  header(out, "path,t", "z_", d);
  out << '\n';
  for (std::size_t k = 0; k < paths.size(); ++k) path_rows(out, paths[k], std::to_string(k) + ",");
}

void write_path_jsonl(std::ostream& out, const Path& path, std::size_t index) {
  out << "{\"path\":" << index << ",\"t\":[";
  for (std::size_t k = 0; k < path.breakpoints.size(); ++k)
    out << (k ? "," : "") << format_double(path.breakpoints[k].t);
  out << "],\"z\":[";
  for (std::size_t k = 0; k < path.breakpoints.size(); ++k) {
    if (k) out << ',';
    int_array(out, path.breakpoints[k].state);
  }
  out << "]}\n";
}

void write_event_log_jsonl(std::ostream& out, const EventLog& log, std::size_t path_index) {
  for (const auto& e : log) {
    out << "{\"path\":" << path_index << ",\"t\":" << format_double(e.t) << ",\"kind\":\""
        << (e.kind == EventKind::reproduction ? "reproduction" : "interaction") << "\",\"i\":" << e.i + 1;
    if (e.kind == EventKind::reproduction) {
      out << ",\"offspring\":";
      int_array(out, e.offspring);
    } else {
      out << ",\"j\":" << e.j + 1 << ",\"sign\":" << e.sign;
    }
    out << ",\"pre_state\":";
    int_array(out, e.pre_state);
    out << "}\n";
  }
}

void write_continuous_csv(std::ostream& out, const ContinuousPath& path, std::size_t d) {
  header(out, "t", "y_", d);
  out << ",jump\n";
  continuous_rows(out, path, "");
}

void write_continuous_paths_csv(std::ostream& out, std::span<const ContinuousPath> paths, std::size_t d) {
  header(out, "path,t", "y_", d);
  out << ",jump\n";
  for (std::size_t k = 0; k < paths.size(); ++k) continuous_rows(out, paths[k], std::to_string(k) + ",");
}

void write_continuous_jsonl(std::ostream& out, const ContinuousPath& path, std::size_t index) {
  out << "{\"path\":" << index << ",\"t\":[";
  for (std::size_t k = 0; k < path.t.size(); ++k) out << (k ? "," : "") << format_double(path.t[k]);
  out << "],\"y\":[";
  for (std::size_t k = 0; k < path.states.size(); ++k) {
    out << (k ? ",[" : "[");
    for (std::size_t j = 0; j < path.states[k].size(); ++j) out << (j ? "," : "") << format_double(path.states[k][j]);
    out << ']';
  }
  out << "],\"jump\":[";
  for (std::size_t k = 0; k < path.jumped.size(); ++k) out << (k ? "," : "") << (path.jumped[k] ? 1 : 0);
  out << "]}\n";
}

void write_distribution_csv(std::ostream& out, const LatticeDistribution& dist) {
  for (std::size_t j = 1; j <= dist.d; ++j) out << "z_" << j << ',';
  out << "probability\n";
  const auto base = static_cast<std::size_t>(dist.cap + 1);
  for (std::size_t idx = 0; idx < dist.probability.size(); ++idx) {
    if (dist.probability[idx] == 0.0) continue;
    std::size_t rest = idx;
    for (std::size_t j = 0; j < dist.d; ++j) {
      out << (j ? "," : "") << rest % base;
      rest /= base;
    }
    out << ',' << format_double(dist.probability[idx]) << '\n';
  }
}

}  // namespace imbp
