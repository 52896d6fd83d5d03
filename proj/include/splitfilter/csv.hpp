#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "splitfilter/diagnostics.hpp"
#include "splitfilter/errors.hpp"

namespace splitfilter {

// All numeric CSV output goes through %.17g so replaying a run reproduces
// every artifact byte for byte.
namespace csvdetail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class File {
 public:
  explicit File(const std::string& path, const char* mode) : f_(std::fopen(path.c_str(), mode)) {
    if (!f_) throw ConfigError("cannot open " + path);
  }
  ~File() {
    if (f_) std::fclose(f_);
  }
  File(const File&) = delete;
  File& operator=(const File&) = delete;
  void line(const std::string& s) {
    std::fputs(s.c_str(), f_);
    std::fputc('\n', f_);
  }
  std::FILE* get() { return f_; }

 private:
  std::FILE* f_;
};

}  // namespace csvdetail

inline constexpr const char* kDiagnosticsSchema =
    "step,t,z_n,c_n,acceptance_rate,prior_mass,posterior_mass,posterior_mean,"
    "posterior_std,exact_mean,exact_std,abs_mean_error,l2_vs_reference";
inline constexpr int kDiagnosticsSchemaVersion = 1;

inline std::string diagnostics_row(const StepDiagnostics& d) {
  using csvdetail::fmt;
  std::string s = std::to_string(d.step);
  for (double v : {d.time, d.z_n, d.c_n, d.acceptance_rate, d.prior_mass,
                   d.posterior_mass, d.posterior_mean, d.posterior_std, d.exact_mean,
                   d.exact_std, d.abs_mean_error, d.l2_vs_reference}) {
    s += ",";
    s += fmt(v);
  }
  return s;
}

// One density snapshot per step: grid point, raw prior, normalized posterior.
inline void write_density_csv(const std::string& path, std::span<const double> x,
                              std::span<const double> prior,
                              std::span<const double> posterior) {
  csvdetail::File f(path, "w");
  f.line("x,prior,posterior");
  for (std::size_t i = 0; i < x.size(); ++i)
    f.line(csvdetail::fmt(x[i]) + "," + csvdetail::fmt(prior[i]) + "," +
           csvdetail::fmt(posterior[i]));
}

struct DensityCsv {
  std::vector<double> x, prior, posterior;
};

inline DensityCsv read_density_csv(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "r");
  if (!f) throw ConfigError("cannot open " + path);
  DensityCsv out;
  char buf[512];
  bool header = true;
  while (std::fgets(buf, sizeof(buf), f)) {
    if (header) {
      header = false;
      continue;
    }
    double a, b, c;
    if (std::sscanf(buf, "%lf,%lf,%lf", &a, &b, &c) == 3) {
      out.x.push_back(a);
      out.prior.push_back(b);
      out.posterior.push_back(c);
    }
  }
  std::fclose(f);
  if (out.x.size() < 2) throw ConfigError("density csv too short: " + path);
  return out;
}

inline void write_observations_csv(const std::string& path,
                                   std::span<const double> times,
                                   std::span<const double> values) {
  csvdetail::File f(path, "w");
  f.line("step,t,y");
  for (std::size_t i = 0; i < times.size(); ++i)
    f.line(std::to_string(i) + "," + csvdetail::fmt(times[i]) + "," +
           csvdetail::fmt(values[i]));
}

struct ObservationsCsv {
  std::vector<double> times, values;
};

inline ObservationsCsv read_observations_csv(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "r");
  if (!f) throw ConfigError("cannot open " + path);
  ObservationsCsv out;
  char buf[256];
  while (std::fgets(buf, sizeof(buf), f)) {
    int step;
    double t, y;
    if (std::sscanf(buf, "%d,%lf,%lf", &step, &t, &y) == 3) {
      out.times.push_back(t);
      out.values.push_back(y);
    }
  }
  std::fclose(f);
  if (out.times.size() < 2) throw ConfigError("observations csv too short: " + path);
  return out;
}

inline void write_signal_csv(const std::string& path, std::span<const double> times,
                             std::span<const double> values) {
  csvdetail::File f(path, "w");
  f.line("t,x");
  for (std::size_t i = 0; i < times.size(); ++i)
    f.line(csvdetail::fmt(times[i]) + "," + csvdetail::fmt(values[i]));
}

struct DiagnosticsCsv {
  std::vector<StepDiagnostics> rows;
};

inline DiagnosticsCsv read_diagnostics_csv(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "r");
  if (!f) throw ConfigError("cannot open " + path);
  DiagnosticsCsv out;
  char buf[1024];
  while (std::fgets(buf, sizeof(buf), f)) {
    if (buf[0] == '#' || std::strncmp(buf, "step,", 5) == 0) continue;
    StepDiagnostics d;
    const int n = std::sscanf(buf, "%d,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf",
                              &d.step, &d.time, &d.z_n, &d.c_n, &d.acceptance_rate,
                              &d.prior_mass, &d.posterior_mass, &d.posterior_mean,
                              &d.posterior_std, &d.exact_mean, &d.exact_std,
                              &d.abs_mean_error, &d.l2_vs_reference);
    if (n == 13) out.rows.push_back(d);
  }
  std::fclose(f);
  return out;
}

}  // namespace splitfilter
