#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "jamshield/common.hpp"
#include "jamshield/env.hpp"
#include "jamshield/trainer.hpp"

namespace jamshield::io {

inline constexpr const char* kKpiHeader =
    "slot,packet_loss,attempts,latency_s,jitter_s,sinr_eff,rssi_w,rsrp_w,r1,"
    "r2,l1,l2";

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw ConfigError("cannot create directory " + path + ": " + ec.message());
}

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  os << content;
  if (!os) throw ConfigError("write failed: " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

inline std::string kpi_csv(const std::vector<KpiRecord>& kpis) {
  std::ostringstream os;
  os << kKpiHeader << "\n";
  for (const auto& k : kpis) {
    os << k.slot << ',' << detail::fmt(k.packet_loss) << ','
       << detail::fmt(k.attempts) << ',' << detail::fmt(k.latency_s) << ','
       << detail::fmt(k.jitter_s) << ',' << detail::fmt(k.sinr_eff) << ','
       << detail::fmt(k.rssi_w) << ',' << detail::fmt(k.rsrp_w) << ','
       << detail::fmt(k.r1) << ',' << detail::fmt(k.r2) << ','
       << detail::fmt(k.l1) << ',' << detail::fmt(k.l2) << "\n";
  }
  return os.str();
}

inline void write_kpi_csv(const std::string& path,
                          const std::vector<KpiRecord>& kpis) {
  write_text(path, kpi_csv(kpis));
}

inline std::vector<KpiRecord> read_kpi_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open KPI file: " + path);
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty KPI file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kKpiHeader)
    throw ConfigError("unexpected KPI header in " + path);
  std::vector<KpiRecord> out;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = detail::split(line, ',');
    if (f.size() != 12) throw ConfigError("bad KPI row in " + path);
    KpiRecord k;
    k.slot = std::stoi(f[0]);
    k.packet_loss = std::stod(f[1]);
    k.attempts = std::stod(f[2]);
    k.latency_s = std::stod(f[3]);
    k.jitter_s = std::stod(f[4]);
    k.sinr_eff = std::stod(f[5]);
    k.rssi_w = std::stod(f[6]);
    k.rsrp_w = std::stod(f[7]);
    k.r1 = std::stod(f[8]);
    k.r2 = std::stod(f[9]);
    k.l1 = std::stod(f[10]);
    k.l2 = std::stod(f[11]);
    out.push_back(k);
  }
  return out;
}

inline std::string curve_csv(const std::vector<trainer::CurvePoint>& curve) {
  std::ostringstream os;
  size_t agents = curve.empty() ? 2 : curve.front().agent_returns.size();
  os << "iter,lr,batch";
  for (size_t a = 0; a < agents; ++a) os << ",return_a" << (a + 1);
  os << ",mean_return\n";
  for (const auto& p : curve) {
    os << p.iter << ',' << detail::fmt(p.lr) << ',' << p.batch;
    for (double r : p.agent_returns) os << ',' << detail::fmt(r);
    os << ',' << detail::fmt(p.mean_return) << "\n";
  }
  return os.str();
}

inline void write_curve_csv(const std::string& path,
                            const std::vector<trainer::CurvePoint>& curve) {
  write_text(path, curve_csv(curve));
}

struct CurveRow {
  int iter = 0;
  double lr = 0.0;
  int batch = 0;
  std::vector<double> returns;
  double mean_return = 0.0;
};

inline std::vector<CurveRow> read_curve_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open curve file: " + path);
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty curve file: " + path);
  std::vector<CurveRow> out;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = detail::split(line, ',');
    if (f.size() < 4) throw ConfigError("bad curve row in " + path);
    CurveRow r;
    r.iter = std::stoi(f[0]);
    r.lr = std::stod(f[1]);
    r.batch = std::stoi(f[2]);
    for (size_t i = 3; i + 1 < f.size(); ++i) r.returns.push_back(std::stod(f[i]));
    r.mean_return = std::stod(f.back());
    out.push_back(r);
  }
  return out;
}

}  // namespace jamshield::io
