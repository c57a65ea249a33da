#include "acs/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace acs {

Verdict make_verdict(const std::string& name, double measured,
                     const std::string& relation, double threshold) {
  Verdict v;
  v.monitor = name;
  v.measured = measured;
  v.threshold = threshold;
  v.relation = relation;
  if (relation == "<=")
    v.pass = measured <= threshold;
  else if (relation == ">=")
    v.pass = measured >= threshold;
  else
    fail("make_verdict: relation must be <= or >=");
  return v;
}

void write_ledger_csv(const std::vector<LedgerRow>& rows, const std::string& path) {
  std::ofstream os(path);
  require(bool(os), "write_ledger_csv: cannot open " + path);
  os << "j,t_j,a_j,L_j,levi_min,defect,f_norm2,cauchy_increment\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.j, r.t, r.a, r.L, r.levi_min, r.defect, r.f_norm2,
                  r.cauchy_increment);
    os << buf;
  }
  require(bool(os), "write_ledger_csv: write failed for " + path);
}

std::vector<LedgerRow> read_ledger_csv(const std::string& path) {
  std::ifstream is(path);
  require(bool(is), "read_ledger_csv: cannot open " + path);
  std::string line;
  std::getline(is, line);  // header
  std::vector<LedgerRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    LedgerRow r;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    ls >> r.j >> r.t >> r.a >> r.L >> r.levi_min >> r.defect >> r.f_norm2 >>
        r.cauchy_increment;
    require(bool(ls) || ls.eof(), "read_ledger_csv: malformed row in " + path);
    rows.push_back(r);
  }
  return rows;
}

namespace {
nlohmann::ordered_json params_to_json(const Parameters& p) {
  nlohmann::ordered_json j;
  j["r"] = p.r;
  j["s"] = p.s;
  j["kappa"] = p.kappa;
  j["gamma"] = p.gamma;
  j["xi"] = p.xi;
  j["d"] = p.d;
  j["alpha"] = p.alpha;
  j["beta"] = p.beta;
  j["ell"] = p.ell;
  j["t0"] = p.t0;
  j["delta_r"] = p.delta_r;
  j["cr_star"] = p.cr_star;
  j["L"] = p.L;
  j["margin"] = p.margin;
  return j;
}
}  // namespace

void write_params_json(const Parameters& p, const Scenario& s, std::uint64_t seed,
                       const std::string& path) {
  nlohmann::ordered_json j;
  j["params"] = params_to_json(p);
  j["scenario"] = nlohmann::ordered_json::parse(s.to_json_text());
  j["seed"] = seed;
  std::ofstream os(path);
  require(bool(os), "write_params_json: cannot open " + path);
  os << j.dump(2) << "\n";
  require(bool(os), "write_params_json: write failed for " + path);
}

void write_verdicts_json(const std::vector<Verdict>& vs, const std::string& path) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& v : vs) {
    nlohmann::ordered_json j;
    j["monitor"] = v.monitor;
    j["measured"] = v.measured;
    j["relation"] = v.relation;
    j["threshold"] = v.threshold;
    j["pass"] = v.pass;
    arr.push_back(j);
  }
  std::ofstream os(path);
  require(bool(os), "write_verdicts_json: cannot open " + path);
  os << arr.dump(2) << "\n";
  require(bool(os), "write_verdicts_json: write failed for " + path);
}

std::vector<std::string> report_emit(const RunResult& result, const Scenario& s,
                                     const std::vector<Verdict>& verdicts,
                                     std::uint64_t seed, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, "report_emit: cannot create directory " + dir);
  std::vector<std::string> files;
  auto at = [&](const std::string& n) { return (fs::path(dir) / n).string(); };

  write_ledger_csv(result.state.ledger, at("ledger.csv"));
  files.push_back(at("ledger.csv"));
  write_params_json(result.params, s, seed, at("params.json"));
  files.push_back(at("params.json"));
  write_verdicts_json(verdicts, at("verdicts.json"));
  files.push_back(at("verdicts.json"));
  dump_binary(result.state.Ftilde.displacement(), at("final_map.grid"));
  files.push_back(at("final_map.grid"));
  {
    std::ofstream os(at("final_map.csv"));
    require(bool(os), "report_emit: cannot open final_map.csv");
    dump_csv(result.state.Ftilde.displacement(), os);
  }
  files.push_back(at("final_map.csv"));
  return files;
}

}  // namespace acs
