#pragma once

#include <string>
#include <vector>

#include "acs/nash_moser.hpp"
#include "acs/scenario.hpp"

namespace acs {

// One monitor verdict: the name, the measured value, the threshold it was
// compared against, and the comparison direction.
struct Verdict {
  std::string monitor;
  double measured = 0;
  double threshold = 0;
  std::string relation = "<=";
  bool pass = false;
};

Verdict make_verdict(const std::string& name, double measured,
                     const std::string& relation, double threshold);

void write_ledger_csv(const std::vector<LedgerRow>& rows, const std::string& path);
std::vector<LedgerRow> read_ledger_csv(const std::string& path);

void write_params_json(const Parameters& p, const Scenario& s, std::uint64_t seed,
                       const std::string& path);
void write_verdicts_json(const std::vector<Verdict>& vs, const std::string& path);

// Emits ledger.csv, params.json, verdicts.json and the final map dump into
// dir; returns the file paths written.
std::vector<std::string> report_emit(const RunResult& result, const Scenario& s,
                                     const std::vector<Verdict>& verdicts,
                                     std::uint64_t seed, const std::string& dir);

}  // namespace acs
