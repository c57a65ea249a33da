#pragma once

#include <optional>
#include <string>

#include "acs/nash_moser.hpp"
#include "acs/structures.hpp"

namespace acs {

// Reproducible problem instance: everything derives from this config.
struct Scenario {
  std::string name = "ball";
  std::string domain = "ball";  // ball | perturbed-ball | capped-heisenberg
  std::string family = "poly2"; // none | poly1 | poly2 | trig
  double amplitude = 0.02;
  double eps = 0.1;             // capped-heisenberg dilation parameter
  double perturb_c2 = 0.02;     // perturbed-ball C2 perturbation amount
  int grid_n = 9;
  double box_halfwidth = 1.4;
  std::uint64_t seed = 1;

  GridSpec grid() const { return GridSpec::cube(box_halfwidth, grid_n); }
  static Scenario from_json_text(const std::string& text);
  std::string to_json_text() const;
};

struct ScenarioData {
  std::shared_ptr<DefiningFunction> rho;
  Structure A;
  // When the scenario is an oracle pullback: the map Phi with Ftilde o Phi
  // holomorphic for a correct solve (A is the structure straightened by
  // Phi^{-1}).
  std::optional<MapField> ground_truth;
};

ScenarioData scenario_generate(const Scenario& s);

}  // namespace acs
