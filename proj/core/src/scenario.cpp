#include "acs/scenario.hpp"

#include <nlohmann/json.hpp>

namespace acs {

Scenario Scenario::from_json_text(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  Scenario s;
  if (j.contains("name")) s.name = j["name"].get<std::string>();
  if (j.contains("domain")) s.domain = j["domain"].get<std::string>();
  if (j.contains("family")) s.family = j["family"].get<std::string>();
  if (j.contains("amplitude")) s.amplitude = j["amplitude"].get<double>();
  if (j.contains("eps")) s.eps = j["eps"].get<double>();
  if (j.contains("perturb_c2")) s.perturb_c2 = j["perturb_c2"].get<double>();
  if (j.contains("grid_n")) s.grid_n = j["grid_n"].get<int>();
  if (j.contains("box_halfwidth")) s.box_halfwidth = j["box_halfwidth"].get<double>();
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  return s;
}

std::string Scenario::to_json_text() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["domain"] = domain;
  j["family"] = family;
  j["amplitude"] = amplitude;
  j["eps"] = eps;
  j["perturb_c2"] = perturb_c2;
  j["grid_n"] = grid_n;
  j["box_halfwidth"] = box_halfwidth;
  j["seed"] = seed;
  return j.dump(2);
}

ScenarioData scenario_generate(const Scenario& s) {
  ScenarioData out;
  GridSpec sp = s.grid();
  if (s.domain == "ball") {
    out.rho = unit_ball_domain(s.box_halfwidth);
  } else if (s.domain == "perturbed-ball") {
    out.rho = perturbed_ball_domain(s.perturb_c2, s.box_halfwidth);
  } else if (s.domain == "capped-heisenberg") {
    auto h = [](cplx zp, double xn) {
      double q = std::norm(zp) + xn * xn;
      return std::pow(q, 1.5);
    };
    CappedDomain cd = capped_dilated_domain(h, s.eps);
    out.rho = cd.rho_eps;
    // the capped domain carries its own box; regrid the scenario spec onto it
    sp = GridSpec(out.rho->box().lower, out.rho->box().upper,
                  {s.grid_n, s.grid_n, s.grid_n, s.grid_n});
  } else {
    fail("scenario_generate: unknown domain tag '" + s.domain + "'");
  }

  auto mask = out.rho->mask_on(sp);
  int which = -1;
  if (s.family == "none") {
    out.A = Structure::zero(sp, mask);
    return out;
  } else if (s.family == "poly1") {
    which = 0;
  } else if (s.family == "poly2") {
    which = 1;
  } else if (s.family == "trig") {
    which = 2;
  } else {
    fail("scenario_generate: unknown oracle family tag '" + s.family + "'");
  }

  MapField Phi = oracle_phi_family(sp, which, s.amplitude);
  if (s.amplitude == 0.0) {
    out.A = Structure::zero(sp, mask);
    out.ground_truth = Phi;
    return out;
  }
  // A is the structure straightened by Phi^{-1} = I + psi, so that a correct
  // solve yields Ftilde with Ftilde o Phi holomorphic.
  MapField psi = Phi.inverse();
  out.A = oracle_structure(psi, sp, mask);
  out.ground_truth = Phi;
  return out;
}

}  // namespace acs
