// Acceptance gate: one PASS/FAIL line per criterion. The scenario reports
// carry the measurements; this program maps them onto the criteria and
// checks the runtime budgets. argv[1] is the CLI used for the determinism
// criterion.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "finsler/error.hpp"
#include "finsler/harness.hpp"

using namespace finsler;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  int id;
  std::string title;
  bool passed = true;
  std::ostringstream detail;

  void require(const RunReport& r, const std::string& check) {
    const auto& c = r.check(check);
    passed = passed && c.passed;
    detail << ' ' << r.scenario << '/' << check << '=' << c.measured << (c.passed ? "" : "(FAIL)");
  }
  void budget(const std::string& what, double seconds, double limit) {
    const bool ok = seconds < limit;
    passed = passed && ok;
    detail << ' ' << what << ' ' << seconds << "s<" << limit << 's' << (ok ? "" : "(FAIL)");
  }
};

double timing(const RunReport& r, const std::vector<std::string>& checks) {
  double t = 0.0;
  for (const auto& c : checks) t += r.timings.at(c);
  return t;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Runs `cli run katok-torus --seed 7` into root/<tag> and loads the report.
RunReport cli_katok_torus(const std::string& cli, const fs::path& root, const std::string& tag, std::string& bytes) {
  const fs::path out = root / tag;
  const std::string cmd = "\"" + cli + "\" run katok-torus --seed 7 --out \"" + out.string() + "\" > \"" +
                          (root / (tag + ".log")).string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  // A failing scenario exits 1 but still writes its report.
  if (status != 0 && !fs::exists(out / "katok-torus" / "latest" / "report.json")) {
    throw Error(ErrorKind::IoFailure, "CLI run failed: " + cmd);
  }
  const fs::path dir = out / "katok-torus" / "latest";
  bytes = slurp(dir / "report.json");
  auto report = RunReport::from_json(nlohmann::json::parse(bytes));
  // Bound to a name: items() does not extend the lifetime of a temporary.
  const auto timings = nlohmann::json::parse(slurp(dir / "timings.json"));
  for (const auto& [k, v] : timings.items()) report.timings[k] = v.get<double>();
  return report;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <path to finsler_cli>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path root = fs::temp_directory_path() / "finsler_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  std::vector<Criterion> out(12);
  std::string stage;
  try {
    stage = "round-sphere-baseline";
    const auto sphere = run_scenario(stage);
    stage = "katok-sphere";
    const auto katok = run_scenario(stage);
    stage = "benchmark-maps";
    const auto bench = run_scenario(stage);
    stage = "appendix-smooth-division";
    const auto appendix = run_scenario(stage);
    std::string bytes_a;
    std::string bytes_b;
    stage = "CLI katok-torus run a";
    const auto torus = cli_katok_torus(cli, root, "a", bytes_a);
    stage = "CLI katok-torus run b";
    cli_katok_torus(cli, root, "b", bytes_b);
    stage = "criteria";

    auto& c1 = out[0];
    c1.title = "Finsler axioms and fiber convexity for H0 and the Katok family";
    c1.require(sphere, "finsler_axioms");
    c1.require(sphere, "fiber_convexity");
    c1.require(katok, "finsler_axioms");
    c1.require(katok, "fiber_convexity");
    c1.budget("runtime", timing(sphere, {"finsler_axioms", "fiber_convexity"}) +
                             timing(katok, {"finsler_axioms", "fiber_convexity"}),
              5.0);

    auto& c2 = out[1];
    c2.title = "Locality of the Katok perturbation outside U_a1 and inside U_a0";
    c2.require(katok, "locality_outside");
    c2.require(katok, "locality_inside");

    auto& c3 = out[2];
    c3.title = "Round-sphere flow is 2 pi periodic on U_0.5";
    c3.require(sphere, "periodicity_2pi");
    c3.budget("runtime", timing(sphere, {"periodicity_2pi"}), 30.0);

    auto& c4 = out[3];
    c4.title = "Direct Katok flow equals the composed commuting flows";
    c4.require(katok, "commuting_flows");

    auto& c5 = out[4];
    c5.title = "Reversibilization is even and its branches share a 3-jet across the seam";
    c5.require(katok, "reversibility");
    c5.require(katok, "seam_jet");

    auto& c6 = out[5];
    c6.title = "Round-sphere return map is the identity with return time 2 pi, boundary extension 2 pi";
    c6.require(sphere, "return_map_identity");
    c6.require(sphere, "return_time_2pi");
    c6.require(sphere, "boundary_extension");

    auto& c7 = out[6];
    c7.title = "Smooth division derivative identity for k = 0, 1, 2";
    c7.require(appendix, "derivative_identity_k0");
    c7.require(appendix, "derivative_identity_k1");
    c7.require(appendix, "derivative_identity_k2");

    auto& c8 = out[7];
    c8.title = "Conservation of H and xi1 over F-time 100 on all scenario orbits";
    c8.require(sphere, "conservation");
    c8.require(katok, "conservation");
    c8.require(torus, "conservation");

    auto& c9 = out[8];
    c9.title = "Entropy estimator on benchmarks and zero-entropy systems";
    for (const char* c : {"entropy_identity", "entropy_rotation", "entropy_doubling", "entropy_cat"}) c9.require(bench, c);
    c9.require(katok, "return_map_entropy");
    c9.require(torus, "integrable_time1_entropy");
    c9.budget("runtime",
              timing(bench, {"entropy_identity", "entropy_rotation", "entropy_doubling", "entropy_cat"}) +
                  timing(katok, {"return_map_entropy"}) + timing(torus, {"integrable_time1_entropy"}),
              300.0);

    auto& c10 = out[9];
    c10.title = "Invariant graphs, deviation stabilization and trapped turning points";
    c10.require(torus, "level_set_graphs");
    c10.require(torus, "deviation_stabilization");
    c10.require(torus, "trapped_turning_point");

    auto& c11 = out[10];
    c11.title = "Tube diagnostics on the Katok torus";
    c11.require(torus, "tube_conservation");
    c11.require(torus, "tube_witnesses");
    c11.require(torus, "tube_boundary_fraction_monotone");

    auto& c12 = out[11];
    c12.title = "Two CLI runs of katok-torus --seed 7 give byte-identical reports";
    c12.passed = !bytes_a.empty() && bytes_a == bytes_b;
    c12.detail << ' ' << bytes_a.size() << " bytes";
  } catch (const std::exception& e) {
    std::cerr << "acceptance aborted during " << stage << ": " << e.what() << '\n';
    for (auto& c : out) {
      if (c.title.empty()) {
        c.title = "not evaluated";
        c.passed = false;
      }
    }
  }

  bool all = true;
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::cout << "criterion " << (i + 1) << ": " << (out[i].passed ? "PASS" : "FAIL") << " - " << out[i].title << " |"
              << out[i].detail.str() << '\n';
    all = all && out[i].passed;
  }
  std::cout << (all ? "acceptance: all criteria pass" : "acceptance: FAILED") << '\n';
  return all ? 0 : 1;
}
