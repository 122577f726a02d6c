#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "tdcr/errors.hpp"
#include "tdcr/experiment.hpp"

namespace fs = std::filesystem;
using namespace tdcr;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every artifact except the wall-clock timings must match byte for byte.
CriterionResult compare_runs(const ReproduceResult& first, const fs::path& dir1, const fs::path& dir2) {
  CriterionResult res{10, "determinism", true, ""};
  int compared = 0;
  for (const std::string& a : first.artifacts) {
    const fs::path name = fs::path(a).filename();
    if (name == "timings.txt") continue;
    ++compared;
    if (!fs::exists(dir2 / name) || slurp(dir1 / name) != slurp(dir2 / name)) {
      res.pass = false;
      res.detail += (res.detail.empty() ? "differs: " : ", ") + name.string();
    }
  }
  if (res.pass) res.detail = std::to_string(compared) + " artifacts byte-identical across two runs";
  return res;
}

void print(const CriterionResult& c) {
  std::cout << "criterion " << c.id << ": " << (c.pass ? "PASS" : "FAIL") << " (" << c.name << ") " << c.detail
            << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Runs every acceptance criterion on the quick profile and checks determinism", "acceptance"};
  std::string out = "acceptance_out";
  std::uint64_t seed = 1;
  std::string profile = "quick";
  app.add_option("--out", out, "Output directory")->capture_default_str();
  app.add_option("--seed", seed, "Root seed")->capture_default_str();
  app.add_option("--profile", profile, "quick or full")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    ReproduceOptions opt;
    opt.profile = profile_from_string(profile);
    opt.seed = seed;
    const fs::path dir1 = fs::path(out) / "run1", dir2 = fs::path(out) / "run2";
    opt.out_dir = dir1.string();
    const ReproduceResult first = reproduce_all(opt);
    opt.out_dir = dir2.string();
    const ReproduceResult second = reproduce_all(opt);

    bool all = true;
    for (const CriterionResult& c : first.criteria) {
      print(c);
      all = all && c.pass;
    }
    const CriterionResult det = compare_runs(first, dir1, dir2);
    print(det);
    all = all && det.pass && second.report == first.report;
    std::cout << (all ? "ALL PASS" : "SOME CRITERIA FAIL") << std::endl;
    return all ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
