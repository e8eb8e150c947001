// Writes the synthetic regression benchmark to a CSV, for experiments when no
// real dataset is at hand.

#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "saf/data.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic regression benchmark CSV"};
  std::string out = "synthetic.csv";
  int n = 498;
  std::uint64_t seed = 1;
  app.add_option("--out", out, "output CSV path")->capture_default_str();
  app.add_option("--n", n, "number of samples")->capture_default_str();
  app.add_option("--seed", seed, "generator seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    saf::save_csv(saf::make_synthetic_regression(n, seed), out);
    std::fprintf(stderr, "wrote %d samples to %s\n", n, out.c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
