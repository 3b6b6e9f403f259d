// Generates the bundled pseudo-language corpus (train.txt / test.txt, one
// sentence per line) for the language-model experiment.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pcnet/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"synthetic corpus generator"};
  std::string dir = "data/corpus";
  pcnet::Index train_n = 7000, test_n = 800;
  std::uint64_t seed = 9001;
  app.add_option("dir", dir, "output directory (created if missing)");
  app.add_option("--train", train_n, "training sentences");
  app.add_option("--test", test_n, "test sentences");
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    pcnet::synth::write_corpus_files(dir, train_n, test_n, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cout << "wrote " << train_n << " train / " << test_n << " test sentences under " << dir
            << "\n";
  return 0;
}
