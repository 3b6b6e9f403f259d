// Generates a synthetic handwritten-digit dataset in the classic IDX layout
// ({train,test}-images-idx3-ubyte / -labels-idx1-ubyte) so the training
// pipeline can run without downloading anything.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pcnet/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"synthetic digit dataset generator"};
  std::string dir = "data/digits";
  pcnet::Index train_n = 12000, test_n = 2000;
  std::uint64_t seed = 9001;
  app.add_option("dir", dir, "output directory (created if missing)");
  app.add_option("--train", train_n, "training images");
  app.add_option("--test", test_n, "test images");
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    pcnet::synth::write_digit_files(dir, train_n, test_n, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cout << "wrote " << train_n << " train / " << test_n << " test images under " << dir
            << "\n";
  return 0;
}
