#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcnet/data.hpp"

namespace pcnet::synth {

// Renders one 28x28 anti-aliased glyph of the given digit with random
// affine jitter (rotation, anisotropic scale, shear, translation), stroke
// weight, brightness, gamma, and additive pixel noise.
std::vector<std::uint8_t> render_digit(int digit, Rng& rng);

// Balanced in-memory digit dataset; item i has label i mod 10.
Dataset make_digit_dataset(Index n, std::uint64_t seed);

// Writes {train,test}-{images-idx3,labels-idx1}-ubyte under dir.
void write_digit_files(const std::string& dir, Index train_n, Index test_n, std::uint64_t seed);

// Grammar-generated pseudo-language sentences, one per string, ~2000-word
// inventory with a Zipf frequency profile. Deterministic under seed.
std::vector<std::string> make_sentences(Index n, std::uint64_t seed);

// Writes train.txt and test.txt (disjoint sentence streams) under dir.
void write_corpus_files(const std::string& dir, Index train_n, Index test_n, std::uint64_t seed);

}  // namespace pcnet::synth
