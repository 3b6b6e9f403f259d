#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "pcnet/model.hpp"

namespace pcnet {

// A labelled dataset: inputs scaled to [0,1], one-hot targets, raw labels.
struct Dataset {
  Tensor inputs;
  Tensor targets;
  std::vector<int> labels;

  Index items() const { return inputs.empty() ? 0 : inputs.rows(); }
};

// IDX image/label pair (big-endian magics 0x00000803 / 0x00000801).
// Pixels are mapped to [0,1]; labels must be digits 0..9.
Dataset load_mnist(const std::string& images_path, const std::string& labels_path);

// CIFAR-10 binary batches: 3073-byte records, 1 label byte + 3072 pixel bytes.
Dataset load_cifar10(const std::vector<std::string>& batch_paths);

// Writers for the same formats, used by the dataset generator and tests.
void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels,
                      Index count, Index rows, Index cols);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

Dataset head(const Dataset& ds, Index n);

// Gathers order[start..start+count) into a training batch.
Batch take_batch(const Dataset& ds, const std::vector<Index>& order, Index start, Index count);

// Word-level tokenizer with four reserved markers.
struct Tokenizer {
  static constexpr int pad = 0;
  static constexpr int sos = 1;
  static constexpr int eos = 2;
  static constexpr int unk = 3;

  std::vector<std::string> words;  // id -> surface form, markers included
  std::unordered_map<std::string, int> ids;

  int size() const { return static_cast<int>(words.size()); }
  std::vector<int> encode(const std::string& sentence) const;  // no markers added
  std::string decode(const std::vector<int>& token_ids) const;  // markers skipped
};

// Lowercased alphanumeric word stream; everything else separates words.
std::vector<std::string> split_words(const std::string& text);

// Frequency-ranked vocabulary of (size - 4) words; ties break alphabetically.
Tokenizer build_vocab(const std::vector<std::string>& sentences, int size);

// Non-empty lines of a UTF-8 text file, one sentence per line.
std::vector<std::string> read_lines(const std::string& path);

// Rectangular token-id batch: <sos> w1 .. wn <eos> then <pad> fill.
struct TokenBatch {
  std::vector<std::vector<int>> rows;  // equal widths
  std::vector<int> lengths;            // non-pad count per row, >= 2

  Index width() const { return rows.empty() ? 0 : static_cast<Index>(rows[0].size()); }
  Index items() const { return static_cast<Index>(rows.size()); }
};

// Deterministic shuffled stream of TokenBatches over encoded sentences.
// Sentences are truncated to max_len - 2 tokens before markers are added,
// and each batch is padded to its own longest row.
class LmBatcher {
 public:
  LmBatcher(std::vector<std::vector<int>> sentences, Index batch, Index max_len,
            std::uint64_t seed);

  bool next(TokenBatch& out);          // false once the epoch is exhausted
  void reset(std::uint64_t seed);      // reshuffle and restart
  Index batches() const;
  Index sentences() const { return static_cast<Index>(sents_.size()); }

 private:
  std::vector<std::vector<int>> sents_;
  std::vector<Index> order_;
  Index batch_;
  Index pos_ = 0;
};

// Strips padding; row i keeps its first lengths[i] ids.
Batch to_engine_batch(const TokenBatch& tb);

// <sos> + sentence (truncated to max_len - 2 tokens) + <eos>, for evaluation
// paths that bypass the batcher.
std::vector<std::vector<int>> wrap_sentences(const std::vector<std::vector<int>>& raw,
                                             Index max_len);

}  // namespace pcnet
