#include "pcnet/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace pcnet {
namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;
constexpr Index kCifarRecord = 3073;

std::ifstream open_binary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::io, "cannot open " + path);
  return f;
}

std::uint32_t read_u32_be(std::istream& f, const std::string& path) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  require(f.gcount() == 4, ErrorKind::io, path + " is truncated");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_u32_be(std::ostream& f, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

std::vector<std::uint8_t> read_bytes(std::istream& f, std::size_t n, const std::string& path) {
  std::vector<std::uint8_t> out(n);
  f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(n));
  require(static_cast<std::size_t>(f.gcount()) == n, ErrorKind::io, path + " is truncated");
  return out;
}

}  // namespace

Dataset load_mnist(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs = open_binary(images_path);
  require(read_u32_be(imgs, images_path) == kImagesMagic, ErrorKind::io,
          images_path + " has a bad image-file magic");
  const Index count = static_cast<Index>(read_u32_be(imgs, images_path));
  const Index rows = static_cast<Index>(read_u32_be(imgs, images_path));
  const Index cols = static_cast<Index>(read_u32_be(imgs, images_path));
  require(count > 0 && rows > 0 && cols > 0, ErrorKind::io, images_path + " has empty dimensions");
  const std::vector<std::uint8_t> pix =
      read_bytes(imgs, static_cast<std::size_t>(count * rows * cols), images_path);

  std::ifstream labs = open_binary(labels_path);
  require(read_u32_be(labs, labels_path) == kLabelsMagic, ErrorKind::io,
          labels_path + " has a bad label-file magic");
  const Index lcount = static_cast<Index>(read_u32_be(labs, labels_path));
  require(lcount == count, ErrorKind::io,
          "image count and label count differ (" + std::to_string(count) + " vs " +
              std::to_string(lcount) + ")");
  const std::vector<std::uint8_t> raw = read_bytes(labs, static_cast<std::size_t>(lcount), labels_path);

  Dataset ds;
  ds.inputs = Tensor::uninit({count, rows * cols});
  for (Index i = 0; i < ds.inputs.size(); ++i) ds.inputs[i] = pix[static_cast<std::size_t>(i)] / 255.0;
  ds.labels.reserve(static_cast<std::size_t>(count));
  for (std::uint8_t b : raw) {
    require(b <= 9, ErrorKind::io, labels_path + " holds a label outside 0..9");
    ds.labels.push_back(static_cast<int>(b));
  }
  ds.targets = one_hot(ds.labels, 10);
  return ds;
}

Dataset load_cifar10(const std::vector<std::string>& batch_paths) {
  require(!batch_paths.empty(), ErrorKind::invalid_argument, "no CIFAR batch files given");
  std::vector<std::uint8_t> all;
  for (const std::string& path : batch_paths) {
    std::ifstream f = open_binary(path);
    f.seekg(0, std::ios::end);
    const std::streamoff len = f.tellg();
    require(len > 0 && len % kCifarRecord == 0, ErrorKind::io,
            path + " is not a whole number of 3073-byte records");
    f.seekg(0);
    const std::vector<std::uint8_t> bytes = read_bytes(f, static_cast<std::size_t>(len), path);
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  const Index count = static_cast<Index>(all.size()) / kCifarRecord;
  Dataset ds;
  ds.inputs = Tensor::uninit({count, kCifarRecord - 1});
  ds.labels.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    const std::uint8_t* rec = all.data() + i * kCifarRecord;
    require(rec[0] <= 9, ErrorKind::io, "CIFAR record holds a label outside 0..9");
    ds.labels.push_back(static_cast<int>(rec[0]));
    for (Index j = 0; j < kCifarRecord - 1; ++j) ds.inputs.at(i, j) = rec[1 + j] / 255.0;
  }
  ds.targets = one_hot(ds.labels, 10);
  return ds;
}

void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels,
                      Index count, Index rows, Index cols) {
  require(static_cast<Index>(pixels.size()) == count * rows * cols, ErrorKind::invalid_argument,
          "pixel buffer does not match the stated dimensions");
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::io, "cannot write " + path);
  write_u32_be(f, kImagesMagic);
  write_u32_be(f, static_cast<std::uint32_t>(count));
  write_u32_be(f, static_cast<std::uint32_t>(rows));
  write_u32_be(f, static_cast<std::uint32_t>(cols));
  f.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  require(f.good(), ErrorKind::io, "write to " + path + " failed");
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::io, "cannot write " + path);
  write_u32_be(f, kLabelsMagic);
  write_u32_be(f, static_cast<std::uint32_t>(labels.size()));
  f.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
  require(f.good(), ErrorKind::io, "write to " + path + " failed");
}

Dataset head(const Dataset& ds, Index n) {
  require(n >= 1 && n <= ds.items(), ErrorKind::invalid_argument,
          "subset size " + std::to_string(n) + " is outside 1.." + std::to_string(ds.items()));
  Dataset out;
  out.inputs = Tensor::uninit({n, ds.inputs.cols()});
  out.targets = Tensor::uninit({n, ds.targets.cols()});
  out.inputs.matrix() = ds.inputs.matrix().topRows(n);
  out.targets.matrix() = ds.targets.matrix().topRows(n);
  out.labels.assign(ds.labels.begin(), ds.labels.begin() + n);
  return out;
}

Batch take_batch(const Dataset& ds, const std::vector<Index>& order, Index start, Index count) {
  require(start >= 0 && count >= 1 && start + count <= static_cast<Index>(order.size()),
          ErrorKind::invalid_argument, "batch slice is out of range");
  Batch b;
  b.x = Tensor::uninit({count, ds.inputs.cols()});
  b.y = Tensor::uninit({count, ds.targets.cols()});
  for (Index i = 0; i < count; ++i) {
    const Index r = order[static_cast<std::size_t>(start + i)];
    b.x.matrix().row(i) = ds.inputs.matrix().row(r);
    b.y.matrix().row(i) = ds.targets.matrix().row(r);
  }
  return b;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<int> Tokenizer::encode(const std::string& sentence) const {
  std::vector<int> out;
  for (const std::string& w : split_words(sentence)) {
    auto it = ids.find(w);
    out.push_back(it == ids.end() ? unk : it->second);
  }
  return out;
}

std::string Tokenizer::decode(const std::vector<int>& token_ids) const {
  std::string out;
  for (int id : token_ids) {
    require(id >= 0 && id < size(), ErrorKind::invalid_argument,
            "token id " + std::to_string(id) + " is outside the vocabulary");
    if (id == pad || id == sos || id == eos) continue;
    if (!out.empty()) out.push_back(' ');
    out += words[static_cast<std::size_t>(id)];
  }
  return out;
}

Tokenizer build_vocab(const std::vector<std::string>& sentences, int size) {
  require(size >= 4, ErrorKind::invalid_argument, "vocabulary size must be at least 4");
  std::unordered_map<std::string, std::int64_t> counts;
  for (const std::string& s : sentences)
    for (const std::string& w : split_words(s)) ++counts[w];
  require(!counts.empty(), ErrorKind::invalid_argument, "corpus holds no words");

  std::vector<std::pair<std::string, std::int64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Tokenizer tok;
  tok.words = {"<pad>", "<sos>", "<eos>", "<unk>"};
  const std::size_t keep = std::min(ranked.size(), static_cast<std::size_t>(size - 4));
  for (std::size_t i = 0; i < keep; ++i) tok.words.push_back(ranked[i].first);
  for (std::size_t i = 0; i < tok.words.size(); ++i) tok.ids[tok.words[i]] = static_cast<int>(i);
  return tok;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorKind::io, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

LmBatcher::LmBatcher(std::vector<std::vector<int>> sentences, Index batch, Index max_len,
                     std::uint64_t seed)
    : sents_(std::move(sentences)), batch_(batch) {
  require(batch_ >= 1, ErrorKind::invalid_argument, "batch size must be positive");
  require(max_len >= 3, ErrorKind::invalid_argument, "max sequence length must be at least 3");
  require(!sents_.empty(), ErrorKind::invalid_argument, "no sentences to batch");
  const std::size_t body = static_cast<std::size_t>(max_len - 2);
  for (auto& s : sents_)
    if (s.size() > body) s.resize(body);
  reset(seed);
}

void LmBatcher::reset(std::uint64_t seed) {
  Rng rng(seed);
  order_ = rng.permutation(static_cast<Index>(sents_.size()));
  pos_ = 0;
}

Index LmBatcher::batches() const {
  const Index n = static_cast<Index>(sents_.size());
  return (n + batch_ - 1) / batch_;
}

bool LmBatcher::next(TokenBatch& out) {
  const Index n = static_cast<Index>(sents_.size());
  if (pos_ >= n) return false;
  const Index take = std::min(batch_, n - pos_);

  Index longest = 0;
  for (Index i = 0; i < take; ++i) {
    const auto& s = sents_[static_cast<std::size_t>(order_[static_cast<std::size_t>(pos_ + i)])];
    longest = std::max(longest, static_cast<Index>(s.size()) + 2);
  }

  out.rows.assign(static_cast<std::size_t>(take), {});
  out.lengths.assign(static_cast<std::size_t>(take), 0);
  for (Index i = 0; i < take; ++i) {
    const auto& s = sents_[static_cast<std::size_t>(order_[static_cast<std::size_t>(pos_ + i)])];
    std::vector<int>& row = out.rows[static_cast<std::size_t>(i)];
    row.reserve(static_cast<std::size_t>(longest));
    row.push_back(Tokenizer::sos);
    row.insert(row.end(), s.begin(), s.end());
    row.push_back(Tokenizer::eos);
    out.lengths[static_cast<std::size_t>(i)] = static_cast<int>(row.size());
    row.resize(static_cast<std::size_t>(longest), Tokenizer::pad);
  }
  pos_ += take;
  return true;
}

Batch to_engine_batch(const TokenBatch& tb) {
  Batch b;
  b.seqs.reserve(tb.rows.size());
  for (std::size_t i = 0; i < tb.rows.size(); ++i) {
    const auto& row = tb.rows[i];
    b.seqs.emplace_back(row.begin(), row.begin() + tb.lengths[i]);
  }
  return b;
}

std::vector<std::vector<int>> wrap_sentences(const std::vector<std::vector<int>>& raw,
                                             Index max_len) {
  require(max_len >= 3, ErrorKind::invalid_argument, "max sequence length must be at least 3");
  const std::size_t body = static_cast<std::size_t>(max_len - 2);
  std::vector<std::vector<int>> out;
  out.reserve(raw.size());
  for (const auto& s : raw) {
    std::vector<int> w;
    w.reserve(std::min(s.size(), body) + 2);
    w.push_back(Tokenizer::sos);
    w.insert(w.end(), s.begin(), s.begin() + static_cast<std::ptrdiff_t>(std::min(s.size(), body)));
    w.push_back(Tokenizer::eos);
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace pcnet
