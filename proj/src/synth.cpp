#include "pcnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_set>

namespace pcnet::synth {
namespace {

struct Pt {
  double x, y;
};
using Stroke = std::vector<Pt>;

Stroke ring(double cx, double cy, double rx, double ry, int n = 16) {
  Stroke s;
  for (int i = 0; i <= n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return s;
}

// Stroke skeletons in a unit box, x right, y down.
std::vector<Stroke> glyph(int digit) {
  switch (digit) {
    case 0:
      return {ring(0.5, 0.5, 0.23, 0.38)};
    case 1:
      return {{{0.34, 0.28}, {0.52, 0.12}, {0.52, 0.9}}, {{0.36, 0.9}, {0.68, 0.9}}};
    case 2:
      return {{{0.26, 0.3}, {0.3, 0.16}, {0.5, 0.1}, {0.7, 0.16}, {0.74, 0.32},
               {0.64, 0.5}, {0.4, 0.68}, {0.26, 0.88}},
              {{0.26, 0.88}, {0.76, 0.88}}};
    case 3:
      return {{{0.28, 0.18}, {0.45, 0.1}, {0.64, 0.16}, {0.69, 0.3}, {0.58, 0.44}, {0.45, 0.48}},
              {{0.45, 0.48}, {0.64, 0.54}, {0.72, 0.7}, {0.6, 0.86}, {0.4, 0.9}, {0.26, 0.82}}};
    case 4:
      return {{{0.62, 0.1}, {0.22, 0.62}, {0.78, 0.62}}, {{0.62, 0.1}, {0.62, 0.9}}};
    case 5:
      return {{{0.72, 0.1}, {0.3, 0.1}, {0.28, 0.46}},
              {{0.28, 0.46}, {0.5, 0.4}, {0.68, 0.48}, {0.73, 0.64}, {0.64, 0.8},
               {0.46, 0.9}, {0.27, 0.83}}};
    case 6:
      return {{{0.64, 0.1}, {0.45, 0.18}, {0.32, 0.38}, {0.27, 0.6}, {0.32, 0.78},
               {0.48, 0.9}, {0.64, 0.82}, {0.69, 0.66}, {0.6, 0.52}, {0.44, 0.5},
               {0.31, 0.6}}};
    case 7:
      return {{{0.24, 0.1}, {0.76, 0.1}, {0.44, 0.9}}};
    case 8:
      return {ring(0.5, 0.3, 0.18, 0.17, 12), ring(0.5, 0.67, 0.22, 0.21, 12)};
    case 9:
      return {ring(0.52, 0.32, 0.19, 0.2, 12),
              {{0.71, 0.35}, {0.69, 0.68}, {0.56, 0.9}, {0.4, 0.88}}};
    default:
      fail(ErrorKind::invalid_argument, "digit must be 0..9");
  }
}

double seg_dist(Pt p, Pt a, Pt b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = p.x - (a.x + t * dx), ey = p.y - (a.y + t * dy);
  return std::sqrt(ex * ex + ey * ey);
}

}  // namespace

std::vector<std::uint8_t> render_digit(int digit, Rng& rng) {
  const double theta = rng.uniform(-0.3, 0.3);
  const double sx = rng.uniform(0.7, 1.18);
  const double sy = rng.uniform(0.7, 1.18);
  const double shear = rng.uniform(-0.28, 0.28);
  const double tx = rng.uniform(-2.0, 2.0);
  const double ty = rng.uniform(-2.0, 2.0);
  const double radius = rng.uniform(0.6, 1.5);
  const double bright = rng.uniform(0.62, 1.0);
  const double gamma = rng.uniform(0.72, 1.38);
  const double noise = rng.uniform(0.02, 0.07);
  const double ct = std::cos(theta), st = std::sin(theta);

  // unit box -> 28x28 pixel space with a 3px margin, jitter applied last
  auto to_px = [&](Pt p) -> Pt {
    const double x = (p.x - 0.5) * sx + (p.y - 0.5) * shear, y = (p.y - 0.5) * sy;
    return {(ct * x - st * y + 0.5) * 22.0 + 3.0 + tx, (st * x + ct * y + 0.5) * 22.0 + 3.0 + ty};
  };

  std::vector<Stroke> strokes = glyph(digit);
  for (Stroke& s : strokes)
    for (Pt& p : s) p = to_px(p);

  std::vector<std::uint8_t> img(28 * 28, 0);
  for (int i = 0; i < 28; ++i)
    for (int j = 0; j < 28; ++j) {
      const Pt p{j + 0.5, i + 0.5};
      double d = 1e9;
      for (const Stroke& s : strokes)
        for (std::size_t k = 0; k + 1 < s.size(); ++k) d = std::min(d, seg_dist(p, s[k], s[k + 1]));
      double v = std::pow(std::clamp((radius + 0.7 - d) / 0.7, 0.0, 1.0), gamma) * bright;
      v += rng.normal() * noise;
      img[static_cast<std::size_t>(i * 28 + j)] =
          static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
    }
  return img;
}

Dataset make_digit_dataset(Index n, std::uint64_t seed) {
  require(n >= 1, ErrorKind::invalid_argument, "dataset size must be positive");
  Rng rng(seed);
  Dataset ds;
  ds.inputs = Tensor::uninit({n, 784});
  ds.labels.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 10);
    const std::vector<std::uint8_t> img = render_digit(label, rng);
    for (Index j = 0; j < 784; ++j) ds.inputs.at(i, j) = img[static_cast<std::size_t>(j)] / 255.0;
    ds.labels.push_back(label);
  }
  ds.targets = one_hot(ds.labels, 10);
  return ds;
}

void write_digit_files(const std::string& dir, Index train_n, Index test_n, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  Rng rng(seed);
  auto emit = [&](const std::string& stem, Index n, Rng r) {
    std::vector<std::uint8_t> pixels;
    pixels.reserve(static_cast<std::size_t>(n) * 784);
    std::vector<std::uint8_t> labels;
    labels.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const int label = static_cast<int>(i % 10);
      const std::vector<std::uint8_t> img = render_digit(label, r);
      pixels.insert(pixels.end(), img.begin(), img.end());
      labels.push_back(static_cast<std::uint8_t>(label));
    }
    write_idx_images(dir + "/" + stem + "-images-idx3-ubyte", pixels, n, 28, 28);
    write_idx_labels(dir + "/" + stem + "-labels-idx1-ubyte", labels);
  };
  emit("train", train_n, rng.fork(1));
  emit("test", test_n, rng.fork(2));
}

namespace {

const char* kConsonants[] = {"b", "d", "f", "g", "h", "j", "k", "l", "m",
                             "n", "p", "r", "s", "t", "v", "w", "z"};
const char* kVowels[] = {"a", "e", "i", "o", "u"};

std::string pseudo_word(Rng& rng, int syllables) {
  std::string w;
  for (int s = 0; s < syllables; ++s) {
    w += kConsonants[rng.below(17)];
    w += kVowels[rng.below(5)];
  }
  return w;
}

std::vector<std::string> word_bank(Index n, Rng& rng, std::unordered_set<std::string>& used) {
  std::vector<std::string> bank;
  bank.reserve(static_cast<std::size_t>(n));
  while (static_cast<Index>(bank.size()) < n) {
    std::string w = pseudo_word(rng, 2 + static_cast<int>(rng.below(2)));
    if (used.insert(w).second) bank.push_back(std::move(w));
  }
  return bank;
}

Tensor zipf_weights(Index n) {
  Tensor w = Tensor::uninit({n});
  for (Index i = 0; i < n; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i) + 2.0, 1.05);
  return w;
}

struct Lexicon {
  std::vector<std::string> nouns, verbs, adjs, advs;
  Tensor wn, wv, wa, wd;

  explicit Lexicon(std::uint64_t seed) {
    Rng rng(seed);
    std::unordered_set<std::string> used = {"the",  "a",    "one", "this", "that", "each",
                                            "some", "in",   "on",  "under", "near", "with",
                                            "from", "over", "and", "but",  "so"};
    nouns = word_bank(700, rng, used);
    verbs = word_bank(520, rng, used);
    adjs = word_bank(600, rng, used);
    advs = word_bank(260, rng, used);
    wn = zipf_weights(700);
    wv = zipf_weights(520);
    wa = zipf_weights(600);
    wd = zipf_weights(260);
  }
};

const char* kDet[] = {"the", "the", "the", "a", "a", "one", "this", "that", "each", "some"};
const char* kPrep[] = {"in", "on", "under", "near", "with", "from", "over"};
const char* kConj[] = {"and", "but", "so"};

void clause(const Lexicon& lex, Rng& rng, std::string& out) {
  auto word = [&](const std::vector<std::string>& bank, const Tensor& w) -> const std::string& {
    return bank[static_cast<std::size_t>(rng.categorical(w.array()))];
  };
  auto push = [&](const std::string& w) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  };
  push(kDet[rng.below(10)]);
  if (rng.uniform() < 0.45) push(word(lex.adjs, lex.wa));
  push(word(lex.nouns, lex.wn));
  if (rng.uniform() < 0.3) push(word(lex.advs, lex.wd));
  push(word(lex.verbs, lex.wv));
  if (rng.uniform() < 0.75) {
    push(kDet[rng.below(10)]);
    if (rng.uniform() < 0.35) push(word(lex.adjs, lex.wa));
    push(word(lex.nouns, lex.wn));
  }
  if (rng.uniform() < 0.4) {
    push(kPrep[rng.below(7)]);
    push(kDet[rng.below(10)]);
    push(word(lex.nouns, lex.wn));
  }
}

}  // namespace

std::vector<std::string> make_sentences(Index n, std::uint64_t seed) {
  require(n >= 1, ErrorKind::invalid_argument, "sentence count must be positive");
  static const Lexicon lex(0x5eedf00d);  // fixed inventory, independent of the stream seed
  Rng rng(seed);
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    std::string s;
    clause(lex, rng, s);
    if (rng.uniform() < 0.35) {
      std::string tail;
      clause(lex, rng, tail);
      s += ' ';
      s += kConj[rng.below(3)];
      s += ' ';
      s += tail;
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_corpus_files(const std::string& dir, Index train_n, Index test_n, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  Rng rng(seed);
  auto emit = [&](const std::string& name, Index n, std::uint64_t s) {
    const std::vector<std::string> lines = make_sentences(n, s);
    std::ofstream f(dir + "/" + name);
    require(f.good(), ErrorKind::io, "cannot write " + dir + "/" + name);
    for (const std::string& l : lines) f << l << '\n';
    require(f.good(), ErrorKind::io, "write to " + dir + "/" + name + " failed");
  };
  emit("train.txt", train_n, rng.next_u64());
  emit("test.txt", test_n, rng.next_u64());
}

}  // namespace pcnet::synth
