#include "pcnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace pcnet {

static_assert(std::endian::native == std::endian::little,
              "the checkpoint format stores raw little-endian float64 blobs");

namespace {

constexpr char kMagic[8] = {'P', 'C', 'C', 'K', 'P', 'T', '0', '1'};

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ck) {
  nlohmann::json header = {{"experiment", ck.experiment},
                           {"trainer", ck.trainer},
                           {"objective", ck.objective},
                           {"config", ck.config},
                           {"params", nlohmann::json::array()}};
  for (const Param& p : ck.params) {
    header["params"].push_back({{"name", p.name}, {"shape", p.value.shape()}});
  }
  const std::string head = header.dump();

  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::io, "cannot write " + path);
  f.write(kMagic, 8);
  const std::uint32_t len = static_cast<std::uint32_t>(head.size());
  f.write(reinterpret_cast<const char*>(&len), 4);
  f.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const Param& p : ck.params)
    f.write(reinterpret_cast<const char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.size()) * 8);
  require(f.good(), ErrorKind::io, "write to " + path + " failed");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::io, "cannot open " + path);

  char magic[8];
  f.read(magic, 8);
  require(f.gcount() == 8 && std::memcmp(magic, kMagic, 8) == 0, ErrorKind::io,
          path + " is not a checkpoint file");

  std::uint32_t len = 0;
  f.read(reinterpret_cast<char*>(&len), 4);
  require(f.gcount() == 4, ErrorKind::io, path + " is truncated");
  std::string head(len, '\0');
  f.read(head.data(), static_cast<std::streamsize>(len));
  require(f.gcount() == static_cast<std::streamsize>(len), ErrorKind::io, path + " is truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(head);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io, path + " holds a malformed header: " + e.what());
  }

  Checkpoint ck;
  try {
    ck.experiment = header.at("experiment").get<std::string>();
    ck.trainer = header.at("trainer").get<std::string>();
    ck.objective = header.at("objective").get<std::string>();
    ck.config = header.at("config");
    for (const auto& entry : header.at("params")) {
      const Shape shape = entry.at("shape").get<Shape>();
      Tensor t = Tensor::uninit(shape);
      f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size()) * 8);
      require(f.gcount() == static_cast<std::streamsize>(t.size()) * 8, ErrorKind::io,
              path + " is truncated");
      require(t.all_finite(), ErrorKind::io,
              path + " holds non-finite values for " + entry.at("name").get<std::string>());
      ck.params.push_back({entry.at("name").get<std::string>(), std::move(t)});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io, path + " holds an incomplete header: " + e.what());
  }
  return ck;
}

void apply_params(const Checkpoint& ck, ParamStore& store) {
  require(static_cast<Index>(ck.params.size()) == store.count(), ErrorKind::config,
          "checkpoint holds " + std::to_string(ck.params.size()) + " parameters, the model " +
              std::to_string(store.count()));
  for (const Param& p : ck.params) {
    const Index pid = store.find(p.name);
    require(pid >= 0, ErrorKind::config, "checkpoint parameter " + p.name + " is unknown to the model");
    Tensor& dst = store.at(pid).value;
    require(dst.same_shape(p.value), ErrorKind::config,
            "checkpoint parameter " + p.name + " has shape " + p.value.shape_str() +
                ", the model expects " + dst.shape_str());
    dst = p.value;
  }
}

}  // namespace pcnet
