// Copyright 2026 The zsdgen Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "zsd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <string>

namespace zsd {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[8] = {'Z', 'S', 'D', 'C', 'K', 'P', 'T', '\0'};

using nlohmann::json;

std::string activation_name(ad::Activation a) {
  switch (a) {
    case ad::Activation::kIdentity: return "identity";
    case ad::Activation::kRelu: return "relu";
    case ad::Activation::kLeakyRelu: return "leaky_relu";
    case ad::Activation::kTanh: return "tanh";
  }
  return "identity";
}

ad::Activation parse_activation(const std::string& s) {
  if (s == "identity") return ad::Activation::kIdentity;
  if (s == "relu") return ad::Activation::kRelu;
  if (s == "leaky_relu") return ad::Activation::kLeakyRelu;
  if (s == "tanh") return ad::Activation::kTanh;
  throw DataError("checkpoint: unknown activation '" + s + "'");
}

class TensorTable {
 public:
  void add(std::string name, const Matrix& m) { entries_.emplace_back(std::move(name), m); }

  [[nodiscard]] json describe() const {
    json out = json::array();
    for (const auto& [name, m] : entries_) {
      out.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    }
    return out;
  }

  void write(std::ostream& os) const {
    for (const auto& [name, m] : entries_) {
      os.write(reinterpret_cast<const char*>(m.data()),
               static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
  }

 private:
  std::vector<std::pair<std::string, Matrix>> entries_;
};

json describe_net(const gan::Net& net, const std::string& prefix, TensorTable& table) {
  const auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    table.add(prefix + "/" + std::to_string(i) + "/weight", layers[i].weight);
    table.add(prefix + "/" + std::to_string(i) + "/bias", layers[i].bias);
  }
  return {{"layers", layers.size()},
          {"hidden", activation_name(net.hidden_activation())},
          {"output", activation_name(net.output_activation())}};
}

json describe_head(const ClassifierHead& head, const std::string& prefix, TensorTable& table) {
  json blocks = json::array();
  for (std::size_t i = 0; i < head.blocks().size(); ++i) {
    const auto& b = head.blocks()[i];
    table.add(prefix + "/" + std::to_string(i) + "/weight", b.weight);
    table.add(prefix + "/" + std::to_string(i) + "/bias", b.bias);
    blocks.push_back({{"class_ids", b.class_ids}});
  }
  return {{"blocks", blocks}};
}

class TensorReader {
 public:
  TensorReader(const json& table, std::istream& is, const std::filesystem::path& path) {
    for (const auto& e : table) {
      const auto rows = e.at("rows").get<Eigen::Index>();
      const auto cols = e.at("cols").get<Eigen::Index>();
      if (rows < 0 || cols < 0) throw DataError("checkpoint " + path.string() + ": negative shape");
      Matrix m(rows, cols);
      is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
      if (!is) {
        throw DataError("checkpoint " + path.string() + ": truncated at tensor '" +
                        e.at("name").get<std::string>() + "'");
      }
      tensors_.emplace(e.at("name").get<std::string>(), std::move(m));
    }
  }

  Matrix take(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw DataError("checkpoint: missing tensor '" + name + "'");
    Matrix m = std::move(it->second);
    tensors_.erase(it);
    return m;
  }

 private:
  std::map<std::string, Matrix> tensors_;
};

gan::Net read_net(const json& desc, const std::string& prefix, TensorReader& reader) {
  const auto n = desc.at("layers").get<std::size_t>();
  if (n == 0) return {};
  std::vector<ad::Dense<double>> layers;
  for (std::size_t i = 0; i < n; ++i) {
    ad::Dense<double> l;
    l.weight = reader.take(prefix + "/" + std::to_string(i) + "/weight");
    l.bias = reader.take(prefix + "/" + std::to_string(i) + "/bias");
    layers.push_back(std::move(l));
  }
  return gan::Net(std::move(layers), parse_activation(desc.at("hidden").get<std::string>()),
                  parse_activation(desc.at("output").get<std::string>()));
}

ClassifierHead read_head(const json& desc, const std::string& prefix, TensorReader& reader) {
  std::vector<HeadBlock> blocks;
  const auto& list = desc.at("blocks");
  for (std::size_t i = 0; i < list.size(); ++i) {
    HeadBlock b;
    b.weight = reader.take(prefix + "/" + std::to_string(i) + "/weight");
    const Matrix bias = reader.take(prefix + "/" + std::to_string(i) + "/bias");
    b.bias = bias.row(0);
    b.class_ids = list[i].at("class_ids").get<std::vector<int>>();
    blocks.push_back(std::move(b));
  }
  return ClassifierHead(std::move(blocks));
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  TensorTable table;
  json units = json::object();
  for (gan::Unit u : gan::kAllUnits) {
    const std::string name(gan::unit_name(u));
    const auto& p = ck.model.unit(u);
    units[name] = {{"trained", ck.model.trained[gan::index(u)]},
                   {"generator", describe_net(p.generator, name + "/generator", table)},
                   {"discriminator", describe_net(p.discriminator, name + "/discriminator", table)}};
  }
  json header = {{"dims",
                  {{"feature", ck.model.feature_dim},
                   {"embedding", ck.model.embedding_dim},
                   {"noise", ck.model.noise_dim},
                   {"hidden", ck.model.hidden_dim}}},
                 {"units", units},
                 {"world", {{"seen", ck.world.seen}, {"unseen", ck.world.unseen}}},
                 {"config", ck.config}};
  table.add("world/embeddings", ck.world.embeddings);
  table.add("world/prototypes", ck.world.prototypes);
  if (ck.seen_head) header["seen_head"] = describe_head(*ck.seen_head, "seen_head", table);
  if (ck.unseen_head) header["unseen_head"] = describe_head(*ck.unseen_head, "unseen_head", table);
  header["tensors"] = table.describe();

  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t length = text.size();
  os.write(kMagic, sizeof(kMagic));
  os.write(reinterpret_cast<const char*>(&version), sizeof(version));
  os.write(reinterpret_cast<const char*>(&length), sizeof(length));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  table.write(os);
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t length = 0;
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path.string() + " is not a zsdgen checkpoint (bad magic)");
  }
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  is.read(reinterpret_cast<char*>(&length), sizeof(length));
  if (!is) throw DataError("checkpoint " + path.string() + ": truncated header");
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint " + path.string() + " has format version " +
                    std::to_string(version) + ", this build reads " +
                    std::to_string(kCheckpointVersion));
  }
  std::string text(length, '\0');
  is.read(text.data(), static_cast<std::streamsize>(length));
  if (!is) throw DataError("checkpoint " + path.string() + ": truncated header");

  Checkpoint ck;
  try {
    const json header = json::parse(text);
    TensorReader reader(header.at("tensors"), is, path);
    const auto& dims = header.at("dims");
    ck.model.feature_dim = dims.at("feature").get<int>();
    ck.model.embedding_dim = dims.at("embedding").get<int>();
    ck.model.noise_dim = dims.at("noise").get<int>();
    ck.model.hidden_dim = dims.at("hidden").get<int>();
    for (gan::Unit u : gan::kAllUnits) {
      const std::string name(gan::unit_name(u));
      const auto& desc = header.at("units").at(name);
      auto& p = ck.model.unit(u);
      p.generator = read_net(desc.at("generator"), name + "/generator", reader);
      p.discriminator = read_net(desc.at("discriminator"), name + "/discriminator", reader);
      ck.model.trained[gan::index(u)] = desc.at("trained").get<bool>();
    }
    ck.world.embeddings = reader.take("world/embeddings");
    ck.world.prototypes = reader.take("world/prototypes");
    ck.world.seen = header.at("world").at("seen").get<std::vector<int>>();
    ck.world.unseen = header.at("world").at("unseen").get<std::vector<int>>();
    if (header.contains("seen_head")) ck.seen_head = read_head(header["seen_head"], "seen_head", reader);
    if (header.contains("unseen_head")) {
      ck.unseen_head = read_head(header["unseen_head"], "unseen_head", reader);
    }
    ck.config = header.at("config");
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": malformed header (" + e.what() + ")");
  }
  return ck;
}

}  // namespace zsd
