#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "mobinet/nn.hpp"

namespace mobinet::nn {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'B', 'I', 'N', 'E', 'T', 'C'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t get_u64(const unsigned char* b) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

const NamedTensor& Checkpoint::at(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw IoError("checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

void write_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt) {
  nlohmann::json index;
  index["meta"] = nlohmann::json::parse(ckpt.meta_json);
  index["tensors"] = nlohmann::json::object();
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    index["tensors"][t.name] = {{"dtype", "f64le"},
                                {"shape", t.shape},
                                {"offset", offset},
                                {"count", t.values.size()}};
    offset += static_cast<std::uint64_t>(t.values.size()) * 8;
  }
  const std::string text = index.dump();
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + file.string());
  out.write(kMagic, 8);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : ckpt.tensors)
    for (Index i = 0; i < t.values.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(t.values(i)));
  if (!out) throw IoError("write failed for checkpoint " + file.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + file.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw IoError(file.string() + ": not a checkpoint file");
  const std::uint64_t len = get_u64(bytes.data() + 8);
  if (16 + len > bytes.size()) throw IoError(file.string() + ": truncated index");
  const std::size_t data_start = 16 + static_cast<std::size_t>(len);
  Checkpoint ckpt;
  try {
    const auto index = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + data_start);
    ckpt.meta_json = index.at("meta").dump();
    for (const auto& [name, entry] : index.at("tensors").items()) {
      if (entry.at("dtype") != "f64le") throw IoError(file.string() + ": unsupported dtype");
      NamedTensor t;
      t.name = name;
      t.shape = entry.at("shape").get<std::vector<Index>>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto count = entry.at("count").get<std::uint64_t>();
      if (data_start + offset + count * 8 > bytes.size())
        throw IoError(file.string() + ": tensor '" + name + "' runs past the end of the file");
      t.values.resize(static_cast<Index>(count));
      for (std::uint64_t i = 0; i < count; ++i)
        t.values(static_cast<Index>(i)) =
            std::bit_cast<double>(get_u64(bytes.data() + data_start + offset + 8 * i));
      ckpt.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(file.string() + ": corrupt checkpoint index: " + e.what());
  }
  return ckpt;
}

}  // namespace mobinet::nn
