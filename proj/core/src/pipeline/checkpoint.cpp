#include "holofuse/pipeline/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "holofuse/errors.hpp"

namespace holofuse::pipeline {

namespace {

constexpr char kMagic[8] = {'H', 'O', 'L', 'O', 'F', 'U', 'S', 'E'};

template <typename T>
void put_le(std::vector<char>& out, T value) {
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  out.insert(out.end(), bits.begin(), bits.end());
}

template <typename T>
T get_le(const std::vector<char>& in, std::size_t offset) {
  if (offset + sizeof(T) > in.size()) throw FormatError("checkpoint truncated");
  std::array<unsigned char, sizeof(T)> bits{};
  std::memcpy(bits.data(), in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  return std::bit_cast<T>(bits);
}

void put_tensor(std::vector<char>& blob, const nn::Tensor& t) {
  for (double v : t.data()) put_le(blob, v);
}

nn::Tensor get_tensor(const std::vector<char>& in, std::size_t base, std::size_t offset, const nn::Shape& shape) {
  nn::Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = get_le<double>(in, base + offset + 8 * i);
  return t;
}

}  // namespace

std::vector<char> serialize_checkpoint(const Checkpoint& ckpt) {
  std::vector<char> blob;
  nlohmann::json index = nlohmann::json::array();
  for (const auto& [name, p] : ckpt.model.params()) {
    const std::size_t offset = blob.size();
    put_tensor(blob, p.value);
    put_tensor(blob, p.m.size() == p.value.size() ? p.m : nn::Tensor(p.value.shape()));
    put_tensor(blob, p.v.size() == p.value.size() ? p.v : nn::Tensor(p.value.shape()));
    index.push_back({{"name", name},
                     {"offset", offset},
                     {"shape", p.value.shape()},
                     {"step", p.step},
                     {"lr_scale", p.lr_scale},
                     {"frozen", p.frozen}});
  }
  const nlohmann::json header = {
      {"model", to_json(ckpt.model.config())},
      {"basis", {{"seed", ckpt.model.basis().seed()}, {"dim", ckpt.model.basis().dim()}}},
      {"train", to_json(ckpt.train)},
      {"log", {{"epoch_f1", ckpt.log.epoch_f1}, {"epoch_loss", ckpt.log.epoch_loss}}},
      {"meta", ckpt.meta},
      {"params", index},
      {"blob_bytes", blob.size()},
  };
  const std::string text = header.dump();
  std::vector<char> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), blob.begin(), blob.end());
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<char>& bytes) {
  if (bytes.size() < sizeof(kMagic) + 12 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a holofuse checkpoint (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(bytes, 8);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (this build reads " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = get_le<std::uint64_t>(bytes, 12);
  const std::size_t base = 20 + header_len;
  if (header_len > bytes.size() || base > bytes.size()) throw FormatError("checkpoint truncated in header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 20, bytes.begin() + static_cast<std::ptrdiff_t>(base));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  try {
    if (bytes.size() - base != header.at("blob_bytes").get<std::size_t>()) {
      throw FormatError("checkpoint truncated: parameter blob has " + std::to_string(bytes.size() - base) +
                        " bytes, header says " + std::to_string(header.at("blob_bytes").get<std::size_t>()));
    }
    Checkpoint ckpt{CaModel(model_config_from_json(header.at("model"))), train_config_from_json(header.at("train")),
                    {}, header.at("meta")};
    if (header.at("basis").at("seed").get<std::uint64_t>() != ckpt.model.basis().seed() ||
        header.at("basis").at("dim").get<std::size_t>() != ckpt.model.basis().dim()) {
      throw FormatError("checkpoint basis does not match its model config");
    }
    ckpt.log.epoch_f1 = header.at("log").at("epoch_f1").get<std::vector<double>>();
    ckpt.log.epoch_loss = header.at("log").at("epoch_loss").get<std::vector<double>>();
    for (const nlohmann::json& e : header.at("params")) {
      const auto shape = e.at("shape").get<nn::Shape>();
      const auto offset = e.at("offset").get<std::size_t>();
      const std::size_t n = nn::shape_size(shape);
      if (offset + 24 * n > bytes.size() - base) throw FormatError("checkpoint parameter index out of range");
      nn::Param& p = ckpt.model.params().add(e.at("name").get<std::string>(), get_tensor(bytes, base, offset, shape));
      p.m = get_tensor(bytes, base, offset + 8 * n, shape);
      p.v = get_tensor(bytes, base, offset + 16 * n, shape);
      p.step = e.at("step").get<std::int64_t>();
      p.lr_scale = e.at("lr_scale").get<double>();
      p.frozen = e.at("frozen").get<bool>();
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::vector<char> bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace holofuse::pipeline
