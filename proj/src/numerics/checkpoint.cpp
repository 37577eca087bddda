// SPDX-License-Identifier: Apache-2.0
#include "medre/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "medre/error.hpp"
#include "medre/standoff.hpp"

namespace medre {

namespace {

constexpr char kMagic[8] = {'M', 'E', 'D', 'R', 'E', 'C', 'K', 'P'};

template <typename U> void put_le(std::string &out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
public:
  explicit Reader(std::string_view b) : bytes_(b) {}

  template <typename U> U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw IoError("checkpoint truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

} // namespace

std::string encode_checkpoint(const nlohmann::json &config,
                              const ParamStore &params) {
  std::string out;
  out.push_back(static_cast<char>(kCheckpointVersion));
  out.append(kMagic, sizeof(kMagic));
  const std::string cfg = config.dump();
  put_le<std::uint64_t>(out, cfg.size());
  out += cfg;
  put_le<std::uint64_t>(out, params.entries().size());
  for (const auto &e : params.entries()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.dim()));
    for (auto d : e.value.shape())
      put_le<std::uint64_t>(out, d);
    for (double x : e.value.values())
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  const auto version = r.get<std::uint8_t>();
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  if (std::memcmp(r.take(sizeof(kMagic)).data(), kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint file (bad magic)");
  Checkpoint ck;
  const auto cfg_len = r.get<std::uint64_t>();
  try {
    ck.config = nlohmann::json::parse(r.take(cfg_len));
  } catch (const nlohmann::json::exception &e) {
    throw IoError(std::string("checkpoint config is not valid JSON: ") +
                  e.what());
  }
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t p = 0; p < count; ++p) {
    NamedTensor t;
    t.name = std::string(r.take(r.get<std::uint32_t>()));
    const auto rank = r.get<std::uint32_t>();
    for (std::uint32_t d = 0; d < rank; ++d)
      t.shape.push_back(r.get<std::uint64_t>());
    const std::size_t n = shape_numel(t.shape);
    t.values.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      t.values[i] = std::bit_cast<double>(r.get<std::uint64_t>());
    ck.params.push_back(std::move(t));
  }
  if (!r.done())
    throw IoError("trailing bytes after checkpoint payload");
  return ck;
}

void write_checkpoint(const std::filesystem::path &path,
                      const nlohmann::json &config, const ParamStore &params) {
  write_file_atomic(path, encode_checkpoint(config, params));
}

Checkpoint read_checkpoint(const std::filesystem::path &path) {
  return decode_checkpoint(read_file(path));
}

void load_into(const Checkpoint &ckpt, ParamStore &params) {
  if (ckpt.params.size() != params.entries().size())
    throw IoError("checkpoint has " + std::to_string(ckpt.params.size()) +
                  " parameters, model expects " +
                  std::to_string(params.entries().size()));
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    const auto &src = ckpt.params[i];
    auto &dst = params.entries()[i];
    if (src.name != dst.name || src.shape != dst.value.shape())
      throw IoError("checkpoint parameter " + src.name + " " +
                    shape_string(src.shape) + " does not match model " +
                    dst.name + " " + shape_string(dst.value.shape()));
    std::copy(src.values.begin(), src.values.end(), dst.value.values().begin());
  }
}

} // namespace medre
