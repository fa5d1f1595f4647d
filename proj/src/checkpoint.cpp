#include "awfnet/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace awfnet {

namespace {

constexpr char kMagic[5] = {'A', 'W', 'F', 'N', '1'};

std::uint64_t fnv1a_bytes(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ULL;
  }
  return h;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) {
    if (pos + n > buf.size())
      throw CheckpointCorruptError("checkpoint '" + path +
                                   "': truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= std::uint32_t(std::uint8_t(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= std::uint64_t(std::uint8_t(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const Registry<float>& reg) {
  std::string out;
  out.append(kMagic, 5);
  put_u32(out, static_cast<std::uint32_t>(reg.entries().size()));
  for (const auto& e : reg.entries()) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.append(e.name);
    put_u32(out, static_cast<std::uint32_t>(e.tensor.shape().size()));
    for (int d : e.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  }
  const std::size_t payload_begin = out.size();
  for (const auto& e : reg.entries()) {
    const auto& data = e.tensor.data();
    const std::size_t bytes = data.size() * sizeof(float);
    const std::size_t at = out.size();
    out.resize(at + bytes);
    std::memcpy(out.data() + at, data.data(), bytes);
  }
  const std::uint64_t checksum = fnv1a_bytes(
      reinterpret_cast<const std::uint8_t*>(out.data()) + payload_begin,
      out.size() - payload_begin);
  put_u64(out, checksum);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointCorruptError("checkpoint: cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw CheckpointCorruptError("checkpoint: write failed for " + path);
}

void load_checkpoint(const std::string& path, Registry<float>& reg) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointCorruptError("checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  Reader r{buf, 0, path};

  if (r.str(5) != std::string(kMagic, 5))
    throw CheckpointCorruptError("checkpoint '" + path + "': bad magic");
  const std::uint32_t count = r.u32();
  if (count != reg.entries().size())
    throw CheckpointIncompatibleError(
        "checkpoint '" + path + "': has " + std::to_string(count) +
        " entries, network has " + std::to_string(reg.entries().size()));

  std::size_t total_values = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto& e = reg.entries()[i];
    const std::string name = r.str(r.u32());
    if (name != e.name)
      throw CheckpointIncompatibleError("checkpoint '" + path + "': entry " +
                                        std::to_string(i) + " is '" + name +
                                        "', network expects '" + e.name + "'");
    const std::uint32_t ndim = r.u32();
    Shape shape(ndim);
    for (auto& d : shape) d = static_cast<int>(r.u32());
    if (shape != e.tensor.shape())
      throw CheckpointIncompatibleError(
          "checkpoint '" + path + "': '" + name + "' has shape " +
          shape_str(shape) + ", network expects " + shape_str(e.tensor.shape()));
    total_values += static_cast<std::size_t>(e.tensor.numel());
  }

  const std::size_t payload_begin = r.pos;
  const std::size_t payload_bytes = total_values * sizeof(float);
  r.need(payload_bytes);
  r.pos += payload_bytes;
  const std::uint64_t stored = r.u64();
  if (r.pos != buf.size())
    throw CheckpointCorruptError("checkpoint '" + path +
                                 "': trailing bytes after checksum");
  const std::uint64_t computed = fnv1a_bytes(
      reinterpret_cast<const std::uint8_t*>(buf.data()) + payload_begin,
      payload_bytes);
  if (stored != computed)
    throw CheckpointCorruptError("checkpoint '" + path +
                                 "': payload checksum mismatch");

  std::size_t pos = payload_begin;
  for (const auto& e : reg.entries()) {
    auto t = e.tensor;
    auto& data = t.mutable_data();
    std::memcpy(data.data(), buf.data() + pos, data.size() * sizeof(float));
    pos += data.size() * sizeof(float);
  }
}

}  // namespace awfnet
