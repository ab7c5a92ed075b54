#include "adapto/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "adapto/errors.hpp"

namespace adapto {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'A', 'V', 'C', 'K'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint8_t b[8];
  std::memcpy(b, &v, 8);
  out.insert(out.end(), b, b + 8);
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void need(std::size_t n, const std::string& what) const {
    if (pos_ + n > bytes_.size()) throw FormatError("checkpoint truncated while reading " + what);
  }
  std::uint32_t u32(const std::string& what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64(const std::string& what) {
    need(8, what);
    double v;
    std::memcpy(&v, bytes_.data() + pos_, 8);
    pos_ += 8;
    return v;
  }
  std::string str(std::size_t n, const std::string& what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  for (const auto& e : model.registry) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    const Shape& s = e.tensor.shape();
    put_u32(out, 4);
    for (std::size_t d : {s.n, s.c, s.h, s.w}) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : e.tensor.data()) put_f64(out, v);
  }
  return out;
}

void save_checkpoint(const Model& model, const std::string& path) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void decode_checkpoint(Model& model, const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not a checkpoint");
  Reader in(bytes);
  in.str(4, "magic");
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }

  // Decode into staging buffers first so a bad file leaves the model untouched.
  std::vector<std::vector<double>> staged;
  for (const auto& e : model.registry) {
    const std::string name = in.str(in.u32("name length of " + e.name), "name of " + e.name);
    if (name != e.name) throw FormatError("checkpoint parameter '" + name + "' where '" + e.name + "' was expected");
    const std::uint32_t rank = in.u32("rank of " + name);
    if (rank > 8) throw FormatError("checkpoint parameter " + name + " has implausible rank " + std::to_string(rank));
    std::vector<std::size_t> dims;
    std::size_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      dims.push_back(in.u32("dims of " + name));
      count *= dims.back();
    }
    const Shape& s = e.tensor.shape();
    if (dims != std::vector<std::size_t>{s.n, s.c, s.h, s.w}) {
      throw FormatError("checkpoint shape mismatch for parameter " + name + " (model expects " + to_string(s) + ")");
    }
    in.need(count * 8, "payload of " + name);
    std::vector<double> values(count);
    for (double& v : values) v = in.f64("payload of " + name);
    staged.push_back(std::move(values));
  }
  if (!in.done()) throw FormatError("checkpoint has trailing data after the last parameter");

  for (std::size_t i = 0; i < staged.size(); ++i) {
    auto dst = model.registry[i].tensor.mutable_data();
    std::copy(staged[i].begin(), staged[i].end(), dst.begin());
  }
}

void load_checkpoint(Model& model, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  decode_checkpoint(model, bytes);
}

}  // namespace adapto
