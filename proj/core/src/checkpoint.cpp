#include <cstring>
#include <fstream>
#include <sstream>

#include "mxfr/errors.hpp"
#include "mxfr/trainer.hpp"

namespace mxfr {

namespace {

constexpr char kMagic[4] = {'M', 'X', 'F', 'R'};

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(
               static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    pos_ += 4;
    return v;
  }

  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(
               static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() {
    uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  std::string str(size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  size_t pos() const { return pos_; }
  const std::string& bytes() const { return bytes_; }

 private:
  void need(size_t n) {
    if (pos_ + n > bytes_.size())
      throw DataError("corrupt checkpoint: truncated file");
  }
  std::string bytes_;
  size_t pos_ = 0;
};

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("corrupt checkpoint: bad config line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::string fmt_f64(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, Checkpoint::kFormatVersion);

  std::ostringstream vocab_text;
  cp.vocab.write(vocab_text);
  std::string vs = vocab_text.str();
  put_u64(out, vs.size());
  out += vs;

  std::ostringstream cfg;
  cfg << "hidden_size=" << cp.model_config.hidden_size << "\n"
      << "embedding_size=" << cp.model_config.embedding_size << "\n"
      << "input_vocab_size=" << cp.model_config.input_vocab_size << "\n"
      << "output_vocab_size=" << cp.model_config.output_vocab_size << "\n"
      << "max_decode_length=" << cp.model_config.max_decode_length << "\n"
      << "decoder_init_range=" << fmt_f64(cp.model_config.decoder_init_range)
      << "\n"
      << "epoch=" << cp.epoch << "\n"
      << "dev_accuracy=" << fmt_f64(cp.dev_accuracy) << "\n"
      << "dev_edit_distance=" << fmt_f64(cp.dev_edit_distance) << "\n"
      << "rng_digest=" << cp.rng_digest << "\n";
  std::string cs = cfg.str();
  put_u64(out, cs.size());
  out += cs;

  put_u32(out, static_cast<uint32_t>(cp.params.params.size()));
  for (const auto& [name, t] : cp.params.params) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(out, static_cast<uint32_t>(d));
    for (double v : t.data) put_f64(out, v);
  }

  put_u64(out, fnv1a64(out.data(), out.size()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("write failure: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  Reader r(buf.str());

  if (r.bytes().size() < 16)
    throw DataError("corrupt checkpoint: file too short");
  {
    // verify trailer before parsing anything else
    size_t body = r.bytes().size() - 8;
    uint64_t stored = 0;
    for (int i = 0; i < 8; ++i)
      stored |= static_cast<uint64_t>(
                    static_cast<unsigned char>(r.bytes()[body + i]))
                << (8 * i);
    if (fnv1a64(r.bytes().data(), body) != stored)
      throw DataError("corrupt checkpoint: checksum mismatch");
  }

  if (r.str(4) != std::string(kMagic, 4))
    throw DataError("corrupt checkpoint: bad magic bytes");
  uint32_t version = r.u32();
  if (version != Checkpoint::kFormatVersion)
    throw DataError("unknown checkpoint format version " +
                    std::to_string(version));

  Checkpoint cp;
  {
    std::istringstream vin(r.str(r.u64()));
    cp.vocab = SymbolVocab::read(vin);
  }
  {
    auto kv = parse_kv(r.str(r.u64()));
    cp.model_config.hidden_size = std::stoi(kv.at("hidden_size"));
    cp.model_config.embedding_size = std::stoi(kv.at("embedding_size"));
    cp.model_config.input_vocab_size = std::stoi(kv.at("input_vocab_size"));
    cp.model_config.output_vocab_size = std::stoi(kv.at("output_vocab_size"));
    cp.model_config.max_decode_length = std::stoi(kv.at("max_decode_length"));
    cp.model_config.decoder_init_range =
        std::stod(kv.at("decoder_init_range"));
    cp.epoch = std::stoi(kv.at("epoch"));
    cp.dev_accuracy = std::stod(kv.at("dev_accuracy"));
    cp.dev_edit_distance = std::stod(kv.at("dev_edit_distance"));
    cp.rng_digest = std::stoull(kv.at("rng_digest"));
  }
  uint32_t n_tensors = r.u32();
  for (uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str(r.u32());
    uint32_t rank = r.u32();
    std::vector<int> shape;
    for (uint32_t d = 0; d < rank; ++d)
      shape.push_back(static_cast<int>(r.u32()));
    Tensor t(shape);
    for (double& v : t.data) v = r.f64();
    cp.params.add(name, std::move(t));
  }
  return cp;
}

}  // namespace mxfr
