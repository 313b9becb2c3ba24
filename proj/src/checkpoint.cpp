#include "polyparse/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "polyparse/error.hpp"

namespace polyparse {

namespace {

constexpr char kMagic[8] = {'P', 'P', 'C', 'K', 'P', 'T', '0', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format"] = ckpt.format;
  header["version"] = ckpt.version;
  header["meta"] = ckpt.meta;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : ckpt.params) {
    tensors.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  }
  header["tensors"] = tensors;
  const std::string h = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t len = h.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& p : ckpt.params) {
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!out) throw Error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + path);
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw InputError("not a checkpoint file: " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 30)) throw InputError("corrupt checkpoint header: " + path);
  std::string h(len, '\0');
  in.read(h.data(), static_cast<std::streamsize>(len));
  if (!in) throw InputError("truncated checkpoint header: " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(h);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("corrupt checkpoint header: " + std::string(e.what()));
  }
  if (!header.contains("version")) throw InputError("checkpoint lacks a version field: " + path);

  Checkpoint ck;
  ck.format = header.value("format", "");
  ck.version = header["version"].get<int>();
  ck.meta = header.value("meta", nlohmann::json::object());
  for (const auto& t : header.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw InputError("truncated checkpoint tensor '" + t.at("name").get<std::string>() + "'");
    ck.params.add(t.at("name").get<std::string>(), std::move(m));
  }
  return ck;
}

Checkpoint load_checkpoint(const std::string& path, const std::string& expected_format, int expected_version) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.format != expected_format) {
    throw InputError(path + ": expected a '" + expected_format + "' checkpoint, found '" + ck.format + "'");
  }
  if (ck.version != expected_version) {
    throw InputError(path + ": unsupported checkpoint version " + std::to_string(ck.version));
  }
  return ck;
}

void assign_params(ad::ParameterSet& into, const ad::ParameterSet& values) {
  if (into.size() != values.size()) {
    throw InputError("checkpoint has " + std::to_string(values.size()) + " tensors, model expects " +
                     std::to_string(into.size()));
  }
  for (auto& p : into) {
    const ad::ParamId id = values.find(p.name);
    if (id == values.size()) throw InputError("checkpoint lacks tensor '" + p.name + "'");
    const Matrix& v = values[id].value;
    if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) {
      throw InputError("tensor '" + p.name + "' has wrong shape in checkpoint");
    }
    p.value = v;
  }
}

nlohmann::json vocab_to_json(const Vocabulary& v) {
  nlohmann::json words = nlohmann::json::array();
  for (int i = Vocabulary::kReservedWords; i < v.word_count(); ++i) words.push_back({v.word(i), v.count(i)});
  nlohmann::json chars = nlohmann::json::array();
  for (int i = Vocabulary::kReservedChars; i < v.char_count(); ++i) chars.push_back(v.character(i));
  return {{"words", words}, {"chars", chars}};
}

Vocabulary vocab_from_json(const nlohmann::json& j) {
  Vocabulary v;
  for (const auto& w : j.at("words")) v.add_word(w.at(0).get<std::string>(), w.at(1).get<std::int64_t>());
  for (const auto& c : j.at("chars")) v.add_char(c.get<std::string>());
  return v;
}

}  // namespace polyparse
