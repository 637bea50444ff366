#include "vnca/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace vnca {

namespace {

constexpr char kMagic[4] = {'V', 'N', 'C', 'A'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), std::streamsize(n));
}

void put_u16(std::ofstream& out, std::uint16_t v) {
  unsigned char b[2] = {(unsigned char)(v & 0xFF),
                        (unsigned char)(v >> 8)};
  put_bytes(out, b, 2);
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (unsigned char)(v >> (8 * i));
  put_bytes(out, b, 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (unsigned char)(v >> (8 * i));
  put_bytes(out, b, 8);
}

void put_str(std::ofstream& out, const std::string& s) {
  if (s.size() > 0xFFFF) throw ContractError("checkpoint string too long");
  put_u16(out, std::uint16_t(s.size()));
  put_bytes(out, s.data(), s.size());
}

void put_tensor(std::ofstream& out, const std::string& name,
                const Shape& shape, const std::vector<float>& data) {
  put_str(out, name);
  unsigned char nd = (unsigned char)shape.size();
  put_bytes(out, &nd, 1);
  for (int d : shape) put_u64(out, std::uint64_t(d));
  put_bytes(out, data.data(), data.size() * sizeof(float));
}

struct Reader {
  std::ifstream in;
  std::string path;

  void get_bytes(void* p, std::size_t n) {
    in.read(static_cast<char*>(p), std::streamsize(n));
    if (std::size_t(in.gcount()) != n)
      throw FormatError(path + ": truncated checkpoint");
  }
  std::uint16_t get_u16() {
    unsigned char b[2];
    get_bytes(b, 2);
    return std::uint16_t(b[0] | (b[1] << 8));
  }
  std::uint32_t get_u32() {
    unsigned char b[4];
    get_bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t get_u64() {
    unsigned char b[8];
    get_bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
  }
  std::string get_str() {
    std::string s(get_u16(), '\0');
    get_bytes(s.data(), s.size());
    return s;
  }
};

std::map<std::string, std::string> config_map(const ModelConfig& c,
                                              std::uint64_t seed) {
  return {
      {"variant", to_string(c.variant)},
      {"likelihood", to_string(c.likelihood)},
      {"latent", std::to_string(c.latent)},
      {"width", std::to_string(c.width)},
      {"k", std::to_string(c.k_doublings)},
      {"m", std::to_string(c.steps_per_phase)},
      {"t_min", std::to_string(c.t_min)},
      {"t_max", std::to_string(c.t_max)},
      {"n_mix", std::to_string(c.n_mix)},
      {"img_h", std::to_string(c.img_h)},
      {"img_w", std::to_string(c.img_w)},
      {"img_c", std::to_string(c.img_c)},
      {"seed", std::to_string(seed)},
  };
}

}  // namespace

void save_checkpoint(const std::string& path, const VncaModel& model,
                     const Adam* opt, std::uint64_t global_step,
                     std::uint64_t rng_counter, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  put_bytes(out, kMagic, 4);
  put_u32(out, kVersion);

  auto cfg = config_map(model.cfg, seed);  // std::map: fixed key order
  put_u32(out, std::uint32_t(cfg.size()));
  for (const auto& [k, v] : cfg) {
    put_str(out, k);
    put_str(out, v);
  }

  auto params = model.parameters();
  std::uint32_t records =
      std::uint32_t(params.size()) * (opt ? 3u : 1u);
  put_u32(out, records);
  for (const auto& p : params)
    put_tensor(out, p.name, p.tensor.shape(), p.tensor.data());
  if (opt) {
    for (size_t i = 0; i < params.size(); ++i)
      put_tensor(out, "adam.m." + params[i].name, params[i].tensor.shape(),
                 opt->m_slot(i));
    for (size_t i = 0; i < params.size(); ++i)
      put_tensor(out, "adam.v." + params[i].name, params[i].tensor.shape(),
                 opt->v_slot(i));
  }

  put_u64(out, global_step);
  put_u64(out, rng_counter);
  if (!out) throw FormatError("short write to " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  Reader r{std::ifstream(path, std::ios::binary), path};
  if (!r.in) throw FormatError("cannot open " + path);
  char magic[4];
  r.get_bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(path + ": not a checkpoint (bad magic)");
  std::uint32_t version = r.get_u32();
  if (version != kVersion)
    throw FormatError(path + ": unsupported checkpoint version " +
                      std::to_string(version));

  std::map<std::string, std::string> cfg;
  std::uint32_t ncfg = r.get_u32();
  for (std::uint32_t i = 0; i < ncfg; ++i) {
    std::string k = r.get_str();
    cfg[k] = r.get_str();
  }
  auto want = [&](const char* key) {
    auto it = cfg.find(key);
    if (it == cfg.end())
      throw FormatError(path + ": config missing '" + std::string(key) + "'");
    return it->second;
  };
  ModelConfig mc;
  mc.variant = variant_from_string(want("variant"));
  mc.likelihood = likelihood_from_string(want("likelihood"));
  mc.latent = std::stoi(want("latent"));
  mc.width = std::stoi(want("width"));
  mc.k_doublings = std::stoi(want("k"));
  mc.steps_per_phase = std::stoi(want("m"));
  mc.t_min = std::stoi(want("t_min"));
  mc.t_max = std::stoi(want("t_max"));
  mc.n_mix = std::stoi(want("n_mix"));
  mc.img_h = std::stoi(want("img_h"));
  mc.img_w = std::stoi(want("img_w"));
  mc.img_c = std::stoi(want("img_c"));
  if (cfg.size() != 13)
    throw FormatError(path + ": unexpected config entries");

  LoadedCheckpoint ck{VncaModel::create(mc, 0)};
  ck.seed = std::stoull(want("seed"));

  auto params = ck.model.parameters();
  std::map<std::string, size_t> by_name;
  for (size_t i = 0; i < params.size(); ++i) by_name[params[i].name] = i;
  std::vector<bool> seen(params.size(), false);

  std::uint32_t nrec = r.get_u32();
  for (std::uint32_t i = 0; i < nrec; ++i) {
    std::string name = r.get_str();
    unsigned char nd;
    r.get_bytes(&nd, 1);
    Shape shape(nd);
    std::int64_t n = 1;
    for (int d = 0; d < nd; ++d) {
      shape[size_t(d)] = int(r.get_u64());
      n *= shape[size_t(d)];
    }
    std::vector<float> data(static_cast<size_t>(n));
    r.get_bytes(data.data(), data.size() * sizeof(float));

    std::string base = name;
    std::map<std::string, std::vector<float>>* side = nullptr;
    if (name.rfind("adam.m.", 0) == 0) {
      base = name.substr(7);
      side = &ck.adam_m;
    } else if (name.rfind("adam.v.", 0) == 0) {
      base = name.substr(7);
      side = &ck.adam_v;
    }
    auto it = by_name.find(base);
    if (it == by_name.end())
      throw FormatError(path + ": unknown tensor '" + name + "'");
    if (params[it->second].tensor.shape() != shape)
      throw FormatError(path + ": tensor '" + name + "' has shape " +
                        shape_str(shape) + ", model expects " +
                        shape_str(params[it->second].tensor.shape()));
    if (side) {
      (*side)[base] = std::move(data);
    } else {
      params[it->second].tensor.mutable_data() = std::move(data);
      seen[it->second] = true;
    }
  }
  for (size_t i = 0; i < params.size(); ++i)
    if (!seen[i])
      throw FormatError(path + ": missing tensor '" + params[i].name + "'");
  if (!ck.adam_m.empty() || !ck.adam_v.empty()) {
    if (ck.adam_m.size() != params.size() ||
        ck.adam_v.size() != params.size())
      throw FormatError(path + ": incomplete optimizer state");
    ck.has_opt = true;
  }

  ck.global_step = r.get_u64();
  ck.rng_counter = r.get_u64();
  if (r.in.get() != std::ifstream::traits_type::eof())
    throw FormatError(path + ": trailing bytes");
  return ck;
}

void restore_adam(Adam& opt, const LoadedCheckpoint& ck,
                  const std::vector<NamedParam>& params) {
  if (!ck.has_opt) throw ContractError("checkpoint has no optimizer state");
  if (opt.slots() != params.size())
    throw ContractError("optimizer built over a different parameter list");
  for (size_t i = 0; i < params.size(); ++i) {
    opt.m_slot(i) = ck.adam_m.at(params[i].name);
    opt.v_slot(i) = ck.adam_v.at(params[i].name);
  }
  opt.set_t(std::int64_t(ck.global_step));
}

}  // namespace vnca
