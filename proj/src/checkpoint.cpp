#include "mutadelta/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace mutadelta::cli {

namespace {

using numkit::Tensor;

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint64_t get_u64(const std::string& in, size_t at) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

nlohmann::json shape_of(const Tensor<double>& t) {
  if (t.rank() == 0) return nlohmann::json::array();
  if (t.rank() == 1) return nlohmann::json::array({t.rows()});
  return nlohmann::json::array({t.rows(), t.cols()});
}

Tensor<double> tensor_for_shape(const nlohmann::json& shape) {
  if (!shape.is_array() || shape.size() > 2)
    throw format_error("checkpoint: malformed tensor shape");
  if (shape.empty()) return Tensor<double>::scalar(0.0);
  if (shape.size() == 1) return Tensor<double>::zeros(shape[0].get<int64_t>());
  return Tensor<double>::zeros(shape[0].get<int64_t>(), shape[1].get<int64_t>());
}

void append_payload(std::string& payload, const Tensor<double>& t) {
  for (int64_t i = 0; i < t.numel(); ++i) put_u64(payload, std::bit_cast<uint64_t>(t[i]));
}

}  // namespace

const Tensor<double>* CheckpointData::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::string& path, const nlohmann::json& config, int64_t step,
                     const nlohmann::json& rng, const numkit::ParamSet<double>& params,
                     numkit::AdamW<double>* opt) {
  nlohmann::json manifest;
  manifest["version"] = kCheckpointVersion;
  manifest["config"] = config;
  manifest["step"] = step;
  manifest["rng"] = rng;

  std::string payload;
  nlohmann::json dir = nlohmann::json::array();
  auto add_tensor = [&](const std::string& name, const Tensor<double>& t) {
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = shape_of(t);
    e["dtype"] = "f64";
    e["offset"] = payload.size();
    e["nbytes"] = static_cast<uint64_t>(t.numel()) * 8;
    dir.push_back(std::move(e));
    append_payload(payload, t);
  };
  for (const auto& p : params) add_tensor(p.name, p.value);
  if (opt) {
    opt->ensure_state(params);
    manifest["opt_step"] = opt->step_count();
    size_t i = 0;
    for (const auto& p : params) {
      add_tensor("opt.m." + p.name, opt->m_state()[i]);
      add_tensor("opt.v." + p.name, opt->v_state()[i]);
      ++i;
    }
  }
  manifest["tensors"] = std::move(dir);

  const std::string mjson = manifest.dump();
  std::string blob;
  blob.reserve(5 + 8 + mjson.size() + payload.size());
  blob.append(kCheckpointMagic, 5);
  put_u64(blob, mjson.size());
  blob += mjson;
  blob += payload;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw config_error("checkpoint: cannot write " + path);
  os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!os) throw config_error("checkpoint: write failed for " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("checkpoint: cannot open " + path);
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (blob.size() < 13 || std::memcmp(blob.data(), kCheckpointMagic, 5) != 0)
    throw format_error("checkpoint: bad magic in " + path);
  const uint64_t mlen = get_u64(blob, 5);
  if (13 + mlen > blob.size()) throw format_error("checkpoint: truncated manifest in " + path);

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(blob.substr(13, mlen));
  } catch (const nlohmann::json::exception& e) {
    throw format_error("checkpoint: corrupt manifest in " + path + ": " + e.what());
  }
  const size_t payload_at = 13 + static_cast<size_t>(mlen);
  const size_t payload_size = blob.size() - payload_at;

  CheckpointData out;
  try {
    if (manifest.at("version").get<int>() != kCheckpointVersion)
      throw format_error("checkpoint: unsupported version in " + path);
    out.config = manifest.at("config");
    out.step = manifest.at("step").get<int64_t>();
    out.rng = manifest.at("rng");
    out.opt_step = manifest.value("opt_step", int64_t{-1});
    for (const auto& e : manifest.at("tensors")) {
      Tensor<double> t = tensor_for_shape(e.at("shape"));
      const uint64_t offset = e.at("offset").get<uint64_t>();
      const uint64_t nbytes = e.at("nbytes").get<uint64_t>();
      if (e.at("dtype").get<std::string>() != "f64")
        throw format_error("checkpoint: unsupported dtype in " + path);
      if (nbytes != static_cast<uint64_t>(t.numel()) * 8)
        throw format_error("checkpoint: size disagrees with shape in " + path);
      if (offset + nbytes > payload_size)
        throw format_error("checkpoint: truncated payload in " + path);
      for (int64_t i = 0; i < t.numel(); ++i)
        t[i] = std::bit_cast<double>(get_u64(blob, payload_at + offset + 8 * i));
      out.tensors.emplace_back(e.at("name").get<std::string>(), std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw format_error("checkpoint: malformed manifest in " + path + ": " + e.what());
  }
  return out;
}

void restore_checkpoint(const CheckpointData& ckpt, numkit::ParamSet<double>& params,
                        numkit::AdamW<double>* opt) {
  for (auto& p : params) {
    const Tensor<double>* t = ckpt.find(p.name);
    if (!t) throw format_error("checkpoint: missing tensor " + p.name);
    if (!t->same_shape(p.value))
      throw shape_error("checkpoint: tensor " + p.name + " has shape " + t->shape_str() +
                        ", expected " + p.value.shape_str());
    p.value = *t;
  }
  if (!opt) return;
  if (ckpt.opt_step < 0) throw format_error("checkpoint: no optimizer state stored");
  opt->ensure_state(params);
  opt->set_step_count(ckpt.opt_step);
  size_t i = 0;
  for (const auto& p : params) {
    const Tensor<double>* m = ckpt.find("opt.m." + p.name);
    const Tensor<double>* v = ckpt.find("opt.v." + p.name);
    if (!m || !v) throw format_error("checkpoint: missing optimizer state for " + p.name);
    if (!m->same_shape(p.value) || !v->same_shape(p.value))
      throw shape_error("checkpoint: optimizer state shape mismatch for " + p.name);
    opt->m_state()[i] = *m;
    opt->v_state()[i] = *v;
    ++i;
  }
}

}  // namespace mutadelta::cli
