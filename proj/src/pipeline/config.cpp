#include "flowvc/pipeline/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <variant>
#include <vector>

#include "flowvc/errors.hpp"

namespace flowvc::pipeline {

namespace {

// Keyed on fundamental types: size_t and uint64_t alias one of them.
using FieldRef = std::variant<unsigned long*, unsigned long long*, double*, std::string*>;

struct Field {
  const char* key;
  FieldRef ref;
};

// The single source of truth for the file schema.
std::vector<Field> fields_of(RunConfig& c) {
  return {
      {"mel.sample_rate", &c.mel.sample_rate},
      {"mel.n_fft", &c.mel.n_fft},
      {"mel.win_length", &c.mel.win_length},
      {"mel.hop_length", &c.mel.hop_length},
      {"mel.n_mels", &c.mel.n_mels},
      {"mel.f_min", &c.mel.f_min},
      {"mel.f_max", &c.mel.f_max},
      {"mel.log_floor", &c.mel.log_floor},
      {"dims.n_symbols", &c.dims.n_symbols},
      {"dims.ppg_hop", &c.dims.ppg_hop},
      {"dims.ppg_smoothing", &c.dims.ppg_smoothing},
      {"dims.ssl_hidden", &c.dims.ssl_hidden},
      {"dims.ssl_dim", &c.dims.ssl_dim},
      {"dims.speaker_dim", &c.dims.speaker_dim},
      {"dims.fusion_hidden", &c.dims.fusion_hidden},
      {"dims.memory_hidden", &c.dims.memory_hidden},
      {"dims.memory_heads", &c.dims.memory_heads},
      {"dims.memory_blocks", &c.dims.memory_blocks},
      {"dims.memory_groups", &c.dims.memory_groups},
      {"dims.context_dim", &c.dims.context_dim},
      {"dims.context_heads", &c.dims.context_heads},
      {"dims.context_blocks", &c.dims.context_blocks},
      {"dims.context_ffn", &c.dims.context_ffn},
      {"dims.unet_hidden", &c.dims.unet_hidden},
      {"dims.unet_levels", &c.dims.unet_levels},
      {"dims.unet_res_blocks", &c.dims.unet_res_blocks},
      {"dims.unet_time_dim", &c.dims.unet_time_dim},
      {"dims.unet_groups", &c.dims.unet_groups},
      {"rvq.size", &c.rvq.size},
      {"rvq.stages", &c.rvq.stages},
      {"rvq.weight", &c.rvq.weight},
      {"rvq.decay", &c.rvq.decay},
      {"rvq.epsilon", &c.rvq.epsilon},
      {"rvq.dead_threshold", &c.rvq.dead_threshold},
      {"cfm.sigma_min", &c.cfm.sigma_min},
      {"cfm.steps", &c.cfm.steps},
      {"cfm.guidance", &c.cfm.guidance},
      {"cfm.drop_prob", &c.cfm.drop_prob},
      {"optim.lr", &c.optim.lr},
      {"optim.batch_size", &c.optim.batch_size},
      {"optim.steps", &c.optim.steps},
      {"optim.weight_decay", &c.optim.weight_decay},
      {"optim.beta1", &c.optim.beta1},
      {"optim.beta2", &c.optim.beta2},
      {"optim.eps", &c.optim.eps},
      {"train.crop_seconds", &c.train.crop_seconds},
      {"train.ref_min_seconds", &c.train.ref_min_seconds},
      {"train.ref_max_seconds", &c.train.ref_max_seconds},
      {"train.checkpoint_every", &c.train.checkpoint_every},
      {"train.vocoder_iters", &c.train.vocoder_iters},
      {"seeds.model", &c.seeds.model},
      {"seeds.data", &c.seeds.data},
      {"seeds.ssl", &c.seeds.ssl},
      {"seeds.speaker", &c.seeds.speaker},
      {"paths.corpus", &c.paths.corpus},
      {"paths.log", &c.paths.log},
  };
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw InputError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(out)) {
    throw InputError("config: '" + key + "' expects a finite number, got '" + v + "'");
  }
  return out;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw InputError("config: " + what);
}

}  // namespace

void RunConfig::validate() const {
  mel.validate();
  const ModelDims& d = dims;
  for (const auto& [name, v] : std::vector<std::pair<const char*, std::size_t>>{
           {"n_symbols", d.n_symbols},         {"ppg_hop", d.ppg_hop},
           {"ssl_hidden", d.ssl_hidden},       {"ssl_dim", d.ssl_dim},
           {"speaker_dim", d.speaker_dim},     {"fusion_hidden", d.fusion_hidden},
           {"memory_hidden", d.memory_hidden}, {"memory_heads", d.memory_heads},
           {"memory_blocks", d.memory_blocks}, {"memory_groups", d.memory_groups},
           {"context_dim", d.context_dim},     {"context_heads", d.context_heads},
           {"context_blocks", d.context_blocks}, {"context_ffn", d.context_ffn},
           {"unet_hidden", d.unet_hidden},     {"unet_levels", d.unet_levels},
           {"unet_res_blocks", d.unet_res_blocks}, {"unet_time_dim", d.unet_time_dim},
           {"unet_groups", d.unet_groups},     {"rvq.size", rvq.size},
           {"rvq.stages", rvq.stages},         {"optim.batch_size", optim.batch_size},
           {"train.vocoder_iters", train.vocoder_iters}}) {
    require(v > 0, std::string(name) + " must be positive");
  }
  require(d.n_symbols >= 2, "n_symbols must be at least 2");
  require(d.ppg_smoothing >= 0.0 && d.ppg_smoothing < 0.5, "ppg_smoothing must lie in [0, 0.5)");
  require(d.memory_hidden % d.memory_heads == 0, "memory_hidden must be divisible by memory_heads");
  require(d.memory_hidden % d.memory_groups == 0, "memory_hidden must be divisible by memory_groups");
  require(d.context_dim % d.context_heads == 0, "context_dim must be divisible by context_heads");
  require(d.unet_hidden % d.unet_groups == 0, "unet_hidden must be divisible by unet_groups");
  require(d.unet_time_dim % 2 == 0, "unet_time_dim must be even");
  require(rvq.weight >= 0.0, "rvq.weight (lambda) must be non-negative");
  require(rvq.decay > 0.0 && rvq.decay < 1.0, "rvq.decay must lie in (0, 1)");
  require(rvq.epsilon > 0.0, "rvq.epsilon must be positive");
  require(cfm.sigma_min >= 0.0 && cfm.sigma_min < 1.0, "cfm.sigma_min must lie in [0, 1)");
  require(cfm.steps > 0, "cfm.steps must be positive");
  require(cfm.guidance >= 0.0, "cfm.guidance must be non-negative");
  require(cfm.drop_prob >= 0.0 && cfm.drop_prob <= 1.0, "cfm.drop_prob must lie in [0, 1]");
  require(optim.lr > 0.0, "optim.lr must be positive");
  require(optim.weight_decay >= 0.0, "optim.weight_decay must be non-negative");
  require(optim.beta1 >= 0.0 && optim.beta1 < 1.0 && optim.beta2 >= 0.0 && optim.beta2 < 1.0,
          "optim betas must lie in [0, 1)");
  require(optim.eps > 0.0, "optim.eps must be positive");
  require(train.crop_seconds > 0.0, "train.crop_seconds must be positive");
  require(train.ref_min_seconds > 0.0 && train.ref_min_seconds <= train.ref_max_seconds,
          "reference bounds must satisfy 0 < min <= max");
}

std::string RunConfig::to_text() const {
  RunConfig copy = *this;
  std::ostringstream out;
  for (const auto& f : fields_of(copy)) {
    out << f.key << " = ";
    std::visit(
        [&out](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, double>) {
            out << format_double(*p);
          } else {
            out << *p;
          }
        },
        f.ref);
    out << '\n';
  }
  return out.str();
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig c;
  std::map<std::string, FieldRef> index;
  for (const auto& f : fields_of(c)) index.emplace(f.key, f.ref);

  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw InputError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    const auto it = index.find(key);
    if (it == index.end()) throw InputError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, double>) {
            *p = parse_double(key, value);
          } else if constexpr (std::is_same_v<T, std::string>) {
            *p = value;
          } else {
            *p = parse_integer<T>(key, value);
          }
        },
        it->second);
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write config file " + path.string());
  out << to_text();
}

RunConfig full_scale_config() {
  RunConfig c;
  c.rvq.size = full_scale::kCodebookSize;
  c.dims.ssl_dim = full_scale::kCodebookDim;
  c.dims.context_heads = full_scale::kAttentionHeads;
  c.dims.context_blocks = full_scale::kAttentionLayers;
  c.dims.context_dim = full_scale::kAttentionDim;
  c.dims.unet_hidden = full_scale::kUNetHidden;
  c.optim.batch_size = full_scale::kBatchSize;
  c.optim.lr = full_scale::kLearningRate;
  return c;
}

}  // namespace flowvc::pipeline
