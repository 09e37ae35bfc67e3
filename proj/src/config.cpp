#include "structkv/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace structkv {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

Index parse_index(const std::string& key, const std::string& value) {
  Index out = 0;
  const auto* first = value.data();
  const auto* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError("config key '" + key + "': not an integer: " + value);
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* first = value.data();
  const auto* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError("config key '" + key + "': not an unsigned integer: " + value);
  }
  return out;
}

Scalar parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const Scalar out = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a real: " + value);
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': not a bool: " + value);
}

std::string render_real(Scalar v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void ModelConfig::validate() const {
  if (n_layers < 1 || n_heads < 1 || n_kv_groups < 1 || head_dim < 1 ||
      hidden_dim < 1 || vocab_size < 1) {
    throw ConfigError("model config: all counts must be >= 1");
  }
  if (n_heads % n_kv_groups != 0) {
    throw ConfigError("model config: n_heads must be divisible by n_kv_groups");
  }
  if (hidden_dim != n_heads * head_dim) {
    throw ConfigError("model config: hidden_dim must equal n_heads * head_dim");
  }
  if (head_dim % 2 != 0) {
    throw ConfigError("model config: head_dim must be even (rotary pairs)");
  }
  if (!(rope_base > 0.0)) {
    throw ConfigError("model config: rope_base must be positive");
  }
}

void StructKvConfig::validate(Index n_layers_total) const {
  if (window < 1) throw ConfigError("window must be >= 1");
  if (!(decay > 0.0 && decay <= 1.0)) {
    throw ConfigError("decay must lie in (0, 1]");
  }
  if (w1 < 0.0 || w2 < 0.0 || w3 < 0.0 || !(w1 + w2 + w3 > 0.0)) {
    throw ConfigError("transition weights must be non-negative with positive sum");
  }
  if (!(r_struct > 0.0 && r_struct <= 1.0)) {
    throw ConfigError("r_struct must lie in (0, 1]");
  }
  if (!(r_kv > 0.0 && r_kv <= 1.0)) {
    throw ConfigError("r_kv must lie in (0, 1]");
  }
  if (l_limit < 2) throw ConfigError("l_limit must be >= 2");
  if (l_limit >= n_layers_total) {
    throw ConfigError("l_limit must be < n_layers");
  }
  if (!(sparsity_frac > 0.0 && sparsity_frac < 1.0)) {
    throw ConfigError("sparsity_frac must lie in (0, 1)");
  }
  if (block_size < 1) throw ConfigError("block_size must be >= 1");
  if (n_sinks < 0) throw ConfigError("n_sinks must be >= 0");
}

void RunConfig::apply_key(const std::string& key, const std::string& value) {
  if (key == "n_layers") model.n_layers = parse_index(key, value);
  else if (key == "n_heads") model.n_heads = parse_index(key, value);
  else if (key == "n_kv_groups") model.n_kv_groups = parse_index(key, value);
  else if (key == "head_dim") model.head_dim = parse_index(key, value);
  else if (key == "hidden_dim") model.hidden_dim = parse_index(key, value);
  else if (key == "vocab_size") model.vocab_size = parse_index(key, value);
  else if (key == "rope_base") model.rope_base = parse_real(key, value);
  else if (key == "window") skv.window = parse_index(key, value);
  else if (key == "decay") skv.decay = parse_real(key, value);
  else if (key == "w1") skv.w1 = parse_real(key, value);
  else if (key == "w2") skv.w2 = parse_real(key, value);
  else if (key == "w3") skv.w3 = parse_real(key, value);
  else if (key == "r_struct") skv.r_struct = parse_real(key, value);
  else if (key == "r_kv") skv.r_kv = parse_real(key, value);
  else if (key == "l_limit") skv.l_limit = parse_index(key, value);
  else if (key == "sparsity_frac") skv.sparsity_frac = parse_real(key, value);
  else if (key == "block_size") skv.block_size = parse_index(key, value);
  else if (key == "n_sinks") skv.n_sinks = parse_index(key, value);
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "n_tokens") n_tokens = parse_index(key, value);
  else if (key == "policy") policy = value;
  else if (key == "scenario") scenario = value;
  else if (key == "oracle") oracle = parse_bool(key, value);
  else if (key == "fixed_pivot") fixed_pivot = parse_index(key, value);
  else if (key == "hub_depth") hub_depth = parse_real(key, value);
  else if (key == "band_start") band_start = parse_index(key, value);
  else if (key == "band_end") band_end = parse_index(key, value);
  else if (key == "needle_depth") needle_depth = parse_real(key, value);
  else throw ConfigError("unknown config key: " + key);
}

void RunConfig::validate() const {
  model.validate();
  skv.validate(model.n_layers);
  if (n_tokens < 1) throw ConfigError("n_tokens must be >= 1");
  if (n_tokens <= skv.window) {
    throw ConfigError("n_tokens must exceed the window");
  }
}

std::string RunConfig::to_kv_string() const {
  std::ostringstream os;
  os << "band_end=" << band_end << "\n"
     << "band_start=" << band_start << "\n"
     << "block_size=" << skv.block_size << "\n"
     << "decay=" << render_real(skv.decay) << "\n"
     << "fixed_pivot=" << fixed_pivot << "\n"
     << "head_dim=" << model.head_dim << "\n"
     << "hidden_dim=" << model.hidden_dim << "\n"
     << "hub_depth=" << render_real(hub_depth) << "\n"
     << "l_limit=" << skv.l_limit << "\n"
     << "n_heads=" << model.n_heads << "\n"
     << "n_kv_groups=" << model.n_kv_groups << "\n"
     << "n_layers=" << model.n_layers << "\n"
     << "n_sinks=" << skv.n_sinks << "\n"
     << "n_tokens=" << n_tokens << "\n"
     << "needle_depth=" << render_real(needle_depth) << "\n"
     << "oracle=" << (oracle ? "true" : "false") << "\n"
     << "policy=" << policy << "\n"
     << "r_kv=" << render_real(skv.r_kv) << "\n"
     << "r_struct=" << render_real(skv.r_struct) << "\n"
     << "rope_base=" << render_real(model.rope_base) << "\n"
     << "scenario=" << scenario << "\n"
     << "seed=" << seed << "\n"
     << "sparsity_frac=" << render_real(skv.sparsity_frac) << "\n"
     << "vocab_size=" << model.vocab_size << "\n"
     << "w1=" << render_real(skv.w1) << "\n"
     << "w2=" << render_real(skv.w2) << "\n"
     << "w3=" << render_real(skv.w3) << "\n"
     << "window=" << skv.window << "\n";
  return os.str();
}

std::uint64_t RunConfig::config_hash() const { return fnv1a64(to_kv_string()); }

std::uint64_t model_config_hash(const ModelConfig& cfg) {
  std::ostringstream os;
  os << cfg.n_layers << "|" << cfg.n_heads << "|" << cfg.n_kv_groups << "|"
     << cfg.head_dim << "|" << cfg.hidden_dim << "|" << cfg.vocab_size << "|"
     << render_real(cfg.rope_base);
  return fnv1a64(os.str());
}

RunConfig parse_config_text(const std::string& text,
                            const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected key=value");
    }
    cfg.apply_key(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

}  // namespace structkv
