#include "holofuse/pipeline/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "holofuse/errors.hpp"

namespace holofuse::pipeline {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config key '" + std::string(key) + "': '" + std::string(value) + "' is not " +
                    std::string(expected));
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "a finite number");
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::size_t to_size(std::string_view key, std::string_view v) { return static_cast<std::size_t>(to_u64(key, v)); }

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::string> split_list(std::string_view v) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto end = comma == std::string_view::npos ? v.size() : comma;
    std::string item = trim(v.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::size_t> to_sizes(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  for (const std::string& item : split_list(v)) out.push_back(to_size(key, item));
  return out;
}

std::string fmt(double v) { return nlohmann::json(v).dump(); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, std::string>) {
      out += items[i];
    } else {
      out += std::to_string(items[i]);
    }
  }
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

#define HF_DOUBLE(name, member) \
  Field{name, [](const RunConfig& c) { return fmt(c.member); }, [](RunConfig& c, std::string_view v) { c.member = to_double(name, v); }}
#define HF_SIZE(name, member)                                                    \
  Field{name, [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.member)); }, \
        [](RunConfig& c, std::string_view v) { c.member = to_size(name, v); }}
#define HF_U64(name, member) \
  Field{name, [](const RunConfig& c) { return fmt(c.member); }, [](RunConfig& c, std::string_view v) { c.member = to_u64(name, v); }}
#define HF_BOOL(name, member) \
  Field{name, [](const RunConfig& c) { return fmt(c.member); }, [](RunConfig& c, std::string_view v) { c.member = to_bool(name, v); }}
#define HF_STRING(name, member) \
  Field{name, [](const RunConfig& c) { return c.member; }, [](RunConfig& c, std::string_view v) { c.member = std::string(v); }}
#define HF_SIZES(name, member) \
  Field{name, [](const RunConfig& c) { return join(c.member); }, [](RunConfig& c, std::string_view v) { c.member = to_sizes(name, v); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      HF_STRING("dataset", dataset),
      HF_STRING("out", out),
      HF_STRING("checkpoint", checkpoint),
      HF_U64("seed", seed),
      HF_DOUBLE("target_rate_hz", preprocess.target_rate_hz),
      HF_DOUBLE("band_low_hz", preprocess.band_low_hz),
      HF_DOUBLE("band_high_hz", preprocess.band_high_hz),
      HF_SIZE("filter_order", preprocess.filter_order),
      HF_BOOL("robust_scale", preprocess.robust_scale),
      HF_DOUBLE("window_s", train.window_s),
      HF_DOUBLE("stride_s", train.stride_s),
      HF_SIZE("memory_length", model.memory_length),
      HF_SIZE("encoder_levels", model.encoder.levels),
      HF_SIZE("encoder_kernel", model.encoder.kernel_size),
      HF_SIZES("encoder_widths", model.encoder.widths),
      HF_SIZE("embedding_dim", model.encoder.output_dim),
      HF_DOUBLE("leaky_slope", model.encoder.leaky_slope),
      HF_SIZE("tcn_blocks", model.tcn.blocks),
      HF_SIZE("tcn_kernel", model.tcn.kernel_size),
      HF_SIZES("tcn_dilations", model.tcn.dilations),
      HF_SIZE("tcn_hidden", model.tcn.hidden),
      HF_SIZE("mlp_hidden", model.mlp_hidden),
      Field{"fusion", [](const RunConfig& c) { return to_string(c.model.fusion); },
            [](RunConfig& c, std::string_view v) {
              if (v == "hrr") c.model.fusion = FusionMode::hrr;
              else if (v == "mean") c.model.fusion = FusionMode::mean;
              else bad_value("fusion", v, "one of hrr, mean");
            }},
      Field{"head", [](const RunConfig& c) { return to_string(c.model.head); },
            [](RunConfig& c, std::string_view v) {
              if (v == "tcn") c.model.head = HeadMode::tcn;
              else if (v == "mlp") c.model.head = HeadMode::mlp;
              else bad_value("head", v, "one of tcn, mlp");
            }},
      HF_U64("basis_seed", model.basis_seed),
      HF_DOUBLE("learning_rate", train.learning_rate),
      HF_DOUBLE("key_learning_rate", train.key_learning_rate),
      HF_SIZE("batch_size", train.batch_size),
      HF_SIZE("segments_per_batch", train.segments_per_batch),
      HF_SIZE("batches_per_epoch", train.batches_per_epoch),
      HF_SIZE("pretrain_min_epochs", train.pretrain_min_epochs),
      HF_SIZE("pretrain_max_epochs", train.pretrain_max_epochs),
      HF_SIZE("plateau_window", train.plateau_window),
      HF_DOUBLE("plateau_min_delta", train.plateau_min_delta),
      HF_SIZE("finetune_max_epochs", train.finetune_max_epochs),
      HF_SIZE("finetune_epoch_ratio", train.finetune_epoch_ratio),
      HF_SIZE("finetune_batches_per_epoch", train.finetune_batches_per_epoch),
      Field{"scheme", [](const RunConfig& c) { return to_string(c.train.scheme); },
            [](RunConfig& c, std::string_view v) { c.train.scheme = parse_scheme(v); }},
      HF_BOOL("freeze_all_but_fusion", train.freeze_all_but_fusion),
      HF_DOUBLE("train_context_s", train.train_context_s),
      HF_DOUBLE("eval_context_s", train.eval_context_s),
      Field{"test_subjects", [](const RunConfig& c) { return join(c.test_subjects); },
            [](RunConfig& c, std::string_view v) { c.test_subjects = split_list(v); }},
      HF_SIZE("pool_size", pool_size),
      HF_SIZES("scaling_pool_sizes", scaling_pool_sizes),
  };
  return table;
}

#undef HF_DOUBLE
#undef HF_SIZE
#undef HF_U64
#undef HF_BOOL
#undef HF_STRING
#undef HF_SIZES

}  // namespace

std::string to_string(Scheme s) { return s == Scheme::looc ? "looc" : "laboc"; }
std::string to_string(FusionMode m) { return m == FusionMode::hrr ? "hrr" : "mean"; }
std::string to_string(HeadMode m) { return m == HeadMode::tcn ? "tcn" : "mlp"; }

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full:
      return "full";
    case Variant::no_pretrain:
      return "no_pretrain";
    case Variant::mean_fusion:
      return "mean_fusion";
    case Variant::no_memory:
      return "no_memory";
  }
  return "?";
}

Scheme parse_scheme(std::string_view s) {
  if (s == "looc") return Scheme::looc;
  if (s == "laboc") return Scheme::laboc;
  throw ConfigError("unknown fine-tuning scheme '" + std::string(s) + "' (expected looc or laboc)");
}

Variant parse_variant(std::string_view s) {
  for (Variant v : {Variant::full, Variant::no_pretrain, Variant::mean_fusion, Variant::no_memory}) {
    if (s == to_string(v)) return v;
  }
  throw ConfigError("unknown ablation variant '" + std::string(s) +
                    "' (expected full, no_pretrain, mean_fusion or no_memory)");
}

void ModelConfig::validate() const {
  encoder.validate();
  if (memory_length < 1) throw ConfigError("memory_length must be >= 1");
  if (head == HeadMode::tcn) tcn.validate(memory_length);
  if (head == HeadMode::mlp && mlp_hidden < 1) throw ConfigError("mlp_hidden must be >= 1");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"encoder",
       {{"levels", c.encoder.levels},
        {"kernel_size", c.encoder.kernel_size},
        {"widths", c.encoder.widths},
        {"output_dim", c.encoder.output_dim},
        {"window_samples", c.encoder.window_samples},
        {"leaky_slope", c.encoder.leaky_slope}}},
      {"tcn",
       {{"blocks", c.tcn.blocks},
        {"kernel_size", c.tcn.kernel_size},
        {"dilations", c.tcn.dilations},
        {"hidden", c.tcn.hidden},
        {"leaky_slope", c.tcn.leaky_slope}}},
      {"mlp_hidden", c.mlp_hidden},
      {"fusion", to_string(c.fusion)},
      {"head", to_string(c.head)},
      {"basis_seed", c.basis_seed},
      {"memory_length", c.memory_length},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    const auto& e = j.at("encoder");
    c.encoder.levels = e.at("levels").get<std::size_t>();
    c.encoder.kernel_size = e.at("kernel_size").get<std::size_t>();
    c.encoder.widths = e.at("widths").get<std::vector<std::size_t>>();
    c.encoder.output_dim = e.at("output_dim").get<std::size_t>();
    c.encoder.window_samples = e.at("window_samples").get<std::size_t>();
    c.encoder.leaky_slope = e.at("leaky_slope").get<double>();
    const auto& t = j.at("tcn");
    c.tcn.blocks = t.at("blocks").get<std::size_t>();
    c.tcn.kernel_size = t.at("kernel_size").get<std::size_t>();
    c.tcn.dilations = t.at("dilations").get<std::vector<std::size_t>>();
    c.tcn.hidden = t.at("hidden").get<std::size_t>();
    c.tcn.leaky_slope = t.at("leaky_slope").get<double>();
    c.mlp_hidden = j.at("mlp_hidden").get<std::size_t>();
    const auto fusion = j.at("fusion").get<std::string>();
    c.fusion = fusion == "mean" ? FusionMode::mean : FusionMode::hrr;
    c.head = j.at("head").get<std::string>() == "mlp" ? HeadMode::mlp : HeadMode::tcn;
    c.basis_seed = j.at("basis_seed").get<std::uint64_t>();
    c.memory_length = j.at("memory_length").get<std::size_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
}

void TrainConfig::validate() const {
  const auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(learning_rate > 0.0) || !(key_learning_rate >= 0.0)) fail("learning rates must be positive");
  if (!(window_s > 0.0) || !(stride_s > 0.0)) fail("window_s and stride_s must be positive");
  if (batch_size == 0 || segments_per_batch == 0 || segments_per_batch > batch_size) {
    fail("need 1 <= segments_per_batch <= batch_size");
  }
  if (batches_per_epoch == 0 || finetune_batches_per_epoch == 0) fail("batches per epoch must be >= 1");
  if (pretrain_min_epochs == 0 || pretrain_min_epochs > pretrain_max_epochs) {
    fail("need 1 <= pretrain_min_epochs <= pretrain_max_epochs");
  }
  if (plateau_window == 0) fail("plateau_window must be >= 1");
  if (finetune_max_epochs == 0) fail("finetune_max_epochs must be >= 1");
  if (finetune_epoch_ratio == 0) fail("finetune_epoch_ratio must be >= 1");
  if (train_context_s < 0.0 || eval_context_s < 0.0) fail("context lengths must be non-negative");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {
      {"learning_rate", c.learning_rate},
      {"key_learning_rate", c.key_learning_rate},
      {"window_s", c.window_s},
      {"stride_s", c.stride_s},
      {"batch_size", c.batch_size},
      {"segments_per_batch", c.segments_per_batch},
      {"batches_per_epoch", c.batches_per_epoch},
      {"pretrain_min_epochs", c.pretrain_min_epochs},
      {"pretrain_max_epochs", c.pretrain_max_epochs},
      {"plateau_window", c.plateau_window},
      {"plateau_min_delta", c.plateau_min_delta},
      {"finetune_max_epochs", c.finetune_max_epochs},
      {"finetune_epoch_ratio", c.finetune_epoch_ratio},
      {"finetune_batches_per_epoch", c.finetune_batches_per_epoch},
      {"scheme", to_string(c.scheme)},
      {"freeze_all_but_fusion", c.freeze_all_but_fusion},
      {"train_context_s", c.train_context_s},
      {"eval_context_s", c.eval_context_s},
      {"seed", c.seed},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  try {
    TrainConfig c;
    c.learning_rate = j.at("learning_rate").get<double>();
    c.key_learning_rate = j.at("key_learning_rate").get<double>();
    c.window_s = j.at("window_s").get<double>();
    c.stride_s = j.at("stride_s").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.segments_per_batch = j.at("segments_per_batch").get<std::size_t>();
    c.batches_per_epoch = j.at("batches_per_epoch").get<std::size_t>();
    c.pretrain_min_epochs = j.at("pretrain_min_epochs").get<std::size_t>();
    c.pretrain_max_epochs = j.at("pretrain_max_epochs").get<std::size_t>();
    c.plateau_window = j.at("plateau_window").get<std::size_t>();
    c.plateau_min_delta = j.at("plateau_min_delta").get<double>();
    c.finetune_max_epochs = j.at("finetune_max_epochs").get<std::size_t>();
    c.finetune_epoch_ratio = j.at("finetune_epoch_ratio").get<std::size_t>();
    c.finetune_batches_per_epoch = j.at("finetune_batches_per_epoch").get<std::size_t>();
    c.scheme = parse_scheme(j.at("scheme").get<std::string>());
    c.freeze_all_but_fusion = j.at("freeze_all_but_fusion").get<bool>();
    c.train_context_s = j.at("train_context_s").get<double>();
    c.eval_context_s = j.at("eval_context_s").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("train config: ") + e.what());
  }
}

void RunConfig::resolve() {
  const double w = train.window_s * preprocess.target_rate_hz;
  if (std::abs(w - std::round(w)) > 1e-6 || w < 1.0) {
    throw ConfigError("window_s * target_rate_hz must be a whole number of samples");
  }
  model.encoder.window_samples = static_cast<std::size_t>(std::llround(w));
  train.seed = seed;
  if (!(preprocess.band_low_hz > 0.0) || !(preprocess.band_low_hz < preprocess.band_high_hz)) {
    throw ConfigError("need 0 < band_low_hz < band_high_hz");
  }
  if (!(preprocess.band_high_hz < 0.5 * preprocess.target_rate_hz)) {
    throw ConfigError("band_high_hz must be below Nyquist of target_rate_hz");
  }
  if (preprocess.filter_order == 0) throw ConfigError("filter_order must be >= 1");
  model.validate();
  train.validate();
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  const std::string v = trim(value);
  if (key == "context_policy") {
    // Shortcut for the paper's two dataset styles.
    if (v == "short") {
      config.train.eval_context_s = config.train.train_context_s = kShortTermContextS;
    } else if (v == "long") {
      config.train.eval_context_s = config.train.train_context_s = kLongTermContextS;
    } else {
      bad_value(key, v, "one of short, long");
    }
    return;
  }
  for (const Field& f : fields()) {
    if (f.key == key) {
      f.set(config, v);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RunConfig parse_config_text(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    try {
      apply_setting(base, key, std::string_view(body).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(number) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), std::move(base));
}

std::string to_config_text(const RunConfig& config) {
  std::string out;
  for (const Field& f : fields()) {
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.push_back(f.key);
  keys.emplace_back("context_policy");
  return keys;
}

}  // namespace holofuse::pipeline
