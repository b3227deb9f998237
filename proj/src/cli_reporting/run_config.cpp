#include "qrnn/run_config.h"

#include <charconv>
#include <cstdlib>
#include <fstream>

#include "qrnn/errors.h"

namespace qrnn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<ConfigKey>& RunConfig::keys() {
  static const std::vector<ConfigKey> table = {
      {"task", "sum", "sum, sentiment or frames"},
      {"model", "lstm", "lstm or gru (sum, sentiment); convlstm (frames)"},
      {"scheme", "fp", "fp, bc, tc or qc"},
      {"shape", "normal", "threshold family for tc and qc: normal or uniform"},
      {"stats", "per-tensor", "quantizer statistics: per-tensor or per-cell"},
      {"hidden", "128", "hidden units (channels for convlstm)"},
      {"epochs", "20", "training epochs"},
      {"batch", "64", "mini-batch size"},
      {"seed", "1", "seed for initialization, data and shuffling"},
      {"lr", "0.001", "Adam learning rate"},
      {"beta1", "0.9", "Adam first-moment decay"},
      {"beta2", "0.999", "Adam second-moment decay"},
      {"adam-eps", "1e-08", "Adam epsilon"},
      {"loss", "bce", "bce or mse"},
      {"grad-clip", "off", "global gradient-norm clip, or off"},
      {"quantized-eval", "true", "evaluate with quantized weights"},
      {"quantize-biases", "false", "quantize bias vectors too"},
      {"quantize-embedding", "false", "quantize the sentiment embedding table"},
      {"record-time", "false", "write wall-clock seconds per epoch"},
      {"data-dir", "data", "data root (default from QRNN_DATA_DIR)"},
      {"out-dir", "out", "directory for reports, checkpoints and exports"},
      {"checkpoint", "", "checkpoint path (default <out-dir>/model.ckpt)"},
      {"source", "auto", "auto, files or generate"},
      {"max-digits", "2", "sum: operand digits"},
      {"train-samples", "1000", "sum: training samples per epoch"},
      {"val-samples", "500", "sum: held-out samples"},
      {"max-features", "20000", "sentiment: vocabulary size"},
      {"maxlen", "80", "sentiment: tokens per review"},
      {"embed", "128", "sentiment: embedding width"},
      {"train-limit", "0", "sentiment: use only the first N training reviews (0: all)"},
      {"synthetic-samples", "2000", "sentiment: reviews per split when generating"},
      {"height", "64", "frames: canvas height"},
      {"width", "64", "frames: canvas width"},
      {"kernel", "3", "frames: convolution size"},
      {"frames", "15", "frames: frames per sequence"},
      {"sequences", "128", "frames: training sequences"},
      {"test-sequences", "32", "frames: held-out sequences"},
      {"glyphs", "2", "frames: glyphs per sequence"},
      {"glyph-size", "16", "frames: glyph edge in pixels"},
      {"max-speed", "3", "frames: largest per-frame displacement"},
      {"glyph-file", "", "frames: IDX file of [N, h, w] glyph images"},
      {"horizon", "3", "rollout: predicted frames"},
      {"export", "4", "rollout: sequences written as PGM images"},
      {"bins", "64", "quant-report: histogram bins"},
  };
  return table;
}

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  for (const auto& k : keys()) cfg.values_[k.name] = {k.fallback, ConfigLayer::kDefault};
  if (const char* dir = std::getenv("QRNN_DATA_DIR"); dir && *dir) {
    cfg.values_["data-dir"] = {dir, ConfigLayer::kDefault};
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value, ConfigLayer layer) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown setting '" + key + "'");
  if (layer < it->second.second) return;
  it->second = {value, layer};
}

void RunConfig::merge(const std::vector<std::pair<std::string, std::string>>& entries,
                      ConfigLayer layer) {
  for (const auto& [k, v] : entries) set(k, v, layer);
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown setting '" + key + "'");
  return it->second.first;
}

ConfigLayer RunConfig::layer(const std::string& key) const {
  get(key);
  return values_.at(key).second;
}

std::int64_t RunConfig::integer(const std::string& key) const {
  const std::string& s = get(key);
  std::int64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ConfigError(key + " must be an integer, got '" + s + "'");
  }
  return v;
}

std::size_t RunConfig::count(const std::string& key) const {
  const std::int64_t v = integer(key);
  if (v < 0) throw ConfigError(key + " must be non-negative, got " + get(key));
  return std::size_t(v);
}

double RunConfig::real(const std::string& key) const {
  const std::string& s = get(key);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ConfigError(key + " must be a number, got '" + s + "'");
  }
  return v;
}

bool RunConfig::flag(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key + " must be true or false, got '" + s + "'");
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : keys()) out.emplace_back(k.name, values_.at(k.name).first);
  return out;
}

QuantScheme RunConfig::scheme() const { return parse_scheme(get("scheme"), get("shape")); }

ModelSpec RunConfig::model_spec() const {
  ModelSpec s;
  s.task = parse_task(get("task"));
  s.cell = parse_cell(get("model"));
  s.hidden = count("hidden");
  s.max_digits = count("max-digits");
  s.max_features = count("max-features");
  s.maxlen = count("maxlen");
  s.embed = count("embed");
  s.height = count("height");
  s.width = count("width");
  s.kernel = count("kernel");
  s.quantize_biases = flag("quantize-biases");
  s.quantize_embedding = flag("quantize-embedding");
  return s;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  c.scheme = scheme();
  const std::string& stats = get("stats");
  if (stats == "per-tensor") {
    c.granularity = StatsGranularity::kPerTensor;
  } else if (stats == "per-cell") {
    c.granularity = StatsGranularity::kPerCell;
  } else {
    throw ConfigError("stats must be per-tensor or per-cell, got '" + stats + "'");
  }
  c.adam = {real("lr"), real("beta1"), real("beta2"), real("adam-eps")};
  const std::string& loss = get("loss");
  if (loss == "bce") {
    c.loss = LossKind::kBinaryCrossEntropy;
  } else if (loss == "mse") {
    c.loss = LossKind::kMeanSquaredError;
  } else {
    throw ConfigError("loss must be bce or mse, got '" + loss + "'");
  }
  c.batch_size = count("batch");
  c.epochs = count("epochs");
  c.seed = std::uint64_t(integer("seed"));
  if (get("grad-clip") != "off") c.grad_clip = real("grad-clip");
  c.quantized_eval = flag("quantized-eval");
  c.record_wall_time = flag("record-time");
  c.validate();
  return c;
}

std::string RunConfig::checkpoint_path() const {
  const std::string& p = get("checkpoint");
  return p.empty() ? get("out-dir") + "/model.ckpt" : p;
}

void RunConfig::validate() const {
  model_spec().validate();
  train_config();
  const std::string& source = get("source");
  if (source != "auto" && source != "files" && source != "generate") {
    throw ConfigError("source must be auto, files or generate, got '" + source + "'");
  }
  if (count("epochs") == 0) throw ConfigError("epochs must be at least 1");
  const Task task = parse_task(get("task"));
  if (task == Task::kSum && (count("train-samples") == 0 || count("val-samples") == 0)) {
    throw ConfigError("train-samples and val-samples must be at least 1");
  }
  if (task == Task::kFrames) {
    if (count("frames") < kContextFrames + kTargetFrames) {
      throw ConfigError("frames must be at least " +
                        std::to_string(kContextFrames + kTargetFrames));
    }
    if (count("sequences") == 0 || count("test-sequences") == 0) {
      throw ConfigError("sequences and test-sequences must be at least 1");
    }
  }
}

std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 'key = value'", line_no);
    }
    const std::string key = trim(body.substr(0, eq));
    if (key.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty key", line_no);
    out.emplace_back(key, trim(body.substr(eq + 1)));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  try {
    return parse_config(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.location());
  }
}

void write_config(std::ostream& out, const RunConfig& cfg) {
  for (const auto& [k, v] : cfg.entries()) out << k << " = " << v << '\n';
}

}  // namespace qrnn
