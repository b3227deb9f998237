#include "qrnn/commands.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "qrnn/errors.h"
#include "qrnn/idx.h"
#include "qrnn/metrics.h"

namespace qrnn {

namespace fs = std::filesystem;

namespace {

using Real32 = float;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Independent seed for one data stream of a run.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return Rng(seed + 0x9e3779b97f4a7c15ULL * (stream + 1)).next();
}

fs::path out_dir(const RunConfig& cfg, const std::string& sub = "") {
  fs::path p = cfg.get("out-dir");
  if (!sub.empty()) p /= sub;
  fs::create_directories(p);
  return p;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

bool use_files(const RunConfig& cfg, const std::vector<fs::path>& paths) {
  const std::string& source = cfg.get("source");
  if (source == "generate") return false;
  bool all = true;
  for (const auto& p : paths) all = all && fs::exists(p);
  if (source == "files" && !all) {
    for (const auto& p : paths)
      if (!fs::exists(p)) throw IoError("missing data file " + p.string());
  }
  return all;
}

// ---- summation ----

struct SumData {
  std::vector<SumSample> train, val;
  std::string source;
};

std::vector<SumSample> read_sum_file(const fs::path& p, std::size_t digits) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  std::vector<SumSample> out;
  std::string line;
  long long no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(p.string() + ":" + std::to_string(no) + ": missing tab", no);
    }
    SumSample s{encode_sum(line.substr(0, tab)), encode_sum(line.substr(tab + 1))};
    if (s.input_ids.size() != sum_input_width(digits) ||
        s.target_ids.size() != sum_target_width(digits)) {
      throw DataError(p.string() + ":" + std::to_string(no) + ": width does not match max-digits");
    }
    out.push_back(std::move(s));
  }
  return out;
}

SumData load_sum(const RunConfig& cfg) {
  const fs::path dir = fs::path(cfg.get("data-dir")) / "sum";
  const std::size_t digits = cfg.count("max-digits");
  SumData d;
  if (use_files(cfg, {dir / "train.txt", dir / "val.txt"})) {
    d.train = read_sum_file(dir / "train.txt", digits);
    d.val = read_sum_file(dir / "val.txt", digits);
    d.source = "files";
  } else {
    const std::uint64_t seed = std::uint64_t(cfg.integer("seed"));
    d.train = gen_sum_dataset(cfg.count("train-samples"), digits, stream_seed(seed, 1));
    d.val = gen_sum_dataset(cfg.count("val-samples"), digits, stream_seed(seed, 2));
    d.source = "generated";
  }
  return d;
}

// ---- sentiment ----

struct SentimentData {
  std::vector<SentimentSample> train, test;
  std::string source;
};

SyntheticSentimentConfig synthetic_config(const RunConfig& cfg, std::uint64_t stream) {
  SyntheticSentimentConfig s;
  s.samples = cfg.count("synthetic-samples");
  s.vocab = cfg.count("max-features");
  s.seed = stream_seed(std::uint64_t(cfg.integer("seed")), stream);
  return s;
}

SentimentData load_sentiment_data(const RunConfig& cfg) {
  const fs::path dir = fs::path(cfg.get("data-dir")) / "sentiment";
  SentimentData d;
  if (use_files(cfg, {dir / "train.tsv", dir / "test.tsv"})) {
    d.train = load_sentiment((dir / "train.tsv").string());
    d.test = load_sentiment((dir / "test.tsv").string());
    d.source = "files";
  } else {
    d.train = gen_synthetic_sentiment(synthetic_config(cfg, 3));
    d.test = gen_synthetic_sentiment(synthetic_config(cfg, 4));
    d.source = "synthetic";
  }
  if (const std::size_t limit = cfg.count("train-limit"); limit > 0 && limit < d.train.size()) {
    d.train.resize(limit);
  }
  if (d.train.empty() || d.test.empty()) throw DataError("sentiment corpus has an empty split");
  const std::size_t vocab = cfg.count("max-features"), maxlen = cfg.count("maxlen");
  d.train = preprocess(d.train, vocab, maxlen);
  d.test = preprocess(d.test, vocab, maxlen);
  return d;
}

// ---- frames ----

struct FrameData {
  std::vector<FrameSequence> train, test;
  std::string source;
};

std::vector<FrameSequence> frames_from_idx(const fs::path& p) {
  const Tensor<float> all = load_idx(p.string());
  if (all.rank() != 4) throw DataError(p.string() + ": expected [N, T, H, W] frames");
  const std::size_t N = all.dim(0), per = all.size() / N;
  std::vector<FrameSequence> out;
  for (std::size_t n = 0; n < N; ++n) {
    Tensor<float> f({all.dim(1), all.dim(2), all.dim(3)});
    std::copy_n(all.raw() + n * per, per, f.raw());
    out.push_back(FrameSequence{std::move(f)});
  }
  return out;
}

void frames_to_idx(const fs::path& p, const std::vector<FrameSequence>& seqs) {
  const Shape& s = seqs.at(0).frames.shape();
  IdxArray a{{seqs.size(), s[0], s[1], s[2]}, {}};
  for (const auto& q : seqs)
    for (float v : q.frames.data())
      a.bytes.push_back(std::uint8_t(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  write_idx(p.string(), a);
}

std::vector<Tensor<float>> glyph_images(const RunConfig& cfg) {
  const std::string& file = cfg.get("glyph-file");
  if (file.empty()) return {};
  const Tensor<float> all = load_idx(file);
  if (all.rank() != 3) throw DataError(file + ": expected [N, h, w] glyph images");
  const std::size_t N = std::min<std::size_t>(all.dim(0), 1000), area = all.dim(1) * all.dim(2);
  std::vector<Tensor<float>> out;
  for (std::size_t n = 0; n < N; ++n) {
    Tensor<float> g({all.dim(1), all.dim(2)});
    std::copy_n(all.raw() + n * area, area, g.raw());
    out.push_back(std::move(g));
  }
  return out;
}

MovingFramesConfig frames_config(const RunConfig& cfg, std::size_t count, std::uint64_t stream) {
  MovingFramesConfig m;
  m.sequences = count;
  m.frames = cfg.count("frames");
  m.height = cfg.count("height");
  m.width = cfg.count("width");
  m.glyphs_per_sequence = cfg.count("glyphs");
  m.glyph_size = cfg.count("glyph-size");
  m.max_speed = int(cfg.integer("max-speed"));
  m.seed = stream_seed(std::uint64_t(cfg.integer("seed")), stream);
  return m;
}

FrameData load_frames(const RunConfig& cfg) {
  const fs::path dir = fs::path(cfg.get("data-dir")) / "frames";
  FrameData d;
  if (use_files(cfg, {dir / "train.idx", dir / "test.idx"})) {
    d.train = frames_from_idx(dir / "train.idx");
    d.test = frames_from_idx(dir / "test.idx");
    d.source = "files";
  } else {
    const auto glyphs = glyph_images(cfg);
    d.train = gen_moving_frames(frames_config(cfg, cfg.count("sequences"), 5), glyphs);
    d.test = gen_moving_frames(frames_config(cfg, cfg.count("test-sequences"), 6), glyphs);
    d.source = "generated";
  }
  for (const auto* set : {&d.train, &d.test})
    for (const auto& s : *set)
      if (s.frames.dim(1) != cfg.count("height") || s.frames.dim(2) != cfg.count("width")) {
        throw DataError("frame size does not match height and width settings");
      }
  return d;
}

// ---- shared plumbing ----

QuantPolicy policy_of(const TrainConfig& c) {
  QuantPolicy p{c.scheme, c.granularity};
  if (!c.quantized_eval) p.scheme = QuantScheme::full_precision();
  return p;
}

nlohmann::json checkpoint_meta(const RunConfig& cfg, const std::string& source) {
  nlohmann::json config = nlohmann::json::object();
  for (const auto& [k, v] : cfg.entries()) config[k] = v;
  return {{"model", cfg.model_spec().to_json()}, {"config", config}, {"data_source", source}};
}

std::unique_ptr<Model<Real32>> restore_model(const Checkpoint& ckpt) {
  const ModelSpec spec = ModelSpec::from_json(ckpt.meta.at("model"));
  auto model = build_model<Real32>(spec, 0);
  restore(ckpt, model->store());
  return model;
}

void write_metrics(const fs::path& p, const Metrics& m) {
  std::ofstream out = open_out(p);
  out << "metric,value\n";
  for (const auto& [k, v] : m) out << k << ',' << fmt(v) << '\n';
}

}  // namespace

void apply_checkpoint_layer(RunConfig& cfg, const Checkpoint& ckpt) {
  if (!ckpt.meta.contains("config")) throw DataError("checkpoint carries no run configuration");
  for (const auto& [k, v] : ckpt.meta.at("config").items()) {
    // Locations belong to the current invocation.
    if (k == "out-dir" || k == "checkpoint" || k == "data-dir") continue;
    cfg.set(k, v.get<std::string>(), ConfigLayer::kCheckpoint);
  }
}

void cmd_gen_data(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Task task = parse_task(cfg.get("task"));
  RunConfig gen = cfg;
  gen.set("source", "generate", ConfigLayer::kFlag);
  if (task == Task::kSum) {
    const SumData d = load_sum(gen);
    const fs::path dir = out_dir(cfg, "sum");
    for (const auto& [name, set] : {std::pair{"train.txt", &d.train}, std::pair{"val.txt", &d.val}}) {
      std::ofstream out = open_out(dir / name);
      for (const auto& s : *set) out << decode_sum(s.input_ids) << '\t' << decode_sum(s.target_ids) << '\n';
      log << "wrote " << (dir / name).string() << " (" << set->size() << " samples)\n";
    }
  } else if (task == Task::kSentiment) {
    const fs::path dir = out_dir(cfg, "sentiment");
    write_sentiment((dir / "train.tsv").string(), gen_synthetic_sentiment(synthetic_config(cfg, 3)));
    write_sentiment((dir / "test.tsv").string(), gen_synthetic_sentiment(synthetic_config(cfg, 4)));
    log << "wrote " << (dir / "train.tsv").string() << " and test.tsv (synthetic)\n";
  } else {
    const FrameData d = load_frames(gen);
    const fs::path dir = out_dir(cfg, "frames");
    frames_to_idx(dir / "train.idx", d.train);
    frames_to_idx(dir / "test.idx", d.test);
    log << "wrote " << (dir / "train.idx").string() << " (" << d.train.size() << " sequences) and "
        << (dir / "test.idx").string() << " (" << d.test.size() << " sequences)\n";
  }
}

TrainOutcome cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const ModelSpec spec = cfg.model_spec();
  const TrainConfig tc = cfg.train_config();
  auto model = build_model<Real32>(spec, tc.seed);
  Trainer<Real32> trainer(*model, tc);
  TrainOutcome outcome;
  std::string source;

  if (spec.task == Task::kSum) {
    const SumData d = load_sum(cfg);
    SumSource<Real32> train(d.train), val(d.val);
    outcome.report = fit(trainer, train, &val);
    outcome.report.test_metric = trainer.evaluate(val).metric;
    source = d.source;
  } else if (spec.task == Task::kSentiment) {
    const SentimentData d = load_sentiment_data(cfg);
    SentimentSource<Real32> train(d.train), test(d.test);
    outcome.report = fit(trainer, train, &test);
    outcome.report.test_metric = trainer.evaluate(test).metric;
    source = d.source;
  } else {
    const FrameData d = load_frames(cfg);
    FrameSource<Real32> train(d.train), test(d.test);
    outcome.report = fit(trainer, train, &test);
    const auto mse = rollout_mse<Real32>(*model, policy_of(tc), d.test, tc.batch_size);
    outcome.report.test_metric = std::accumulate(mse.begin(), mse.end(), 0.0) / double(mse.size());
    source = d.source;
  }

  outcome.report.config = cfg.entries();
  outcome.report.config.emplace_back("data-source", source);
  const fs::path dir = out_dir(cfg);
  outcome.report_path = (dir / "report.csv").string();
  {
    std::ofstream out = open_out(outcome.report_path);
    write_report_csv(out, outcome.report);
  }
  {
    std::ofstream out = open_out(dir / "config.txt");
    write_config(out, cfg);
  }
  outcome.checkpoint_path = cfg.checkpoint_path();
  if (const fs::path parent = fs::path(outcome.checkpoint_path).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  write_checkpoint(outcome.checkpoint_path, snapshot(model->store(), checkpoint_meta(cfg, source)));
  log << "wrote " << outcome.report_path << '\n' << "wrote " << outcome.checkpoint_path << '\n';
  const std::string label =
      spec.task == Task::kFrames ? "rollout_mse_frames_8_10" : model->metric_name();
  log << "test " << label << " = " << fmt(*outcome.report.test_metric) << '\n';
  return outcome;
}

Metrics cmd_eval(const RunConfig& given, std::ostream& log) {
  const Checkpoint ckpt = read_checkpoint(given.checkpoint_path());
  RunConfig cfg = given;
  apply_checkpoint_layer(cfg, ckpt);
  cfg.validate();
  auto model = restore_model(ckpt);
  const TrainConfig tc = cfg.train_config();
  Trainer<Real32> trainer(*model, tc);
  Metrics m;
  const Task task = parse_task(cfg.get("task"));
  if (task == Task::kSum) {
    const SumData d = load_sum(cfg);
    const EvalResult r = trainer.evaluate(SumSource<Real32>(d.val));
    m = {{"loss", r.loss}, {"sequence_accuracy", r.metric}};
  } else if (task == Task::kSentiment) {
    const SentimentData d = load_sentiment_data(cfg);
    const EvalResult r = trainer.evaluate(SentimentSource<Real32>(d.test));
    m = {{"loss", r.loss}, {"accuracy", r.metric}};
  } else {
    const FrameData d = load_frames(cfg);
    const EvalResult r = trainer.evaluate(FrameSource<Real32>(d.test));
    m = {{"loss", r.loss}, {"teacher_forced_mse", r.metric}};
    const auto mse = rollout_mse<Real32>(*model, policy_of(tc), d.test, tc.batch_size);
    for (std::size_t k = 0; k < mse.size(); ++k) {
      m.emplace_back("rollout_mse_frame_" + std::to_string(kContextFrames + k + 1), mse[k]);
    }
  }
  const fs::path p = out_dir(cfg) / "eval.csv";
  write_metrics(p, m);
  for (const auto& [k, v] : m) log << k << " = " << fmt(v) << '\n';
  log << "wrote " << p.string() << '\n';
  return m;
}

std::vector<std::string> cmd_quant_report(const RunConfig& given, std::ostream& log) {
  const Checkpoint ckpt = read_checkpoint(given.checkpoint_path());
  RunConfig cfg = given;
  apply_checkpoint_layer(cfg, ckpt);
  const QuantScheme scheme = cfg.scheme();
  const std::size_t bins = cfg.count("bins");
  if (bins == 0) throw ConfigError("bins must be at least 1");
  const fs::path dir = out_dir(cfg, "quant");
  std::ofstream summary = open_out(dir / "summary.csv");
  summary << "param,scheme,elements,shadow_mean,shadow_std,level,fraction\n";
  std::vector<std::string> written;
  for (const auto& e : ckpt.entries) {
    if (!e.quantizable || !e.trainable) continue;
    const Tensor<double> q = quantize(e.value, scheme);
    const fs::path p = dir / (e.name + ".csv");
    {
      std::ofstream out = open_out(p);
      write_histogram_csv(out, weight_histogram(q, bins));
    }
    {
      std::ofstream out = open_out(dir / (e.name + ".shadow.csv"));
      write_histogram_csv(out, weight_histogram(e.value, bins));
    }
    written.push_back(p.string());
    const MeanStd st = mean_std(e.value);
    std::map<double, std::size_t> levels;
    for (double v : q.data()) ++levels[v];
    for (const auto& [level, n] : levels) {
      summary << e.name << ',' << scheme.name() << ',' << q.size() << ',' << fmt(st.mean) << ','
              << fmt(st.stddev) << ',' << fmt(level) << ',' << fmt(double(n) / double(q.size()))
              << '\n';
    }
  }
  log << "wrote " << written.size() << " histograms under " << dir.string() << '\n';
  return written;
}

std::vector<double> cmd_rollout(const RunConfig& given, std::ostream& log) {
  const Checkpoint ckpt = read_checkpoint(given.checkpoint_path());
  RunConfig cfg = given;
  apply_checkpoint_layer(cfg, ckpt);
  cfg.validate();
  if (parse_task(cfg.get("task")) != Task::kFrames) {
    throw UsageError("rollout needs a frames checkpoint, got task " + cfg.get("task"));
  }
  const std::size_t horizon = cfg.count("horizon");
  if (horizon == 0) throw ConfigError("horizon must be at least 1");
  auto model = restore_model(ckpt);
  const TrainConfig tc = cfg.train_config();
  const QuantPolicy policy = policy_of(tc);
  const FrameData d = load_frames(cfg);
  const std::size_t H = cfg.count("height"), W = cfg.count("width"), area = H * W;
  const std::size_t T = d.test.at(0).length();
  const std::size_t scored = std::min(horizon, T - kContextFrames);

  std::vector<double> sums(scored, 0.0);
  const fs::path dir = out_dir(cfg, "rollout");
  const std::size_t exported = std::min(cfg.count("export"), d.test.size());
  for (std::size_t start = 0; start < d.test.size(); start += tc.batch_size) {
    const std::size_t B = std::min(tc.batch_size, d.test.size() - start);
    Tensor<Real32> ctx({B, kContextFrames, H, W});
    for (std::size_t n = 0; n < B; ++n) {
      std::copy_n(d.test[start + n].frames.raw(), kContextFrames * area,
                  ctx.raw() + n * kContextFrames * area);
    }
    const Tensor<Real32> pred = rollout_batch<Real32>(*model, policy, ctx, horizon);
    for (std::size_t n = 0; n < B; ++n) {
      const std::size_t id = start + n;
      const Tensor<float>& truth = d.test[id].frames;
      for (std::size_t k = 0; k < horizon; ++k) {
        Tensor<float> f({H, W});
        std::copy_n(pred.raw() + (n * horizon + k) * area, area, f.raw());
        const std::size_t frame_no = kContextFrames + k + 1;
        if (k < scored) {
          Tensor<float> t({H, W});
          std::copy_n(truth.raw() + (kContextFrames + k) * area, area, t.raw());
          sums[k] += mse_frames(f, t);
          if (id < exported) {
            write_pgm((dir / ("seq" + std::to_string(id) + "_frame" + std::to_string(frame_no) +
                              "_truth.pgm")).string(), t);
          }
        }
        if (id < exported) {
          write_pgm((dir / ("seq" + std::to_string(id) + "_frame" + std::to_string(frame_no) +
                            "_pred.pgm")).string(), f);
        }
      }
    }
  }
  for (auto& s : sums) s /= double(d.test.size());
  std::ofstream out = open_out(dir / "mse.csv");
  out << "frame,mse\n";
  for (std::size_t k = 0; k < scored; ++k) {
    out << kContextFrames + k + 1 << ',' << fmt(sums[k]) << '\n';
    log << "frame " << kContextFrames + k + 1 << " mse = " << fmt(sums[k]) << '\n';
  }
  log << "wrote " << (dir / "mse.csv").string() << " and " << exported << " sequences of PGM frames\n";
  return sums;
}

}  // namespace qrnn
