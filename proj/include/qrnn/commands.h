#pragma once

#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "qrnn/checkpoint.h"
#include "qrnn/run_config.h"

namespace qrnn {

// Each command reads a fully resolved RunConfig, writes its files under
// out-dir and logs one line per artifact to `log`.

// Datasets in the layout `train` reads from data-dir:
//   sum/train.txt, sum/val.txt          "<input>\t<target>" per line
//   sentiment/train.tsv, test.tsv       synthetic reviews
//   frames/train.idx, test.idx          [N, T, H, W] bytes
void cmd_gen_data(const RunConfig& cfg, std::ostream& log);

struct TrainOutcome {
  TrainReport report;
  std::string report_path;
  std::string checkpoint_path;
};

// Trains, then writes report.csv, config.txt and the checkpoint.
TrainOutcome cmd_train(const RunConfig& cfg, std::ostream& log);

using Metrics = std::vector<std::pair<std::string, double>>;

// Restores the checkpoint and scores it on the held-out split; writes eval.csv.
Metrics cmd_eval(const RunConfig& cfg, std::ostream& log);

// Writes quant/<param>.csv histograms of each quantized image and
// quant/summary.csv. Returns the histogram paths.
std::vector<std::string> cmd_quant_report(const RunConfig& cfg, std::ostream& log);

// Autoregressive prediction on held-out sequences: PGM frames for the first
// `export` sequences and rollout/mse.csv. Returns the per-frame MSE.
std::vector<double> cmd_rollout(const RunConfig& cfg, std::ostream& log);

// Adds the configuration stored in a checkpoint as the checkpoint layer.
void apply_checkpoint_layer(RunConfig& cfg, const Checkpoint& ckpt);

}  // namespace qrnn
