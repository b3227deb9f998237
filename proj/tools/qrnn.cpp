// qrnn: data generation, quantization-aware training, evaluation and exports.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>

#include "qrnn/commands.h"
#include "qrnn/errors.h"

namespace {

using qrnn::ConfigLayer;
using qrnn::RunConfig;

struct Command {
  std::string name;
  std::string help;
  int (*run)(const RunConfig&);
};

int run_gen_data(const RunConfig& cfg) {
  qrnn::cmd_gen_data(cfg, std::cout);
  return 0;
}
int run_train(const RunConfig& cfg) {
  qrnn::cmd_train(cfg, std::cout);
  return 0;
}
int run_eval(const RunConfig& cfg) {
  qrnn::cmd_eval(cfg, std::cout);
  return 0;
}
int run_quant_report(const RunConfig& cfg) {
  qrnn::cmd_quant_report(cfg, std::cout);
  return 0;
}
int run_rollout(const RunConfig& cfg) {
  qrnn::cmd_rollout(cfg, std::cout);
  return 0;
}
int run_show_config(const RunConfig& cfg) {
  qrnn::write_config(std::cout, cfg);
  return 0;
}

int fail(const std::string& category, const std::string& message) {
  std::cerr << "error: " << category << ": " << message << '\n';
  return category == "usage" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Command> commands = {
      {"gen-data", "write datasets for --task under --out-dir", run_gen_data},
      {"train", "train a model; writes report.csv, config.txt and a checkpoint", run_train},
      {"eval", "score a checkpoint on held-out data", run_eval},
      {"quant-report", "histograms of a checkpoint's quantized weights", run_quant_report},
      {"rollout", "autoregressive frame prediction from a frames checkpoint", run_rollout},
      {"show-config", "print the resolved configuration", run_show_config},
  };

  CLI::App app{"Quantization-aware training for recurrent networks"};
  app.require_subcommand(1);
  std::map<std::string, std::string> flags;
  std::string config_file;
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_file, "key = value settings file");
    for (const auto& k : RunConfig::keys()) {
      sub->add_option("--" + k.name, flags[k.name],
                      k.help + (k.fallback.empty() ? "" : " [" + k.fallback + "]"));
    }
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      RunConfig cfg = RunConfig::defaults();
      if (!config_file.empty()) cfg.merge(qrnn::read_config_file(config_file), ConfigLayer::kFile);
      for (const auto& k : RunConfig::keys()) {
        if (subs[i]->get_option("--" + k.name)->count() > 0) {
          cfg.set(k.name, flags[k.name], ConfigLayer::kFlag);
        }
      }
      return commands[i].run(cfg);
    }
  } catch (const qrnn::Error& e) {
    return fail(e.category(), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return fail("usage", "no command given");
}
