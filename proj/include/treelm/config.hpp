#pragma once

#include <string>

#include "treelm/corpus.hpp"
#include "treelm/encoder.hpp"
#include "treelm/mask.hpp"
#include "treelm/optim.hpp"
#include "treelm/pipeline.hpp"
#include "treelm/train.hpp"

namespace treelm {

// Resolved run configuration. File values load first, CLI flags override,
// and every run writes the resolved result next to its outputs.
struct RunConfig {
  CleanConfig clean;
  WindowConfig window;
  PositionTableSizes tables;
  MaskConfig mask;
  EncoderConfig encoder;
  OptimConfig optim;          // pre-training optimizer
  OptimConfig finetune_optim; // fine-tuning optimizer
  int pretrain_steps = 500;
  int finetune_steps = 300;
  uint64_t mask_seed = 11;
  OpenIEConfig openie;
  std::string openie_gate = "pred_obj_pair";  // or "pred_mid_pair"
  QAOptions qa;
  SyntheticSiteConfig gen;
  uint64_t seed = 1;
  int jobs = 0;  // 0 = library default thread count

  RunConfig() {
    encoder.vocab_size = 0;  // filled from the vocab at use time
    finetune_optim.lr = 3e-5;
    finetune_optim.batch_size = 16;
  }
};

// Loads and validates a config file; unknown keys are rejected with
// ConfigInvalid naming the offending key.
RunConfig load_run_config(const std::string& path);

std::string run_config_to_json(const RunConfig& cfg);

// Writes the resolved config (path typically "<out>.config.json").
void write_resolved_config(const RunConfig& cfg, const std::string& path);

}  // namespace treelm
