#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "novelgrid/config.hpp"
#include "novelgrid/harness.hpp"

namespace novelgrid::pipeline {

// Filesystem layout under config.out_dir:
//   buffers/<variant>.<policy>/ep<index>.json + buffers/manifest.json
//   model.ckpt, training_summary.json, curves/bound_curves.csv
//   traces/<variant>/ep<index>.json
//   report.json, report.txt, curves/fp_by_step.csv, curves/ade.csv
// Timestamps go to run.log only, so reruns with one seed are byte-identical.

void cmd_collect(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_evaluate(const RunConfig& config);
void cmd_report(const RunConfig& config);

harness::ReplayBuffer load_buffers(const RunConfig& config);
std::vector<harness::EpisodeTrace> load_variant_traces(const std::string& dir);

// Runs episodes of `variant` until the step budget is met, writing one
// trace file per episode when out_dir is non-empty.
std::vector<harness::EpisodeTrace> evaluate_variant(const RunConfig& config, const model::WorldModel& model,
                                                    const harness::DetectorSuite& suite,
                                                    grid::Variant variant, harness::PolicyKind policy,
                                                    std::int64_t step_budget, const std::string& out_dir);

}  // namespace novelgrid::pipeline
