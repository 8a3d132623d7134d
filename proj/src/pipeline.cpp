#include "novelgrid/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "novelgrid/errors.hpp"

namespace novelgrid::pipeline {

namespace fs = std::filesystem;
using harness::DetectorSuite;
using harness::EpisodeTrace;
using harness::PolicyKind;
using harness::ReplayBuffer;
using model::WorldModel;
using nlohmann::json;

namespace {

void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + p.string());
    out << content;
    if (!out) throw IoError("write failed: " + p.string());
}

void append_log(const RunConfig& config, const std::string& line) {
    std::ofstream log(fs::path(config.out_dir) / "run.log", std::ios::app);
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    log << std::chrono::duration_cast<std::chrono::milliseconds>(now).count() << " " << line << "\n";
}

std::string ep_filename(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ep%05d.json", index);
    return buf;
}

std::vector<fs::path> sorted_files(const fs::path& dir) {
    std::vector<fs::path> files;
    if (!fs::exists(dir)) return files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

struct PartitionSpec {
    PolicyKind policy;
    std::int64_t steps;
};

void collect_partition(const RunConfig& config, grid::Variant variant, PolicyKind policy,
                       std::int64_t min_steps, json& manifest) {
    harness::RunLimits limits;
    limits.episode_cap = config.budgets.episode_cap;
    limits.tile_size = config.tile_size;
    const ReplayBuffer buffer = harness::collect_steps(variant, policy, min_steps, config.root_seed, limits);

    const std::string part_name = grid::variant_id(variant) + "." + harness::policy_name(policy);
    const fs::path dir = fs::path(config.out_dir) / "buffers" / part_name;
    ensure_dir(dir);
    const auto& part = buffer.partition(policy, variant);
    int index = 0;
    std::int64_t steps = 0;
    for (const auto& trace : part) {
        harness::save_trace(trace, (dir / ep_filename(index)).string());
        steps += trace.transition_count();
        ++index;
    }
    manifest["partitions"][part_name] = {{"episodes", index}, {"steps", steps}};
}

}  // namespace

void cmd_collect(const RunConfig& config) {
    ensure_dir(config.out_dir);
    append_log(config, "collect start");
    json manifest;
    manifest["format_version"] = 1;
    manifest["root_seed"] = config.root_seed;
    manifest["config_digest"] = config_digest(config);
    collect_partition(config, grid::Variant::Nominal, PolicyKind::Scripted,
                      config.budgets.collect_scripted_steps, manifest);
    collect_partition(config, grid::Variant::Nominal, PolicyKind::Random, config.budgets.collect_random_steps,
                      manifest);
    write_file(fs::path(config.out_dir) / "buffers" / "manifest.json", manifest.dump(1, '\t') + "\n");
    RunConfig canonical = config;
    canonical.out_dir.clear();  // supplied per invocation, not part of the run identity
    write_file(fs::path(config.out_dir) / "config.json", config_to_json(canonical) + "\n");
    append_log(config, "collect done");
}

ReplayBuffer load_buffers(const RunConfig& config) {
    const fs::path root = fs::path(config.out_dir) / "buffers";
    if (!fs::exists(root)) throw IoError("no buffers under " + root.string() + "; run collect first");
    ReplayBuffer buffer;
    std::vector<fs::path> partitions;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) partitions.push_back(entry.path());
    std::sort(partitions.begin(), partitions.end());
    for (const auto& dir : partitions)
        for (const auto& file : sorted_files(dir)) buffer.add(harness::load_trace(file.string()));
    if (buffer.episode_count() == 0) throw CalibrationError("buffer directory is empty");
    return buffer;
}

namespace {

// Episodes interleaved scripted/random in a fixed order so a step-prefix of
// the buffer is a meaningful smaller corpus.
std::vector<const EpisodeTrace*> interleaved_episodes(const ReplayBuffer& buffer) {
    const auto& scripted = buffer.partition(PolicyKind::Scripted, grid::Variant::Nominal);
    const auto& random = buffer.partition(PolicyKind::Random, grid::Variant::Nominal);
    std::vector<const EpisodeTrace*> out;
    std::size_t si = 0, ri = 0;
    while (si < scripted.size() || ri < random.size()) {
        if (si < scripted.size()) out.push_back(&scripted[si++]);
        if (ri < random.size()) out.push_back(&random[ri++]);
    }
    return out;
}

std::vector<model::TrainingEpisode> episodes_for_steps(const std::vector<const EpisodeTrace*>& order,
                                                       std::int64_t step_target) {
    std::vector<const EpisodeTrace*> subset;
    std::int64_t steps = 0;
    for (const EpisodeTrace* t : order) {
        subset.push_back(t);
        steps += t->transition_count();
        if (step_target > 0 && steps >= step_target) break;
    }
    return harness::to_training_episodes(std::span<const EpisodeTrace* const>(subset));
}

}  // namespace

void cmd_train(const RunConfig& config) {
    append_log(config, "train start");
    const ReplayBuffer buffer = load_buffers(config);
    auto order = interleaved_episodes(buffer);
    if (order.empty()) throw CalibrationError("training buffer holds no nominal episodes");

    json summary;
    summary["format_version"] = 1;
    summary["config_digest"] = config_digest(config);

    std::vector<const EpisodeTrace*> train_order = order;
    std::vector<const EpisodeTrace*> heldout;
    if (config.snapshots >= 2) {
        // Last tenth of the interleaved order is held out for the curves.
        const std::size_t held = std::max<std::size_t>(1, order.size() / 10);
        heldout.assign(order.end() - static_cast<std::ptrdiff_t>(held), order.end());
        train_order.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(held));
    }

    std::int64_t total_steps = 0;
    for (const EpisodeTrace* t : train_order) total_steps += t->transition_count();

    const WorldModel final_model = [&] {
        auto eps = episodes_for_steps(train_order, 0);
        return WorldModel::train(eps, config.model);
    }();
    final_model.save((fs::path(config.out_dir) / "model.ckpt").string());

    summary["training_steps"] = total_steps;
    summary["codebook_size"] = final_model.code_count();
    summary["transition_contexts"] = final_model.transition_context_count();

    if (config.snapshots >= 2) {
        std::vector<std::int64_t> sizes;
        for (int i = config.snapshots - 1; i >= 0; --i) {
            const auto size = total_steps >> i;
            if (size > 0 && (sizes.empty() || size > sizes.back())) sizes.push_back(size);
        }
        std::vector<WorldModel> snapshot_models;
        snapshot_models.reserve(sizes.size());
        for (std::int64_t size : sizes) {
            auto eps = episodes_for_steps(train_order, size);
            snapshot_models.push_back(WorldModel::train(eps, config.model));
        }
        std::vector<const WorldModel*> snapshot_ptrs;
        for (const auto& m : snapshot_models) snapshot_ptrs.push_back(&m);
        const harness::BoundCurves curves = harness::bound_behavior_curves(
            snapshot_ptrs, sizes, std::span<const EpisodeTrace* const>(heldout));

        ensure_dir(fs::path(config.out_dir) / "curves");
        std::ostringstream csv;
        csv << "snapshot_steps,mean_surprise,mean_bound_rhs,mean_h0_divergence\n";
        csv.precision(17);
        for (std::size_t i = 0; i < curves.snapshot_steps.size(); ++i)
            csv << curves.snapshot_steps[i] << "," << curves.mean_lhs[i] << "," << curves.mean_rhs[i] << ","
                << curves.mean_h0_div[i] << "\n";
        write_file(fs::path(config.out_dir) / "curves" / "bound_curves.csv", csv.str());

        json jc;
        jc["snapshot_steps"] = curves.snapshot_steps;
        jc["mean_surprise"] = curves.mean_lhs;
        jc["mean_bound_rhs"] = curves.mean_rhs;
        jc["mean_h0_divergence"] = curves.mean_h0_div;
        summary["curves"] = std::move(jc);
        summary["heldout_episodes"] = heldout.size();
    }

    write_file(fs::path(config.out_dir) / "training_summary.json", summary.dump(1, '\t') + "\n");
    append_log(config, "train done");
}

std::vector<EpisodeTrace> evaluate_variant(const RunConfig& config, const WorldModel& model,
                                           const DetectorSuite& suite, grid::Variant variant,
                                           PolicyKind policy, std::int64_t step_budget,
                                           const std::string& out_dir) {
    harness::RunLimits limits;
    limits.episode_cap = config.budgets.episode_cap;
    limits.tile_size = config.tile_size;
    limits.novelty_onset_setting = variant == grid::Variant::Nominal ? 0 : config.novelty_onset_step;

    if (!out_dir.empty()) ensure_dir(out_dir);
    const std::string tag = "eval/" + grid::variant_id(variant) + "/" + harness::policy_name(policy);
    std::vector<EpisodeTrace> traces;
    std::int64_t steps = 0;
    for (int i = 0; steps < step_budget; ++i) {
        EpisodeTrace t = harness::run_episode(variant, policy, model, suite,
                                              derive_seed(config.root_seed, tag, i), limits);
        t.config_digest = config_digest(config);
        steps += t.transition_count();
        if (!out_dir.empty()) {
            const std::string name = harness::policy_name(policy) + "-" + ep_filename(i);
            harness::save_trace(t, (fs::path(out_dir) / name).string());
        }
        traces.push_back(std::move(t));
    }
    return traces;
}

namespace {

void write_report_files(const RunConfig& config, const harness::EvaluationReport& report) {
    write_file(fs::path(config.out_dir) / "report.json", harness::report_to_json(report) + "\n");
    write_file(fs::path(config.out_dir) / "report.txt", harness::report_to_text(report));

    ensure_dir(fs::path(config.out_dir) / "curves");
    std::ostringstream fp_csv;
    fp_csv << "method,step,flag_fraction\n";
    fp_csv.precision(17);
    for (const auto& [m, curve] : report.nominal_fp_curves)
        for (std::size_t i = 0; i < curve.size(); ++i)
            fp_csv << detect::method_name(static_cast<detect::Method>(m)) << "," << i << "," << curve[i]
                   << "\n";
    write_file(fs::path(config.out_dir) / "curves" / "fp_by_step.csv", fp_csv.str());

    std::ostringstream ade_csv;
    ade_csv << "variant,method,ade,detected_episodes,missed_episodes\n";
    ade_csv.precision(17);
    for (const auto& vr : report.variants)
        for (const auto& row : vr.methods) {
            ade_csv << grid::variant_id(vr.variant) << "," << detect::method_name(row.method) << ",";
            if (row.ade.ade) ade_csv << *row.ade.ade;
            ade_csv << "," << row.ade.detected_episodes << "," << row.ade.missed_episodes << "\n";
        }
    write_file(fs::path(config.out_dir) / "curves" / "ade.csv", ade_csv.str());
}

}  // namespace

void cmd_evaluate(const RunConfig& config) {
    append_log(config, "evaluate start");
    const fs::path ckpt = fs::path(config.out_dir) / "model.ckpt";
    if (!fs::exists(ckpt)) throw IoError("missing checkpoint " + ckpt.string() + "; run train first");
    const WorldModel model = WorldModel::load(ckpt.string());
    const ReplayBuffer buffer = load_buffers(config);
    const DetectorSuite suite =
        harness::calibrate_suite(model, buffer, config.detectors, config.method_list());

    std::map<int, std::vector<EpisodeTrace>> by_variant;
    for (const std::string& id : config.envs) {
        const grid::Variant variant = *grid::variant_from_id(id);
        const fs::path tdir = fs::path(config.out_dir) / "traces" / id;
        std::vector<PartitionSpec> parts;
        if (variant == grid::Variant::Nominal || config.eval_policy == "both") {
            parts.push_back({PolicyKind::Scripted, config.budgets.eval_steps_per_variant / 2});
            parts.push_back({PolicyKind::Random,
                             config.budgets.eval_steps_per_variant - config.budgets.eval_steps_per_variant / 2});
        } else if (config.eval_policy == "random") {
            parts.push_back({PolicyKind::Random, config.budgets.eval_steps_per_variant});
        } else {
            parts.push_back({PolicyKind::Scripted, config.budgets.eval_steps_per_variant});
        }
        auto& bucket = by_variant[static_cast<int>(variant)];
        for (const auto& part : parts) {
            auto traces = evaluate_variant(config, model, suite, variant, part.policy, part.steps,
                                           tdir.string());
            for (auto& t : traces) bucket.push_back(std::move(t));
        }
    }

    const harness::EvaluationReport report =
        harness::build_report(config.root_seed, config_digest(config), config.method_list(), by_variant);
    write_report_files(config, report);
    append_log(config, "evaluate done");
}

std::vector<EpisodeTrace> load_variant_traces(const std::string& dir) {
    std::vector<EpisodeTrace> out;
    for (const auto& file : sorted_files(dir)) out.push_back(harness::load_trace(file.string()));
    return out;
}

void cmd_report(const RunConfig& config) {
    append_log(config, "report start");
    const fs::path root = fs::path(config.out_dir) / "traces";
    if (!fs::exists(root)) throw IoError("no traces under " + root.string() + "; run evaluate first");
    std::map<int, std::vector<EpisodeTrace>> by_variant;
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        const auto variant = grid::variant_from_id(dir.filename().string());
        if (!variant) throw IoError("trace directory is not a catalogued variant: " + dir.string());
        by_variant[static_cast<int>(*variant)] = load_variant_traces(dir.string());
    }
    const harness::EvaluationReport report =
        harness::build_report(config.root_seed, config_digest(config), config.method_list(), by_variant);
    write_report_files(config, report);
    append_log(config, "report done");
}

}  // namespace novelgrid::pipeline
