#include "rds/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "rds/config.hpp"
#include "rds/csv.hpp"
#include "rds/error.hpp"
#include "rds/io.hpp"
#include "rds/rng.hpp"

namespace rds::cli {

namespace {

template <typename Body>
int guarded(std::ostream& err, const char* command, Body&& body) {
    try {
        return body();
    } catch (const ValidationError& e) {
        err << "rds " << command << ": " << e.what() << '\n';
        return kExitValidation;
    } catch (const DegenerateSplitError& e) {
        err << "rds " << command << ": " << e.what() << '\n';
        return kExitValidation;
    } catch (const RunAborted& e) {
        err << "rds " << command << ": run aborted: " << e.what() << '\n';
        return kExitAborted;
    } catch (const DivergenceError& e) {
        err << "rds " << command << ": run aborted: " << e.what() << '\n';
        return kExitAborted;
    } catch (const std::exception& e) {
        err << "rds " << command << ": internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}

void prepare_output(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ValidationError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << text;
}

std::vector<std::string> learner_names(const AppConfig& config) {
    std::vector<std::string> names;
    for (std::size_t k = 0; k < config.learners.size(); ++k)
        names.emplace_back(std::string(to_string(config.learners[k].kind)));
    return names;
}

}  // namespace

int cmd_run(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
    return guarded(err, "run", [&] {
        const AppConfig config = load_config(config_path);
        const Dataset dataset = load_dataset(config.dataset);
        config.run.validate(dataset.task);
        prepare_output(config.output_dir);
        write_text(config.output_dir / "config.resolved.json", resolved_config_json(config));

        const int total = config.run.episodes;
        const RunResult result = run_rds(dataset, config.run, [&](const EpisodeLog& e) {
            char line[160];
            std::snprintf(line, sizeof line, "episode %d/%d reward %.4f ratio %.3f greedy %.3f%s\n", e.episode + 1,
                          total, e.reward_shaped, e.ratio, e.greedy_ratio, e.failed ? " (failed)" : "");
            err << line << std::flush;
        });

        io::write_split_csv(config.output_dir / "split.csv", dataset, result.split);
        io::write_dynamics_csv(config.output_dir / "dynamics.csv", result.episodes, config.run.learners.size(),
                               config.timing);
        {
            std::ofstream policy_out(config.output_dir / "policy.txt", std::ios::binary);
            if (!policy_out) throw ValidationError("cannot write policy checkpoint");
            save_policy(result.policy, policy_out);
        }
        if (result.best_sampled)
            io::write_split_csv(config.output_dir / "best_sampled_split.csv", dataset, *result.best_sampled);

        if (result.greedy_fallback)
            err << "rds run: greedy decode put every sample on one side; wrote the best sampled split instead\n";
        out << "episodes " << result.episodes.size() << " n_train " << result.split.n_train << " n_test "
            << result.split.n_test << " ratio " << csv::format_double(result.split.achieved_ratio) << '\n';
        return kExitOk;
    });
}

int cmd_baseline(const std::filesystem::path& config_path, const std::string& method, std::ostream& out,
                 std::ostream& err) {
    return guarded(err, "baseline", [&] {
        const AppConfig config = load_config(config_path);
        const Dataset dataset = load_dataset(config.dataset);
        const std::uint64_t seed = Rng::derive_seed(config.run.seed, "baseline");
        SplitAssignment split;
        if (method == "random") split = baseline_random(dataset, config.run.ratio, seed);
        else if (method == "stratified") split = baseline_stratified(dataset, config.run.ratio, seed);
        else throw ValidationError("baseline method must be random or stratified, got '" + method + "'");
        prepare_output(config.output_dir);
        io::write_split_csv(config.output_dir / "split.csv", dataset, split);
        out << "n_train " << split.n_train << " n_test " << split.n_test << '\n';
        return kExitOk;
    });
}

int cmd_evaluate(const std::filesystem::path& config_path, const std::vector<std::filesystem::path>& split_paths,
                 std::ostream& out, std::ostream& err) {
    return guarded(err, "evaluate", [&] {
        if (split_paths.empty()) throw ValidationError("evaluate needs at least one split file");
        const AppConfig config = load_config(config_path);
        const Dataset dataset = load_dataset(config.dataset);
        std::vector<io::ReportRow> rows;
        for (const auto& path : split_paths) {
            const SplitAssignment split = io::read_split_csv(path, dataset);
            rows.push_back({path.string(), evaluate_split(dataset, split, config.run.learners, config.run.metric)});
        }
        std::ostringstream report;
        io::write_report_csv(report, learner_names(config), rows, dataset.task);
        prepare_output(config.output_dir);
        write_text(config.output_dir / "report.csv", report.str());
        out << report.str();
        return kExitOk;
    });
}

}  // namespace rds::cli
