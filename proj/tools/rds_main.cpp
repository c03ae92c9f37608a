#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rds/commands.hpp"
#include "rds/engine.hpp"
#include "rds/error.hpp"
#include "rds/io.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Reinforced data sampling: learn a train/test split with a recurrent policy"};
    app.require_subcommand(1);

    std::string config_path;

    auto* run = app.add_subcommand("run", "train a split policy and write its split and logs");
    run->add_option("config", config_path, "JSON config file")->required();

    std::string method = "random";
    auto* baseline = app.add_subcommand("baseline", "write a random or stratified split");
    baseline->add_option("config", config_path, "JSON config file")->required();
    baseline->add_option("--method", method, "random or stratified")->check(CLI::IsMember({"random", "stratified"}));

    std::vector<std::string> split_paths;
    auto* evaluate = app.add_subcommand("evaluate", "score split files with the configured learners");
    evaluate->add_option("config", config_path, "JSON config file")->required();
    evaluate->add_option("--split", split_paths, "split.csv to evaluate (repeatable)")->required();

    std::string kind = "madelon";
    std::string out_path;
    int samples = 200;
    int informative = 5;
    int distractors = 15;
    double class_sep = 1.0;
    double positive_fraction = 0.5;
    int features = 5;
    double noise = 0.5;
    std::uint64_t seed = 0;
    auto* synth = app.add_subcommand("synth", "write a synthetic dataset CSV");
    synth->add_option("kind", kind, "madelon or linear")->check(CLI::IsMember({"madelon", "linear"}));
    synth->add_option("--out", out_path, "output CSV")->required();
    synth->add_option("--samples", samples, "number of rows");
    synth->add_option("--informative", informative, "madelon: informative features");
    synth->add_option("--distractors", distractors, "madelon: noise features");
    synth->add_option("--class-sep", class_sep, "madelon: cluster separation");
    synth->add_option("--positive-fraction", positive_fraction, "madelon: share of class 1");
    synth->add_option("--features", features, "linear: number of features");
    synth->add_option("--noise", noise, "linear: noise stddev");
    synth->add_option("--seed", seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    if (*run) return rds::cli::cmd_run(config_path, std::cout, std::cerr);
    if (*baseline) return rds::cli::cmd_baseline(config_path, method, std::cout, std::cerr);
    if (*evaluate) {
        const std::vector<std::filesystem::path> paths(split_paths.begin(), split_paths.end());
        return rds::cli::cmd_evaluate(config_path, paths, std::cout, std::cerr);
    }
    try {
        const rds::Dataset ds = kind == "madelon"
                                    ? rds::synth_madelon(samples, informative, distractors, class_sep, seed,
                                                         positive_fraction)
                                    : rds::synth_linear(samples, features, noise, seed);
        rds::io::write_dataset_csv(out_path, ds);
    } catch (const rds::Error& e) {
        std::cerr << "rds synth: " << e.what() << '\n';
        return rds::cli::kExitValidation;
    }
    return rds::cli::kExitOk;
}
