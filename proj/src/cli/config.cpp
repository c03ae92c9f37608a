#include "rds/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rds/error.hpp"

namespace rds {

namespace {

using nlohmann::json;

void reject_unknown(const json& object, const std::string& where, const std::set<std::string>& allowed) {
    if (!object.is_object()) throw ValidationError("config: '" + where + "' must be an object");
    for (const auto& [key, value] : object.items()) {
        if (!allowed.contains(key))
            throw ValidationError("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
}

template <typename T>
void read(const json& object, const std::string& where, const char* key, T& out) {
    const auto it = object.find(key);
    if (it == object.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw ValidationError("config: '" + where + "." + key + "' has the wrong type");
    }
}

template <typename T>
T require(const json& object, const std::string& where, const char* key) {
    if (!object.contains(key)) throw ValidationError("config: missing required key '" + where + "." + key + "'");
    T value{};
    read(object, where, key, value);
    return value;
}

TaskKind parse_task(const std::string& name, int num_classes) {
    if (name == "binary") return TaskKind::binary();
    if (name == "regression") return TaskKind::regression();
    if (name == "multiclass") {
        if (num_classes < 3) throw ValidationError("config: multiclass task needs dataset.num_classes >= 3");
        return TaskKind::multiclass(num_classes);
    }
    throw ValidationError("config: dataset.task must be binary, multiclass or regression, got '" + name + "'");
}

std::string task_name(TaskKind task) {
    switch (task.type) {
        case TaskType::BinaryClassification: return "binary";
        case TaskType::MultiClassification: return "multiclass";
        case TaskType::Regression: return "regression";
    }
    return "";
}

RewardMode parse_mechanism(const std::string& name) {
    if (name == "det" || name == "deterministic") return RewardMode::Deterministic;
    if (name == "sto" || name == "stochastic") return RewardMode::Stochastic;
    throw ValidationError("config: run.mechanism must be det or sto, got '" + name + "'");
}

const std::set<std::string> kHyperparameterKeys = {
    "l2", "tolerance", "max_epochs", "ridge_lambda", "max_depth", "min_leaf", "num_trees",
    "max_features", "hidden_units", "epochs", "learning_rate", "batch_size"};

LearnerEntry parse_learner(const json& node, std::size_t index) {
    const std::string where = "learners[" + std::to_string(index) + "]";
    LearnerEntry entry;
    if (node.is_string()) {
        entry.kind = learner_kind_from_string(node.get<std::string>());
        return entry;
    }
    auto allowed = kHyperparameterKeys;
    allowed.insert("kind");
    reject_unknown(node, where, allowed);
    entry.kind = learner_kind_from_string(require<std::string>(node, where, "kind"));
    auto& h = entry.hyperparameters;
    read(node, where, "l2", h.l2);
    read(node, where, "tolerance", h.tolerance);
    read(node, where, "max_epochs", h.max_epochs);
    read(node, where, "ridge_lambda", h.ridge_lambda);
    read(node, where, "max_depth", h.max_depth);
    read(node, where, "min_leaf", h.min_leaf);
    read(node, where, "num_trees", h.num_trees);
    read(node, where, "max_features", h.max_features);
    read(node, where, "hidden_units", h.hidden_units);
    read(node, where, "epochs", h.epochs);
    read(node, where, "learning_rate", h.learning_rate);
    read(node, where, "batch_size", h.batch_size);
    return entry;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace

AppConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: malformed JSON: ") + e.what());
    }
    reject_unknown(doc, "", {"dataset", "run", "scales", "learners", "baseline_subtraction", "output"});

    AppConfig config;
    if (!doc.contains("dataset")) throw ValidationError("config: missing required key 'dataset'");
    const json& ds = doc["dataset"];
    reject_unknown(ds, "dataset", {"path", "target", "id", "task", "num_classes"});
    config.dataset.path = resolve(base_dir, require<std::string>(ds, "dataset", "path"));
    config.dataset.target = require<std::string>(ds, "dataset", "target");
    if (ds.contains("id")) config.dataset.id = require<std::string>(ds, "dataset", "id");
    int num_classes = 0;
    read(ds, "dataset", "num_classes", num_classes);
    config.dataset.task = parse_task(require<std::string>(ds, "dataset", "task"), num_classes);

    RunConfig& run = config.run;
    if (doc.contains("run")) {
        const json& r = doc["run"];
        reject_unknown(r, "run",
                       {"mechanism", "metric", "ratio", "episodes", "hidden_size", "lr", "seed", "rho", "knn_k",
                        "baseline_decay", "convergence_window", "warmup_episodes", "concurrent_learners", "pretrain_passes",
                        "pretrain_lr"});
        std::string mechanism = "det";
        read(r, "run", "mechanism", mechanism);
        run.mechanism = parse_mechanism(mechanism);
        if (r.contains("metric")) run.metric = metric_kind_from_string(require<std::string>(r, "run", "metric"));
        read(r, "run", "ratio", run.ratio);
        read(r, "run", "episodes", run.episodes);
        read(r, "run", "hidden_size", run.hidden_size);
        read(r, "run", "lr", run.learning_rate);
        read(r, "run", "seed", run.seed);
        read(r, "run", "rho", run.rho);
        read(r, "run", "knn_k", run.knn_k);
        read(r, "run", "baseline_decay", run.baseline_decay);
        read(r, "run", "convergence_window", run.convergence_window);
        read(r, "run", "warmup_episodes", run.warmup_episodes);
        read(r, "run", "concurrent_learners", run.concurrent_learners);
        read(r, "run", "pretrain_passes", run.pretrain_passes);
        read(r, "run", "pretrain_lr", run.pretrain_learning_rate);
    }
    if (doc.contains("scales")) {
        const json& s = doc["scales"];
        reject_unknown(s, "scales", {"alpha", "gamma", "psi"});
        read(s, "scales", "alpha", run.alpha);
        read(s, "scales", "gamma", run.gamma);
        read(s, "scales", "psi", run.psi);
    }
    read(doc, "", "baseline_subtraction", run.baseline_subtraction);

    if (!doc.contains("learners")) throw ValidationError("config: missing required key 'learners'");
    const json& learners = doc["learners"];
    if (!learners.is_array() || learners.empty())
        throw ValidationError("config: 'learners' must be a non-empty list");
    std::vector<LearnerKind> kinds;
    for (std::size_t i = 0; i < learners.size(); ++i) {
        config.learners.push_back(parse_learner(learners[i], i));
        kinds.push_back(config.learners.back().kind);
    }
    run.learners = seeded_learners(kinds, run.seed);
    for (std::size_t i = 0; i < kinds.size(); ++i) run.learners[i].hyperparameters = config.learners[i].hyperparameters;

    if (!doc.contains("output")) throw ValidationError("config: missing required key 'output'");
    const json& out = doc["output"];
    reject_unknown(out, "output", {"dir", "timing"});
    config.output_dir = resolve(base_dir, require<std::string>(out, "output", "dir"));
    read(out, "output", "timing", config.timing);

    run.validate(config.dataset.task);
    return config;
}

AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), std::filesystem::absolute(path).parent_path());
}

std::string resolved_config_json(const AppConfig& config) {
    const RunConfig& run = config.run;
    json doc;
    doc["dataset"] = {{"path", config.dataset.path.string()},
                      {"target", config.dataset.target},
                      {"task", task_name(config.dataset.task)}};
    if (config.dataset.id) doc["dataset"]["id"] = *config.dataset.id;
    if (config.dataset.task.type == TaskType::MultiClassification)
        doc["dataset"]["num_classes"] = config.dataset.task.num_classes;
    std::vector<double> rho = run.rho;
    if (run.mechanism == RewardMode::Stochastic && rho.empty()) rho = run.reward_mechanism().rho;
    doc["run"] = {{"mechanism", run.mechanism == RewardMode::Deterministic ? "det" : "sto"},
                  {"metric", std::string(to_string(run.metric))},
                  {"ratio", run.ratio},
                  {"episodes", run.episodes},
                  {"hidden_size", run.hidden_size},
                  {"lr", run.learning_rate},
                  {"seed", run.seed},
                  {"rho", rho},
                  {"knn_k", run.knn_k},
                  {"baseline_decay", run.baseline_decay},
                  {"convergence_window", run.convergence_window},
                  {"warmup_episodes", run.warmup_episodes},
                  {"concurrent_learners", run.concurrent_learners},
                  {"pretrain_passes", run.pretrain_passes},
                  {"pretrain_lr", run.pretrain_learning_rate}};
    doc["scales"] = {{"alpha", run.alpha}, {"gamma", run.gamma}, {"psi", run.psi}};
    doc["baseline_subtraction"] = run.baseline_subtraction;
    json learners = json::array();
    for (std::size_t i = 0; i < config.learners.size(); ++i) {
        const auto& h = config.learners[i].hyperparameters;
        learners.push_back({{"kind", std::string(to_string(config.learners[i].kind))},
                            {"l2", h.l2},
                            {"tolerance", h.tolerance},
                            {"max_epochs", h.max_epochs},
                            {"ridge_lambda", h.ridge_lambda},
                            {"max_depth", h.max_depth},
                            {"min_leaf", h.min_leaf},
                            {"num_trees", h.num_trees},
                            {"max_features", h.max_features},
                            {"hidden_units", h.hidden_units},
                            {"epochs", h.epochs},
                            {"learning_rate", h.learning_rate},
                            {"batch_size", h.batch_size}});
    }
    doc["learners"] = learners;
    doc["output"] = {{"dir", config.output_dir.string()}, {"timing", config.timing}};
    return doc.dump(2) + "\n";
}

Dataset load_dataset(const DatasetSource& source) {
    return load_csv(source.path, source.target, source.task, source.id);
}

}  // namespace rds
