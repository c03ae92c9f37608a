#include "rds/io.hpp"

#include <fstream>
#include <map>
#include <ostream>

#include "rds/csv.hpp"
#include "rds/error.hpp"

namespace rds::io {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    return out;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string q = "\"";
    for (const char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

std::string class_ratio(const std::vector<double>& pmf, TaskKind task) {
    if (!task.is_classification() || pmf.empty()) return "";
    if (task.type == TaskType::BinaryClassification) {
        if (pmf[0] == 0.0) return "inf";
        return csv::format_double(pmf[1] / pmf[0]);
    }
    std::string joined;
    for (std::size_t c = 0; c < pmf.size(); ++c) joined += (c ? ";" : "") + csv::format_double(pmf[c]);
    return joined;
}

}  // namespace

void write_split_csv(std::ostream& out, const Dataset& dataset, const SplitAssignment& split) {
    if (static_cast<Eigen::Index>(split.size()) != dataset.size())
        throw ValidationError("split length does not match dataset size");
    out << "id,assignment\n";
    for (std::size_t i = 0; i < split.size(); ++i)
        out << quote_if_needed(dataset.ids[i]) << ',' << (split.actions[i] == Action::Train ? "train" : "test") << '\n';
}

void write_split_csv(const std::filesystem::path& path, const Dataset& dataset, const SplitAssignment& split) {
    auto out = open_out(path);
    write_split_csv(out, dataset, split);
}

SplitAssignment read_split_csv(const std::filesystem::path& path, const Dataset& dataset) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open split file '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("split file '" + path.string() + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = csv::split_line(line);
    if (header.size() != 2 || header[0] != "id" || header[1] != "assignment")
        throw ValidationError("split file header must be 'id,assignment'");

    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < dataset.ids.size(); ++i) position.emplace(dataset.ids[i], i);
    std::vector<int> seen(dataset.ids.size(), 0);
    std::vector<Action> actions(dataset.ids.size(), Action::Test);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = csv::split_line(line);
        if (cells.size() != 2) throw ValidationError("split file line " + std::to_string(line_no) + ": expected 2 cells");
        const auto it = position.find(cells[0]);
        if (it == position.end()) throw ValidationError("split file: unknown id '" + cells[0] + "'");
        if (seen[it->second]++) throw ValidationError("split file: duplicate id '" + cells[0] + "'");
        if (cells[1] == "train") actions[it->second] = Action::Train;
        else if (cells[1] == "test") actions[it->second] = Action::Test;
        else throw ValidationError("split file line " + std::to_string(line_no) + ": assignment must be train or test");
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) throw ValidationError("split file: missing id '" + dataset.ids[i] + "'");
    return SplitAssignment::from_actions(std::move(actions));
}

void write_dynamics_csv(std::ostream& out, std::span<const EpisodeLog> episodes, std::size_t num_learners,
                        bool with_timing) {
    out << "episode,reward,reward_shaped,ratio,loss_theta,loss_ratio,loss_iid";
    for (std::size_t k = 0; k < num_learners; ++k) out << ",learner_" << k << "_metric";
    out << ",chosen_learner,seconds\n";
    for (const auto& e : episodes) {
        out << e.episode << ',' << csv::format_double(e.reward) << ',' << csv::format_double(e.reward_shaped) << ','
            << csv::format_double(e.ratio) << ',' << csv::format_double(e.loss.theta) << ','
            << csv::format_double(e.loss.ratio) << ',' << csv::format_double(e.loss.iid);
        for (std::size_t k = 0; k < num_learners; ++k) {
            out << ',';
            if (k < e.learner_metrics.size() && !std::isnan(e.learner_metrics[k]))
                out << csv::format_double(e.learner_metrics[k]);
        }
        out << ',';
        if (e.chosen_learner) out << *e.chosen_learner;
        out << ',';
        if (with_timing) out << csv::format_double(e.seconds);
        out << '\n';
    }
}

void write_dynamics_csv(const std::filesystem::path& path, std::span<const EpisodeLog> episodes,
                        std::size_t num_learners, bool with_timing) {
    auto out = open_out(path);
    write_dynamics_csv(out, episodes, num_learners, with_timing);
}

void write_report_csv(std::ostream& out, std::span<const std::string> learner_names, std::span<const ReportRow> rows,
                      TaskKind task) {
    out << "split,n_train,n_test,train_class_ratio,test_class_ratio";
    for (const auto& name : learner_names) out << ',' << name;
    out << ",ensemble\n";
    for (const auto& row : rows) {
        const auto& ev = row.evaluation;
        out << quote_if_needed(row.split_name) << ',' << ev.n_train << ',' << ev.n_test << ','
            << class_ratio(ev.train_class_pmf, task) << ',' << class_ratio(ev.test_class_pmf, task);
        for (const double m : ev.learner_metrics) out << ',' << csv::format_double(m);
        out << ',' << csv::format_double(ev.ensemble_metric) << '\n';
    }
}

}  // namespace rds::io

namespace rds::io {

void write_dataset_csv(const std::filesystem::path& path, const Dataset& dataset) {
    auto out = open_out(path);
    out << "id";
    for (Eigen::Index j = 0; j < dataset.dim(); ++j) {
        const bool named = static_cast<std::size_t>(j) < dataset.feature_names.size();
        out << ',' << (named ? quote_if_needed(dataset.feature_names[j]) : "x" + std::to_string(j));
    }
    out << ",target\n";
    for (Eigen::Index i = 0; i < dataset.size(); ++i) {
        out << quote_if_needed(dataset.ids[i]);
        for (Eigen::Index j = 0; j < dataset.dim(); ++j) out << ',' << csv::format_double(dataset.features(i, j));
        out << ',' << csv::format_double(dataset.targets[i]) << '\n';
    }
}

}  // namespace rds::io
