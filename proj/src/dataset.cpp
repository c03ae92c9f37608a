#include "rds/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "rds/csv.hpp"
#include "rds/error.hpp"

namespace rds {

TaskKind TaskKind::multiclass(int num_classes) {
    if (num_classes < 3)
        throw ValidationError("multiclass task needs num_classes >= 3, got " + std::to_string(num_classes));
    return {TaskType::MultiClassification, num_classes};
}

std::vector<int> Dataset::labels() const {
    std::vector<int> out(static_cast<std::size_t>(size()));
    for (Eigen::Index i = 0; i < size(); ++i) out[static_cast<std::size_t>(i)] = label(i);
    return out;
}

void Dataset::validate() const {
    const Eigen::Index m = size();
    if (m < 4) throw ValidationError("dataset needs at least 4 samples, got " + std::to_string(m));
    if (dim() < 1) throw ValidationError("dataset needs at least one feature");
    if (targets.size() != m) throw ValidationError("target count does not match feature rows");
    if (static_cast<Eigen::Index>(ids.size()) != m) throw ValidationError("id count does not match feature rows");
    if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != dim())
        throw ValidationError("feature name count does not match feature columns");
    if (!features.allFinite()) throw ValidationError("non-finite feature value");
    if (!targets.allFinite()) throw ValidationError("non-finite target value");
    if (task.is_classification()) {
        std::vector<bool> seen(static_cast<std::size_t>(task.num_classes), false);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double y = targets[i];
            if (y != std::floor(y) || y < 0 || y >= task.num_classes)
                throw ValidationError("class label out of range at row " + std::to_string(i));
            seen[static_cast<std::size_t>(y)] = true;
        }
        if (task.type == TaskType::BinaryClassification && !(seen[0] && seen[1]))
            throw ValidationError("binary task requires both labels 0 and 1 to be present");
    }
    std::set<std::string_view> unique;
    for (const auto& id : ids)
        if (!unique.insert(id).second) throw ValidationError("duplicate id '" + id + "'");
}

Dataset load_csv(const std::filesystem::path& path, std::string_view target_column, TaskKind task,
                 std::optional<std::string> id_column) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open CSV file '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw ValidationError("CSV file '" + path.string() + "' has no header row");
    const std::vector<std::string> header = csv::split_line(line);

    std::optional<std::size_t> target_idx;
    std::optional<std::size_t> id_idx;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == target_column) target_idx = c;
        if (id_column && header[c] == *id_column) id_idx = c;
    }
    if (!target_idx) throw ValidationError("target column '" + std::string(target_column) + "' not found");
    if (id_column && !id_idx) throw ValidationError("id column '" + *id_column + "' not found");

    std::vector<std::size_t> feature_cols;
    Dataset ds;
    ds.task = task;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == *target_idx || (id_idx && c == *id_idx)) continue;
        feature_cols.push_back(c);
        ds.feature_names.push_back(header[c]);
    }

    std::vector<double> values;
    std::vector<double> targets;
    std::size_t row = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cells = csv::split_line(line);
        if (cells.size() != header.size())
            throw ValidationError("row " + std::to_string(row) + " (line " + std::to_string(line_no) + "): expected " +
                                  std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
        const auto where = [&](std::size_t c) {
            return "row " + std::to_string(row) + " (line " + std::to_string(line_no) + "), column '" + header[c] + "'";
        };
        const auto number = [&](std::size_t c) {
            const auto parsed = csv::parse_double(cells[c]);
            if (!parsed) throw ValidationError(where(c) + ": non-numeric value '" + cells[c] + "'");
            if (!std::isfinite(*parsed)) throw ValidationError(where(c) + ": non-finite value '" + cells[c] + "'");
            return *parsed;
        };
        for (const std::size_t c : feature_cols) values.push_back(number(c));
        const double y = number(*target_idx);
        if (task.is_classification()) {
            if (y != std::floor(y)) throw ValidationError(where(*target_idx) + ": non-integral class label '" + cells[*target_idx] + "'");
            if (y < 0 || y >= task.num_classes)
                throw ValidationError(where(*target_idx) + ": class label " + cells[*target_idx] + " outside [0, " +
                                      std::to_string(task.num_classes) + ")");
        }
        targets.push_back(y);
        ds.ids.push_back(id_idx ? cells[*id_idx] : std::to_string(row));
        ++row;
    }

    const auto m = static_cast<Eigen::Index>(row);
    const auto d = static_cast<Eigen::Index>(feature_cols.size());
    ds.features.resize(m, d);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < d; ++j) ds.features(i, j) = values[static_cast<std::size_t>(i * d + j)];
    ds.targets = Eigen::Map<const Eigen::VectorXd>(targets.data(), m);
    ds.validate();
    return ds;
}

FeatureScaling FeatureScaling::fit(const Eigen::MatrixXd& features) {
    FeatureScaling s;
    const double n = static_cast<double>(features.rows());
    s.mean = features.colwise().sum() / n;
    s.stddev.resize(features.cols());
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
        const double var = (features.col(j).array() - s.mean[j]).square().sum() / n;
        s.stddev[j] = std::sqrt(var);
    }
    return s;
}

Eigen::MatrixXd FeatureScaling::apply(const Eigen::MatrixXd& features) const {
    Eigen::MatrixXd out(features.rows(), features.cols());
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
        if (stddev[j] < kMinStddev) out.col(j).setZero();
        else out.col(j) = (features.col(j).array() - mean[j]) / stddev[j];
    }
    return out;
}

Eigen::MatrixXd FeatureScaling::invert(const Eigen::MatrixXd& scaled) const {
    Eigen::MatrixXd out(scaled.rows(), scaled.cols());
    for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
        if (stddev[j] < kMinStddev) out.col(j).setConstant(mean[j]);
        else out.col(j) = scaled.col(j).array() * stddev[j] + mean[j];
    }
    return out;
}

std::pair<Dataset, FeatureScaling> standardize(const Dataset& dataset) {
    if (dataset.size() < 2) throw ValidationError("standardize needs at least 2 samples");
    FeatureScaling scaling = FeatureScaling::fit(dataset.features);
    Dataset out = dataset;
    out.features = scaling.apply(dataset.features);
    return {std::move(out), std::move(scaling)};
}

Dataset subset(const Dataset& dataset, std::span<const Eigen::Index> rows) {
    Dataset out;
    out.task = dataset.task;
    out.feature_names = dataset.feature_names;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), dataset.dim());
    out.targets.resize(static_cast<Eigen::Index>(rows.size()));
    out.ids.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        out.features.row(i) = dataset.features.row(rows[k]);
        out.targets[i] = dataset.targets[rows[k]];
        out.ids.push_back(dataset.ids[static_cast<std::size_t>(rows[k])]);
    }
    return out;
}

std::vector<std::size_t> class_counts(const Dataset& dataset, std::span<const Eigen::Index> rows) {
    if (!dataset.task.is_classification()) throw ValidationError("class counts need a classification task");
    std::vector<std::size_t> counts(static_cast<std::size_t>(dataset.task.num_classes), 0);
    for (const Eigen::Index i : rows) ++counts[static_cast<std::size_t>(dataset.label(i))];
    return counts;
}

std::vector<double> class_pmf(const Dataset& dataset, std::span<const Eigen::Index> rows) {
    const auto counts = class_counts(dataset, rows);
    std::vector<double> pmf(counts.size(), 0.0);
    if (rows.empty()) return pmf;
    for (std::size_t c = 0; c < counts.size(); ++c)
        pmf[c] = static_cast<double>(counts[c]) / static_cast<double>(rows.size());
    return pmf;
}

TargetDistribution target_distribution(const Dataset& dataset, const SplitAssignment& assignment) {
    if (static_cast<Eigen::Index>(assignment.size()) != dataset.size())
        throw ValidationError("assignment length does not match dataset size");
    if (assignment.n_train == 0) throw DegenerateSplitError("empty train side");
    if (assignment.n_test == 0) throw DegenerateSplitError("empty test side");
    const auto train = assignment.train_rows();
    const auto test = assignment.test_rows();
    TargetDistribution out;
    if (dataset.task.is_classification()) {
        out.is_pmf = true;
        out.train = class_pmf(dataset, train);
        out.test = class_pmf(dataset, test);
    } else {
        out.is_pmf = false;
        for (const auto i : train) out.train.push_back(dataset.targets[i]);
        for (const auto i : test) out.test.push_back(dataset.targets[i]);
    }
    return out;
}

}  // namespace rds
