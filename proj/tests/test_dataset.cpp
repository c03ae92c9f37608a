#include <cmath>
#include <string>

#include "doctest.h"
#include "rds/dataset.hpp"
#include "rds/error.hpp"
#include "rds/split.hpp"
#include "test_support.hpp"

using namespace rds;
using rds::testing::TempDir;
using rds::testing::write_file;

namespace {

std::string error_of(const std::filesystem::path& path, TaskKind task = TaskKind::binary()) {
    try {
        load_csv(path, "y", task);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return "";
}

Dataset from_targets(std::initializer_list<double> targets, TaskKind task = TaskKind::binary()) {
    Dataset ds;
    ds.task = task;
    ds.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(targets.size()), 1);
    ds.targets = Eigen::VectorXd(static_cast<Eigen::Index>(targets.size()));
    Eigen::Index i = 0;
    for (const double t : targets) {
        ds.targets[i] = t;
        ds.ids.push_back(std::to_string(i++));
    }
    return ds;
}

}  // namespace

TEST_CASE("load_csv parses a small binary table in file order") {
    TempDir dir;
    write_file(dir / "d.csv", "f1,f2,y\n1,2,0\n3,4,1\n5,6,0\n7,8.5,1\n");
    const Dataset ds = load_csv(dir / "d.csv", "y", TaskKind::binary());
    CHECK(ds.size() == 4);
    CHECK(ds.dim() == 2);
    CHECK(ds.features(3, 1) == 8.5);
    CHECK(ds.targets[1] == 1.0);
    CHECK(ds.ids == std::vector<std::string>{"0", "1", "2", "3"});
    CHECK(ds.feature_names == std::vector<std::string>{"f1", "f2"});
}

TEST_CASE("load_csv uses the id column when given and the target may sit anywhere") {
    TempDir dir;
    write_file(dir / "d.csv", "key,y,a\nr1,0.5,1\nr2,1.5,2\nr3,2.5,3\nr4,3.5,4\n");
    const Dataset ds = load_csv(dir / "d.csv", "y", TaskKind::regression(), "key");
    CHECK(ds.ids == std::vector<std::string>{"r1", "r2", "r3", "r4"});
    CHECK(ds.dim() == 1);
    CHECK(ds.targets[3] == 3.5);
}

TEST_CASE("load_csv rejects bad cells with their location") {
    TempDir dir;
    write_file(dir / "nan.csv", "f1,f2,y\n1,2,0\n3,nan,1\n5,6,0\n7,8,1\n");
    const std::string nan_error = error_of(dir / "nan.csv");
    CHECK(nan_error.find("non-finite") != std::string::npos);
    CHECK(nan_error.find("f2") != std::string::npos);
    CHECK(nan_error.find("row 1 (line 3)") != std::string::npos);

    write_file(dir / "frac.csv", "f1,y\n1,0\n2,2.5\n3,1\n4,0\n");
    CHECK(error_of(dir / "frac.csv", TaskKind::multiclass(3)).find("non-integral class label") != std::string::npos);

    write_file(dir / "text.csv", "f1,y\n1,0\nabc,1\n3,1\n4,0\n");
    CHECK(error_of(dir / "text.csv").find("non-numeric") != std::string::npos);

    write_file(dir / "no_target.csv", "f1,f2\n1,0\n2,1\n3,1\n4,0\n");
    CHECK(error_of(dir / "no_target.csv").find("y") != std::string::npos);

    CHECK_THROWS_AS(load_csv(dir / "missing.csv", "y", TaskKind::binary()), ValidationError);
}

TEST_CASE("load_csv enforces dataset invariants") {
    TempDir dir;
    write_file(dir / "one_class.csv", "f,y\n1,0\n2,0\n3,0\n4,0\n");
    CHECK_THROWS_AS(load_csv(dir / "one_class.csv", "y", TaskKind::binary()), ValidationError);
    write_file(dir / "dup.csv", "id,f,y\na,1,0\na,2,1\nb,3,1\nc,4,0\n");
    CHECK_THROWS_AS(load_csv(dir / "dup.csv", "y", TaskKind::binary(), "id"), ValidationError);
    write_file(dir / "range.csv", "f,y\n1,0\n2,1\n3,2\n4,0\n");
    CHECK_THROWS_AS(load_csv(dir / "range.csv", "y", TaskKind::binary()), ValidationError);
    write_file(dir / "small.csv", "f,y\n1,0\n2,1\n3,1\n");
    CHECK_THROWS_AS(load_csv(dir / "small.csv", "y", TaskKind::binary()), ValidationError);
}

TEST_CASE("standardize uses the population stddev and zeroes constant columns") {
    Dataset ds = from_targets({0, 1, 0});
    ds.features.resize(3, 2);
    ds.features << 1, 5, 3, 5, 2, 5;
    const auto [scaled, scaling] = standardize(ds);
    CHECK(scaled.features(0, 0) == doctest::Approx(-std::sqrt(1.5)).epsilon(1e-12));
    CHECK(scaled.features.col(1).isZero(0.0));
    CHECK(scaled.ids == ds.ids);
    CHECK(scaling.invert(scaled.features).col(0).isApprox(ds.features.col(0), 1e-12));

    Dataset two = from_targets({0, 1});
    two.features.resize(2, 1);
    two.features << 1, 3;
    const auto [pair, pair_scaling] = standardize(two);
    CHECK(pair.features(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(pair.features(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(pair_scaling.stddev[0] == 1.0);

    const auto [again, unused] = standardize(pair);
    CHECK((again.features - pair.features).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("target_distribution gives class PMFs per side") {
    const Dataset ds = from_targets({0, 0, 1, 1});
    const auto dist = target_distribution(
        ds, SplitAssignment::from_actions({Action::Train, Action::Train, Action::Train, Action::Test}));
    REQUIRE(dist.is_pmf);
    CHECK(dist.train[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(dist.train[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(dist.test == std::vector<double>{0.0, 1.0});

    const auto balanced = target_distribution(
        ds, SplitAssignment::from_actions({Action::Train, Action::Test, Action::Train, Action::Test}));
    CHECK(balanced.train == std::vector<double>{0.5, 0.5});
    CHECK(balanced.test == std::vector<double>{0.5, 0.5});

    const Dataset skewed = from_targets({0, 0, 0, 1});
    CHECK_THROWS_AS(target_distribution(skewed, SplitAssignment::from_actions(std::vector<Action>(4, Action::Train))),
                    DegenerateSplitError);
}

TEST_CASE("target_distribution returns raw values for regression") {
    const Dataset ds = from_targets({0.5, -1.0, 2.0, 3.0}, TaskKind::regression());
    const auto dist = target_distribution(
        ds, SplitAssignment::from_actions({Action::Test, Action::Train, Action::Train, Action::Test}));
    CHECK_FALSE(dist.is_pmf);
    CHECK(dist.train == std::vector<double>{-1.0, 2.0});
    CHECK(dist.test == std::vector<double>{0.5, 3.0});
}

TEST_CASE("subset and split rows partition the dataset in order") {
    const Dataset ds = from_targets({0, 1, 0, 1, 1});
    const auto split = SplitAssignment::from_actions(
        {Action::Test, Action::Train, Action::Train, Action::Test, Action::Train});
    const auto train = split.train_rows();
    const auto test = split.test_rows();
    CHECK(train == std::vector<Eigen::Index>{1, 2, 4});
    CHECK(test == std::vector<Eigen::Index>{0, 3});
    const Dataset t = subset(ds, train);
    CHECK(t.ids == std::vector<std::string>{"1", "2", "4"});
    CHECK(split.n_train == 3);
    CHECK(split.achieved_ratio == doctest::Approx(0.6));
}
