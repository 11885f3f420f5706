#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ksdgof/io.hpp"
#include "ksdgof/kernel.hpp"
#include "ksdgof/model.hpp"

using namespace ksdgof;

namespace {

Dataset parse(const std::string& text) {
    std::istringstream in(text);
    return read_dataset(in, "mem");
}

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const DataError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(ReadDataset, OneColumnWithCommentsAndBlanks) {
    const Dataset d = parse("# header\n1.5\n\n  -2 \n3e2 # trailing\r\n+4\n");
    ASSERT_EQ(d.rows(), 1);
    ASSERT_EQ(d.cols(), 4);
    EXPECT_EQ(d(0, 0), 1.5);
    EXPECT_EQ(d(0, 1), -2.0);
    EXPECT_EQ(d(0, 2), 300.0);
    EXPECT_EQ(d(0, 3), 4.0);
}

TEST(ReadDataset, CommaSeparatedCoordinates) {
    const Dataset d = parse("1,2\n3, 4\n# note\n5 ,6\n");
    ASSERT_EQ(d.rows(), 2);
    ASSERT_EQ(d.cols(), 3);
    EXPECT_EQ(d.col(1), (Vector(2) << 3.0, 4.0).finished());
    EXPECT_EQ(d(1, 2), 6.0);
}

TEST(ReadDataset, MalformedRowNamesTheLine) {
    const std::string msg = error_of("1\n2\nabc\n");
    EXPECT_NE(msg.find("mem:3"), std::string::npos) << msg;
    EXPECT_NE(error_of("1\n2x\n").find("mem:2"), std::string::npos);
    EXPECT_NE(error_of("1,\n").find("mem:1"), std::string::npos);
}

TEST(ReadDataset, RaggedRowsAndBadValues) {
    EXPECT_NE(error_of("1,2\n3\n").find("mem:2"), std::string::npos);
    EXPECT_NE(error_of("1\nnan\n").find("mem:2"), std::string::npos);
    EXPECT_NE(error_of("inf\n").find("mem:1"), std::string::npos);
    EXPECT_FALSE(error_of("# only comments\n\n").empty());
    EXPECT_FALSE(error_of("").empty());
}

TEST(LoadDataset, MissingFile) {
    EXPECT_THROW(load_dataset("/nonexistent/file.csv"), DataError);
}

TEST(Galaxies, LoadsEightyTwoVelocities) {
    const auto v = load_galaxies(std::string(KSDGOF_DATA_DIR) + "/galaxies.csv");
    ASSERT_EQ(v.size(), 82u);
    EXPECT_EQ(v.front(), 9172.0);
    EXPECT_EQ(v.back(), 34279.0);
}

TEST(Galaxies, MedianHeuristicNearPointNine) {
    const auto v = load_galaxies(std::string(KSDGOF_DATA_DIR) + "/galaxies.csv");
    const double l = median_heuristic(dataset_from_values(normalize_dataset(v)));
    EXPECT_GT(l, 0.8);
    EXPECT_LT(l, 1.0);
}

TEST(Galaxies, WrongRowCountIsDataError) {
    const auto path = std::filesystem::temp_directory_path() / "ksdgof_short_galaxies.csv";
    {
        std::ofstream f(path);
        for (int i = 0; i < 81; ++i) f << 10000 + i << "\n";
    }
    EXPECT_THROW(load_galaxies(path), DataError);
    {
        std::ofstream f(path);
        for (int i = 0; i < 82; ++i) f << i << "," << i << "\n";
    }
    EXPECT_THROW(load_galaxies(path), DataError);
    std::filesystem::remove(path);
}
