#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>

#include "attrib/io.hpp"
#include "attrib/synthetic.hpp"

using namespace attrib;
using namespace attrib::io;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override
    {
        dir = fs::temp_directory_path() / ("attrib_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                           "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string put(const std::string& name, const std::string& text)
    {
        const std::string p = (dir / name).string();
        write_text(p, text);
        return p;
    }
};


std::string error_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_F(IoTest, RegionsRoundTrip)
{
    const RegionSet rs = make_synthetic_regions({30, 2, 0.5, 3, 4});
    const std::string r1 = regions_csv(rs), a1 = adjacency_csv(rs);
    const RegionSet back = read_regions(put("r.csv", r1), put("a.csv", a1));
    EXPECT_EQ(back.ids, rs.ids);
    EXPECT_EQ(regions_csv(back), r1);
    EXPECT_EQ(adjacency_csv(back), a1);
    for (std::size_t i = 0; i < rs.size(); ++i)
        EXPECT_EQ(back.centroids[i], rs.centroids[i]);
}

TEST_F(IoTest, CountsRoundTripAndErrors)
{
    const ScenarioCounts c{{"A", "B"}, {3, 0}, {50, 50}, {7, 50}, {50, 50}};
    const std::string text = counts_csv(c);
    EXPECT_EQ(counts_csv(read_counts(put("c.csv", text))), text);

    const auto bad = put("bad.csv", "region_id,z_f,n_f,z_c,n_c\nA,3,50,7,50\nB,x,50,1,50\n");
    const std::string msg = error_of([&] { read_counts(bad); });
    EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'x'"), std::string::npos) << msg;

    const auto over = put("over.csv", "region_id,z_f,n_f,z_c,n_c\n# comment\nA,51,50,7,50\n");
    EXPECT_NE(error_of([&] { read_counts(over); }).find(":3:"), std::string::npos);

    const auto ragged = put("ragged.csv", "region_id,z_f,n_f,z_c,n_c\nA,1,50\n");
    EXPECT_NE(error_of([&] { read_counts(ragged); }).find(":2: expected 5 fields"), std::string::npos);

    const auto dup = put("dup.csv", "region_id,z_f,n_f,z_c,n_c\nA,1,50,1,50\nA,1,50,1,50\n");
    EXPECT_THROW(read_counts(dup), DataError);
    EXPECT_THROW(read_counts((dir / "missing.csv").string()), DataError);
    EXPECT_NE(error_of([&] { read_counts(put("nocol.csv", "region_id,z_f\nA,1\n")); }).find("'n_f'"),
              std::string::npos);
}

TEST_F(IoTest, HistoricalSelectsScenarioAndNamesMissingOne)
{
    Eigen::MatrixXi z(2, 3), n = Eigen::MatrixXi::Constant(2, 3, 50);
    z << 1, 2, 3, 4, 5, 6;
    const std::vector<std::string> ids{"A", "B"};
    const std::vector<int> years{2001, 2002, 2003};
    const std::string text = historical_csv(ids, years, 1, "factual", z, n) +
                             historical_csv(ids, years, 2, "factual", z * 2, n, false);
    const auto path = put("h.csv", text);
    const auto h = read_historical(path, 1, "factual");
    EXPECT_EQ(h.z, z);
    EXPECT_EQ(h.years, years);
    EXPECT_EQ(h.region_ids, ids);
    EXPECT_EQ(read_historical(path, 2, "factual").z, z * 2);
    EXPECT_EQ(read_historical(path, 1, "factual", {"B", "A"}).z.row(0), z.row(1));

    const std::string msg = error_of([&] { read_historical(path, 1, "counterfactual"); });
    EXPECT_NE(msg.find("counterfactual"), std::string::npos) << msg;

    // A hole in the region x year grid is named.
    const auto holey = put("holey.csv", "region_id,year,month,scenario,z,n\nA,2001,1,factual,1,5\nB,2002,1,factual,1,5\n");
    const std::string hole = error_of([&] { read_historical(holey, 1, "factual"); });
    EXPECT_NE(hole.find("region 'A' year 2002"), std::string::npos) << hole;
}

TEST_F(IoTest, EofRoundTripWithReordering)
{
    const RegionSet rs = make_synthetic_regions({12, 2, 0.5, 3, 4});
    const EofBasis b = compute_eofs(empirical_logit_cov(make_synthetic_history(rs, 8, 3)), 5);
    const std::string text = eof_csv(rs.ids, b);
    const auto path = put("eof_f.csv", text);
    write_text(eigenvalue_path(path), eigenvalues_csv(b));
    EXPECT_EQ(eigenvalue_path(path), (dir / "eof_f.eigenvalues.csv").string());

    const EofBasis back = read_eof(path, rs.ids);
    EXPECT_EQ(back.vectors, b.vectors);
    EXPECT_EQ(back.eigenvalues, b.eigenvalues);
    EXPECT_EQ(eof_csv(rs.ids, back), text);

    std::vector<std::string> rev(rs.ids.rbegin(), rs.ids.rend());
    const EofBasis r = read_eof(path, rev);
    EXPECT_EQ(r.vectors.row(0), b.vectors.row(11));

    EXPECT_THROW(read_eof(path, {"R001"}), DimensionError);
    auto wrong = rs.ids;
    wrong[0] = "nope";
    EXPECT_NE(error_of([&] { read_eof(path, wrong); }).find("'nope'"), std::string::npos);
}

TEST_F(IoTest, DrawsRoundTrip)
{
    PosteriorDraws d;
    d.region_ids = {"A", "B", "C"};
    d.p_f.resize(4, 3);
    d.p_c.resize(4, 3);
    Rng rng = make_rng(2);
    for (Eigen::Index s = 0; s < 4; ++s)
        for (Eigen::Index i = 0; i < 3; ++i) {
            d.p_f(s, i) = draw_uniform(rng);
            d.p_c(s, i) = 0.1 / 3.0 + draw_uniform(rng) * 0.5;
        }
    d.rr = d.p_f.cwiseQuotient(d.p_c);
    const std::string text = draws_csv(d);
    const auto back = read_draws(put("d.csv", text));
    EXPECT_EQ(back.p_f, d.p_f);
    EXPECT_EQ(back.rr, d.rr);
    EXPECT_EQ(back.region_ids, d.region_ids);
    EXPECT_EQ(draws_csv(back), text);

    EXPECT_THROW(read_draws(put("short.csv", "sample,region_id,p_f,p_c,rr\n1,A,0.5,0.5,1\n2,B,0.5,0.5,1\n")),
                 DimensionError);
    EXPECT_NE(error_of([&] { read_draws(put("p.csv", "sample,region_id,p_f,p_c,rr\n1,A,1.5,0.5,3\n")); }).find(":2:"),
              std::string::npos);
}

TEST(Format, SeventeenDigits)
{
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e10, 6.02214076e23})
        EXPECT_EQ(std::stod(fmt(v)), v);
}
