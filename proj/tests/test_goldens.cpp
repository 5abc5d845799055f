#include <gtest/gtest.h>

#include <cmath>

#include "hmlab/goldens.hpp"

using namespace hmlab;

namespace {

const std::filesystem::path kCorpus = HMLAB_GOLDEN_DIR;

Table committed(const std::string& name) { return read_golden(kCorpus / name); }

std::size_t column(const Table& t, const std::string& name) {
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (t.header[i] == name) return i;
    ADD_FAILURE() << "no column " << name << " in " << t.name;
    return 0;
}

}  // namespace

TEST(Goldens, RegenerationIsDeterministic) {
    auto a = golden_corpus(), b = golden_corpus();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(golden_text(a[i]), golden_text(b[i]));
}

TEST(Goldens, FilesCarryProvenance) {
    for (const auto& g : golden_corpus()) {
        std::ifstream in(kCorpus / g.name);
        ASSERT_TRUE(in) << g.name;
        std::string first;
        std::getline(in, first);
        EXPECT_EQ(first.rfind("# generated by hmlab emit-goldens", 0), 0u) << g.name;
    }
}

// Fresh values against the committed corpus: catches drift in any of the generators.
TEST(Goldens, CommittedCorpusMatchesRegeneration) {
    for (const auto& g : golden_corpus()) {
        Table c = committed(g.name);
        ASSERT_EQ(c.header, g.table.header) << g.name;
        ASSERT_EQ(c.rows.size(), g.table.rows.size()) << g.name;
        for (std::size_t i = 0; i < c.rows.size(); ++i)
            for (std::size_t j = 0; j < c.rows[i].size(); ++j) {
                double ref = c.rows[i][j], now = g.table.rows[i][j];
                EXPECT_NEAR(now, ref, 1e-11 * std::max(1.0, std::abs(ref))) << g.name << " row " << i << " col " << c.header[j];
            }
    }
}

TEST(Goldens, SHatTableSolvesItsEquation) {
    Table t = committed("s_hat.csv");
    ASSERT_EQ(t.rows.size(), 5u);
    for (const auto& r : t.rows) {
        int N = static_cast<int>(r[0]);
        EXPECT_LT(std::abs(s_hat_defect(r[1], N)), 1e-12) << N;
        EXPECT_GT(r[1], 2.0);
    }
}

TEST(Goldens, FRowForNThreeIsTanhOneAndAHalf) {
    Table t = committed("profiles_FG.csv");
    std::size_t cN = column(t, "N"), cs = column(t, "s"), cF = column(t, "F"), cG = column(t, "G");
    bool found = false;
    for (const auto& r : t.rows) {
        if (r[cN] == 3 && r[cs] == 1.0) {
            EXPECT_DOUBLE_EQ(r[cF], std::tanh(1.5));
            found = true;
        }
        // G^{-N/(N-1)} = 1 - F^2
        EXPECT_NEAR(std::pow(r[cG], -r[cN] / (r[cN] - 1.0)), 1.0 - r[cF] * r[cF], 1e-13);
    }
    EXPECT_TRUE(found);
}

TEST(Goldens, KappaSamplesSatisfyTheRiccatiEquation) {
    // centred differences of the committed closed forms against the ODE right-hand side
    Table reg = committed("kappa_regular.csv");
    for (const auto& r : reg.rows) {
        int N = static_cast<int>(r[0]);
        double a = r[1], s = r[2], h = 1e-5;
        EXPECT_NEAR(r[3], kappa_regular(s, a, N), 1e-12 * std::max(1.0, std::abs(r[3])));
        double d = (kappa_regular(s + h, a, N) - kappa_regular(s - h, a, N)) / (2 * h);
        EXPECT_NEAR(d, kappa_rhs(r[3], s, N), 1e-5 * std::max(1.0, std::abs(d)));
    }
    Table sing = committed("kappa_singular.csv");
    for (const auto& r : sing.rows) {
        int N = static_cast<int>(r[0]);
        double s = r[1];
        EXPECT_NEAR(r[2], std::tanh(0.5 * N * s) + N / std::sinh(N * s), 1e-12 * r[2]);
    }
}

TEST(Goldens, HMRicciSamplesMatchClosedForm) {
    Table t = committed("hm_ricci_N4_n3.csv");
    ASSERT_EQ(t.rows.size(), 5u);
    HMModel m(HMParams(4, 3));
    for (const auto& r : t.rows) {
        Point p(3);
        p << r[0], r[1], r[2];
        Eigen::MatrixXd R = m.ricci_formula(p);
        double scale = std::max(1.0, R.cwiseAbs().maxCoeff());
        EXPECT_NEAR(r[3], R(0, 0), 1e-9 * scale);
        EXPECT_NEAR(r[4], R(0, 1), 1e-9 * scale);
        EXPECT_NEAR(r[5], R(0, 2), 1e-9 * scale);
        EXPECT_NEAR(r[6], R(1, 1), 1e-9 * scale);
        EXPECT_NEAR(r[7], R(1, 2), 1e-9 * scale);
        EXPECT_NEAR(r[8], R(2, 2), 1e-9 * scale);
        EXPECT_NEAR(r[9], m.scalar_formula(r[0]), 1e-9);
    }
}

TEST(Goldens, ReaderRejectsMalformedFiles) {
    auto dir = std::filesystem::temp_directory_path() / "hmlab_golden_reader";
    std::filesystem::create_directories(dir);
    write_text(dir / "bad.csv", "# c\na,b\n1,x\n");
    EXPECT_THROW(read_golden(dir / "bad.csv"), ConfigError);
    write_text(dir / "ragged.csv", "a,b\n1,2,3\n");
    EXPECT_THROW(read_golden(dir / "ragged.csv"), ConfigError);
    EXPECT_THROW(read_golden(dir / "missing.csv"), ConfigError);
    std::filesystem::remove_all(dir);
}
