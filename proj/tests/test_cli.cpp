#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

#include "mchjm/io.hpp"

using namespace mchjm;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::path(MCHJM_TEST_WORKDIR) / "cli";

int run(const std::string& args) {
    const std::string cmd = std::string(MCHJM_CLI) + " " + args + " > " + (kWork / "stdout.txt").string() + " 2> " +
                            (kWork / "stderr.txt").string();
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string out(const std::string& dir, const std::string& name) { return read_file((kWork / dir / name).string()); }

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
    }
};

}  // namespace

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run("check --out " + (kWork / "c").string() + " --set family=unknown"), 2);
    EXPECT_EQ(run("simulate --set dt=-1"), 2);
    EXPECT_EQ(run("simulate --set broken"), 2);
    EXPECT_EQ(run("simulate --seed -3"), 2);
    EXPECT_EQ(run("nosuchcommand"), 2);
    EXPECT_EQ(run("calibrate"), 2);
    atomic_write((kWork / "bad.csv").string(), "date_index,curve_id,maturity_years,bond_price\n0,0,1,0.98\n");
    EXPECT_EQ(run("calibrate --dataset " + (kWork / "bad.csv").string()), 3);
    EXPECT_NE(read_file((kWork / "stderr.txt").string()).find("missing spreads section"), std::string::npos);
    EXPECT_EQ(run("calibrate --dataset " + (kWork / "missing.csv").string()), 3);
}

TEST_F(Cli, ZeroVolatilitySimulationHasZeroScores) {
    ASSERT_EQ(run("simulate --out " + (kWork / "zv").string() + " --set model=zero-vol --set paths=100 --set dt=0.05"), 0);
    const std::string m = out("zv", "martingale.csv");
    EXPECT_EQ(m.substr(0, m.find('\n')), "curve,t,T,mean,stderr,z,target");
    // three rows, z column exactly 0
    int rows = 0;
    std::size_t pos = m.find('\n') + 1;
    while (pos < m.size()) {
        const std::size_t e = m.find('\n', pos);
        const std::string row = m.substr(pos, e - pos);
        std::vector<std::string> f;
        std::size_t a = 0;
        for (std::size_t b; (b = row.find(',', a)) != std::string::npos; a = b + 1) f.push_back(row.substr(a, b - a));
        f.push_back(row.substr(a));
        ASSERT_EQ(f.size(), 7u);
        EXPECT_EQ(f[5], "0");
        ++rows;
        pos = e + 1;
    }
    EXPECT_EQ(rows, 3);
}

TEST_F(Cli, CheckReportsSpanAndVerdicts) {
    ASSERT_EQ(run("check --out " + (kWork / "hw").string()), 0);
    EXPECT_NE(out("hw", "check.csv").find("span,hw3-constant-vol,3,5"), std::string::npos);
    ASSERT_EQ(run("check --out " + (kWork / "ns").string() + " --set family=ns-plain-vs-hw"), 0);
    EXPECT_NE(out("ns", "check.csv").find("inconsistent"), std::string::npos);
    ASSERT_EQ(run("check --out " + (kWork / "cdv").string() + " --set family=cdv-example"), 0);
    EXPECT_NE(out("cdv", "check.csv").find("commutation,1,"), std::string::npos);
}

TEST_F(Cli, SynthCalibrateStabilitySweep) {
    const std::string data = (kWork / "data.csv").string();
    ASSERT_EQ(run("synth --dataset " + data + " --set days=30 --set maturities=0.5,1,2,5,10"), 0);
    const std::string truth = "0.3719,0.1643,0.3721,0.1590,0.3727,0.1598,0.4814,0.8825";
    ASSERT_EQ(run("calibrate --dataset " + data + " --out " + (kWork / "cal").string() + " --set theta0=" + truth), 0);
    const std::string th = out("cal", "theta.csv");
    EXPECT_EQ(th.rfind("# theta0 0.3719,0.1643,", 0), 0u);
    const std::string er = out("cal", "errors.csv");
    const std::string yl = er.substr(er.find("yields,") + 7, er.find('\n', er.find("yields,")) - er.find("yields,") - 7);
    std::size_t a = 0;
    for (int j = 0; j < 3; ++j) {
        const std::size_t b = yl.find(',', a);
        EXPECT_LT(std::stod(yl.substr(a, b - a)), 1e-6);
        a = b + 1;
    }
    EXPECT_EQ(run("stability --dataset " + data + " --out " + (kWork / "st").string() + " --set window_months=1 --set rolls=20"), 4);
    ASSERT_EQ(run("stability --dataset " + data + " --out " + (kWork / "st").string() +
                  " --set window_months=1 --set rolls=1 --set max_iterations=2"),
              0);
    EXPECT_NE(out("st", "stability.csv").find("std,0,0,0,0,0,0,0,0"), std::string::npos);
    ASSERT_EQ(run("sweep --dataset " + data + " --out " + (kWork / "sw").string() + " --set lengths=1,2 --set max_iterations=2"), 0);
    const std::string sw = out("sw", "sweep.csv");
    EXPECT_EQ(std::count(sw.begin(), sw.end(), '\n'), 3);
    EXPECT_NE(sw.find("\n2,42,1,"), std::string::npos);
}
