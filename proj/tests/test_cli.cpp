// SPDX-License-Identifier: Apache-2.0
#include "clorf/cube.hpp"
#include "clorf/degrade.hpp"
#include "clorf/fuse.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

struct RunResult {
    int exit_code = -1;
    std::string output;
};

const char* cli_path() {
#ifdef CLORF_CLI_PATH
    return CLORF_CLI_PATH;
#else
    return "clorf";
#endif
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("clorf_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir_);
    }

    void TearDown() override {
        std::error_code ec;
        fs::remove_all(dir_, ec);
    }

    fs::path p(const char* name) const { return dir_ / name; }

    RunResult run(const std::string& args) const {
        const fs::path out = dir_ / "stdout.txt";
        const std::string cmd = std::string(cli_path()) + " " + args + " >" + out.string() + " 2>&1";
        const int status = std::system(cmd.c_str());
        RunResult r;
        r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        std::ifstream in(out);
        std::stringstream ss;
        ss << in.rdbuf();
        r.output = ss.str();
        return r;
    }

    fs::path dir_;
};

TEST_F(CliTest, MakeGtDeterministic) {
    ASSERT_EQ(run("make-gt --height 8 --width 8 --bands 5 --rank 2 --seed 3 --out " + p("a.f32c").string()).exit_code, 0);
    ASSERT_EQ(run("make-gt --height 8 --width 8 --bands 5 --rank 2 --seed 3 --out " + p("b.f32c").string()).exit_code, 0);
    std::ifstream a(p("a.f32c"), std::ios::binary), b(p("b.f32c"), std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    EXPECT_EQ(sa, sb);
    EXPECT_FALSE(sa.empty());
}

TEST_F(CliTest, PipelineSimulateShapes) {
    ASSERT_EQ(run("make-gt --height 16 --width 16 --bands 7 --rank 2 --seed 1 --out " + p("gt.f32c").string()).exit_code, 0);
    const RunResult r = run("simulate --gt " + p("gt.f32c").string() +
                            " --ratio 4 --psf-size 5 --psf-sigma 1.0 --msi-bands 3 --snr-hsi 30 --snr-msi 30"
                            " --seed 2 --out-hsi " + p("lr.f32c").string() + " --out-msi " + p("msi.f32c").string() +
                            " --out-srf " + p("srf.csv").string());
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const clorf::HsiCube lr = clorf::read_cube(p("lr.f32c"));
    const clorf::HsiCube msi = clorf::read_cube(p("msi.f32c"));
    EXPECT_EQ(lr.height, 4);
    EXPECT_EQ(lr.width, 4);
    EXPECT_EQ(lr.bands, 7);
    EXPECT_EQ(msi.height, 16);
    EXPECT_EQ(msi.width, 16);
    EXPECT_EQ(msi.bands, 3);
    const clorf::SpectralResponse srf = clorf::read_srf_csv(p("srf.csv"));
    EXPECT_EQ(srf.out_bands(), 3);
    EXPECT_EQ(srf.in_bands(), 7);
}

TEST_F(CliTest, SimulatePanSingleBand) {
    ASSERT_EQ(run("make-gt --height 8 --width 8 --bands 6 --rank 2 --seed 1 --out " + p("gt.f32c").string()).exit_code, 0);
    const RunResult r = run("simulate --gt " + p("gt.f32c").string() +
                            " --ratio 2 --psf-size 3 --msi-bands 1 --snr-hsi inf --snr-msi inf --seed 2"
                            " --out-hsi " + p("lr.f32c").string() + " --out-msi " + p("pan.f32c").string() +
                            " --out-srf " + p("srf.csv").string());
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_EQ(clorf::read_cube(p("pan.f32c")).bands, 1);
}

TEST_F(CliTest, FuseZeroItersWritesInitializedModel) {
    ASSERT_EQ(run("make-gt --height 8 --width 8 --bands 5 --rank 2 --seed 1 --out " + p("gt.f32c").string()).exit_code, 0);
    ASSERT_EQ(run("simulate --gt " + p("gt.f32c").string() +
                  " --ratio 2 --psf-size 3 --msi-bands 2 --seed 2 --out-hsi " + p("lr.f32c").string() +
                  " --out-msi " + p("msi.f32c").string() + " --out-srf " + p("srf.csv").string())
                  .exit_code,
              0);
    const RunResult r = run("fuse --hsi " + p("lr.f32c").string() + " --msi " + p("msi.f32c").string() + " --srf " +
                            p("srf.csv").string() +
                            " --ratio 2 --psf-size 3 --rank 3 --preset desk --iters 0 --seed 5 --out-model " +
                            p("model.clrf").string());
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const clorf::ClorfModel model = clorf::load_model(p("model.clrf"));
    EXPECT_EQ(model.rank, 3);
    // Desk preset shapes, untouched initialization.
    EXPECT_EQ(model.spatial_net.config.hidden_sizes, (std::vector<int>{128, 128, 128}));
    EXPECT_EQ(model.spectral_net.config.hidden_sizes, (std::vector<int>{64, 64}));
    for (const auto& b : model.spatial_net.biases) EXPECT_EQ(b.cwiseAbs().maxCoeff(), 0.0);
}

TEST_F(CliTest, FusePaperPresetShapes) {
    ASSERT_EQ(run("make-gt --height 8 --width 8 --bands 5 --rank 2 --seed 1 --out " + p("gt.f32c").string()).exit_code, 0);
    ASSERT_EQ(run("simulate --gt " + p("gt.f32c").string() +
                  " --ratio 2 --psf-size 3 --msi-bands 2 --seed 2 --out-hsi " + p("lr.f32c").string() +
                  " --out-msi " + p("msi.f32c").string() + " --out-srf " + p("srf.csv").string())
                  .exit_code,
              0);
    // Reference profile with --iters 0 just snapshots the initialization.
    const RunResult r = run("fuse --hsi " + p("lr.f32c").string() + " --msi " + p("msi.f32c").string() + " --srf " +
                            p("srf.csv").string() +
                            " --ratio 2 --psf-size 3 --rank 3 --preset paper --iters 0 --seed 5 --out-model " +
                            p("model.clrf").string());
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const clorf::ClorfModel model = clorf::load_model(p("model.clrf"));
    EXPECT_EQ(model.spatial_net.config.hidden_sizes, (std::vector<int>(5, 512)));
    EXPECT_EQ(model.spectral_net.config.hidden_sizes, (std::vector<int>{128, 128}));
}

TEST_F(CliTest, FuseRejectsInconsistentShapesBeforeTraining) {
    ASSERT_EQ(run("make-gt --height 8 --width 8 --bands 5 --rank 2 --seed 1 --out " + p("gt.f32c").string()).exit_code, 0);
    ASSERT_EQ(run("simulate --gt " + p("gt.f32c").string() +
                  " --ratio 2 --psf-size 3 --msi-bands 2 --seed 2 --out-hsi " + p("lr.f32c").string() +
                  " --out-msi " + p("msi.f32c").string() + " --out-srf " + p("srf.csv").string())
                  .exit_code,
              0);
    // Declared ratio 4 contradicts the simulated ratio-2 observations.
    const RunResult r = run("fuse --hsi " + p("lr.f32c").string() + " --msi " + p("msi.f32c").string() + " --srf " +
                            p("srf.csv").string() + " --ratio 4 --psf-size 3 --rank 2 --preset desk --iters 0" +
                            " --out-model " + p("model.clrf").string());
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_FALSE(fs::exists(p("model.clrf")));
}

TEST_F(CliTest, FuseInferEvalReport) {
    ASSERT_EQ(run("make-gt --height 12 --width 12 --bands 5 --rank 2 --seed 1 --out " + p("gt.f32c").string()).exit_code, 0);
    ASSERT_EQ(run("simulate --gt " + p("gt.f32c").string() +
                  " --ratio 2 --psf-size 3 --msi-bands 2 --snr-hsi 35 --snr-msi 35 --seed 2 --out-hsi " +
                  p("lr.f32c").string() + " --out-msi " + p("msi.f32c").string() + " --out-srf " + p("srf.csv").string())
                  .exit_code,
              0);
    const RunResult fuse = run("fuse --hsi " + p("lr.f32c").string() + " --msi " + p("msi.f32c").string() + " --srf " +
                               p("srf.csv").string() +
                               " --ratio 2 --psf-size 3 --rank 3 --preset desk --iters 300 --log-every 100"
                               " --lambda 1.0 --eta 0.001 --seed 5 --out-model " +
                               p("model.clrf").string() + " --report " + p("report.csv").string());
    ASSERT_EQ(fuse.exit_code, 0) << fuse.output;

    // Report CSV: header + one row per logged iteration.
    std::ifstream rep(p("report.csv"));
    std::string header;
    std::getline(rep, header);
    EXPECT_EQ(header, "iter,loss_hsi_obs,loss_msi_obs,loss_tv,total");
    int rows = 0;
    for (std::string line; std::getline(rep, line);)
        if (!line.empty()) ++rows;
    EXPECT_GE(rows, 3);

    const RunResult infer =
        run("infer --model " + p("model.clrf").string() + " --height 12 --width 12 --bands 5 --out " + p("pred.f32c").string());
    ASSERT_EQ(infer.exit_code, 0) << infer.output;
    const RunResult ev = run("eval --pred " + p("pred.f32c").string() + " --ref " + p("gt.f32c").string() +
                             " --ratio 2 --out-csv " + p("metrics.csv").string());
    ASSERT_EQ(ev.exit_code, 0) << ev.output;
    std::ifstream mcsv(p("metrics.csv"));
    std::string line;
    std::getline(mcsv, line);
    int commas = 0;
    for (char ch : line) commas += ch == ',';
    EXPECT_EQ(commas, 4);
}

TEST_F(CliTest, EvalIdentityLine) {
    ASSERT_EQ(run("make-gt --height 12 --width 12 --bands 4 --rank 2 --seed 9 --out " + p("gt.f32c").string()).exit_code, 0);
    const RunResult r = run("eval --pred " + p("gt.f32c").string() + " --ref " + p("gt.f32c").string());
    ASSERT_EQ(r.exit_code, 0);
    EXPECT_NE(r.output.find("100.0,1.0,0.0,0.0,4"), std::string::npos) << r.output;
}

TEST_F(CliTest, ExportConstantBandPgm) {
    clorf::HsiCube c(3, 4, 2);
    for (double& v : c.data) v = 0.5;
    clorf::write_cube(c, p("const.f32c"));
    const RunResult r = run("export --cube " + p("const.f32c").string() + " --band 1 --out-pgm " + p("band.pgm").string());
    ASSERT_EQ(r.exit_code, 0) << r.output;
    std::ifstream pgm(p("band.pgm"), std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(pgm)), std::istreambuf_iterator<char>());
    EXPECT_EQ(content.substr(0, 3), "P5\n");
    EXPECT_NE(content.find("4 3\n255\n"), std::string::npos);
    const std::string body = content.substr(content.find("255\n") + 4);
    ASSERT_EQ(body.size(), 12u);
    for (char ch : body) EXPECT_EQ(ch, body[0]); // uniform image
}

TEST_F(CliTest, ExportSpectrumCsvRows) {
    clorf::HsiCube c(1, 1, 3);
    c.data = {0.25, 0.5, 0.75};
    clorf::write_cube(c, p("tiny.f32c"));
    const RunResult r = run("export --cube " + p("tiny.f32c").string() + " --pixel 0 0 --out-csv " + p("spec.csv").string());
    ASSERT_EQ(r.exit_code, 0) << r.output;
    std::ifstream csv(p("spec.csv"));
    int rows = 0;
    for (std::string line; std::getline(csv, line);)
        if (!line.empty()) ++rows;
    EXPECT_EQ(rows, 3);
}

TEST_F(CliTest, ExitCodes) {
    // Usage error: unknown flag.
    EXPECT_EQ(run("make-gt --bogus 1").exit_code, 2);
    // Usage error: band out of range handled before writing.
    clorf::HsiCube c(2, 2, 2);
    clorf::write_cube(c, p("c.f32c"));
    EXPECT_EQ(run("export --cube " + p("c.f32c").string() + " --band 7 --out-pgm " + p("x.pgm").string()).exit_code, 2);
    // I/O error: missing file.
    EXPECT_EQ(run("infer --model " + p("missing.clrf").string() + " --height 2 --width 2 --bands 2 --out " +
                  p("y.f32c").string())
                  .exit_code,
              3);
    // Format error: malformed cube.
    clorf::detail::write_file(p("bad.f32c"), "XXXX");
    EXPECT_EQ(run("eval --pred " + p("bad.f32c").string() + " --ref " + p("bad.f32c").string()).exit_code, 3);
    // Verification success is exit 0.
    EXPECT_EQ(run("verify --suite tv --seed 1").exit_code, 0);
}

TEST_F(CliTest, NoPartialOutputOnError) {
    // Dimension mismatch in eval must not leave a CSV behind.
    clorf::HsiCube a(2, 2, 2), b(3, 3, 2);
    clorf::write_cube(a, p("a.f32c"));
    clorf::write_cube(b, p("b.f32c"));
    const RunResult r = run("eval --pred " + p("a.f32c").string() + " --ref " + p("b.f32c").string() + " --out-csv " +
                            p("out.csv").string());
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_FALSE(fs::exists(p("out.csv")));
}

TEST_F(CliTest, VerifySuitesSmoke) {
    EXPECT_EQ(run("verify --suite noise --seed 1").exit_code, 0);
    EXPECT_EQ(run("verify --suite mfrank --seed 1").exit_code, 0);
    const RunResult r = run("verify --suite bogus");
    EXPECT_EQ(r.exit_code, 2);
}

} // namespace
