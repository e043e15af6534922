// SPDX-License-Identifier: Apache-2.0
//
// Command-line pipeline: synthesize ground truth, simulate observations,
// train the fusion model, infer at arbitrary resolution, evaluate, export
// views, and run the verification suites.

#include "clorf/analysis.hpp"
#include "clorf/cube.hpp"
#include "clorf/degrade.hpp"
#include "clorf/fuse.hpp"
#include "clorf/metrics.hpp"
#include "clorf/synth.hpp"
#include "clorf/verify.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct MakeGtArgs {
    int height = 48, width = 48, bands = 31, rank = 6;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_make_gt(const MakeGtArgs& a) {
    const clorf::HsiCube gt = clorf::make_gt(a.height, a.width, a.bands, a.rank, a.seed);
    clorf::write_cube(gt, a.out);
    std::cout << "wrote " << a.out << " (" << a.height << "x" << a.width << "x" << a.bands << ", rank " << a.rank
              << ")\n";
    return kExitOk;
}

struct SimulateArgs {
    std::string gt;
    int ratio = 4;
    int offset = -1; // -1: ratio/2
    int psf_size = 5;
    double psf_sigma = 1.0;
    int msi_bands = 4;
    double snr_hsi = 30.0;
    double snr_msi = 30.0;
    std::uint64_t seed = 0;
    std::string out_hsi, out_msi, out_srf;
};

int cmd_simulate(const SimulateArgs& a) {
    const clorf::HsiCube gt = clorf::read_cube(a.gt);
    const clorf::PsfKernel psf = clorf::gaussian_psf(a.psf_size, a.psf_sigma);
    const clorf::DownsampleSpec down{a.ratio, a.offset < 0 ? a.ratio / 2 : a.offset};
    const clorf::SpectralResponse srf = clorf::gaussian_srf(a.msi_bands, gt.bands);
    const clorf::NoiseSpec noise_hsi{a.snr_hsi, clorf::derive_seed(a.seed, 1)};
    const clorf::NoiseSpec noise_msi{a.snr_msi, clorf::derive_seed(a.seed, 2)};
    auto [lr_hsi, hr_msi] = clorf::simulate(gt, psf, down, srf, noise_hsi, noise_msi);
    clorf::write_cube(lr_hsi, a.out_hsi);
    clorf::write_cube(hr_msi, a.out_msi);
    clorf::write_srf_csv(srf, a.out_srf);
    std::cout << "wrote " << a.out_hsi << " (" << lr_hsi.height << "x" << lr_hsi.width << "x" << lr_hsi.bands
              << "), " << a.out_msi << " (" << hr_msi.height << "x" << hr_msi.width << "x" << hr_msi.bands << "), "
              << a.out_srf << "\n";
    return kExitOk;
}

struct FuseArgs {
    std::string hsi, msi, srf;
    int ratio = 4;
    int offset = -1;
    int psf_size = 5;
    double psf_sigma = 1.0;
    int rank = 9;
    double lambda = 1.25;
    double eta = 0.0025;
    double lr = 3e-5;
    std::int64_t iters = 30000;
    int patience = 10;
    double min_rel_improve = 1e-4;
    std::int64_t log_every = 200;
    std::uint64_t seed = 0;
    std::string preset = "paper";
    double omega0 = 30.0;
    std::string activation = "sine";
    std::string out_model, report;
    bool lr_given = false, iters_given = false;
};

int cmd_fuse(const FuseArgs& a) {
    const clorf::HsiCube lr_hsi = clorf::read_cube(a.hsi);
    const clorf::HsiCube hr_msi = clorf::read_cube(a.msi);

    clorf::DegradationSpec degr;
    degr.psf = clorf::gaussian_psf(a.psf_size, a.psf_sigma);
    degr.down = {a.ratio, a.offset < 0 ? a.ratio / 2 : a.offset};
    degr.srf = clorf::read_srf_csv(a.srf);

    clorf::NetConfigs nets;
    clorf::TrainConfig cfg;
    if (a.preset == "paper") {
        nets.spatial_hidden = {512, 512, 512, 512, 512};
        nets.spectral_hidden = {128, 128};
        cfg.lr = 3e-5;
        cfg.max_iters = 30000;
    } else { // desk
        nets.spatial_hidden = {128, 128, 128};
        nets.spectral_hidden = {64, 64};
        cfg.lr = 1e-4;
        cfg.max_iters = 5000;
    }
    if (a.lr_given) cfg.lr = a.lr;
    if (a.iters_given) cfg.max_iters = a.iters;
    cfg.lambda = a.lambda;
    cfg.eta = a.eta;
    cfg.patience = a.patience;
    cfg.min_rel_improve = a.min_rel_improve;
    cfg.log_every = a.log_every;
    cfg.seed = a.seed;
    nets.omega0 = a.omega0;
    if (a.activation == "sine")
        nets.activation = clorf::Activation::Sine;
    else if (a.activation == "relu")
        nets.activation = clorf::Activation::Relu;
    else
        nets.activation = clorf::Activation::ReluPE;

    const auto progress = [](const clorf::TrainRecord& rec) {
        std::cerr << "iter " << rec.iter << " total " << rec.total << " (hsi " << rec.loss_hsi_obs << ", msi "
                  << rec.loss_msi_obs << ", tv " << rec.loss_tv << ")\n";
    };
    auto [model, report] = clorf::train(lr_hsi, hr_msi, degr, a.rank, nets, cfg, progress);
    clorf::save_model(model, a.out_model);
    if (!a.report.empty()) clorf::write_report_csv(report, a.report);

    const char* reason = report.stop_reason == clorf::StopReason::EarlyStop ? "early_stop" : "max_iters";
    std::cout << "wrote " << a.out_model << " (rank " << model.rank << ", best loss " << report.best_total
              << " at iter " << report.best_iter << ", stop: " << reason << ")\n";
    return kExitOk;
}

struct InferArgs {
    std::string model;
    int height = 0, width = 0, bands = 0;
    std::string out;
};

int cmd_infer(const InferArgs& a) {
    const clorf::ClorfModel model = clorf::load_model(a.model);
    const clorf::HsiCube cube = clorf::infer(model, a.height, a.width, a.bands);
    clorf::write_cube(cube, a.out);
    std::cout << "wrote " << a.out << " (" << a.height << "x" << a.width << "x" << a.bands << ")\n";
    return kExitOk;
}

struct EvalArgs {
    std::string pred, ref;
    double ratio = 4.0;
    std::string peak = "ref";
    std::string out_csv;
};

int cmd_eval(const EvalArgs& a) {
    const clorf::HsiCube pred = clorf::read_cube(a.pred);
    const clorf::HsiCube ref = clorf::read_cube(a.ref);
    const clorf::PsnrPeak mode = a.peak == "unit" ? clorf::PsnrPeak::Unit : clorf::PsnrPeak::ReferenceMax;
    const clorf::MetricsReport rep = clorf::evaluate(pred, ref, a.ratio, mode);
    const std::string line = clorf::to_csv(rep);
    if (!a.out_csv.empty()) clorf::detail::write_file(a.out_csv, line + "\n");
    std::cout << line << "\n";
    return kExitOk;
}

struct ExportArgs {
    std::string cube;
    int band = -1;
    std::vector<int> pixel;
    std::string out_pgm, out_csv;
};

int cmd_export(const ExportArgs& a) {
    const clorf::HsiCube cube = clorf::read_cube(a.cube);
    const bool band_mode = a.band >= 0;
    const bool pixel_mode = !a.pixel.empty();
    if (band_mode == pixel_mode)
        throw std::invalid_argument("export: choose exactly one of --band/--out-pgm or --pixel/--out-csv");

    if (band_mode) {
        if (a.out_pgm.empty()) throw std::invalid_argument("export: --band requires --out-pgm");
        if (a.band >= cube.bands) throw std::invalid_argument("export: band index out of range");
        const double* plane = cube.plane(a.band);
        double lo = plane[0], hi = plane[0];
        for (std::size_t i = 0; i < cube.pixels(); ++i) {
            lo = std::min(lo, plane[i]);
            hi = std::max(hi, plane[i]);
        }
        std::ostringstream os;
        os << "P5\n" << cube.width << " " << cube.height << "\n255\n";
        std::string body = os.str();
        for (std::size_t i = 0; i < cube.pixels(); ++i) {
            const double t = hi > lo ? (plane[i] - lo) / (hi - lo) : 0.0;
            body.push_back(char(static_cast<unsigned char>(std::lround(t * 255.0))));
        }
        clorf::detail::write_file(a.out_pgm, body);
        std::cout << "wrote " << a.out_pgm << " scale: min=" << lo << " max=" << hi << "\n";
        return kExitOk;
    }

    if (a.out_csv.empty()) throw std::invalid_argument("export: --pixel requires --out-csv");
    const int r = a.pixel[0], c = a.pixel[1];
    if (r < 0 || r >= cube.height || c < 0 || c >= cube.width)
        throw std::invalid_argument("export: pixel out of range");
    std::ostringstream os;
    os.precision(17);
    for (int b = 0; b < cube.bands; ++b) os << b << ',' << cube.at(r, c, b) << '\n';
    clorf::detail::write_file(a.out_csv, os.str());
    std::cout << "wrote " << a.out_csv << " (" << cube.bands << " rows)\n";
    return kExitOk;
}

struct VerifyArgs {
    std::string suite;
    std::uint64_t seed = 1;
};

int cmd_verify(const VerifyArgs& a) {
    const std::vector<clorf::CheckResult> results = clorf::run_verify_suite(a.suite, a.seed);
    bool all_ok = true;
    for (const clorf::CheckResult& r : results) {
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name;
        if (!r.detail.empty()) std::cout << " (" << r.detail << ")";
        std::cout << "\n";
        all_ok = all_ok && r.passed;
    }
    return all_ok ? kExitOk : kExitVerifyFailure;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous low-rank fusion of a low-resolution hyperspectral image with a "
                 "high-resolution multispectral image, with arbitrary-resolution inference"};
    app.require_subcommand(1);

    int threads = 0;
    bool deterministic = true;
    app.add_option("--threads", threads, "cap internal worker threads (0 = default)");
    app.add_flag("--deterministic,!--no-deterministic", deterministic,
                 "force the reproducible reduction order (default on)");

    std::function<int()> runner;

    MakeGtArgs mg;
    auto* sc_mg = app.add_subcommand("make-gt", "synthesize a low-rank ground-truth cube");
    sc_mg->add_option("--height", mg.height)->check(CLI::PositiveNumber);
    sc_mg->add_option("--width", mg.width)->check(CLI::PositiveNumber);
    sc_mg->add_option("--bands", mg.bands)->check(CLI::PositiveNumber);
    sc_mg->add_option("--rank", mg.rank)->check(CLI::PositiveNumber);
    sc_mg->add_option("--seed", mg.seed);
    sc_mg->add_option("--out", mg.out)->required();
    sc_mg->callback([&] { runner = [&] { return cmd_make_gt(mg); }; });

    SimulateArgs sim;
    auto* sc_sim = app.add_subcommand("simulate", "degrade a ground-truth cube into LR-HSI and HR-MSI");
    sc_sim->add_option("--gt", sim.gt)->required();
    sc_sim->add_option("--ratio", sim.ratio)->check(CLI::PositiveNumber);
    sc_sim->add_option("--offset", sim.offset, "decimation phase (default ratio/2)");
    sc_sim->add_option("--psf-size", sim.psf_size);
    sc_sim->add_option("--psf-sigma", sim.psf_sigma);
    sc_sim->add_option("--msi-bands", sim.msi_bands)->check(CLI::PositiveNumber);
    sc_sim->add_option("--snr-hsi", sim.snr_hsi, "SNR in dB, inf disables noise");
    sc_sim->add_option("--snr-msi", sim.snr_msi, "SNR in dB, inf disables noise");
    sc_sim->add_option("--seed", sim.seed);
    sc_sim->add_option("--out-hsi", sim.out_hsi)->required();
    sc_sim->add_option("--out-msi", sim.out_msi)->required();
    sc_sim->add_option("--out-srf", sim.out_srf)->required();
    sc_sim->callback([&] { runner = [&] { return cmd_simulate(sim); }; });

    FuseArgs fu;
    auto* sc_fu = app.add_subcommand("fuse", "train the fusion model on LR-HSI + HR-MSI");
    sc_fu->add_option("--hsi", fu.hsi)->required();
    sc_fu->add_option("--msi", fu.msi)->required();
    sc_fu->add_option("--srf", fu.srf, "SRF CSV from simulate")->required();
    sc_fu->add_option("--ratio", fu.ratio)->check(CLI::PositiveNumber);
    sc_fu->add_option("--offset", fu.offset, "decimation phase (default ratio/2)");
    sc_fu->add_option("--psf-size", fu.psf_size);
    sc_fu->add_option("--psf-sigma", fu.psf_sigma);
    sc_fu->add_option("--rank", fu.rank)->check(CLI::PositiveNumber);
    sc_fu->add_option("--lambda", fu.lambda);
    sc_fu->add_option("--eta", fu.eta);
    auto* opt_lr = sc_fu->add_option("--lr", fu.lr);
    auto* opt_iters = sc_fu->add_option("--iters", fu.iters);
    sc_fu->add_option("--patience", fu.patience);
    sc_fu->add_option("--min-rel-improve", fu.min_rel_improve);
    sc_fu->add_option("--log-every", fu.log_every);
    sc_fu->add_option("--seed", fu.seed);
    sc_fu->add_option("--preset", fu.preset)->check(CLI::IsMember({"paper", "desk"}));
    sc_fu->add_option("--omega0", fu.omega0);
    sc_fu->add_option("--activation", fu.activation)->check(CLI::IsMember({"sine", "relu", "relu_pe"}));
    sc_fu->add_option("--out-model", fu.out_model)->required();
    sc_fu->add_option("--report", fu.report, "write the training report CSV here");
    sc_fu->callback([&, opt_lr, opt_iters] {
        fu.lr_given = opt_lr->count() > 0;
        fu.iters_given = opt_iters->count() > 0;
        runner = [&] { return cmd_fuse(fu); };
    });

    InferArgs in;
    auto* sc_in = app.add_subcommand("infer", "evaluate a trained model at arbitrary dims");
    sc_in->add_option("--model", in.model)->required();
    sc_in->add_option("--height", in.height)->required()->check(CLI::PositiveNumber);
    sc_in->add_option("--width", in.width)->required()->check(CLI::PositiveNumber);
    sc_in->add_option("--bands", in.bands)->required()->check(CLI::PositiveNumber);
    sc_in->add_option("--out", in.out)->required();
    sc_in->callback([&] { runner = [&] { return cmd_infer(in); }; });

    EvalArgs ev;
    auto* sc_ev = app.add_subcommand("eval", "quality metrics of a prediction against a reference");
    sc_ev->add_option("--pred", ev.pred)->required();
    sc_ev->add_option("--ref", ev.ref)->required();
    sc_ev->add_option("--ratio", ev.ratio, "ERGAS resolution ratio d");
    sc_ev->add_option("--peak", ev.peak)->check(CLI::IsMember({"ref", "unit"}));
    sc_ev->add_option("--out-csv", ev.out_csv);
    sc_ev->callback([&] { runner = [&] { return cmd_eval(ev); }; });

    ExportArgs ex;
    auto* sc_ex = app.add_subcommand("export", "export one band as PGM or one pixel spectrum as CSV");
    sc_ex->add_option("--cube", ex.cube)->required();
    sc_ex->add_option("--band", ex.band);
    sc_ex->add_option("--pixel", ex.pixel)->expected(2);
    sc_ex->add_option("--out-pgm", ex.out_pgm);
    sc_ex->add_option("--out-csv", ex.out_csv);
    sc_ex->callback([&] { runner = [&] { return cmd_export(ex); }; });

    VerifyArgs ve;
    auto* sc_ve = app.add_subcommand("verify", "run a verification suite");
    sc_ve->add_option("--suite", ve.suite)
        ->required()
        ->check(CLI::IsMember({"gradcheck", "lipschitz", "mfrank", "tv", "noise"}));
    sc_ve->add_option("--seed", ve.seed);
    sc_ve->callback([&] { runner = [&] { return cmd_verify(ve); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    Eigen::setNbThreads(threads > 0 ? threads : 1);

    try {
        return runner();
    } catch (const clorf::format_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}
