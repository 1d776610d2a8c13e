// v2v3d: light-field reconstruction pipeline driver.
//
// Exit codes: 0 success, 1 usage/config error, 2 data/format/shape error,
// 3 numeric failure.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "v2v3d/config.hpp"
#include "v2v3d/errors.hpp"
#include "v2v3d/io.hpp"
#include "v2v3d/metrics.hpp"
#include "v2v3d/nn/checkpoint.hpp"
#include "v2v3d/optics.hpp"
#include "v2v3d/parallel.hpp"
#include "v2v3d/psf.hpp"
#include "v2v3d/rld.hpp"
#include "v2v3d/sim.hpp"
#include "v2v3d/v2v.hpp"

namespace {

namespace fs = std::filesystem;
using namespace v2v3d;

struct GlobalArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    int threads = 0; // 0 = hardware concurrency
    std::string precision = "f32";
};

Config load_config(const GlobalArgs& g) {
    Config cfg = g.config_path.empty() ? Config() : Config::parse_file(g.config_path);
    // The CLI seed wins over any config-file seed.
    if (g.seed) {
        const std::string s = std::to_string(*g.seed);
        cfg.set("phantom.seed", s);
        cfg.set("noise.seed", s);
        cfg.set("train.seed", s);
    }
    return cfg;
}

std::string out_path(const GlobalArgs& g, const std::string& name) {
    fs::create_directories(g.out_dir);
    return (fs::path(g.out_dir) / name).string();
}

void write_loss_log(const std::string& path, const std::vector<LossRow>& log) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot write " + path);
    for (const LossRow& r : log)
        std::fprintf(f, "%d %.9e %.9e %.9e %.9e\n", r.step, r.total, r.mse, r.fft, r.dc);
    std::fclose(f);
}

void write_metrics(const std::string& path, const MetricReport& rep) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot write " + path);
    const double psnr_text = std::isfinite(rep.psnr) ? rep.psnr : MetricReport::kPsnrTextCap;
    std::fprintf(f, "psnr = %.9g\n", psnr_text);
    std::fprintf(f, "ssim = %.9g\n", rep.ssim);
    std::fprintf(f, "ssim_mip = %.9g\n", rep.ssim_mip);
    std::fprintf(f, "bg_used = %.9g\n", rep.bg_used);
    std::fclose(f);
    std::printf("psnr = %.9g\nssim = %.9g\nssim_mip = %.9g\nbg_used = %.9g\n", psnr_text, rep.ssim,
                rep.ssim_mip, rep.bg_used);
}

int run(int argc, char** argv) {
    CLI::App app{"light-field volume reconstruction (two-branch self-supervised training, "
                 "Richardson-Lucy baseline, synthetic data pipeline)"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalArgs g;
    app.add_option("--config", g.config_path, "flat key = value config file");
    app.add_option("--out", g.out_dir, "output directory (default .)");
    app.add_option("--seed", g.seed, "seed override for phantom/noise/train");
    app.add_option("--threads", g.threads, "worker threads (0 = hardware)");
    app.add_option("--precision", g.precision, "compute precision for train: f32 | f64")
        ->check(CLI::IsMember({"f32", "f64"}));

    auto* c_psf = app.add_subcommand("psf-gen", "synthesize a PSF stack from psf.* config");
    auto* c_phantom = app.add_subcommand("phantom", "generate a ground-truth volume from phantom.* config");

    auto* c_project = app.add_subcommand("project", "forward-project a volume through a PSF stack");
    std::string a_volume, a_psf, a_lf, a_recon, a_truth, a_fuse_a, a_fuse_b;
    c_project->add_option("--volume", a_volume, "input volume file")->required();
    c_project->add_option("--psf", a_psf, "input PSF file")->required();

    auto* c_noise = app.add_subcommand("noise", "apply the sensor noise model from noise.* config");
    c_noise->add_option("--lf", a_lf, "input light field")->required();

    auto* c_rld = app.add_subcommand("rld", "Richardson-Lucy deconvolution baseline");
    c_rld->add_option("--lf", a_lf, "input light field")->required();
    c_rld->add_option("--psf", a_psf, "input PSF file")->required();

    auto* c_train = app.add_subcommand("train", "two-branch self-supervised training on one light field");
    c_train->add_option("--lf", a_lf, "input (noisy) light field")->required();
    c_train->add_option("--psf", a_psf, "input PSF file")->required();

    auto* c_fuse = app.add_subcommand("fuse", "elementwise mean of two volumes");
    c_fuse->add_option("--a", a_fuse_a, "first volume")->required();
    c_fuse->add_option("--b", a_fuse_b, "second volume")->required();

    auto* c_eval = app.add_subcommand("eval", "PSNR/SSIM with background subtraction");
    std::optional<double> a_bg;
    c_eval->add_option("--recon", a_recon, "reconstruction volume")->required();
    c_eval->add_option("--truth", a_truth, "ground-truth volume")->required();
    c_eval->add_option("--bg", a_bg, "background level (else eval.bg, else --lf estimate, else 0)");
    c_eval->add_option("--lf", a_lf, "light field to estimate the background from");

    auto* c_dataset = app.add_subcommand("dataset", "phantom -> project -> noise pipeline with manifest");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    ThreadPool::instance().set_thread_count(
        g.threads > 0 ? g.threads : static_cast<int>(std::thread::hardware_concurrency()));
    const Config cfg = load_config(g);

    if (c_psf->parsed()) {
        const PsfStack p = synthesize_psf(psf_config_from(cfg));
        const std::string path = out_path(g, "psf.psf");
        write_psf(path, p);
        std::printf("wrote %s\n", path.c_str());
    } else if (c_phantom->parsed()) {
        const Volume v = generate_phantom(phantom_config_from(cfg));
        const std::string path = out_path(g, "phantom.vol");
        write_volume(path, v);
        std::printf("wrote %s\n", path.c_str());
    } else if (c_project->parsed()) {
        const LightField lf = forward_project(read_volume(a_volume), read_psf(a_psf));
        const std::string path = out_path(g, "projected.lf");
        write_lightfield(path, lf);
        std::printf("wrote %s\n", path.c_str());
    } else if (c_noise->parsed()) {
        const LightField noisy = add_noise(read_lightfield(a_lf), noise_config_from(cfg));
        const std::string path = out_path(g, "noisy.lf");
        write_lightfield(path, noisy);
        std::printf("wrote %s\n", path.c_str());
    } else if (c_rld->parsed()) {
        const RldResult res = rld_solve(read_lightfield(a_lf), read_psf(a_psf), rld_config_from(cfg));
        const std::string vol_path = out_path(g, "rld.vol");
        write_volume(vol_path, res.volume);
        std::FILE* f = std::fopen(out_path(g, "rld_loglik.txt").c_str(), "w");
        if (!f) throw Error("cannot write rld_loglik.txt");
        for (std::size_t i = 0; i < res.loglik.size(); ++i)
            std::fprintf(f, "%zu %.9e\n", i + 1, res.loglik[i]);
        std::fclose(f);
        std::printf("wrote %s\n", vol_path.c_str());
    } else if (c_train->parsed()) {
        const TrainOutput out = train(read_lightfield(a_lf), read_psf(a_psf), v2v_config_from(cfg),
                                      precision_from(g.precision));
        write_volume(out_path(g, "fused.vol"), out.fused);
        write_volume(out_path(g, "volume_a.vol"), out.volume_a);
        write_volume(out_path(g, "volume_b.vol"), out.volume_b);
        nn::write_checkpoint(out_path(g, "checkpoint.ckpt"), out.weights);
        write_loss_log(out_path(g, "loss_log.txt"), out.log);
        std::FILE* f = std::fopen(out_path(g, "train_report.txt").c_str(), "w");
        if (!f) throw Error("cannot write train_report.txt");
        std::fprintf(f, "bg_used = %.9g\n", out.bg_used);
        std::fprintf(f, "steps = %zu\n", out.log.size());
        if (!out.log.empty()) std::fprintf(f, "final_total = %.9e\n", out.log.back().total);
        std::fclose(f);
        std::printf("wrote %s\n", out_path(g, "fused.vol").c_str());
    } else if (c_fuse->parsed()) {
        const Volume fused = fuse(read_volume(a_fuse_a), read_volume(a_fuse_b));
        const std::string path = out_path(g, "fused.vol");
        write_volume(path, fused);
        std::printf("wrote %s\n", path.c_str());
    } else if (c_eval->parsed()) {
        double bg = 0.0;
        if (a_bg)
            bg = *a_bg;
        else if (cfg.has("eval.bg"))
            bg = cfg.get_real("eval.bg");
        else if (!a_lf.empty())
            bg = estimate_background(read_lightfield(a_lf));
        const MetricReport rep = evaluate(read_volume(a_recon), read_volume(a_truth), bg);
        write_metrics(out_path(g, "metrics.txt"), rep);
    } else if (c_dataset->parsed()) {
        const DatasetPaths paths = make_dataset(phantom_config_from(cfg), psf_config_from(cfg),
                                                noise_config_from(cfg), g.out_dir);
        std::printf("wrote %s\n", paths.manifest.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        // format, length, data, shape, geometry, io
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
