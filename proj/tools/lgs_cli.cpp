// Command-line front end: scene synthesis, fitting, multi-pass rendering,
// held-out evaluation and the gradient checker.

#include "lgs/gradcheck.hpp"
#include "lgs/scene_io.hpp"
#include "lgs/training.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_out = true) {
    cmd->add_option("--config", args.config_path, "Config JSON file (defaults used when absent)");
    if (with_out) cmd->add_option("-o,--out", args.out_dir, "Output directory");
    cmd->add_option("--seed", args.seed, "Seed override")->each([&](const std::string&) {
        args.seed_set = true;
    });
    cmd->add_option("--threads", args.threads, "Worker thread cap (0 = machine cores)");
    cmd->add_option("--set", args.overrides, "Config overrides as dotted.key=value")
        ->take_all();
}

lgs::Config resolve_config(const CommonArgs& args) {
    lgs::Config cfg = args.config_path.empty() ? lgs::Config() : lgs::load_config(args.config_path);
    cfg = lgs::apply_overrides(cfg, args.overrides);
    if (args.seed_set) cfg.seed = args.seed;
    if (args.threads > 0) cfg.threads = args.threads;
    lgs::set_thread_count(cfg.threads > 0 ? cfg.threads
                                          : int(std::thread::hardware_concurrency()));
    return cfg;
}

int cmd_synth(const CommonArgs& args) {
    const lgs::Config cfg = resolve_config(args);
    lgs::SynthParams params = cfg.synth;
    params.seed = cfg.seed;
    params.validate();
    std::printf("synth: seed=%llu joints=%d frames=%d res=%d -> %s\n",
                (unsigned long long)cfg.seed, params.joints, params.frames, params.resolution,
                args.out_dir.c_str());
    const lgs::SyntheticScene scene = lgs::synth_scene(cfg.seed, params);
    lgs::save_scene_dir(scene, args.out_dir);
    lgs::save_config(cfg, (fs::path(args.out_dir) / "config.json").string());
    std::printf("synth: wrote %zu frames, %zu holdout views\n", scene.frames.size(),
                scene.holdout.size());
    return kExitOk;
}

int cmd_fit(const CommonArgs& args, const std::string& scene_dir) {
    const lgs::Config cfg = resolve_config(args);
    std::printf("fit: scene=%s iterations=%ld -> %s\n", scene_dir.c_str(), cfg.train.iterations,
                args.out_dir.c_str());
    const lgs::SyntheticScene scene = lgs::load_scene_dir(scene_dir);
    lgs::TrainState state = lgs::init_training(scene, cfg);
    const auto start = std::chrono::steady_clock::now();
    const lgs::FitResult result = lgs::fit(state, args.out_dir);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const lgs::EvalResult eval = lgs::evaluate_holdout(state.model, state.scene_layer, scene, cfg);
    std::printf("fit: %ld iterations in %.1fs; holdout PSNR %.2f dB, SSIM %.4f, matte MSE %.5f\n",
                result.iterations, seconds, eval.mean_psnr, eval.mean_ssim, eval.mean_matte_mse);
    std::printf("fit: checkpoint at %s\n", result.checkpoint_path.c_str());
    return kExitOk;
}

int cmd_render(const CommonArgs& args, const std::string& checkpoint_path,
               const std::string& camera_path, const std::string& pose_path) {
    resolve_config(args);
    const lgs::Checkpoint ckpt = lgs::load_checkpoint(checkpoint_path);
    std::ifstream cam_in(camera_path);
    if (!cam_in) throw lgs::IoError("cannot open camera file: " + camera_path);
    nlohmann::json cam_json;
    cam_in >> cam_json;
    const lgs::Camera cam = lgs::camera_from_json(cam_json);

    lgs::Pose pose = lgs::Pose::rest(ckpt.skeleton.joint_count());
    if (!pose_path.empty()) {
        std::ifstream pose_in(pose_path);
        if (!pose_in) throw lgs::IoError("cannot open pose file: " + pose_path);
        nlohmann::json pose_json;
        pose_in >> pose_json;
        pose = lgs::pose_from_json(pose_json.contains("pose") ? pose_json.at("pose") : pose_json);
    }

    const lgs::ViewRender view =
        lgs::render_view(ckpt.model, ckpt.scene_layer, ckpt.skeleton, pose, cam, ckpt.background,
                         ckpt.cfg.train.matte_includes_body);
    fs::create_directories(args.out_dir);
    lgs::save_png_rgb8(view.final, (fs::path(args.out_dir) / "final.png").string());
    lgs::save_png_rgb8(view.base, (fs::path(args.out_dir) / "base.png").string());
    lgs::save_png_rgb8(view.cloth, (fs::path(args.out_dir) / "cloth.png").string());
    lgs::save_png_gray16(view.matte.values, (fs::path(args.out_dir) / "matte.png").string());
    std::printf("render: wrote final/base/cloth/matte PNGs to %s\n", args.out_dir.c_str());
    return kExitOk;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path,
             const std::string& scene_dir) {
    resolve_config(args);
    const lgs::Checkpoint ckpt = lgs::load_checkpoint(checkpoint_path);
    const lgs::SyntheticScene scene = lgs::load_scene_dir(scene_dir);
    const lgs::EvalResult eval =
        lgs::evaluate_holdout(ckpt.model, ckpt.scene_layer, scene, ckpt.cfg);
    nlohmann::json views = nlohmann::json::array();
    for (size_t i = 0; i < eval.views.size(); ++i) {
        views.push_back({{"view", i},
                         {"psnr", eval.views[i].psnr_db},
                         {"ssim", eval.views[i].ssim},
                         {"matte_mse", eval.views[i].matte_mse}});
        std::printf("eval: view %zu  PSNR %.3f dB  SSIM %.4f  matte MSE %.6f\n", i,
                    eval.views[i].psnr_db, eval.views[i].ssim, eval.views[i].matte_mse);
    }
    const nlohmann::json doc = {{"views", views},
                                {"mean_psnr", eval.mean_psnr},
                                {"mean_ssim", eval.mean_ssim},
                                {"mean_matte_mse", eval.mean_matte_mse}};
    fs::create_directories(args.out_dir);
    const std::string out_path = (fs::path(args.out_dir) / "metrics.json").string();
    std::ofstream(out_path) << doc.dump(2) << "\n";
    std::printf("eval: mean PSNR %.3f dB, mean SSIM %.4f -> %s\n", eval.mean_psnr, eval.mean_ssim,
                out_path.c_str());
    return kExitOk;
}

int cmd_gradcheck(const CommonArgs& args, int instances) {
    const lgs::Config cfg = resolve_config(args);
    const auto start = std::chrono::steady_clock::now();
    const auto reports = lgs::run_gradcheck_suite(cfg.seed, instances);
    bool all = true;
    for (const auto& rep : reports) {
        std::printf("gradcheck %-16s instances=%d max_rel_err=%.3e tol=%.0e  %s\n",
                    rep.stage.c_str(), rep.instances, rep.max_rel_err, rep.tolerance,
                    rep.pass ? "PASS" : "FAIL");
        all = all && rep.pass;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("gradcheck: %s in %.1fs\n", all ? "all stages passed" : "FAILURES present",
                seconds);
    return all ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Layered Gaussian-splat avatar fitting on procedural scenes"};
    app.require_subcommand(1);

    CommonArgs synth_args, fit_args, render_args, eval_args, grad_args;
    std::string scene_dir, checkpoint_path, camera_path, pose_path;
    int grad_instances = 100;

    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic scene directory");
    add_common(synth, synth_args);

    CLI::App* fit = app.add_subcommand("fit", "Fit the layered avatar to a scene directory");
    add_common(fit, fit_args);
    fit->add_option("--scene", scene_dir, "Scene directory from `synth`")->required();

    CLI::App* render = app.add_subcommand("render", "Render final/base/cloth/matte images");
    add_common(render, render_args);
    render->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    render->add_option("--camera", camera_path, "Camera JSON file")->required();
    render->add_option("--pose", pose_path, "Pose JSON file (rest pose when absent)");

    CLI::App* eval = app.add_subcommand("eval", "PSNR/SSIM over the held-out views");
    add_common(eval, eval_args);
    eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    eval->add_option("--scene", scene_dir, "Scene directory")->required();

    CLI::App* grad = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
    add_common(grad, grad_args, false);
    grad->add_option("--instances", grad_instances, "Random instances per stage");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_args);
        if (fit->parsed()) return cmd_fit(fit_args, scene_dir);
        if (render->parsed()) return cmd_render(render_args, checkpoint_path, camera_path, pose_path);
        if (eval->parsed()) return cmd_eval(eval_args, checkpoint_path, scene_dir);
        if (grad->parsed()) return cmd_gradcheck(grad_args, grad_instances);
    } catch (const lgs::NumericalFailure& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    }
    return kExitUsage;
}
