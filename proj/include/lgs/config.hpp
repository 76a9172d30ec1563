#pragma once

#include "lgs/core.hpp"
#include "lgs/losses.hpp"

#include <json.hpp>

#include <fstream>

namespace lgs {

// Scene generation bounds are deliberate: this is a desk-scale tool.
constexpr int kMaxResolution = 512;
constexpr int kMaxFrames = 200;

struct SynthParams {
    std::uint64_t seed = 0;
    int joints = 12;
    int frames = 40;
    int train_cameras = 30;
    int holdout_cameras = 5;
    int resolution = 128;
    int body_splats = 800;
    int cloth_splats = 400;
    int scene_splats = 300;
    double pose_amplitude = 1.0;  // scales the canned motion

    void validate() const {
        if (joints < 6 || joints > 24) throw InvalidConfig("synth.joints must be in [6, 24]");
        if (frames < 1 || frames > kMaxFrames) throw InvalidConfig("synth.frames out of bounds");
        if (resolution < 32 || resolution > kMaxResolution)
            throw InvalidConfig("synth.resolution out of bounds");
        if (train_cameras < 1 || holdout_cameras < 0)
            throw InvalidConfig("synth camera counts invalid");
        if (body_splats < 50 || cloth_splats < 50 || scene_splats < 20)
            throw InvalidConfig("synth splat counts too small");
    }
};

struct OptimParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
    double lr_position_init = 1.6e-4;
    double lr_position_final = 1.6e-6;
    double lr_rotation = 1.0e-3;
    double lr_scale = 5.0e-3;
    double lr_opacity = 5.0e-2;
    double lr_sh = 2.5e-3;
    double lr_triplane = 1.0e-3;
    double lr_decoder = 1.0e-3;
};

struct TrainParams {
    long iterations = 2000;
    long schedule_horizon = 2000;
    long checkpoint_every = 500;
    Vec3 background = Vec3(1.0, 1.0, 1.0);
    bool matte_includes_body = false;
};

struct AvatarParams {
    int triplane_res = 64;
    int triplane_channels = 16;
    std::vector<int> mlp_hidden = {128, 128};
    double bbox_padding = 0.25;
    double plane_init_scale = 1e-2;
};

struct Config {
    std::uint64_t seed = 0;
    int threads = 0;  // 0 = hardware concurrency
    SynthParams synth;
    AvatarParams avatar;
    LossConfig losses;
    OptimParams optim;
    TrainParams train;
};

// ---------------------------------------------------------------------------
// JSON round trip. The serialized layout is the single canonical schema;
// dotted-key overrides address into it.

inline nlohmann::json config_to_json(const Config& c) {
    return {
        {"seed", c.seed},
        {"threads", c.threads},
        {"synth",
         {{"joints", c.synth.joints},
          {"frames", c.synth.frames},
          {"train_cameras", c.synth.train_cameras},
          {"holdout_cameras", c.synth.holdout_cameras},
          {"resolution", c.synth.resolution},
          {"body_splats", c.synth.body_splats},
          {"cloth_splats", c.synth.cloth_splats},
          {"scene_splats", c.synth.scene_splats},
          {"pose_amplitude", c.synth.pose_amplitude}}},
        {"avatar",
         {{"triplane_res", c.avatar.triplane_res},
          {"triplane_channels", c.avatar.triplane_channels},
          {"mlp_hidden", c.avatar.mlp_hidden},
          {"bbox_padding", c.avatar.bbox_padding},
          {"plane_init_scale", c.avatar.plane_init_scale}}},
        {"losses",
         {{"lambda_l1", c.losses.lambda_l1},
          {"lambda_ssim", c.losses.lambda_ssim},
          {"lambda_lpips", c.losses.lambda_lpips},
          {"lambda_sim", c.losses.lambda_sim},
          {"lambda_arap", c.losses.lambda_arap},
          {"lambda_mask", c.losses.lambda_mask},
          {"lambda_cloth_lbs", c.losses.lambda_cloth_lbs},
          {"gm_scale", c.losses.gm_scale},
          {"ssim_window", c.losses.ssim_window}}},
        {"optim",
         {{"beta1", c.optim.beta1},
          {"beta2", c.optim.beta2},
          {"eps", c.optim.eps},
          {"lr_position_init", c.optim.lr_position_init},
          {"lr_position_final", c.optim.lr_position_final},
          {"lr_rotation", c.optim.lr_rotation},
          {"lr_scale", c.optim.lr_scale},
          {"lr_opacity", c.optim.lr_opacity},
          {"lr_sh", c.optim.lr_sh},
          {"lr_triplane", c.optim.lr_triplane},
          {"lr_decoder", c.optim.lr_decoder}}},
        {"train",
         {{"iterations", c.train.iterations},
          {"schedule_horizon", c.train.schedule_horizon},
          {"checkpoint_every", c.train.checkpoint_every},
          {"background",
           {c.train.background.x(), c.train.background.y(), c.train.background.z()}},
          {"matte_includes_body", c.train.matte_includes_body}}}};
}

inline Config config_from_json(const nlohmann::json& j) {
    Config c;
    auto get = [](const nlohmann::json& obj, const char* key, auto& out) {
        if (obj.contains(key)) out = obj.at(key).get<std::decay_t<decltype(out)>>();
    };
    get(j, "seed", c.seed);
    get(j, "threads", c.threads);
    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        get(s, "joints", c.synth.joints);
        get(s, "frames", c.synth.frames);
        get(s, "train_cameras", c.synth.train_cameras);
        get(s, "holdout_cameras", c.synth.holdout_cameras);
        get(s, "resolution", c.synth.resolution);
        get(s, "body_splats", c.synth.body_splats);
        get(s, "cloth_splats", c.synth.cloth_splats);
        get(s, "scene_splats", c.synth.scene_splats);
        get(s, "pose_amplitude", c.synth.pose_amplitude);
    }
    if (j.contains("avatar")) {
        const auto& a = j.at("avatar");
        get(a, "triplane_res", c.avatar.triplane_res);
        get(a, "triplane_channels", c.avatar.triplane_channels);
        get(a, "mlp_hidden", c.avatar.mlp_hidden);
        get(a, "bbox_padding", c.avatar.bbox_padding);
        get(a, "plane_init_scale", c.avatar.plane_init_scale);
    }
    if (j.contains("losses")) {
        const auto& l = j.at("losses");
        get(l, "lambda_l1", c.losses.lambda_l1);
        get(l, "lambda_ssim", c.losses.lambda_ssim);
        get(l, "lambda_lpips", c.losses.lambda_lpips);
        get(l, "lambda_sim", c.losses.lambda_sim);
        get(l, "lambda_arap", c.losses.lambda_arap);
        get(l, "lambda_mask", c.losses.lambda_mask);
        get(l, "lambda_cloth_lbs", c.losses.lambda_cloth_lbs);
        get(l, "gm_scale", c.losses.gm_scale);
        get(l, "ssim_window", c.losses.ssim_window);
    }
    if (j.contains("optim")) {
        const auto& o = j.at("optim");
        get(o, "beta1", c.optim.beta1);
        get(o, "beta2", c.optim.beta2);
        get(o, "eps", c.optim.eps);
        get(o, "lr_position_init", c.optim.lr_position_init);
        get(o, "lr_position_final", c.optim.lr_position_final);
        get(o, "lr_rotation", c.optim.lr_rotation);
        get(o, "lr_scale", c.optim.lr_scale);
        get(o, "lr_opacity", c.optim.lr_opacity);
        get(o, "lr_sh", c.optim.lr_sh);
        get(o, "lr_triplane", c.optim.lr_triplane);
        get(o, "lr_decoder", c.optim.lr_decoder);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        get(t, "iterations", c.train.iterations);
        get(t, "schedule_horizon", c.train.schedule_horizon);
        get(t, "checkpoint_every", c.train.checkpoint_every);
        if (t.contains("background")) {
            const auto& b = t.at("background");
            c.train.background = {b.at(0).get<double>(), b.at(1).get<double>(),
                                  b.at(2).get<double>()};
        }
        get(t, "matte_includes_body", c.train.matte_includes_body);
    }
    return c;
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    in >> j;
    return config_from_json(j);
}

inline void save_config(const Config& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config file: " + path);
    out << config_to_json(c).dump(2) << "\n";
}

// Applies `dotted.key=value` pairs onto the canonical JSON form. Keys must
// already exist; values parse as JSON (so numbers, booleans and arrays work).
inline Config apply_overrides(const Config& base, const std::vector<std::string>& overrides) {
    nlohmann::json j = config_to_json(base);
    for (const std::string& item : overrides) {
        const size_t eq = item.find('=');
        if (eq == std::string::npos)
            throw InvalidConfig("override must look like dotted.key=value: " + item);
        const std::string key = item.substr(0, eq);
        const std::string value = item.substr(eq + 1);
        nlohmann::json* node = &j;
        size_t start = 0;
        while (true) {
            const size_t dot = key.find('.', start);
            const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
            if (!node->contains(part))
                throw InvalidConfig("override references unknown config key: " + key);
            node = &(*node)[part];
            if (dot == std::string::npos) break;
            start = dot + 1;
        }
        nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
        if (parsed.is_discarded()) parsed = value;  // bare strings
        if (node->type() != parsed.type() && !(node->is_number() && parsed.is_number()))
            throw InvalidConfig("override type mismatch for key: " + key);
        *node = parsed;
    }
    return config_from_json(j);
}

}  // namespace lgs
