// SPDX-License-Identifier: Apache-2.0
//
// Pipeline driver: synth / ba / train / render / align / eval / pipeline.
// Every stage is a pure function of (input files, flags, seed); `pipeline`
// chains the same stage functions through the same files, so its outputs are
// bit-identical to running the subcommands by hand.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dynsplat/ba/dense_ba.hpp"
#include "dynsplat/field/align.hpp"
#include "dynsplat/field/train.hpp"
#include "dynsplat/image/metrics.hpp"
#include "dynsplat/io/checkpoint.hpp"
#include "dynsplat/io/manifest.hpp"
#include "dynsplat/pnp/pnp.hpp"
#include "dynsplat/synth/synthgen.hpp"

namespace fs = std::filesystem;
using namespace dynsplat;

namespace {

json read_json_file(const std::string& path) {
  if (!fs::exists(path)) throw MissingFile("file not found: " + path);
  std::ifstream in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw MalformedManifest("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw MissingFile("cannot write: " + path);
  out << j.dump(2) << "\n";
}

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig cfg;
  cfg.width = j.value("width", cfg.width);
  cfg.height = j.value("height", cfg.height);
  cfg.num_objects = j.value("num_objects", cfg.num_objects);
  cfg.cam_rotation_deg = j.value("cam_rotation_deg", cfg.cam_rotation_deg);
  cfg.cam_translation = j.value("cam_translation", cfg.cam_translation);
  cfg.obj_rotation_deg = j.value("obj_rotation_deg", cfg.obj_rotation_deg);
  cfg.obj_translation = j.value("obj_translation", cfg.obj_translation);
  cfg.mid_ratio = j.value("mid_ratio", cfg.mid_ratio);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("objects")) {
    for (const auto& jo : j.at("objects")) {
      SynthObjectConfig oc;
      oc.blob_count = jo.value("blob_count", oc.blob_count);
      oc.radius = jo.value("radius", oc.radius);
      cfg.objects.push_back(oc);
    }
  }
  if (j.contains("noise")) {
    const auto& jn = j.at("noise");
    cfg.noise.depth_noise = jn.value("depth_noise", 0.0);
    cfg.noise.flow_noise = jn.value("flow_noise", 0.0);
    cfg.noise.mask_erosion = jn.value("mask_erosion", 0);
    cfg.noise.flow_dropout_frac = jn.value("flow_dropout_frac", 0.0);
    cfg.noise.flow_dropout_mag = jn.value("flow_dropout_mag", 8.0);
    cfg.noise.d0_scale = jn.value("d0_scale", 1.0);
    cfg.noise.d0_shift = jn.value("d0_shift", 0.0);
    cfg.noise.d1_scale = jn.value("d1_scale", 1.0);
    cfg.noise.d1_shift = jn.value("d1_shift", 0.0);
  }
  return cfg;
}

json term_losses_json(const BATermLosses& t) {
  return {{"reproj_fwd", t.reproj_fwd},
          {"depth_fwd", t.depth_fwd},
          {"reproj_bwd", t.reproj_bwd},
          {"depth_bwd", t.depth_bwd},
          {"total", t.total}};
}

double scene_diameter(const SceneData& scene) {
  const CameraIntrinsics& k = scene.manifest.intrinsics;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
  Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const double d = scene.d0.at(x, y);
      if (!std::isfinite(d) || d <= 0.0) continue;
      const Vec3 p = unproject(k, Pixel(x, y), d);
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }
  return (hi - lo).norm();
}

double rotation_error_deg(const SE3& a, const SE3& b) {
  const Mat3 r = a.rotation_matrix().transpose() * b.rotation_matrix();
  const double c = std::max(-1.0, std::min(1.0, (r.trace() - 1.0) * 0.5));
  return std::acos(c) * 180.0 / M_PI;
}

// ---------------------------------------------------------------------------
// stages

json stage_synth(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed) {
  SynthConfig cfg = synth_config_from_json(read_json_file(config_path));
  if (seed) cfg.seed = *seed;
  OracleBundle bundle = generate(cfg);
  bundle = perturb(bundle, cfg.noise, seed_combine(cfg.seed, "noise"));
  save_bundle(bundle, out_dir);
  return {{"manifest", out_dir + "/manifest.json"},
          {"width", cfg.width},
          {"height", cfg.height},
          {"num_objects", cfg.num_objects},
          {"mid_ratio", cfg.mid_ratio},
          {"seed", cfg.seed}};
}

json stage_ba(const std::string& manifest_path, const std::string& out_dir,
              const BAParams& params, std::uint64_t seed) {
  const SceneData scene = load_manifest(manifest_path);
  const CameraIntrinsics& k = scene.manifest.intrinsics;
  DenseBA ba(scene, params);

  std::vector<SE3> init(scene.num_regions, SE3::identity());
  json regions = json::array();
  for (int r = 0; r < scene.num_regions; ++r) {
    const auto corrs =
        build_region_correspondences(r, scene.labels0, scene.d0, scene.flow_fwd,
                                     ba.w_fwd(), k);
    RansacParams rp;
    rp.seed = seed_combine(seed_combine(seed, "ransac"), r);
    const RansacResult rr = ransac_pnp(corrs, k, rp);
    init[r] = rr.transform;
    regions.push_back({{"id", r},
                       {"correspondences", corrs.points3d.size()},
                       {"ransac_inliers", rr.inlier_count},
                       {"ransac_mean_residual", rr.mean_residual}});
  }

  const BAResult res = ba.run(init);
  fs::create_directories(out_dir);
  write_pfm(out_dir + "/depth0.pfm", res.depth0);
  write_pfm(out_dir + "/depth1.pfm", res.depth1);

  json traj = json::array();
  for (const auto& t : res.trajectory) {
    traj.push_back({t.reproj_fwd, t.depth_fwd, t.reproj_bwd, t.depth_bwd, t.total});
  }
  json out = {{"t_cam", se3_to_json(res.t_cam)},
              {"t_obj", json::array()},
              {"theta0", res.theta0},
              {"gamma0", res.gamma0},
              {"theta1", res.theta1},
              {"gamma1", res.gamma1},
              {"initial_losses", term_losses_json(res.initial_losses)},
              {"final_losses", term_losses_json(res.final_losses)},
              {"regions", regions},
              {"iterations", traj},
              {"depth0", "depth0.pfm"},
              {"depth1", "depth1.pfm"},
              {"bidirectional", params.bidirectional}};
  for (const SE3& t : res.t_obj) out["t_obj"].push_back(se3_to_json(t));
  write_json_file(out_dir + "/ba.json", out);
  return out;
}

struct TrainFlags {
  int iters = 1000;
  int stride = 1;
  bool no_se3_init = false;
  std::uint64_t seed = 0;
};

json stage_train(const std::string& manifest_path, const std::string& ba_dir,
                 const std::string& ckpt_path, const TrainFlags& flags) {
  const SceneData scene = load_manifest(manifest_path);
  const CameraIntrinsics& k = scene.manifest.intrinsics;
  const json ba = read_json_file(ba_dir + "/ba.json");
  const SE3 t_cam = se3_from_json(ba.at("t_cam"));
  std::vector<SE3> t_obj;
  for (const auto& jt : ba.at("t_obj")) t_obj.push_back(se3_from_json(jt));
  const ScalarMap depth0 = read_pfm(ba_dir + "/" + ba.at("depth0").get<std::string>());
  const ScalarMap depth1 = read_pfm(ba_dir + "/" + ba.at("depth1").get<std::string>());

  // frame-0 gaussians carry the scene; frame-1 pixels without a frame-0
  // counterpart (disocclusions, content entering the frame) fill the gaps
  // and are treated as static background.
  GaussianSet g = init_gaussians(scene.i0, depth0, scene.labels0, k,
                                 SE3::identity(), flags.stride);
  {
    BAParams wparams;
    const ScalarMap w_bwd = forward_backward_weights(scene.flow_bwd, scene.flow_fwd,
                                                     wparams.consistency);
    ScalarMap fill_depth = depth1;
    for (int y = 0; y < k.height; ++y) {
      for (int x = 0; x < k.width; ++x) {
        if (w_bwd.at(x, y) > 0.0) {
          fill_depth.at(x, y) = std::numeric_limits<double>::quiet_NaN();
        }
      }
    }
    const LabelMap static_labels(k.width, k.height, 0);
    try {
      const GaussianSet fill = init_gaussians(scene.i1, fill_depth, static_labels, k,
                                              t_cam, flags.stride);
      g.append_all(fill);
    } catch (const NoValidPixels&) {
      // nothing unexplained in frame 1
    }
  }

  MotionField field = flags.no_se3_init ? MotionField::identity_for(g)
                                        : init_field(g, t_obj);
  TrainConfig cfg;
  cfg.iters = flags.iters;
  cfg.seed = flags.seed;
  RenderConfig rcfg;
  const TrainResult res = train(g, field, t_cam, scene.i0, scene.i1, k, cfg, rcfg);

  write_checkpoint(ckpt_path, {k, res.t_cam, res.gaussians, res.field});

  json curve = json::array();
  for (const auto& s : res.curve) {
    curve.push_back({s.iter, s.loss0, s.loss1, s.reg, s.total});
  }
  return {{"checkpoint", ckpt_path},
          {"gaussians", res.gaussians.size()},
          {"iters", flags.iters},
          {"stride", flags.stride},
          {"se3_init", !flags.no_se3_init},
          {"seed", flags.seed},
          {"t_cam", se3_to_json(res.t_cam)},
          {"psnr0", res.psnr0},
          {"psnr1", res.psnr1},
          {"ssim0", res.ssim0},
          {"ssim1", res.ssim1},
          {"curve", curve}};
}

json stage_render(const std::string& ckpt_path, double ratio,
                  const std::optional<std::string>& pose_json_path,
                  const std::string& out_png) {
  const Checkpoint ckpt = read_checkpoint(ckpt_path);
  SE3 pose = pose_json_path ? se3_from_json(read_json_file(*pose_json_path))
                            : se3_interpolate(ckpt.t_cam, ratio);
  int num_regions = 0;
  for (int r : ckpt.gaussians.region_id) num_regions = std::max(num_regions, r + 1);
  std::vector<double> ratios(num_regions, ratio);
  RenderConfig rcfg;
  const RenderResult res =
      rasterize(ckpt.gaussians, &ckpt.field, MotionMode::kFieldInterp, ratios, pose,
                ckpt.intrinsics, rcfg);
  write_png(out_png, res.image);
  return {{"out", out_png}, {"ratio", ratio}, {"pose", se3_to_json(pose)}};
}

struct AlignFlags {
  int iters = 400;
  bool no_ratio_align = false;
  std::optional<std::string> init_pose_json;
  double init_interp = 0.5;
  std::optional<std::string> render_out;
};

json stage_align(const std::string& ckpt_path, const std::string& test_png,
                 const std::string& out_json, const AlignFlags& flags) {
  const Checkpoint ckpt = read_checkpoint(ckpt_path);
  const RgbImage i_test = read_png(test_png);
  if (i_test.width != ckpt.intrinsics.width ||
      i_test.height != ckpt.intrinsics.height) {
    throw DimensionMismatch("align: test image does not match checkpoint intrinsics");
  }
  const SE3 init_pose = flags.init_pose_json
                            ? se3_from_json(read_json_file(*flags.init_pose_json))
                            : se3_interpolate(ckpt.t_cam, flags.init_interp);
  AlignConfig cfg;
  cfg.iters = flags.iters;
  cfg.optimize_ratios = !flags.no_ratio_align;
  RenderConfig rcfg;
  const AlignResult res = test_time_align(ckpt.gaussians, ckpt.field, i_test,
                                          ckpt.intrinsics, init_pose, cfg, rcfg);

  json out = {{"t_cam_test", se3_to_json(res.t_cam_test)},
              {"ratios", res.ratios},
              {"final_loss", res.final_loss},
              {"ratio_align", !flags.no_ratio_align},
              {"iters", flags.iters}};
  if (flags.render_out) {
    int num_regions = 0;
    for (int r : ckpt.gaussians.region_id) num_regions = std::max(num_regions, r + 1);
    std::vector<double> ratios(num_regions, 0.5);
    for (std::size_t i = 0; i < res.ratios.size(); ++i) ratios[i + 1] = res.ratios[i];
    const RenderResult render =
        rasterize(ckpt.gaussians, &ckpt.field, MotionMode::kFieldInterp, ratios,
                  res.t_cam_test, ckpt.intrinsics, rcfg);
    write_png(*flags.render_out, render.image);
    out["render"] = *flags.render_out;
  }
  write_json_file(out_json, out);
  return out;
}

json stage_eval(const std::string& png_a, const std::string& png_b,
                const std::optional<std::string>& out_json) {
  const RgbImage a = read_png(png_a);
  const RgbImage b = read_png(png_b);
  double l1 = 0.0;
  if (a.width != b.width || a.height != b.height) {
    throw DimensionMismatch("eval: image dimensions differ");
  }
  for (std::size_t i = 0; i < a.data.size(); ++i) l1 += std::abs(a.data[i] - b.data[i]);
  const json out = {{"psnr", psnr(a, b)},
                    {"ssim", ssim(a, b)},
                    {"l1", l1 / static_cast<double>(a.data.size())}};
  if (out_json) write_json_file(*out_json, out);
  return out;
}

struct PipelineFlags {
  std::uint64_t seed = 0;
  int ba_iters = 2000;
  int train_iters = 1000;
  int align_iters = 400;
  int stride = 1;
  bool no_se3_init = false;
  bool no_ratio_align = false;
  bool forward_only_ba = false;
};

json stage_pipeline(const std::string& config_path, const std::string& out_dir,
                    const PipelineFlags& flags, json* timings) {
  fs::create_directories(out_dir);
  json report;
  report["seed"] = flags.seed;
  report["config"] = read_json_file(config_path);

  const auto timed = [&](const char* name, auto&& fn) {
    const auto start = std::chrono::steady_clock::now();
    auto result = fn();
    const auto stop = std::chrono::steady_clock::now();
    if (timings) {
      (*timings)[name] =
          std::chrono::duration_cast<std::chrono::milliseconds>(stop - start).count();
    }
    return result;
  };

  const std::string scene_dir = out_dir + "/scene";
  report["stages"]["synth"] =
      timed("synth", [&] { return stage_synth(config_path, scene_dir, flags.seed); });
  const std::string manifest = scene_dir + "/manifest.json";
  const double mid_ratio = report["stages"]["synth"]["mid_ratio"].get<double>();

  BAParams ba_params;
  ba_params.iters = flags.ba_iters;
  ba_params.bidirectional = !flags.forward_only_ba;
  const std::string ba_dir = out_dir + "/ba";
  report["stages"]["ba"] = timed("ba", [&] {
    return stage_ba(manifest, ba_dir, ba_params, seed_combine(flags.seed, "ba"));
  });

  TrainFlags tf;
  tf.iters = flags.train_iters;
  tf.stride = flags.stride;
  tf.no_se3_init = flags.no_se3_init;
  tf.seed = seed_combine(flags.seed, "train");
  const std::string ckpt = out_dir + "/model.ckpt";
  report["stages"]["train"] =
      timed("train", [&] { return stage_train(manifest, ba_dir, ckpt, tf); });

  report["stages"]["render_mid"] = timed("render_mid", [&] {
    return stage_render(ckpt, mid_ratio, std::nullopt, out_dir + "/render_mid.png");
  });
  report["stages"]["eval_mid"] = timed("eval_mid", [&] {
    return stage_eval(out_dir + "/render_mid.png", scene_dir + "/i_mid.png",
                      std::nullopt);
  });

  AlignFlags af;
  af.iters = flags.align_iters;
  af.no_ratio_align = flags.no_ratio_align;
  af.render_out = out_dir + "/render_aligned.png";
  report["stages"]["align"] = timed("align", [&] {
    return stage_align(ckpt, scene_dir + "/i_mid.png", out_dir + "/align.json", af);
  });
  report["stages"]["eval_aligned"] = timed("eval_aligned", [&] {
    return stage_eval(out_dir + "/render_aligned.png", scene_dir + "/i_mid.png",
                      std::nullopt);
  });

  // pose and ratio errors against the generator's ground truth
  const SceneData scene = load_manifest(manifest);
  if (scene.manifest.oracle) {
    const OracleData& gt = *scene.manifest.oracle;
    json err;
    const SE3 t_cam = se3_from_json(report["stages"]["ba"]["t_cam"]);
    err["ba_t_cam_rot_deg"] = rotation_error_deg(t_cam, gt.t_cam);
    err["ba_t_cam_trans"] = (t_cam.translation - gt.t_cam.translation).norm();
    err["scene_diameter"] = scene_diameter(scene);
    json obj_errs = json::array();
    const auto& jt_obj = report["stages"]["ba"]["t_obj"];
    for (std::size_t i = 0; i < gt.t_obj.size() && i < jt_obj.size(); ++i) {
      const SE3 t = se3_from_json(jt_obj[i]);
      obj_errs.push_back(
          {{"rot_deg", rotation_error_deg(t, gt.t_obj[i])},
           {"trans", (t.translation - gt.t_obj[i].translation).norm()}});
    }
    err["ba_t_obj"] = obj_errs;
    json ratio_errs = json::array();
    for (const auto& r : report["stages"]["align"]["ratios"]) {
      ratio_errs.push_back(std::abs(r.get<double>() - gt.ratio));
    }
    err["align_ratio_abs_err"] = ratio_errs;
    report["oracle_errors"] = err;
  }

  write_json_file(out_dir + "/report.json", report);
  return report;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-view dynamic Gaussian splatting pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_path, manifest_path, ba_dir, ckpt_path, test_path;
  std::string pose_path, init_pose_path, png_a, png_b;
  std::string render_out, report_out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double ratio = 0.5, init_interp = 0.5;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic oracle scene");
  synth->add_option("--config", config_path, "Scene config JSON")->required();
  synth->add_option("--out", out_path, "Output directory")->required();
  synth->add_option("--seed", seed)->each([&](const std::string&) { seed_set = true; });

  BAParams ba_params;
  bool forward_only = false;
  auto* ba = app.add_subcommand("ba", "Object-level dense bundle adjustment");
  ba->add_option("--manifest", manifest_path)->required();
  ba->add_option("--out", out_path, "Output directory")->required();
  ba->add_option("--iters", ba_params.iters);
  ba->add_option("--lambda1", ba_params.lambda1);
  ba->add_option("--lambda2", ba_params.lambda2);
  ba->add_option("--lr-depth", ba_params.lr_depth);
  ba->add_option("--lr-pose", ba_params.lr_pose);
  ba->add_flag("--forward-only", forward_only, "Disable bidirectional BA");
  ba->add_option("--seed", seed);

  TrainFlags train_flags;
  auto* tr = app.add_subcommand("train", "Fit the SE(3)-field splatting model");
  tr->add_option("--manifest", manifest_path)->required();
  tr->add_option("--ba", ba_dir, "Directory with ba.json and refined depths")->required();
  tr->add_option("--out", ckpt_path, "Checkpoint path")->required();
  tr->add_option("--report", report_out, "Training report JSON");
  tr->add_option("--iters", train_flags.iters);
  tr->add_option("--stride", train_flags.stride);
  tr->add_flag("--no-se3-init", train_flags.no_se3_init,
               "Initialize the motion field with identities");
  tr->add_option("--seed", train_flags.seed);

  auto* rd = app.add_subcommand("render", "Render the checkpoint at a time ratio");
  rd->add_option("--checkpoint", ckpt_path)->required();
  rd->add_option("--out", out_path)->required();
  rd->add_option("--ratio", ratio);
  rd->add_option("--pose", pose_path, "Pose JSON (default: interpolated camera)");

  AlignFlags align_flags;
  auto* al = app.add_subcommand("align", "Test-time pose and ratio alignment");
  al->add_option("--checkpoint", ckpt_path)->required();
  al->add_option("--test", test_path, "Test image PNG")->required();
  al->add_option("--out", out_path, "AlignResult JSON")->required();
  al->add_option("--render-out", render_out, "Render the aligned view to PNG");
  al->add_option("--iters", align_flags.iters);
  al->add_option("--init-pose", init_pose_path, "Initial pose JSON");
  al->add_option("--init-interp", align_flags.init_interp,
                 "Initialize pose at this camera interpolation ratio");
  al->add_flag("--no-ratio-align", align_flags.no_ratio_align,
               "Keep all object ratios fixed at 0.5");

  auto* ev = app.add_subcommand("eval", "PSNR/SSIM/L1 between two images");
  ev->add_option("--a", png_a)->required();
  ev->add_option("--b", png_b)->required();
  ev->add_option("--out", out_path, "Metrics JSON");

  PipelineFlags pf;
  auto* pl = app.add_subcommand("pipeline", "synth + ba + train + render + align + eval");
  pl->add_option("--config", config_path)->required();
  pl->add_option("--out", out_path, "Output directory")->required();
  pl->add_option("--seed", pf.seed)->required();
  pl->add_option("--ba-iters", pf.ba_iters);
  pl->add_option("--train-iters", pf.train_iters);
  pl->add_option("--align-iters", pf.align_iters);
  pl->add_option("--stride", pf.stride);
  pl->add_flag("--no-se3-init", pf.no_se3_init);
  pl->add_flag("--no-ratio-align", pf.no_ratio_align);
  pl->add_flag("--forward-only", pf.forward_only_ba);

  CLI11_PARSE(app, argc, argv);

  std::string stage = "main";
  try {
    if (synth->parsed()) {
      stage = "synth";
      const json report = stage_synth(
          config_path, out_path,
          seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt);
      std::cout << report.dump(2) << "\n";
    } else if (ba->parsed()) {
      stage = "ba";
      ba_params.bidirectional = !forward_only;
      const json report = stage_ba(manifest_path, out_path, ba_params, seed);
      std::cout << "{\"t_cam\": " << report["t_cam"].dump()
                << ", \"final_losses\": " << report["final_losses"].dump() << "}\n";
    } else if (tr->parsed()) {
      stage = "train";
      const json report = stage_train(manifest_path, ba_dir, ckpt_path, train_flags);
      if (!report_out.empty()) write_json_file(report_out, report);
      json brief = report;
      brief.erase("curve");
      std::cout << brief.dump(2) << "\n";
    } else if (rd->parsed()) {
      stage = "render";
      const json report = stage_render(
          ckpt_path, ratio,
          pose_path.empty() ? std::nullopt : std::optional<std::string>(pose_path),
          out_path);
      std::cout << report.dump(2) << "\n";
    } else if (al->parsed()) {
      stage = "align";
      if (!init_pose_path.empty()) align_flags.init_pose_json = init_pose_path;
      if (!render_out.empty()) align_flags.render_out = render_out;
      const json report = stage_align(ckpt_path, test_path, out_path, align_flags);
      std::cout << report.dump(2) << "\n";
    } else if (ev->parsed()) {
      stage = "eval";
      const json report = stage_eval(
          png_a, png_b,
          out_path.empty() ? std::nullopt : std::optional<std::string>(out_path));
      std::cout << report.dump(2) << "\n";
    } else if (pl->parsed()) {
      stage = "pipeline";
      json timings;
      stage_pipeline(config_path, out_path, pf, &timings);
      write_json_file(out_path + "/timings.json", timings);
      std::cout << "report written to " << out_path << "/report.json\n";
    }
  } catch (const Error& e) {
    const json err = {{"error", {{"type", e.kind()}, {"stage", stage},
                                 {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    const json err = {{"error", {{"type", "Unexpected"}, {"stage", stage},
                                 {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 2;
  }
  return 0;
}
