// Command-line front end for the light-field codec pipeline.
#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "lfc/external_codec.hpp"
#include "lfc/image_io.hpp"
#include "lfc/pipeline.hpp"
#include "lfc/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// The config file wins over command-line flags for any key it contains.
class ConfigOverride {
public:
  explicit ConfigOverride(const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw lfc::FormatError("cannot open config file " + path);
    in >> values_;
  }

  template <typename T>
  void apply(const char* key, T& target) const {
    if (values_.contains(key)) target = values_.at(key).get<T>();
  }
  void apply_flag(const char* key, bool& target) const {
    if (values_.contains(key)) target = values_.at(key).get<bool>();
  }

private:
  json values_;
};

lfc::DropPolicy parse_drop(const std::string& name) {
  if (name == "rdo") return lfc::DropPolicy::kRdo;
  if (name == "none") return lfc::DropPolicy::kNone;
  if (name == "tl4") return lfc::DropPolicy::kAllTl4;
  throw lfc::InvalidArgument("unknown drop policy '" + name + "'");
}

struct CommonFlags {
  std::string config_path;
  int qp = 28;
  double lambda = 0.1;
  std::string codec = "builtin";
  std::string ext_cmd;
  std::string model_synth;
  std::string model_qe;
  std::string rvs_policy = "sharpness";
  std::string out = ".";
  uint64_t seed = 1;
  int jobs = 1;
  bool no_enhance = false;
  bool no_synth = false;
  std::string drop = "rdo";
  std::string tl_offsets = "0,1,2,3,4";
  int patch = 60;
  int levels = 9;
  double dmax = 4.0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file; keys override flags");
    cmd->add_option("--qp", qp, "base quantization parameter");
    cmd->add_option("--lambda", lambda, "Lagrangian multiplier");
    cmd->add_option("--codec", codec, "builtin|external");
    cmd->add_option("--ext-cmd", ext_cmd, "external encoder command template");
    cmd->add_option("--model-synth", model_synth, "synthesis model file");
    cmd->add_option("--model-qe", model_qe, "enhancement model file");
    cmd->add_option("--rvs-policy", rvs_policy, "reference selection policy (sharpness|nearest)");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--seed", seed, "RNG seed");
    cmd->add_option("--jobs", jobs, "worker thread count");
    cmd->add_flag("--no-enhance", no_enhance, "skip the enhancement stage");
    cmd->add_flag("--no-synth", no_synth, "fill dropped views by nearest-view copy");
    cmd->add_option("--drop", drop, "drop policy: rdo|none|tl4");
    cmd->add_option("--tl-offsets", tl_offsets, "per-layer QP offsets, five comma-separated ints");
    cmd->add_option("--patch", patch, "synthesis input patch size");
    cmd->add_option("--levels", levels, "disparity feature levels");
    cmd->add_option("--dmax", dmax, "disparity range bound");
  }

  void apply_config() {
    const ConfigOverride cfg(config_path);
    cfg.apply("qp", qp);
    cfg.apply("lambda", lambda);
    cfg.apply("codec", codec);
    cfg.apply("ext-cmd", ext_cmd);
    cfg.apply("model-synth", model_synth);
    cfg.apply("model-qe", model_qe);
    cfg.apply("rvs-policy", rvs_policy);
    cfg.apply("out", out);
    cfg.apply("seed", seed);
    cfg.apply("jobs", jobs);
    cfg.apply_flag("no-enhance", no_enhance);
    cfg.apply_flag("no-synth", no_synth);
    cfg.apply("drop", drop);
    cfg.apply("tl-offsets", tl_offsets);
    cfg.apply("patch", patch);
    cfg.apply("levels", levels);
    cfg.apply("dmax", dmax);
  }

  lfc::PipelineConfig pipeline(const std::string& manifest = "") const {
    lfc::PipelineConfig pc;
    pc.manifest = manifest;
    pc.base_qp = qp;
    pc.lambda = lambda;
    pc.codec = codec == "external" ? lfc::CodecId::kExternal : lfc::CodecId::kBuiltin;
    pc.external_command = ext_cmd;
    pc.synth_model_path = model_synth;
    pc.qe_model_path = model_qe;
    pc.rvs_policy = rvs_policy;
    pc.out_dir = out;
    pc.seed = seed;
    pc.jobs = jobs;
    pc.enhance = !no_enhance;
    pc.synthesize = !no_synth;
    pc.drop = parse_drop(drop);
    {
      std::stringstream ss(tl_offsets);
      std::string tok;
      size_t i = 0;
      while (std::getline(ss, tok, ',') && i < pc.tl_qp_offsets.size()) {
        pc.tl_qp_offsets[i++] = std::stoi(tok);
      }
      if (i != pc.tl_qp_offsets.size()) {
        throw lfc::InvalidArgument("--tl-offsets expects five comma-separated integers");
      }
    }
    pc.gan.patch_size = patch;
    pc.gan.disparity_levels = levels;
    pc.gan.d_max = dmax;
    return pc;
  }
};

int cmd_encode(const CommonFlags& flags, const std::string& manifest) {
  const lfc::PipelineConfig pc = flags.pipeline(manifest);
  fs::create_directories(pc.out_dir);
  const lfc::LightField lf = lfc::load_light_field(pc.manifest);
  const lfc::EncodeResult result = lfc::run_encode(lf, pc);
  result.stream.save(pc.out_dir / "stream.lfb");
  if (!result.decisions.empty()) {
    const lfc::CodingStructure cs = lfc::build_sequence(lf.grid_rows, lf.grid_cols);
    lfc::save_decisions_csv(result.decisions, cs.sequence, pc.out_dir / "decisions.csv");
  }
  std::cout << "bpp " << result.bpp << "\n";
  std::cout << "records " << result.stream.records.size() << "\n";
  return 0;
}

int cmd_decode(const CommonFlags& flags, const std::string& stream_path) {
  const lfc::PipelineConfig pc = flags.pipeline();
  fs::create_directories(pc.out_dir);
  const lfc::LfBitstream stream = lfc::LfBitstream::load(stream_path);
  const lfc::DecodeResult result = lfc::run_decode(stream, pc);
  lfc::save_light_field(result.light_field, pc.out_dir / "manifest.json");
  std::ofstream synth_list(pc.out_dir / "synthesized.csv");
  synth_list << "u,v\n";
  for (lfc::AngularPos p : result.synthesized) synth_list << p.u << "," << p.v << "\n";
  std::cout << "views " << result.light_field.view_count() << " synthesized "
            << result.synthesized.size() << "\n";
  return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& orig, const std::string& recon,
             const std::string& bd_anchor, const std::string& bd_test, double rate,
             const std::string& curve_out) {
  fs::create_directories(flags.out);
  if (!bd_anchor.empty() && !bd_test.empty()) {
    auto make_curves = [](const std::string& path, int quality_col) {
      lfc::RdCurve c;
      for (const auto& row : lfc::load_rd_curve_csv(path)) {
        c.points.push_back({row[0], row[static_cast<size_t>(quality_col)]});
      }
      return c;
    };
    const lfc::RdCurve anchor_psnr = make_curves(bd_anchor, 1);
    const lfc::RdCurve test_psnr = make_curves(bd_test, 1);
    std::cout << "bd_rate_percent " << lfc::bd_rate(anchor_psnr, test_psnr) << "\n";
    std::cout << "bd_psnr_db " << lfc::bd_quality(anchor_psnr, test_psnr) << "\n";
    const lfc::RdCurve anchor_ssim = make_curves(bd_anchor, 2);
    const lfc::RdCurve test_ssim = make_curves(bd_test, 2);
    std::cout << "bd_rate_ssim_percent " << lfc::bd_rate(anchor_ssim, test_ssim) << "\n";
    std::cout << "bd_ssim " << lfc::bd_quality(anchor_ssim, test_ssim) << "\n";
    if (orig.empty()) return 0;
  }
  const lfc::LightField original = lfc::load_light_field(orig);
  const lfc::LightField reconstructed = lfc::load_light_field(recon);
  const lfc::CodingStructure cs = lfc::build_sequence(original.grid_rows, original.grid_cols);
  const lfc::EvalResult eval = lfc::evaluate_reconstruction(original, reconstructed, cs.sequence);
  lfc::save_eval_csv(eval, fs::path(flags.out) / "eval.csv");
  const lfc::FluctuationStats stats = lfc::fluctuation(reconstructed, original, cs.sequence);
  std::cout << "mean_psnr_db " << eval.mean_psnr << "\n";
  std::cout << "mean_ssim " << eval.mean_ssim << "\n";
  std::cout << "psnr_std_db " << stats.stddev << "\n";
  if (!curve_out.empty()) {
    std::vector<std::array<double, 3>> rows;
    if (fs::exists(curve_out)) rows = lfc::load_rd_curve_csv(curve_out);
    rows.push_back({rate, eval.mean_psnr, eval.mean_ssim});
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a[0] < b[0]; });
    lfc::save_rd_curve_csv(rows, curve_out);
  }
  return 0;
}

int cmd_train_synth(const CommonFlags& flags, const std::string& manifest, int steps, int batch,
                    double lr, double adv_weight, int stride, double val_frac) {
  fs::create_directories(flags.out);
  const lfc::LightField lf = lfc::load_light_field(manifest);
  const lfc::CodingStructure cs = lfc::build_sequence(lf.grid_rows, lf.grid_cols);
  lfc::SynthTrainConfig cfg;
  cfg.gan.patch_size = flags.patch;
  cfg.gan.disparity_levels = flags.levels;
  cfg.gan.d_max = flags.dmax;
  cfg.gan.batch_size = batch;
  cfg.gan.learning_rate = lr;
  cfg.gan.adv_weight = adv_weight;
  cfg.gan.patch_stride = stride;
  cfg.steps = steps;
  cfg.jobs = flags.jobs;
  cfg.grid_rows = lf.grid_rows;
  cfg.grid_cols = lf.grid_cols;
  std::vector<lfc::SynthSample> samples = lfc::build_synth_dataset(lf, cs, cfg.gan);
  // Deterministic split: every k-th sample validates.
  std::vector<lfc::SynthSample> train, val;
  const size_t stride_val = val_frac > 0 ? static_cast<size_t>(1.0 / val_frac) : samples.size() + 1;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (stride_val > 0 && i % stride_val == stride_val - 1) {
      val.push_back(std::move(samples[i]));
    } else {
      train.push_back(std::move(samples[i]));
    }
  }
  std::cout << "train_samples " << train.size() << " val_samples " << val.size() << "\n";
  const lfc::SynthTrainResult result = lfc::train_d2gan(train, val, cfg, flags.seed);
  lfc::save_synthesis_model(result.generator, &result.d1, &result.d2,
                            fs::path(flags.out) / "synth.lfnn");
  lfc::save_training_log(result.log, fs::path(flags.out) / "synth_log.csv");
  if (!result.log.empty()) {
    std::cout << "final_mse " << result.log.back().l_mse << "\n";
  }
  return 0;
}

int cmd_train_qe(const CommonFlags& flags, const std::string& orig,
                 const std::vector<std::string>& degraded, int steps, int batch, double lr,
                 int patch, int stride) {
  fs::create_directories(flags.out);
  const lfc::LightField original = lfc::load_light_field(orig);
  const lfc::CodingStructure cs = lfc::build_sequence(original.grid_rows, original.grid_cols);
  std::vector<lfc::QeSample> samples;
  for (const std::string& d : degraded) {
    const lfc::LightField deg = lfc::load_light_field(d);
    const lfc::RvsPolicy policy = lfc::make_policy(flags.rvs_policy, {0, 0});
    std::vector<lfc::QeSample> s =
        lfc::build_qe_dataset(original, deg, cs.sequence, policy, patch, stride);
    for (auto& x : s) samples.push_back(std::move(x));
  }
  std::cout << "train_samples " << samples.size() << "\n";
  lfc::QeTrainConfig cfg;
  cfg.steps = steps;
  cfg.batch_size = batch;
  cfg.learning_rate = lr;
  cfg.jobs = flags.jobs;
  const lfc::QeTrainResult result = lfc::train_qenet(samples, {}, cfg, flags.seed);
  lfc::save_qenet_model(result.model, fs::path(flags.out) / "qenet.lfnn");
  lfc::save_qe_training_log(result.log, fs::path(flags.out) / "qenet_log.csv");
  if (!result.log.empty()) std::cout << "final_loss " << result.log.back().loss << "\n";
  return 0;
}

int cmd_gen_synthetic(const CommonFlags& flags, int rows, int cols, int width, int height,
                      double disparity, bool occluder, double fg_disparity) {
  fs::create_directories(flags.out);
  lfc::SyntheticConfig cfg;
  cfg.grid_rows = rows;
  cfg.grid_cols = cols;
  cfg.view_width = width;
  cfg.view_height = height;
  cfg.disparity = disparity;
  cfg.occluder = occluder;
  cfg.fg_disparity = fg_disparity;
  cfg.seed = flags.seed;
  const lfc::LightField lf = lfc::generate_synthetic_lf(cfg);
  lfc::save_light_field(lf, fs::path(flags.out) / "manifest.json");
  std::cout << "views " << lf.view_count() << "\n";
  return 0;
}

int cmd_rd_sweep(CommonFlags flags, const std::string& manifest, const std::string& qps_csv,
                 const std::string& anchor) {
  fs::create_directories(flags.out);
  std::vector<int> qps;
  std::stringstream ss(qps_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) qps.push_back(std::stoi(tok));
  if (qps.empty()) throw lfc::InvalidArgument("rd-sweep: empty QP list");

  const lfc::LightField original = lfc::load_light_field(manifest);
  const lfc::CodingStructure cs = lfc::build_sequence(original.grid_rows, original.grid_cols);
  std::vector<std::array<double, 3>> rows;
  const std::string base_out = flags.out;
  for (int qp : qps) {
    flags.qp = qp;
    flags.out = base_out + "/qp" + std::to_string(qp);
    fs::create_directories(flags.out);
    lfc::PipelineConfig pc = flags.pipeline(manifest);
    const lfc::EncodeResult enc = lfc::run_encode(original, pc);
    enc.stream.save(fs::path(flags.out) / "stream.lfb");
    const lfc::DecodeResult dec = lfc::run_decode(enc.stream, pc);
    const lfc::EvalResult eval = lfc::evaluate_reconstruction(original, dec.light_field, cs.sequence);
    rows.push_back({enc.bpp, eval.mean_psnr, eval.mean_ssim});
    std::cout << "qp " << qp << " bpp " << enc.bpp << " psnr " << eval.mean_psnr << " ssim "
              << eval.mean_ssim << "\n";
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a[0] < b[0]; });
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][1] < rows[i - 1][1]) {
      std::cerr << "warning: quality not monotone in rate near " << rows[i][0] << " bpp\n";
    }
  }
  lfc::save_rd_curve_csv(rows, fs::path(base_out) / "rd_curve.csv");
  if (!anchor.empty()) {
    auto to_curve = [](const std::vector<std::array<double, 3>>& data, int col) {
      lfc::RdCurve c;
      for (const auto& r : data) c.points.push_back({r[0], r[static_cast<size_t>(col)]});
      return c;
    };
    const auto anchor_rows = lfc::load_rd_curve_csv(anchor);
    std::cout << "bd_rate_percent " << lfc::bd_rate(to_curve(anchor_rows, 1), to_curve(rows, 1))
              << "\n";
    std::cout << "bd_psnr_db " << lfc::bd_quality(to_curve(anchor_rows, 1), to_curve(rows, 1))
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"light-field codec with view dropping, synthesis and enhancement"};
  app.require_subcommand(1);

  CommonFlags flags;

  std::string manifest, stream_path, orig, recon, bd_anchor, bd_test, curve_out, qps, anchor;
  std::vector<std::string> degraded;
  double rate = 0.0, lr = 2e-4, adv_weight = 0.01, val_frac = 0.1;
  int steps = 500, batch = 10, qe_patch = 64, stride = 16;
  int rows = 8, cols = 8, width = 48, height = 48;
  double disparity = 1.0, fg_disparity = 2.5;
  bool occluder = false;

  CLI::App* encode = app.add_subcommand("encode", "encode a light field to a bitstream");
  encode->add_option("--manifest", manifest, "input light-field manifest")->required();
  flags.add_to(encode);

  CLI::App* decode = app.add_subcommand("decode", "decode a bitstream to views");
  decode->add_option("--stream", stream_path, "input bitstream")->required();
  flags.add_to(decode);

  CLI::App* eval = app.add_subcommand("eval", "quality metrics and BD deltas");
  eval->add_option("--orig", orig, "original manifest");
  eval->add_option("--recon", recon, "reconstructed manifest");
  eval->add_option("--bd-anchor", bd_anchor, "anchor RD curve CSV");
  eval->add_option("--bd-test", bd_test, "test RD curve CSV");
  eval->add_option("--rate", rate, "rate (bpp) to record with --curve");
  eval->add_option("--curve", curve_out, "append (rate, psnr, ssim) to this curve CSV");
  flags.add_to(eval);

  CLI::App* train_synth = app.add_subcommand("train-synth", "train the view synthesis model");
  train_synth->add_option("--manifest", manifest, "training light-field manifest")->required();
  train_synth->add_option("--steps", steps, "training steps");
  train_synth->add_option("--batch", batch, "batch size");
  train_synth->add_option("--lr", lr, "learning rate");
  train_synth->add_option("--adv-weight", adv_weight, "adversarial loss weight");
  train_synth->add_option("--stride", stride, "patch extraction stride");
  train_synth->add_option("--val-frac", val_frac, "validation fraction");
  flags.add_to(train_synth);

  CLI::App* train_qe = app.add_subcommand("train-qe", "train the quality enhancement model");
  train_qe->add_option("--orig", orig, "original manifest")->required();
  train_qe->add_option("--degraded", degraded, "degraded manifest(s)")->required();
  train_qe->add_option("--steps", steps, "training steps");
  train_qe->add_option("--batch", batch, "batch size");
  train_qe->add_option("--lr", lr, "learning rate");
  train_qe->add_option("--qe-patch", qe_patch, "training patch size");
  train_qe->add_option("--stride", stride, "patch extraction stride");
  flags.add_to(train_qe);

  CLI::App* gen = app.add_subcommand("gen-synthetic", "generate a synthetic light field");
  gen->add_option("--rows", rows, "grid rows");
  gen->add_option("--cols", cols, "grid cols");
  gen->add_option("--width", width, "view width");
  gen->add_option("--height", height, "view height");
  gen->add_option("--disparity", disparity, "background disparity (px per angular step)");
  gen->add_flag("--occluder", occluder, "add a foreground occluder layer");
  gen->add_option("--fg-disparity", fg_disparity, "foreground disparity");
  flags.add_to(gen);

  CLI::App* sweep = app.add_subcommand("rd-sweep", "encode/decode/eval across QPs");
  sweep->add_option("--manifest", manifest, "input light-field manifest")->required();
  sweep->add_option("--qps", qps, "comma-separated QP list")->default_val("18,24,28,32");
  sweep->add_option("--anchor", anchor, "anchor RD curve CSV for BD deltas");
  flags.add_to(sweep);

  CLI11_PARSE(app, argc, argv);

  try {
    flags.apply_config();
    if (encode->parsed()) return cmd_encode(flags, manifest);
    if (decode->parsed()) return cmd_decode(flags, stream_path);
    if (eval->parsed()) return cmd_eval(flags, orig, recon, bd_anchor, bd_test, rate, curve_out);
    if (train_synth->parsed())
      return cmd_train_synth(flags, manifest, steps, batch, lr, adv_weight, stride, val_frac);
    if (train_qe->parsed())
      return cmd_train_qe(flags, orig, degraded, steps, batch, lr, qe_patch, stride);
    if (gen->parsed())
      return cmd_gen_synthetic(flags, rows, cols, width, height, disparity, occluder, fg_disparity);
    if (sweep->parsed()) return cmd_rd_sweep(flags, manifest, qps, anchor);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
