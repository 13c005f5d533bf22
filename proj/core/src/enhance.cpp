#include "lfc/enhance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "lfc/metrics.hpp"
#include "lfc/parallel.hpp"

namespace lfc {

using nn::Tensor4;

QeNet::Stage::Stage(int in, int out, int k)
    : conv(in, out, k, nn::Padding::kSame), bn(out), act(out) {}

QeNet::QeNet() {
  const int kernels[3] = {3, 5, 7};
  for (auto& branch : branches) {
    for (int s = 0; s < 3; ++s) branch[static_cast<size_t>(s)] = Stage(1, 32, kernels[s]);
  }
  // Dense block: layer l sees the concatenation of all previous dense
  // outputs; the first sees the 288-channel feature concatenation.
  const int dense_in[5] = {288, 32, 64, 96, 128};
  for (int l = 0; l < 5; ++l) dense[static_cast<size_t>(l)] = Stage(dense_in[l], 32, 3);
  head = nn::ConvLayer(160, 1, 3, nn::Padding::kSame);
}

Tensor4 QeNet::forward(const Tensor4& target, const Tensor4& central, const Tensor4& picked,
                       bool training, Cache* cache) {
  Cache local;
  Cache* c = cache ? cache : &local;
  const std::array<const Tensor4*, 3> inputs = {&target, &central, &picked};
  std::vector<Tensor4> features;
  features.reserve(9);
  for (size_t b = 0; b < 3; ++b) {
    for (size_t s = 0; s < 3; ++s) {
      Stage& st = branches[b][s];
      Tensor4 t = nn::conv2d_forward(*inputs[b], st.conv, &c->branch_conv[b][s]);
      t = nn::batchnorm_forward(t, st.bn, training, &c->branch_bn[b][s]);
      t = nn::prelu_forward(t, st.act, &c->branch_act[b][s]);
      features.push_back(std::move(t));
    }
  }
  std::vector<const Tensor4*> feature_ptrs;
  for (const Tensor4& f : features) feature_ptrs.push_back(&f);
  const Tensor4 concat = nn::concat_channels(feature_ptrs);

  std::vector<Tensor4> dense_outs;
  dense_outs.reserve(5);
  for (size_t l = 0; l < 5; ++l) {
    Tensor4 in;
    if (l == 0) {
      in = concat;
    } else {
      std::vector<const Tensor4*> parts;
      for (size_t p = 0; p < l; ++p) parts.push_back(&dense_outs[p]);
      in = nn::concat_channels(parts);
    }
    Stage& st = dense[l];
    Tensor4 t = nn::conv2d_forward(in, st.conv, &c->dense_conv[l]);
    t = nn::batchnorm_forward(t, st.bn, training, &c->dense_bn[l]);
    t = nn::prelu_forward(t, st.act, &c->dense_act[l]);
    dense_outs.push_back(std::move(t));
  }
  std::vector<const Tensor4*> head_parts;
  for (const Tensor4& d : dense_outs) head_parts.push_back(&d);
  const Tensor4 head_in = nn::concat_channels(head_parts);
  return nn::conv2d_forward(head_in, head, &c->head_conv);
}

Tensor4 QeNet::backward(const Tensor4& grad_residual, const Cache& cache) {
  Tensor4 g_head_in = nn::conv2d_backward(grad_residual, head, cache.head_conv);
  std::vector<Tensor4> g_dense = nn::split_channels(g_head_in, {32, 32, 32, 32, 32});

  // Walk the dense block backwards, fanning each layer's input gradient out
  // to the earlier outputs it concatenated.
  Tensor4 g_concat;  // gradient wrt the 288-channel feature concatenation
  for (int l = 4; l >= 0; --l) {
    Stage& st = dense[static_cast<size_t>(l)];
    Tensor4 g = nn::prelu_backward(g_dense[static_cast<size_t>(l)], st.act,
                                   cache.dense_act[static_cast<size_t>(l)]);
    g = nn::batchnorm_backward(g, st.bn, cache.dense_bn[static_cast<size_t>(l)]);
    g = nn::conv2d_backward(g, st.conv, cache.dense_conv[static_cast<size_t>(l)]);
    if (l == 0) {
      g_concat = std::move(g);
    } else {
      std::vector<int> counts(static_cast<size_t>(l), 32);
      std::vector<Tensor4> parts = nn::split_channels(g, counts);
      for (int p = 0; p < l; ++p) {
        Tensor4& acc = g_dense[static_cast<size_t>(p)];
        for (size_t i = 0; i < acc.size(); ++i) acc.v[i] += parts[static_cast<size_t>(p)].v[i];
      }
    }
  }

  std::vector<int> counts(9, 32);
  std::vector<Tensor4> g_features = nn::split_channels(g_concat, counts);
  Tensor4 grad_target;
  for (int b = 2; b >= 0; --b) {
    for (int s = 2; s >= 0; --s) {
      Stage& st = branches[static_cast<size_t>(b)][static_cast<size_t>(s)];
      const size_t fi = static_cast<size_t>(b) * 3 + static_cast<size_t>(s);
      Tensor4 g = nn::prelu_backward(g_features[fi], st.act,
                                     cache.branch_act[static_cast<size_t>(b)][static_cast<size_t>(s)]);
      g = nn::batchnorm_backward(g, st.bn, cache.branch_bn[static_cast<size_t>(b)][static_cast<size_t>(s)]);
      g = nn::conv2d_backward(g, st.conv, cache.branch_conv[static_cast<size_t>(b)][static_cast<size_t>(s)]);
      if (b == 0) {
        if (grad_target.size() == 0) {
          grad_target = std::move(g);
        } else {
          for (size_t i = 0; i < grad_target.size(); ++i) grad_target.v[i] += g.v[i];
        }
      }
    }
  }
  return grad_target;
}

std::vector<nn::Param*> QeNet::params() {
  std::vector<nn::Param*> ps;
  auto add_stage = [&](Stage& st) {
    ps.push_back(&st.conv.kernel);
    ps.push_back(&st.conv.bias);
    ps.push_back(&st.bn.gamma);
    ps.push_back(&st.bn.beta);
    ps.push_back(&st.act.slope);
  };
  for (auto& branch : branches) {
    for (Stage& st : branch) add_stage(st);
  }
  for (Stage& st : dense) add_stage(st);
  ps.push_back(&head.kernel);
  ps.push_back(&head.bias);
  return ps;
}

void QeNet::init(nn::Rng& rng) {
  for (auto& branch : branches) {
    for (Stage& st : branch) st.conv.init_he_uniform(rng);
  }
  for (Stage& st : dense) st.conv.init_he_uniform(rng);
  head.init_zero();  // exact identity before training
}

namespace {

double laplacian_variance(const Plane8& p) {
  if (p.width < 3 || p.height < 3) return 0.0;
  double sum = 0.0, sq = 0.0;
  long count = 0;
  for (int y = 1; y < p.height - 1; ++y) {
    for (int x = 1; x < p.width - 1; ++x) {
      const double lap = -4.0 * p.at(x, y) + p.at(x - 1, y) + p.at(x + 1, y) + p.at(x, y - 1) +
                         p.at(x, y + 1);
      sum += lap;
      sq += lap * lap;
      ++count;
    }
  }
  const double mean = sum / count;
  return sq / count - mean * mean;
}

double blockiness(const Plane8& p) {
  double boundary = 0.0, interior = 0.0;
  long nb = 0, ni = 0;
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x + 1 < p.width; ++x) {
      const double g = std::abs(static_cast<double>(p.at(x + 1, y)) - p.at(x, y));
      if (x % 8 == 7) {
        boundary += g;
        ++nb;
      } else {
        interior += g;
        ++ni;
      }
    }
  }
  for (int x = 0; x < p.width; ++x) {
    for (int y = 0; y + 1 < p.height; ++y) {
      const double g = std::abs(static_cast<double>(p.at(x, y + 1)) - p.at(x, y));
      if (y % 8 == 7) {
        boundary += g;
        ++nb;
      } else {
        interior += g;
        ++ni;
      }
    }
  }
  if (nb == 0 || ni == 0) return 0.0;
  return std::max(0.0, boundary / nb - interior / ni);
}

}  // namespace

RvsPolicy make_sharpness_policy() {
  RvsPolicy p;
  p.name = "sharpness";
  p.scorer = [](const View& candidate, AngularPos, int) {
    return laplacian_variance(candidate.y) / (1.0 + blockiness(candidate.y));
  };
  return p;
}

RvsPolicy make_nearest_policy(AngularPos target) {
  RvsPolicy p;
  p.name = "nearest";
  p.scorer = [target](const View&, AngularPos pos, int tl) {
    return -static_cast<double>(chebyshev(pos, target)) - tl / 100.0;
  };
  return p;
}

RvsPolicy make_policy(const std::string& name, AngularPos target) {
  if (name == "sharpness") return make_sharpness_policy();
  if (name == "nearest") return make_nearest_policy(target);
  throw InvalidArgument("unknown reference-selection policy '" + name + "'");
}

AngularPos select_reference(AngularPos target, const std::vector<RvsCandidate>& candidates,
                            const RvsPolicy& policy) {
  if (candidates.empty()) throw InvalidArgument("select_reference: empty candidate set");
  const RvsCandidate* best = nullptr;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const RvsCandidate& c : candidates) {
    const double score = policy.scorer(*c.view, c.pos, c.tl);
    bool take = false;
    if (!best || score > best_score) {
      take = true;
    } else if (score == best_score) {
      const int dc = chebyshev(c.pos, target);
      const int db = chebyshev(best->pos, target);
      if (dc < db || (dc == db && c.pos < best->pos)) take = true;
    }
    if (take) {
      best = &c;
      best_score = score;
    }
  }
  return best->pos;
}

PlaneF enhance_view(const PlaneF& target, const PlaneF& central, const PlaneF& picked,
                    QeNet& model) {
  if (target.width != central.width || target.height != central.height ||
      target.width != picked.width || target.height != picked.height) {
    throw InvalidArgument("enhance_view: input views must share dimensions");
  }
  const Tensor4 t = Tensor4::from_plane(target);
  const Tensor4 c = Tensor4::from_plane(central);
  const Tensor4 p = Tensor4::from_plane(picked);
  const Tensor4 residual = model.forward(t, c, p, /*training=*/false);
  PlaneF out(target.width, target.height);
  for (size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = std::clamp(target.data[i] + residual.v[i], 0.0, 1.0);
  }
  return out;
}

QeTrainResult train_qenet(const std::vector<QeSample>& train, const std::vector<QeSample>& val,
                          const QeTrainConfig& config, uint64_t seed) {
  if (train.empty()) throw InvalidArgument("train_qenet: empty training set");
  nn::Rng rng(seed);
  QeTrainResult result;
  result.model.init(rng);
  nn::AdamConfig adam_cfg;
  adam_cfg.lr = config.learning_rate;
  nn::Adam opt(adam_cfg, result.model.params());

  std::uniform_int_distribution<size_t> pick(0, train.size() - 1);
  const int ps = train[0].target.width;
  auto stack = [&](auto accessor, const std::vector<size_t>& batch) {
    Tensor4 out(static_cast<int>(batch.size()), 1, ps, ps);
    for (size_t i = 0; i < batch.size(); ++i) {
      const PlaneF& plane = accessor(train[batch[i]]);
      std::copy(plane.data.begin(), plane.data.end(), out.plane(static_cast<int>(i), 0));
    }
    return out;
  };

  for (int step = 1; step <= config.steps; ++step) {
    std::vector<size_t> batch(static_cast<size_t>(config.batch_size));
    for (size_t& b : batch) b = pick(rng);
    const Tensor4 target = stack([](const QeSample& s) -> const PlaneF& { return s.target; }, batch);
    const Tensor4 central = stack([](const QeSample& s) -> const PlaneF& { return s.central; }, batch);
    const Tensor4 picked = stack([](const QeSample& s) -> const PlaneF& { return s.picked; }, batch);
    const Tensor4 original = stack([](const QeSample& s) -> const PlaneF& { return s.original; }, batch);

    QeNet::Cache cache;
    const Tensor4 residual = result.model.forward(target, central, picked, true, &cache);
    Tensor4 enhanced(residual.n, residual.c, residual.h, residual.w);
    for (size_t i = 0; i < enhanced.size(); ++i) enhanced.v[i] = target.v[i] + residual.v[i];
    Tensor4 grad;
    const double loss = nn::mse_loss(enhanced, original, &grad);
    if (!std::isfinite(loss)) throw TrainingDiverged("non-finite enhancement loss");
    nn::zero_grads(result.model.params());
    result.model.backward(grad, cache);
    opt.step(result.model.params());

    QeTrainLogRow row;
    row.step = step;
    row.loss = loss;
    row.val_loss = std::numeric_limits<double>::quiet_NaN();
    if (!val.empty() && (step % config.val_every == 0 || step == config.steps)) {
      double vloss = 0.0;
      for (const QeSample& s : val) {
        const Tensor4 vt = Tensor4::from_plane(s.target);
        const Tensor4 vc = Tensor4::from_plane(s.central);
        const Tensor4 vp = Tensor4::from_plane(s.picked);
        const Tensor4 r = result.model.forward(vt, vc, vp, false);
        Tensor4 e(r.n, r.c, r.h, r.w);
        for (size_t i = 0; i < e.size(); ++i) e.v[i] = vt.v[i] + r.v[i];
        vloss += nn::mse_loss(e, Tensor4::from_plane(s.original));
      }
      row.val_loss = vloss / static_cast<double>(val.size());
    }
    if (step % config.log_every == 0 || step == 1 || step == config.steps) {
      result.log.push_back(row);
    }
  }
  return result;
}

LightField enhance_decoded_lf(const LightField& decoded, const PseudoVideoSequence& seq,
                              QeNet& model, const RvsPolicy& policy, int jobs) {
  if (decoded.grid_rows != seq.grid_rows || decoded.grid_cols != seq.grid_cols) {
    throw InvalidArgument("enhance_decoded_lf: grid mismatch");
  }
  const AngularPos central_pos = central_view(seq.grid_rows, seq.grid_cols);
  LightField out = decoded;

  // Candidate pool: the non-central reference views.
  std::vector<RvsCandidate> candidates;
  for (const SequenceEntry& e : seq.entries) {
    if (e.role == ViewRole::kReference && e.pos != central_pos) {
      candidates.push_back({e.pos, e.tl, &decoded.at(e.pos)});
    }
  }
  const PlaneF central_luma = to_unit(decoded.at(central_pos).y);

  std::vector<const SequenceEntry*> targets;
  for (const SequenceEntry& e : seq.entries) {
    if (e.role == ViewRole::kNonReference) targets.push_back(&e);
  }
  parallel_chunks(static_cast<int>(targets.size()), jobs, [&](int begin, int end, int) {
    for (int i = begin; i < end; ++i) {
      const SequenceEntry& e = *targets[static_cast<size_t>(i)];
      const AngularPos picked = select_reference(e.pos, candidates, policy);
      const PlaneF enhanced = enhance_view(to_unit(decoded.at(e.pos).y), central_luma,
                                           to_unit(decoded.at(picked).y), model);
      out.at(e.pos).y = to_plane8(enhanced);
    }
  });
  return out;
}

void save_enhancement_report(const LightField& original, const LightField& before,
                             const LightField& after, const PseudoVideoSequence& seq,
                             const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "poc,u,v,psnr_before,psnr_after\n";
  for (const SequenceEntry& e : seq.entries) {
    out << e.poc << "," << e.pos.u << "," << e.pos.v << ","
        << psnr(before.at(e.pos).y, original.at(e.pos).y) << ","
        << psnr(after.at(e.pos).y, original.at(e.pos).y) << "\n";
  }
}

void save_qenet_model(const QeNet& model, const std::filesystem::path& path) {
  std::vector<nn::LayerBlob> layers;
  auto add_stage = [&](const QeNet::Stage& st) {
    layers.push_back(nn::to_blob(st.conv));
    layers.push_back(nn::to_blob(st.bn));
    layers.push_back(nn::to_blob(st.act));
  };
  for (const auto& branch : model.branches) {
    for (const QeNet::Stage& st : branch) add_stage(st);
  }
  for (const QeNet::Stage& st : model.dense) add_stage(st);
  layers.push_back(nn::to_blob(model.head));
  nn::save_model_file({{"qenet", layers}}, path);
}

QeNet load_qenet_model(const std::filesystem::path& path) {
  const std::vector<nn::NetBlob> nets = nn::load_model_file(path);
  const nn::NetBlob& blob = nn::find_net(nets, "qenet");
  QeNet model;
  if (blob.layers.size() != 9 * 3 + 5 * 3 + 1) {
    throw FormatError("qenet model has unexpected layer count");
  }
  size_t li = 0;
  auto load_stage = [&](QeNet::Stage& st) {
    nn::from_blob(blob.layers[li++], st.conv);
    nn::from_blob(blob.layers[li++], st.bn);
    nn::from_blob(blob.layers[li++], st.act);
  };
  for (auto& branch : model.branches) {
    for (QeNet::Stage& st : branch) load_stage(st);
  }
  for (QeNet::Stage& st : model.dense) load_stage(st);
  nn::from_blob(blob.layers[li], model.head);
  return model;
}

void save_qe_training_log(const std::vector<QeTrainLogRow>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "step,loss,val_loss\n";
  for (const QeTrainLogRow& r : log) out << r.step << "," << r.loss << "," << r.val_loss << "\n";
}

}  // namespace lfc
