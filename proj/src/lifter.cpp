#include "distlift/lifter.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "distlift/errors.hpp"
#include "distlift/rng.hpp"

namespace distlift::lifter {

namespace {

// Value + directional derivative; running the whole gradient computation on
// these yields exact Hessian-vector products (forward-over-reverse).
struct Dual {
  double v = 0.0;
  double d = 0.0;

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit for numeric literals
  Dual(double value, double deriv) : v(value), d(deriv) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
};

inline Dual operator+(Dual a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(Dual a) { return {-a.v, -a.d}; }
inline Dual operator*(const Dual& a, const Dual& b) {
  return {a.v * b.v, a.d * b.v + a.v * b.d};
}
inline Dual operator*(const Dual& a, double b) { return {a.v * b, a.d * b}; }
inline Dual operator*(double a, const Dual& b) { return {a * b.v, a * b.d}; }
inline Dual operator/(const Dual& a, const Dual& b) {
  const double inv = 1.0 / b.v;
  return {a.v * inv, (a.d - a.v * inv * b.d) * inv};
}

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }

inline double sqrt_s(double x) { return std::sqrt(x); }
inline Dual sqrt_s(const Dual& x) {
  if (x.v <= 0.0) return {0.0, 0.0};  // subgradient 0 at the kink
  const double r = std::sqrt(x.v);
  return {r, x.d / (2.0 * r)};
}

// ---- network core ---------------------------------------------------------

struct StagePlan {
  int dilation = 1;
  int length = 0;  // output length of this stage
};

struct Plan {
  int T = 0, Cin = 0, C = 0, Out = 0;
  std::vector<StagePlan> blocks;  // residual blocks (after the expand stage)
  int expand_len = 0;
};

Plan make_plan(const LifterLayout& layout) {
  Plan p;
  const auto& cfg = layout.cfg;
  p.T = cfg.frames;
  p.Cin = 2 * cfg.joints;
  p.C = cfg.channels;
  p.Out = 3 * cfg.joints;
  p.expand_len = cfg.frames - 2;
  int len = p.expand_len;
  for (int r = 1; r <= layout.res_blocks; ++r) {
    const int dil = r == 1 ? 3 : 9;
    len -= 2 * dil;
    p.blocks.push_back({dil, len});
  }
  if (len != 1) throw InvalidInputError("lifter: receptive field mismatch");
  return p;
}

// Recorded per-stage activations; replaying (re-running forward) reproduces
// every value bit-exactly because the computation is a fixed serial program.
template <typename S>
struct DiffContext {
  std::vector<S> expand;                // [B][C][expand_len], post-relu
  std::vector<std::vector<S>> h, z, x;  // per block, [B][C][len]
  std::vector<S> pred;                  // [B][Out]
};

template <typename S>
void conv_relu(const S* w, const S* b, const S* in, int B, int Cin, int Lin,
               int C, int K, int dil, int Lout, S* out) {
  for (int bi = 0; bi < B; ++bi) {
    const S* src = in + static_cast<std::size_t>(bi) * Cin * Lin;
    S* dst = out + static_cast<std::size_t>(bi) * C * Lout;
    for (int co = 0; co < C; ++co) {
      for (int t = 0; t < Lout; ++t) {
        S acc = b[co];
        for (int ci = 0; ci < Cin; ++ci) {
          const S* wrow = w + (static_cast<std::size_t>(co) * Cin + ci) * K;
          const S* irow = src + static_cast<std::size_t>(ci) * Lin + t;
          for (int k = 0; k < K; ++k) acc += wrow[k] * irow[k * dil];
        }
        dst[static_cast<std::size_t>(co) * Lout + t] =
            value_of(acc) > 0.0 ? acc : S(0.0);
      }
    }
  }
}

// Convolution over a double-valued input with S-valued weights (the input
// windows are constants with respect to the parameters).
template <typename S>
void conv_relu_input(const S* w, const S* b, const double* in, int B, int Cin,
                     int Lin, int C, int K, int Lout, S* out) {
  for (int bi = 0; bi < B; ++bi) {
    const double* src = in + static_cast<std::size_t>(bi) * Cin * Lin;
    S* dst = out + static_cast<std::size_t>(bi) * C * Lout;
    for (int co = 0; co < C; ++co) {
      for (int t = 0; t < Lout; ++t) {
        S acc = b[co];
        for (int ci = 0; ci < Cin; ++ci) {
          const S* wrow = w + (static_cast<std::size_t>(co) * Cin + ci) * K;
          const double* irow = src + static_cast<std::size_t>(ci) * Lin + t;
          for (int k = 0; k < K; ++k) acc += wrow[k] * irow[k];
        }
        dst[static_cast<std::size_t>(co) * Lout + t] =
            value_of(acc) > 0.0 ? acc : S(0.0);
      }
    }
  }
}

template <typename S>
void net_forward(const LifterLayout& layout, const Plan& plan, const S* params,
                 const double* input, int B, DiffContext<S>& ctx) {
  const int C = plan.C;
  const auto seg = [&](const char* name) {
    return params + layout.segment(name).offset;
  };

  ctx.expand.assign(static_cast<std::size_t>(B) * C * plan.expand_len, S(0.0));
  conv_relu_input(seg("expand.w"), seg("expand.b"), input, B, plan.Cin, plan.T,
                  C, 3, plan.expand_len, ctx.expand.data());

  const int R = static_cast<int>(plan.blocks.size());
  ctx.h.assign(R, {});
  ctx.z.assign(R, {});
  ctx.x.assign(R, {});
  const S* prev = ctx.expand.data();
  int prev_len = plan.expand_len;
  for (int r = 0; r < R; ++r) {
    const auto& bp = plan.blocks[r];
    const std::string base = "block" + std::to_string(r + 1);
    const std::size_t n = static_cast<std::size_t>(B) * C * bp.length;
    ctx.h[r].assign(n, S(0.0));
    ctx.z[r].assign(n, S(0.0));
    ctx.x[r].assign(n, S(0.0));
    conv_relu(params + layout.segment(base + ".conv.w").offset,
              params + layout.segment(base + ".conv.b").offset, prev, B, C,
              prev_len, C, 3, bp.dilation, bp.length, ctx.h[r].data());
    conv_relu(params + layout.segment(base + ".pw.w").offset,
              params + layout.segment(base + ".pw.b").offset, ctx.h[r].data(),
              B, C, bp.length, C, 1, 1, bp.length, ctx.z[r].data());
    const int crop = bp.dilation;
    for (int bi = 0; bi < B; ++bi) {
      for (int c = 0; c < C; ++c) {
        const S* xin = prev + (static_cast<std::size_t>(bi) * C + c) * prev_len;
        const S* zrow =
            ctx.z[r].data() + (static_cast<std::size_t>(bi) * C + c) * bp.length;
        S* xrow =
            ctx.x[r].data() + (static_cast<std::size_t>(bi) * C + c) * bp.length;
        for (int t = 0; t < bp.length; ++t) xrow[t] = xin[t + crop] + zrow[t];
      }
    }
    prev = ctx.x[r].data();
    prev_len = bp.length;
  }

  // Linear head on the single remaining temporal position.
  const S* hw = seg("head.w");
  const S* hb = seg("head.b");
  ctx.pred.assign(static_cast<std::size_t>(B) * plan.Out, S(0.0));
  for (int bi = 0; bi < B; ++bi) {
    const S* feat = prev + static_cast<std::size_t>(bi) * C * prev_len;
    S* out = ctx.pred.data() + static_cast<std::size_t>(bi) * plan.Out;
    for (int o = 0; o < plan.Out; ++o) {
      S acc = hb[o];
      const S* wrow = hw + static_cast<std::size_t>(o) * C;
      for (int c = 0; c < C; ++c) acc += wrow[c] * feat[c * prev_len];
      out[o] = acc;
    }
  }
}

// Backward through one conv+relu stage.  `post` holds the stored post-relu
// activations (mask source), `dout` the gradient at the stage output;
// accumulates weight/bias gradients and, when din != nullptr, input grads.
template <typename S>
void conv_relu_backward(const S* w, const S* in, const S* post, const S* dout,
                        int B, int Cin, int Lin, int C, int K, int dil,
                        int Lout, S* gw, S* gb, S* din) {
  for (int bi = 0; bi < B; ++bi) {
    const S* src = in + static_cast<std::size_t>(bi) * Cin * Lin;
    const S* postb = post + static_cast<std::size_t>(bi) * C * Lout;
    const S* doutb = dout + static_cast<std::size_t>(bi) * C * Lout;
    S* dinb = din ? din + static_cast<std::size_t>(bi) * Cin * Lin : nullptr;
    for (int co = 0; co < C; ++co) {
      for (int t = 0; t < Lout; ++t) {
        const std::size_t oi = static_cast<std::size_t>(co) * Lout + t;
        if (!(value_of(postb[oi]) > 0.0)) continue;  // relu mask
        const S g = doutb[oi];
        gb[co] += g;
        for (int ci = 0; ci < Cin; ++ci) {
          S* gwrow = gw + (static_cast<std::size_t>(co) * Cin + ci) * K;
          const S* irow = src + static_cast<std::size_t>(ci) * Lin + t;
          const S* wrow = w + (static_cast<std::size_t>(co) * Cin + ci) * K;
          S* drow = dinb ? dinb + static_cast<std::size_t>(ci) * Lin + t : nullptr;
          for (int k = 0; k < K; ++k) {
            gwrow[k] += g * irow[k * dil];
            if (drow) drow[k * dil] += g * wrow[k];
          }
        }
      }
    }
  }
}

template <typename S>
void conv_relu_backward_input_d(const S* /*w*/, const double* in, const S* post,
                                const S* dout, int B, int Cin, int Lin, int C,
                                int K, int Lout, S* gw, S* gb) {
  for (int bi = 0; bi < B; ++bi) {
    const double* src = in + static_cast<std::size_t>(bi) * Cin * Lin;
    const S* postb = post + static_cast<std::size_t>(bi) * C * Lout;
    const S* doutb = dout + static_cast<std::size_t>(bi) * C * Lout;
    for (int co = 0; co < C; ++co) {
      for (int t = 0; t < Lout; ++t) {
        const std::size_t oi = static_cast<std::size_t>(co) * Lout + t;
        if (!(value_of(postb[oi]) > 0.0)) continue;
        const S g = doutb[oi];
        gb[co] += g;
        for (int ci = 0; ci < Cin; ++ci) {
          S* gwrow = gw + (static_cast<std::size_t>(co) * Cin + ci) * K;
          const double* irow = src + static_cast<std::size_t>(ci) * Lin + t;
          for (int k = 0; k < K; ++k) gwrow[k] += g * irow[k];
        }
      }
    }
  }
}

template <typename S>
void net_backward(const LifterLayout& layout, const Plan& plan, const S* params,
                  const double* input, int B, const DiffContext<S>& ctx,
                  const std::vector<S>& dpred, S* gparams) {
  const int C = plan.C;
  const int R = static_cast<int>(plan.blocks.size());
  const auto seg = [&](const std::string& name) {
    return layout.segment(name).offset;
  };

  const S* last = R > 0 ? ctx.x[R - 1].data() : ctx.expand.data();
  const int last_len = R > 0 ? plan.blocks[R - 1].length : plan.expand_len;

  // Head backward.
  std::vector<S> dlast(static_cast<std::size_t>(B) * C * last_len, S(0.0));
  {
    const S* hw = params + seg("head.w");
    S* gw = gparams + seg("head.w");
    S* gb = gparams + seg("head.b");
    for (int bi = 0; bi < B; ++bi) {
      const S* feat = last + static_cast<std::size_t>(bi) * C * last_len;
      const S* dp = dpred.data() + static_cast<std::size_t>(bi) * plan.Out;
      S* dl = dlast.data() + static_cast<std::size_t>(bi) * C * last_len;
      for (int o = 0; o < plan.Out; ++o) {
        const S g = dp[o];
        gb[o] += g;
        const S* wrow = hw + static_cast<std::size_t>(o) * C;
        S* gwrow = gw + static_cast<std::size_t>(o) * C;
        for (int c = 0; c < C; ++c) {
          gwrow[c] += g * feat[c * last_len];
          dl[c * last_len] += g * wrow[c];
        }
      }
    }
  }

  // Residual blocks, last to first.
  std::vector<S> dcur = std::move(dlast);
  int cur_len = last_len;
  for (int r = R - 1; r >= 0; --r) {
    const auto& bp = plan.blocks[r];
    const std::string base = "block" + std::to_string(r + 1);
    const S* prev = r > 0 ? ctx.x[r - 1].data() : ctx.expand.data();
    const int prev_len = r > 0 ? plan.blocks[r - 1].length : plan.expand_len;

    std::vector<S> dprev(static_cast<std::size_t>(B) * C * prev_len, S(0.0));
    // Residual path: out[t] = prev[t + crop] + z[t].
    const int crop = bp.dilation;
    for (int bi = 0; bi < B; ++bi) {
      for (int c = 0; c < C; ++c) {
        const S* drow = dcur.data() + (static_cast<std::size_t>(bi) * C + c) * cur_len;
        S* dp = dprev.data() + (static_cast<std::size_t>(bi) * C + c) * prev_len;
        for (int t = 0; t < cur_len; ++t) dp[t + crop] += drow[t];
      }
    }

    // Pointwise conv backward (z = relu(pw(h))); dcur doubles as dz.
    std::vector<S> dh(static_cast<std::size_t>(B) * C * bp.length, S(0.0));
    conv_relu_backward(params + seg(base + ".pw.w"), ctx.h[r].data(),
                       ctx.z[r].data(), dcur.data(), B, C, bp.length, C, 1, 1,
                       bp.length, gparams + seg(base + ".pw.w"),
                       gparams + seg(base + ".pw.b"), dh.data());

    // Dilated conv backward (h = relu(conv(prev))).
    conv_relu_backward(params + seg(base + ".conv.w"), prev, ctx.h[r].data(),
                       dh.data(), B, C, prev_len, C, 3, bp.dilation, bp.length,
                       gparams + seg(base + ".conv.w"),
                       gparams + seg(base + ".conv.b"), dprev.data());

    dcur = std::move(dprev);
    cur_len = prev_len;
  }

  // Expand stage; no gradient propagates to the raw input.
  conv_relu_backward_input_d(params + seg("expand.w"), input, ctx.expand.data(),
                             dcur.data(), B, plan.Cin, plan.T, C, 3,
                             plan.expand_len, gparams + seg("expand.w"),
                             gparams + seg("expand.b"));
}

// Mean per-joint Euclidean distance (mm) and its gradient at the raw head
// outputs (meters).
template <typename S>
S mpjpe_head(const std::vector<S>& preds, const std::vector<const skeleton::Pose3D*>& targets,
             int B, int J, std::vector<S>& dpred) {
  const double scale = 1.0 / (static_cast<double>(B) * J);
  dpred.assign(preds.size(), S(0.0));
  S loss(0.0);
  for (int bi = 0; bi < B; ++bi) {
    const S* p = preds.data() + static_cast<std::size_t>(bi) * 3 * J;
    S* dp = dpred.data() + static_cast<std::size_t>(bi) * 3 * J;
    const auto& tj = targets[bi]->joints;
    for (int j = 0; j < J; ++j) {
      const S dx = p[3 * j + 0] * kOutputScaleMm - tj[j].x;
      const S dy = p[3 * j + 1] * kOutputScaleMm - tj[j].y;
      const S dz = p[3 * j + 2] * kOutputScaleMm - tj[j].z;
      const S dist = sqrt_s(dx * dx + dy * dy + dz * dz);
      loss += dist * scale;
      if (value_of(dist) > 0.0) {
        const S inv = S(scale * kOutputScaleMm) / dist;
        dp[3 * j + 0] = dx * inv;
        dp[3 * j + 1] = dy * inv;
        dp[3 * j + 2] = dz * inv;
      }
    }
  }
  return loss;
}

std::vector<double> normalize_batch(const LifterLayout& layout,
                                    const std::vector<const datagen::Trajectory2D*>& windows,
                                    const camera::Intrinsics& K) {
  const int T = layout.cfg.frames;
  const int J = layout.cfg.joints;
  std::vector<double> input(windows.size() * 2 * J * T);
  for (std::size_t b = 0; b < windows.size(); ++b) {
    const auto& w = *windows[b];
    if (w.frames != T || w.joints != J)
      throw InvalidInputError("lifter: window shape does not match config");
    double* dst = input.data() + b * 2 * J * T;
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < J; ++j) {
        const auto n = camera::normalize(K, w.at(t, j));
        dst[(2 * j + 0) * T + t] = n.x;
        dst[(2 * j + 1) * T + t] = n.y;
      }
    }
  }
  return input;
}

// Full loss+gradient pass over a batch, templated so the same program runs
// on doubles (first order) and Duals (Hessian-vector products).
template <typename S>
S grad_impl(const LifterLayout& layout, const S* params,
            const std::vector<double>& input,
            const std::vector<const skeleton::Pose3D*>& targets, int B,
            std::vector<S>& gparams) {
  const Plan plan = make_plan(layout);
  DiffContext<S> ctx;
  net_forward(layout, plan, params, input.data(), B, ctx);
  std::vector<S> dpred;
  const S loss = mpjpe_head(ctx.pred, targets, B, layout.cfg.joints, dpred);
  gparams.assign(layout.total, S(0.0));
  net_backward(layout, plan, params, input.data(), B, ctx, dpred,
               gparams.data());
  return loss;
}

std::vector<const datagen::Trajectory2D*> window_ptrs(const Batch& batch) {
  std::vector<const datagen::Trajectory2D*> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(&s.window);
  return out;
}

std::vector<const skeleton::Pose3D*> target_ptrs(const Batch& batch) {
  std::vector<const skeleton::Pose3D*> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(&s.target);
  return out;
}

}  // namespace

// ---- layout / params -------------------------------------------------------

void LifterConfig::validate() const {
  if (frames != 3 && frames != 9 && frames != 27)
    throw InvalidInputError("lifter config: frames must be 3, 9 or 27");
  if (channels < 8) throw InvalidInputError("lifter config: channels < 8");
  if (joints < 2) throw InvalidInputError("lifter config: joints < 2");
}

LifterLayout LifterLayout::make(const LifterConfig& cfg) {
  cfg.validate();
  LifterLayout layout;
  layout.cfg = cfg;
  layout.res_blocks = cfg.frames == 3 ? 0 : cfg.frames == 9 ? 1 : 2;

  const int C = cfg.channels;
  const int Cin = 2 * cfg.joints;
  const int Out = 3 * cfg.joints;
  auto add = [&](const std::string& name, std::vector<int> shape) {
    SegmentInfo s;
    s.name = name;
    s.shape = std::move(shape);
    s.size = 1;
    for (int d : s.shape) s.size *= static_cast<std::size_t>(d);
    s.offset = layout.total;
    layout.total += s.size;
    layout.segments.push_back(std::move(s));
  };

  add("expand.w", {C, Cin, 3});
  add("expand.b", {C});
  for (int r = 1; r <= layout.res_blocks; ++r) {
    const std::string base = "block" + std::to_string(r);
    add(base + ".conv.w", {C, C, 3});
    add(base + ".conv.b", {C});
    add(base + ".pw.w", {C, C});
    add(base + ".pw.b", {C});
  }
  add("head.w", {Out, C});
  add("head.b", {Out});
  return layout;
}

const SegmentInfo& LifterLayout::segment(const std::string& name) const {
  for (const auto& s : segments)
    if (s.name == name) return s;
  throw InvalidInputError("lifter layout: no segment named " + name);
}

std::size_t param_count_formula(int frames, int channels, int joints) {
  const std::size_t C = channels;
  const std::size_t blocks = frames == 3 ? 0 : frames == 9 ? 1 : 2;
  const std::size_t expand = C * (2 * joints) * 3 + C;
  const std::size_t block = C * C * 3 + C + C * C + C;
  const std::size_t head = 3 * static_cast<std::size_t>(joints) * C + 3 * joints;
  return expand + blocks * block + head;
}

LifterParams init_params(const LifterConfig& cfg) {
  LifterParams p;
  p.layout = LifterLayout::make(cfg);
  p.values.assign(p.layout.total, 0.0);
  RngStream rng(mix_seed(cfg.seed, 0x6c696674657ULL));
  for (const auto& seg : p.layout.segments) {
    if (seg.name.ends_with(".b")) continue;  // biases stay zero
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < seg.shape.size(); ++d)
      fan_in *= static_cast<std::size_t>(seg.shape[d]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < seg.size; ++i)
      p.values[seg.offset + i] = rng.uniform(-bound, bound);
  }
  return p;
}

// ---- forward / losses ------------------------------------------------------

skeleton::Pose3D forward(const LifterParams& params,
                         const datagen::Trajectory2D& window,
                         const camera::Intrinsics& K) {
  const auto input = normalize_batch(params.layout, {&window}, K);
  const Plan plan = make_plan(params.layout);
  DiffContext<double> ctx;
  net_forward(params.layout, plan, params.values.data(), input.data(), 1, ctx);

  skeleton::Pose3D pose;
  pose.root_relative = true;
  const int J = params.layout.cfg.joints;
  pose.joints.resize(J);
  for (int j = 0; j < J; ++j)
    pose.joints[j] = {ctx.pred[3 * j + 0] * kOutputScaleMm,
                      ctx.pred[3 * j + 1] * kOutputScaleMm,
                      ctx.pred[3 * j + 2] * kOutputScaleMm};
  return pose;
}

std::vector<double> forward_normalized(const LifterParams& params,
                                       const std::vector<double>& norm_window) {
  const auto& cfg = params.layout.cfg;
  if (norm_window.size() !=
      static_cast<std::size_t>(2 * cfg.joints) * cfg.frames)
    throw InvalidInputError("forward_normalized: input size mismatch");
  const Plan plan = make_plan(params.layout);
  DiffContext<double> ctx;
  net_forward(params.layout, plan, params.values.data(), norm_window.data(), 1,
              ctx);
  for (auto& v : ctx.pred) v *= kOutputScaleMm;
  return ctx.pred;
}

double mpjpe_loss(const std::vector<skeleton::Pose3D>& pred,
                  const std::vector<skeleton::Pose3D>& target) {
  if (pred.size() != target.size() || pred.empty())
    throw InvalidInputError("mpjpe_loss: batch size mismatch or empty");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < pred.size(); ++b) {
    if (pred[b].joints.size() != target[b].joints.size())
      throw InvalidInputError("mpjpe_loss: joint count mismatch");
    for (std::size_t j = 0; j < pred[b].joints.size(); ++j) {
      sum += norm(pred[b].joints[j] - target[b].joints[j]);
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

GradResult grad(const LifterParams& params, const Batch& batch) {
  if (batch.empty()) throw InvalidInputError("grad: empty batch");
  const auto input =
      normalize_batch(params.layout, window_ptrs(batch), batch.front().intrinsics);
  std::vector<double> g;
  const double loss =
      grad_impl<double>(params.layout, params.values.data(), input,
                        target_ptrs(batch), static_cast<int>(batch.size()), g);
  if (!std::isfinite(loss)) throw NumericError("grad: non-finite loss");
  return {loss, std::move(g)};
}

GradResult grad_custom(const LifterParams& params,
                       const std::vector<datagen::Trajectory2D>& windows,
                       const camera::Intrinsics& K, const LossHead& head) {
  if (windows.empty()) throw InvalidInputError("grad_custom: no windows");
  std::vector<const datagen::Trajectory2D*> ptrs;
  ptrs.reserve(windows.size());
  for (const auto& w : windows) ptrs.push_back(&w);
  const auto input = normalize_batch(params.layout, ptrs, K);

  const Plan plan = make_plan(params.layout);
  const int B = static_cast<int>(windows.size());
  DiffContext<double> ctx;
  net_forward(params.layout, plan, params.values.data(), input.data(), B, ctx);

  std::vector<double> preds_mm(ctx.pred.size());
  for (std::size_t i = 0; i < ctx.pred.size(); ++i)
    preds_mm[i] = ctx.pred[i] * kOutputScaleMm;
  std::vector<double> dpred;
  const double loss = head(preds_mm, B, plan.Out, dpred);
  if (!std::isfinite(loss)) throw NumericError("grad_custom: non-finite loss");
  if (dpred.size() != ctx.pred.size())
    throw InvalidInputError("grad_custom: head returned wrong gradient shape");
  for (auto& g : dpred) g *= kOutputScaleMm;

  GradResult out;
  out.loss = loss;
  out.grad.assign(params.layout.total, 0.0);
  net_backward(params.layout, plan, params.values.data(), input.data(), B, ctx,
               dpred, out.grad.data());
  return out;
}

MetaGradResult meta_grad(const LifterParams& params, const Batch& support,
                         const Batch& query, double alpha) {
  const GradResult gs = grad(params, support);

  LifterParams adapted = params;
  for (std::size_t i = 0; i < adapted.values.size(); ++i)
    adapted.values[i] -= alpha * gs.grad[i];

  const GradResult gq = grad(adapted, query);

  MetaGradResult out;
  out.support_loss = gs.loss;
  out.query_loss = gq.loss;
  if (!params.layout.cfg.second_order) {
    out.grad = gq.grad;
    out.first_order = true;
    return out;
  }
  if (alpha == 0.0) {
    out.grad = gq.grad;
    return out;
  }

  // d/dtheta L_q(theta - alpha * g_s(theta))
  //   = g_q' - alpha * H_s(theta) * g_q'
  // with the Hessian-vector product taken exactly by replaying the support
  // gradient computation on dual numbers seeded with direction g_q'.
  const auto input = normalize_batch(params.layout, window_ptrs(support),
                                     support.front().intrinsics);
  std::vector<Dual> dual_params(params.values.size());
  for (std::size_t i = 0; i < params.values.size(); ++i)
    dual_params[i] = Dual(params.values[i], gq.grad[i]);
  std::vector<Dual> dual_grad;
  grad_impl<Dual>(params.layout, dual_params.data(), input,
                  target_ptrs(support), static_cast<int>(support.size()),
                  dual_grad);

  out.grad.resize(params.values.size());
  for (std::size_t i = 0; i < params.values.size(); ++i)
    out.grad[i] = gq.grad[i] - alpha * dual_grad[i].d;
  return out;
}

// ---- checkpoint I/O --------------------------------------------------------

namespace {

constexpr const char* kCkptMagic = "distlift-checkpoint";
constexpr const char* kCkptVersion = "v1";

void write_values(std::ostream& out, const std::vector<double>& values,
                  std::size_t offset, std::size_t count) {
  char buf[32];
  for (std::size_t i = 0; i < count; ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[offset + i]);
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(bits));
    out << buf << ((i + 1) % 8 == 0 || i + 1 == count ? '\n' : ' ');
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const LifterParams& params,
                     const std::map<std::string, std::vector<double>>& extra,
                     const std::map<std::string, std::string>& meta) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  const auto& cfg = params.layout.cfg;
  out << kCkptMagic << ' ' << kCkptVersion << "\n";
  out << "frames " << cfg.frames << "\n";
  out << "channels " << cfg.channels << "\n";
  out << "joints " << cfg.joints << "\n";
  out << "seed " << cfg.seed << "\n";
  out << "second_order " << (cfg.second_order ? 1 : 0) << "\n";
  out << "segments " << params.layout.segments.size() + extra.size() << "\n";
  for (const auto& seg : params.layout.segments) {
    out << "segment " << seg.name << ' ' << seg.shape.size();
    for (int d : seg.shape) out << ' ' << d;
    out << "\n";
    write_values(out, params.values, seg.offset, seg.size);
  }
  for (const auto& [name, values] : extra) {
    out << "segment " << name << " 1 " << values.size() << "\n";
    write_values(out, values, 0, values.size());
  }
  for (const auto& [key, value] : meta) out << "meta " << key << ' ' << value << "\n";
  out << "end\n";
  if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);

  auto fail = [&](const std::string& msg) -> void {
    throw ParseError(path + ": " + msg);
  };

  std::string magic, version;
  if (!(in >> magic >> version) || magic != kCkptMagic)
    fail("not a checkpoint file");
  if (version != kCkptVersion)
    fail("unsupported version '" + version + "' (supported: " + kCkptVersion + ")");

  LifterConfig cfg;
  std::string key;
  long segment_count = -1;
  while (in >> key) {
    if (key == "frames") in >> cfg.frames;
    else if (key == "channels") in >> cfg.channels;
    else if (key == "joints") in >> cfg.joints;
    else if (key == "seed") in >> cfg.seed;
    else if (key == "second_order") {
      int v = 0;
      in >> v;
      cfg.second_order = v != 0;
    } else if (key == "segments") {
      in >> segment_count;
      break;
    } else {
      fail("unexpected header key '" + key + "'");
    }
    if (!in) fail("malformed header value after '" + key + "'");
  }
  if (segment_count < 0) fail("missing segment count");

  Checkpoint ckpt;
  ckpt.params.layout = LifterLayout::make(cfg);
  ckpt.params.values.assign(ckpt.params.layout.total, 0.0);
  std::vector<bool> seen(ckpt.params.layout.segments.size(), false);

  for (long s = 0; s < segment_count; ++s) {
    std::string tag, name;
    std::size_t ndims = 0;
    if (!(in >> tag >> name >> ndims) || tag != "segment")
      fail("expected segment header");
    std::vector<int> shape(ndims);
    std::size_t count = 1;
    for (auto& d : shape) {
      if (!(in >> d) || d < 0) fail("bad segment shape in " + name);
      count *= static_cast<std::size_t>(d);
    }
    std::vector<double> values(count);
    for (auto& v : values) {
      std::string hex;
      if (!(in >> hex)) fail("truncated values in segment " + name);
      std::uint64_t bits = 0;
      try {
        std::size_t pos = 0;
        bits = std::stoull(hex, &pos, 16);
        if (pos != hex.size()) throw std::invalid_argument(hex);
      } catch (const std::exception&) {
        fail("bad hex value '" + hex + "' in segment " + name);
      }
      v = std::bit_cast<double>(bits);
    }

    bool matched = false;
    for (std::size_t i = 0; i < ckpt.params.layout.segments.size(); ++i) {
      const auto& seg = ckpt.params.layout.segments[i];
      if (seg.name != name) continue;
      if (seg.shape != shape) fail("segment shape mismatch for " + name);
      std::copy(values.begin(), values.end(),
                ckpt.params.values.begin() + seg.offset);
      seen[i] = true;
      matched = true;
      break;
    }
    if (!matched) ckpt.extra[name] = std::move(values);
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i])
      fail("missing segment " + ckpt.params.layout.segments[i].name);

  std::string tag;
  while (in >> tag) {
    if (tag == "end") return ckpt;
    if (tag != "meta") fail("expected 'meta' or 'end', got '" + tag + "'");
    std::string k;
    in >> k;
    std::string rest;
    std::getline(in, rest);
    if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
    ckpt.meta[k] = rest;
  }
  fail("missing end marker");
  return ckpt;  // unreachable
}

}  // namespace distlift::lifter
