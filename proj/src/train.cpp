#include "featpinn/train.hpp"

#include <chrono>
#include <cmath>
#include <mutex>

#include "featpinn/autodiff.hpp"

namespace featpinn {

namespace {

// Reused reverse-mode tapes; training builds one graph per point and the
// buffers are large enough to be worth keeping.
class TapePool {
 public:
  std::unique_ptr<Tape> acquire() {
    std::lock_guard<std::mutex> lock(mu_);
    if (!free_.empty()) {
      auto t = std::move(free_.back());
      free_.pop_back();
      return t;
    }
    return std::make_unique<Tape>(1 << 18);
  }
  void release(std::unique_ptr<Tape> t) {
    std::lock_guard<std::mutex> lock(mu_);
    free_.push_back(std::move(t));
  }

 private:
  std::mutex mu_;
  std::vector<std::unique_ptr<Tape>> free_;
};

TapePool& tape_pool() {
  static TapePool pool;
  return pool;
}

// Scalar-generic evaluation context: lifts constants onto the tape for the
// gradient path and is a no-op for plain doubles.
template <class S>
struct EvalCtx;

template <>
struct EvalCtx<double> {
  const PinnModel& model;
  std::span<const double> theta;
  double lift(double v) const { return v; }
};

template <>
struct EvalCtx<Var> {
  const PinnModel& model;
  std::span<const Var> theta;
  Tape* tape;
  Var lift(double v) const { return tape->constant(v); }
};

template <class S>
S squared_residual_term(const PdeProblem& pb, const EvalCtx<S>& ctx,
                        std::span<const double> pt) {
  std::vector<S> pt_s;
  pt_s.reserve(pt.size());
  for (double c : pt) pt_s.push_back(ctx.lift(c));
  std::vector<S> coeff_store;
  std::span<const S> coeffs;
  if (ctx.model.n_coeffs > 0) {
    coeffs = ctx.model.coeff_slice(ctx.theta);
  } else {
    for (double c : pb.true_coeffs()) coeff_store.push_back(ctx.lift(c));
    coeffs = coeff_store;
  }
  auto closure = [&](std::span<const JetV<S>> xj) {
    return ctx.model.template forward<JetV<S>, S>(xj, ctx.theta);
  };
  std::vector<S> res =
      residual_with_probe<S>(pb, closure, pt, pt_s, coeffs, ctx.lift(0.0));
  S acc = res[0] * res[0];
  for (std::size_t k = 1; k < res.size(); ++k) acc = acc + res[k] * res[k];
  return acc;
}

template <class S>
S squared_condition_term(const PdeProblem& pb, const EvalCtx<S>& ctx, const ConditionPoint& cp) {
  bool needs_dt = false;
  for (const auto& t : cp.terms) needs_dt |= t.kind == CondKind::TimeDerivative;
  if (needs_dt) {
    const int dims = pb.dims();
    const int t_axis = dims - 1;
    std::vector<JetV<S>> xj(static_cast<std::size_t>(dims));
    const S zero = ctx.lift(0.0);
    for (int d = 0; d < dims; ++d)
      xj[static_cast<std::size_t>(d)] =
          jet_input(ctx.lift(cp.x[static_cast<std::size_t>(d)]), d == t_axis ? 0 : -1, 1, 0, zero);
    const std::vector<JetV<S>> out =
        ctx.model.template forward<JetV<S>, S>(std::span<const JetV<S>>(xj), ctx.theta);
    bool first = true;
    S acc = zero;
    for (const auto& term : cp.terms) {
      const auto& o = out[static_cast<std::size_t>(term.component)];
      S mis = (term.kind == CondKind::Value ? o.v : o.d1[0]) - term.target;
      S sq = mis * mis;
      acc = first ? sq : acc + sq;
      first = false;
    }
    return acc;
  }
  std::vector<S> xs;
  xs.reserve(cp.x.size());
  for (double c : cp.x) xs.push_back(ctx.lift(c));
  const std::vector<S> out =
      ctx.model.template forward<S, S>(std::span<const S>(xs), ctx.theta);
  bool first = true;
  S acc = ctx.lift(0.0);
  for (const auto& term : cp.terms) {
    S mis = out[static_cast<std::size_t>(term.component)] - term.target;
    S sq = mis * mis;
    acc = first ? sq : acc + sq;
    first = false;
  }
  return acc;
}

template <class S>
S squared_data_term(const EvalCtx<S>& ctx, std::span<const double> pt,
                    std::span<const double> target) {
  std::vector<S> xs;
  xs.reserve(pt.size());
  for (double c : pt) xs.push_back(ctx.lift(c));
  const std::vector<S> out =
      ctx.model.template forward<S, S>(std::span<const S>(xs), ctx.theta);
  S acc = ctx.lift(0.0);
  for (std::size_t k = 0; k < target.size(); ++k) {
    S mis = out[k] - target[k];
    acc = k == 0 ? mis * mis : acc + mis * mis;
  }
  return acc;
}

enum class Group { Collocation, Ic, Bc, Data };

struct BatchIndex {
  std::vector<std::pair<Group, std::size_t>> items;
};

BatchIndex index_batch(const SampleBatch& batch, const DataSet* data) {
  BatchIndex bi;
  for (std::size_t i = 0; i < batch.collocation.rows; ++i) bi.items.push_back({Group::Collocation, i});
  for (std::size_t i = 0; i < batch.ic.size(); ++i) bi.items.push_back({Group::Ic, i});
  for (std::size_t i = 0; i < batch.bc.size(); ++i) bi.items.push_back({Group::Bc, i});
  if (data)
    for (std::size_t i = 0; i < data->points.rows; ++i) bi.items.push_back({Group::Data, i});
  return bi;
}

void check_batches(const SampleBatch& batch, const Weights& w, const DataSet* data) {
  if (w.r > 0.0 && batch.collocation.rows == 0)
    throw SpecError("loss: residual weight is positive but no collocation points");
  if (w.ic > 0.0 && batch.ic.empty())
    throw SpecError("loss: IC weight is positive but no IC points");
  if (w.bc > 0.0 && batch.bc.empty())
    throw SpecError("loss: BC weight is positive but no BC points");
  if (w.data > 0.0 && (!data || data->points.rows == 0))
    throw SpecError("loss: data weight is positive but no data points");
}

LossParts assemble_parts(const Weights& w, double sum_r, std::size_t nr, double sum_ic,
                         std::size_t nic, double sum_bc, std::size_t nbc, double sum_d,
                         std::size_t nd) {
  LossParts p;
  p.r = nr ? sum_r / static_cast<double>(nr) : 0.0;
  p.ic = nic ? sum_ic / static_cast<double>(nic) : 0.0;
  p.bc = nbc ? sum_bc / static_cast<double>(nbc) : 0.0;
  p.data = nd ? sum_d / static_cast<double>(nd) : 0.0;
  p.total = w.r * p.r + w.ic * p.ic + w.bc * p.bc + w.data * p.data;
  return p;
}

LossParts loss_impl(const PinnModel& model, std::span<const double> theta,
                    const PdeProblem& pb, const SampleBatch& batch, const Weights& w,
                    const DataSet* data) {
  check_batches(batch, w, data);
  EvalCtx<double> ctx{model, theta};
  double sr = 0.0, si = 0.0, sb = 0.0, sd = 0.0;
  std::vector<double> pt(static_cast<std::size_t>(pb.dims()));
  for (std::size_t i = 0; i < batch.collocation.rows; ++i) {
    for (std::size_t c = 0; c < pt.size(); ++c) pt[c] = batch.collocation(i, c);
    sr += squared_residual_term<double>(pb, ctx, pt);
  }
  for (const auto& cp : batch.ic) si += squared_condition_term<double>(pb, ctx, cp);
  for (const auto& cp : batch.bc) sb += squared_condition_term<double>(pb, ctx, cp);
  if (data) {
    std::vector<double> tgt(data->targets.cols);
    for (std::size_t i = 0; i < data->points.rows; ++i) {
      for (std::size_t c = 0; c < pt.size(); ++c) pt[c] = data->points(i, c);
      for (std::size_t c = 0; c < tgt.size(); ++c) tgt[c] = data->targets(i, c);
      sd += squared_data_term<double>(ctx, pt, tgt);
    }
  }
  return assemble_parts(w, sr, batch.collocation.rows, si, batch.ic.size(), sb, batch.bc.size(),
                        sd, data ? data->points.rows : 0);
}

LossParts loss_and_grad_impl(const PinnModel& model, std::span<const double> theta,
                             const PdeProblem& pb, const SampleBatch& batch, const Weights& w,
                             const DataSet* data, std::vector<double>& grad) {
  check_batches(batch, w, data);
  const std::size_t n_params = theta.size();
  const BatchIndex bi = index_batch(batch, data);
  const std::size_t n_items = bi.items.size();
  grad.assign(n_params, 0.0);
  if (n_items == 0) return LossParts{};

  const double inv_nr = batch.collocation.rows ? 1.0 / static_cast<double>(batch.collocation.rows) : 0.0;
  const double inv_ni = batch.ic.empty() ? 0.0 : 1.0 / static_cast<double>(batch.ic.size());
  const double inv_nb = batch.bc.empty() ? 0.0 : 1.0 / static_cast<double>(batch.bc.size());
  const double inv_nd = data && data->points.rows ? 1.0 / static_cast<double>(data->points.rows) : 0.0;

  const std::size_t chunk =
      std::max<std::size_t>(1, (n_items + static_cast<std::size_t>(worker_count()) * 4 - 1) /
                                   (static_cast<std::size_t>(worker_count()) * 4));
  const std::size_t n_chunks = (n_items + chunk - 1) / chunk;
  std::vector<std::vector<double>> partial_grad(n_chunks);
  std::vector<std::array<double, 4>> partial_sum(n_chunks, {0.0, 0.0, 0.0, 0.0});

  parallel_chunks(n_items, chunk, [&](std::size_t ci, std::size_t b, std::size_t e) {
    auto tape = tape_pool().acquire();
    tape->clear_keep(0);
    std::vector<Var> theta_vars;
    theta_vars.reserve(n_params);
    for (double v : theta) theta_vars.push_back(tape->input(v));
    EvalCtx<Var> ctx{model, theta_vars, tape.get()};
    auto& pg = partial_grad[ci];
    pg.assign(n_params, 0.0);
    std::vector<double> pt(static_cast<std::size_t>(pb.dims()));
    std::vector<double> tgt;
    for (std::size_t it = b; it < e; ++it) {
      tape->clear_keep(n_params);
      const auto [group, idx] = bi.items[it];
      Var term{nullptr, -1};
      double scale = 0.0;
      switch (group) {
        case Group::Collocation: {
          for (std::size_t c = 0; c < pt.size(); ++c) pt[c] = batch.collocation(idx, c);
          term = squared_residual_term<Var>(pb, ctx, pt);
          partial_sum[ci][0] += value_of(term);
          scale = w.r * inv_nr;
          break;
        }
        case Group::Ic:
          term = squared_condition_term<Var>(pb, ctx, batch.ic[idx]);
          partial_sum[ci][1] += value_of(term);
          scale = w.ic * inv_ni;
          break;
        case Group::Bc:
          term = squared_condition_term<Var>(pb, ctx, batch.bc[idx]);
          partial_sum[ci][2] += value_of(term);
          scale = w.bc * inv_nb;
          break;
        case Group::Data: {
          for (std::size_t c = 0; c < pt.size(); ++c) pt[c] = data->points(idx, c);
          tgt.assign(data->targets.cols, 0.0);
          for (std::size_t c = 0; c < tgt.size(); ++c) tgt[c] = data->targets(idx, c);
          term = squared_data_term<Var>(ctx, pt, tgt);
          partial_sum[ci][3] += value_of(term);
          scale = w.data * inv_nd;
          break;
        }
      }
      if (scale != 0.0) {
        ctx.tape->backward(term);
        for (std::size_t p = 0; p < n_params; ++p)
          pg[p] += scale * ctx.tape->adjoint(theta_vars[p]);
      }
    }
    tape_pool().release(std::move(tape));
  });

  double sr = 0.0, si = 0.0, sb = 0.0, sd = 0.0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    sr += partial_sum[c][0];
    si += partial_sum[c][1];
    sb += partial_sum[c][2];
    sd += partial_sum[c][3];
    for (std::size_t p = 0; p < n_params; ++p) grad[p] += partial_grad[c][p];
  }
  return assemble_parts(w, sr, batch.collocation.rows, si, batch.ic.size(), sb, batch.bc.size(),
                        sd, data ? data->points.rows : 0);
}

const char* block_name(const PinnModel& model, std::size_t index) {
  if (index < model.n_net()) return "mlp";
  if (index < model.n_net() + model.n_fm()) return "feature_map";
  return "coefficients";
}

}  // namespace

LossParts loss(const TrainState& state, const PdeProblem& problem, const SampleBatch& batch,
               const Weights& weights, const DataSet* data) {
  return loss_impl(state.model, state.theta, problem, batch, weights, data);
}

LossParts loss_and_grad(const TrainState& state, const PdeProblem& problem,
                        const SampleBatch& batch, const Weights& weights, const DataSet* data,
                        std::vector<double>& grad) {
  return loss_and_grad_impl(state.model, state.theta, problem, batch, weights, data, grad);
}

void adam_update(std::span<double> theta, std::span<double> m, std::span<double> v, long t,
                 std::span<const double> grad, double lr, double beta1, double beta2,
                 double eps) {
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double mh = m[i] / bc1;
    const double vh = v[i] / bc2;
    theta[i] -= lr * mh / (std::sqrt(vh) + eps);
  }
}

void adam_step(TrainState& state, std::span<const double> grad, double lr, double beta1,
               double beta2, double eps) {
  if (grad.size() != state.theta.size()) throw SpecError("adam_step: gradient size mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i]))
      throw NumericError(std::string("adam_step: non-finite gradient in parameter block '") +
                         block_name(state.model, i) + "'");
  state.adam_t += 1;
  state.step += 1;
  adam_update(state.theta, state.adam_m, state.adam_v, state.adam_t, grad, lr, beta1, beta2,
              eps);
}

LbfgsOutcome lbfgs_step(std::vector<double>& theta, LbfgsWorkspace& ws,
                        const std::function<double(std::span<const double>, std::vector<double>&)>&
                            value_and_grad,
                        int memory) {
  const std::size_t n = theta.size();
  if (!ws.primed) {
    ws.last_grad.assign(n, 0.0);
    ws.last_loss = value_and_grad(theta, ws.last_grad);
    ws.primed = true;
  }
  const std::vector<double>& g = ws.last_grad;
  double gnorm2 = 0.0;
  for (double v : g) gnorm2 += v * v;
  LbfgsOutcome out;
  out.loss = ws.last_loss;
  out.grad_norm = std::sqrt(gnorm2);
  if (gnorm2 == 0.0) return out;  // stationary point: no movement

  // Two-loop recursion.
  std::vector<double> d(g.begin(), g.end());
  std::vector<double> alpha(ws.pairs.size(), 0.0);
  for (std::size_t k = ws.pairs.size(); k-- > 0;) {
    const auto& [s, y] = ws.pairs[k];
    double sy = 0.0, sd = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sy += s[i] * y[i];
      sd += s[i] * d[i];
    }
    alpha[k] = sd / sy;
    for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[k] * y[i];
  }
  if (!ws.pairs.empty()) {
    const auto& [s, y] = ws.pairs.back();
    double sy = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sy += s[i] * y[i];
      yy += y[i] * y[i];
    }
    const double gamma = sy / yy;
    for (double& v : d) v *= gamma;
  }
  for (std::size_t k = 0; k < ws.pairs.size(); ++k) {
    const auto& [s, y] = ws.pairs[k];
    double sy = 0.0, yd = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sy += s[i] * y[i];
      yd += y[i] * d[i];
    }
    const double beta = yd / sy;
    for (std::size_t i = 0; i < n; ++i) d[i] += (alpha[k] - beta) * s[i];
  }
  for (double& v : d) v = -v;

  double gd = 0.0;
  for (std::size_t i = 0; i < n; ++i) gd += g[i] * d[i];
  if (!(gd < 0.0)) {  // not a descent direction: fall back to steepest descent
    for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
    gd = -gnorm2;
  }

  constexpr double c1 = 1e-4;
  double step = 1.0;
  std::vector<double> trial(n);
  std::vector<double> trial_grad;
  for (int halving = 0; halving < 40; ++halving) {
    for (std::size_t i = 0; i < n; ++i) trial[i] = theta[i] + step * d[i];
    trial_grad.assign(n, 0.0);
    const double f_trial = value_and_grad(trial, trial_grad);
    if (std::isfinite(f_trial) && f_trial <= ws.last_loss + c1 * step * gd) {
      std::vector<double> s(n), y(n);
      double sy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = trial[i] - theta[i];
        y[i] = trial_grad[i] - g[i];
        sy += s[i] * y[i];
      }
      theta = trial;
      ws.last_grad = trial_grad;
      ws.last_loss = f_trial;
      if (sy > 1e-10) {  // skip pairs that would break positive curvature
        ws.pairs.emplace_back(std::move(s), std::move(y));
        while (static_cast<int>(ws.pairs.size()) > memory) ws.pairs.pop_front();
      }
      out.loss = f_trial;
      double gn = 0.0;
      for (double v : ws.last_grad) gn += v * v;
      out.grad_norm = std::sqrt(gn);
      return out;
    }
    step *= 0.5;
  }
  out.stalled = true;  // line search exhausted: parameters unchanged
  return out;
}

LossParts loss_of_field(const FieldClosure& u, const PdeProblem& problem,
                        const SampleBatch& batch, const Weights& weights, const DataSet* data) {
  check_batches(batch, weights, data);
  const int dims = problem.dims();
  double sr = 0.0, si = 0.0, sb = 0.0, sd = 0.0;
  std::vector<double> pt(static_cast<std::size_t>(dims));
  for (std::size_t i = 0; i < batch.collocation.rows; ++i) {
    for (std::size_t c = 0; c < pt.size(); ++c) pt[c] = batch.collocation(i, c);
    const std::vector<double> res =
        residual_with_probe<double>(problem, u, pt, pt, problem.true_coeffs(), 0.0);
    for (double r : res) sr += r * r;
  }
  auto field_at = [&](const ConditionPoint& cp) {
    // One first-order jet in time covers both value and time-derivative terms.
    const int t_axis = dims - 1;
    std::vector<JetV<double>> xj(static_cast<std::size_t>(dims));
    for (int d = 0; d < dims; ++d)
      xj[static_cast<std::size_t>(d)] =
          jet_input(cp.x[static_cast<std::size_t>(d)], d == t_axis ? 0 : -1, 1, 0, 0.0);
    return u(std::span<const JetV<double>>(xj));
  };
  auto condition_sum = [&](const std::vector<ConditionPoint>& pts, double& acc) {
    for (const auto& cp : pts) {
      const std::vector<JetV<double>> out = field_at(cp);
      for (const auto& term : cp.terms) {
        const auto& o = out[static_cast<std::size_t>(term.component)];
        const double mis = (term.kind == CondKind::Value ? o.v : o.d1[0]) - term.target;
        acc += mis * mis;
      }
    }
  };
  condition_sum(batch.ic, si);
  condition_sum(batch.bc, sb);
  if (data) {
    for (std::size_t i = 0; i < data->points.rows; ++i) {
      std::vector<JetV<double>> xj(static_cast<std::size_t>(dims));
      for (int d = 0; d < dims; ++d)
        xj[static_cast<std::size_t>(d)] =
            jet_input(data->points(i, static_cast<std::size_t>(d)), -1, 0, 0, 0.0);
      const std::vector<JetV<double>> out = u(std::span<const JetV<double>>(xj));
      for (std::size_t c = 0; c < data->targets.cols; ++c) {
        const double mis = out[c].v - data->targets(i, c);
        sd += mis * mis;
      }
    }
  }
  return assemble_parts(weights, sr, batch.collocation.rows, si, batch.ic.size(), sb,
                        batch.bc.size(), sd, data ? data->points.rows : 0);
}

double l2re(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw SpecError("l2re: length mismatch");
  if (pred.empty()) throw SpecError("l2re: empty vectors");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    num += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    den += truth[i] * truth[i];
  }
  if (den == 0.0) throw NumericError("l2re: ground truth has zero norm (metric undefined)");
  return std::sqrt(num / den);
}

void TrainConfig::validate() const {
  if (widths.size() < 3) throw ConfigError("training: widths needs [input, hidden..., output]");
  if (n_r < 0 || n_ic < 0 || n_bc < 0) throw ConfigError("training: sample counts must be >= 0");
  if (lambda_r < 0 || lambda_ic < 0 || lambda_bc < 0)
    throw ConfigError("training: loss weights must be >= 0");
  if (!(adam_lr > 0.0)) throw ConfigError("training: learning rate must be > 0");
  if (adam_steps < 0 || lbfgs_steps < 0) throw ConfigError("training: step counts must be >= 0");
  if (lbfgs_memory < 1) throw ConfigError("training: lbfgs memory must be >= 1");
  if (record_every < 1) throw ConfigError("training: record_every must be >= 1");
  if (inverse.enabled && inverse.data_points < 1)
    throw ConfigError("training: inverse data_points must be >= 1");
}

DataSet make_inverse_data(const PdeProblem& problem, const InverseConfig& inv,
                          std::uint64_t seed) {
  DataSet ds;
  const int n = inv.data_points;
  if (problem.name() == "inverse_lorenz") {
    const std::array<double, 3> x0 = {0.0, 1.0, 1.05};
    const double t0 = problem.domain().lo[0];
    const double t1 = problem.domain().hi[0];
    const int substeps = 50;
    const int total = (n - 1) * substeps;
    const double dt = (t1 - t0) / std::max(1, total);
    const std::array<double, 3> coeffs = {problem.true_coeffs()[0], problem.true_coeffs()[1],
                                          problem.true_coeffs()[2]};
    const Matrix traj = integrate_lorenz(std::span<const double, 3>(coeffs),
                                         std::span<const double, 3>(x0), dt, total);
    ds.points = Matrix(static_cast<std::size_t>(n), 1);
    ds.targets = Matrix(static_cast<std::size_t>(n), 3);
    for (int i = 0; i < n; ++i) {
      ds.points(static_cast<std::size_t>(i), 0) = t0 + dt * substeps * i;
      for (int c = 0; c < 3; ++c)
        ds.targets(static_cast<std::size_t>(i), static_cast<std::size_t>(c)) =
            traj(static_cast<std::size_t>(i * substeps), static_cast<std::size_t>(c));
    }
  } else if (problem.name() == "inverse_burgers") {
    std::mt19937_64 rng = make_rng(seed, "inverse_points");
    Matrix pts;
    problem.sample_interior(n, rng, pts);
    ds.points = pts;
    ds.targets = Matrix(static_cast<std::size_t>(n), 1);
    const double nu = problem.true_coeffs()[1];
    for (int i = 0; i < n; ++i)
      ds.targets(static_cast<std::size_t>(i), 0) = burgers_reference(
          ds.points(static_cast<std::size_t>(i), 0), ds.points(static_cast<std::size_t>(i), 1), nu);
  } else {
    throw SpecError("inverse mode is defined for inverse_burgers and inverse_lorenz");
  }
  if (inv.noise_fraction > 0.0) {
    std::mt19937_64 rng = make_rng(seed, "inverse_noise");
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t c = 0; c < ds.targets.cols; ++c) {
      std::vector<double> col(ds.targets.rows);
      for (std::size_t i = 0; i < ds.targets.rows; ++i) col[i] = ds.targets(i, c);
      const double sd = std::sqrt(sample_variance(col));
      for (std::size_t i = 0; i < ds.targets.rows; ++i)
        ds.targets(i, c) += inv.noise_fraction * sd * g(rng);
    }
  }
  return ds;
}

TrainResult train(const TrainConfig& config) {
  config.validate();
  const auto t_start = std::chrono::steady_clock::now();

  auto problem = make_problem(config.problem, config.problem_options);
  if (!config.reference_path.empty())
    problem->set_reference(
        load_reference_grid(config.reference_path, problem->dims(), problem->n_outputs()));

  if (config.widths.front() != problem->dims())
    throw ConfigError("training: widths[0] must equal the problem dimension " +
                      std::to_string(problem->dims()));
  if (config.widths.back() != problem->n_outputs())
    throw ConfigError("training: widths must end with the problem output count " +
                      std::to_string(problem->n_outputs()));

  FeatureMapSpec fm_spec = config.feature_map;
  fm_spec.seed = hash_tag(config.seed, "fm_realize", fm_spec.seed);
  FeatureMap map(fm_spec, problem->domain());

  MlpShape shape;
  shape.widths = config.widths;
  shape.widths.front() = map.output_dim();
  const int n_coeffs = config.inverse.enabled ? problem->n_coeffs() : 0;
  if (config.inverse.enabled && n_coeffs == 0)
    throw ConfigError("training: inverse mode on a problem without coefficient slots");

  PinnModel model(std::move(map), shape, n_coeffs);
  TrainState state(std::move(model), {});
  state.theta = state.model.init_theta(hash_tag(config.seed, "init"));
  state.adam_m.assign(state.theta.size(), 0.0);
  state.adam_v.assign(state.theta.size(), 0.0);

  Weights weights{config.lambda_r, config.lambda_ic, config.lambda_bc,
                  config.inverse.enabled ? config.inverse.lambda_data : 0.0};

  std::optional<DataSet> data;
  if (config.inverse.enabled)
    data = make_inverse_data(*problem, config.inverse, hash_tag(config.seed, "data"));

  TrainReport report;
  std::vector<double> grad;
  SampleBatch batch;
  long batch_round = -1;

  auto resample = [&](long round) {
    batch = sample_domain(*problem, config.n_r, config.n_ic, config.n_bc,
                          hash_tag(config.seed, "batch", static_cast<std::uint64_t>(round)));
  };

  // Adam phase with periodic resampling.
  for (long i = 0; i < config.adam_steps; ++i) {
    const long round = config.resample_every > 0 ? i / config.resample_every : 0;
    if (round != batch_round) {
      batch_round = round;
      resample(round);
    }
    const LossParts parts = loss_and_grad(state, *problem, batch, weights,
                                          data ? &*data : nullptr, grad);
    if (i % config.record_every == 0) report.curves.push_back({i, parts});
    adam_step(state, grad, config.adam_lr);
    if (!config.checkpoint_path.empty() && config.checkpoint_every > 0 &&
        (i + 1) % config.checkpoint_every == 0)
      save_checkpoint(config.checkpoint_path, state.model, state.theta, i + 1);
  }

  // L-BFGS phase on a frozen batch.
  if (batch_round < 0 && (config.lbfgs_steps > 0 || config.adam_steps == 0)) resample(0);
  LbfgsWorkspace ws;
  LossParts lbfgs_parts;
  auto closure = [&](std::span<const double> th, std::vector<double>& g) {
    lbfgs_parts = loss_and_grad_impl(state.model, th, *problem, batch, weights,
                                     data ? &*data : nullptr, g);
    return lbfgs_parts.total;
  };
  for (long j = 0; j < config.lbfgs_steps; ++j) {
    const LbfgsOutcome out = lbfgs_step(state.theta, ws, closure, config.lbfgs_memory);
    state.step += 1;
    const long global = config.adam_steps + j;
    if (global % config.record_every == 0) report.curves.push_back({global, lbfgs_parts});
    if (out.stalled) {
      report.lbfgs_stalls += 1;
      break;  // deterministic closure: further iterations cannot progress
    }
  }
  report.adam_steps = config.adam_steps;
  report.lbfgs_steps = config.lbfgs_steps;

  report.final_loss = loss(state, *problem, batch, weights, data ? &*data : nullptr);

  // Error metric against truth where available.
  if (problem->has_analytical()) {
    const Matrix pts = problem->evaluation_points(hash_tag(config.seed, "eval"));
    std::vector<double> pred(pts.rows), truth(pts.rows);
    std::vector<double> x(pts.cols);
    for (std::size_t i = 0; i < pts.rows; ++i) {
      for (std::size_t c = 0; c < pts.cols; ++c) x[c] = pts(i, c);
      pred[i] = state.model.forward<double, double>(x, state.theta)[0];
      truth[i] = problem->analytical(x);
    }
    report.l2re = l2re(pred, truth);
  } else if (problem->has_reference()) {
    const ReferenceGrid& g = problem->reference();
    std::vector<double> pred, truth;
    std::vector<double> x(g.points.cols);
    for (std::size_t i = 0; i < g.points.rows; ++i) {
      for (std::size_t c = 0; c < g.points.cols; ++c) x[c] = g.points(i, c);
      const std::vector<double> u = state.model.forward<double, double>(x, state.theta);
      for (std::size_t c = 0; c < g.values.cols; ++c) {
        pred.push_back(u[c]);
        truth.push_back(g.values(i, c));
      }
    }
    report.l2re = l2re(pred, truth);
  }

  if (config.inverse.enabled) {
    const auto cs = state.model.coeff_slice(std::span<const double>(state.theta));
    report.recovered_coeffs.assign(cs.begin(), cs.end());
    report.coeff_l2re = l2re(report.recovered_coeffs, problem->true_coeffs());
  }

  report.empty_support_events = state.model.map.empty_support_events();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {std::move(report), std::move(state)};
}

}  // namespace featpinn
