#include "mechsel/surrogate.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "mechsel/ad.hpp"
#include "mechsel/rng.hpp"

namespace mechsel {

namespace {

void validate_config(const SurrogateConfig& cfg) {
  if (cfg.hidden_layers < 1 || cfg.neurons_per_layer < 1) {
    throw ConfigError("surrogate: hidden_layers and neurons_per_layer must be >= 1");
  }
  if (cfg.activation != "tanh") {
    throw ConfigError("surrogate: unsupported activation '" + cfg.activation + "'");
  }
}

}  // namespace

SurrogateWeights::SurrogateWeights(const SurrogateConfig& cfg) : cfg_(cfg) {
  validate_config(cfg);
  const int n = cfg.neurons_per_layer;
  std::size_t off = 0;
  for (int l = 0; l <= cfg.hidden_layers; ++l) {
    LayerShape s;
    s.in = (l == 0) ? 1 : n;
    s.out = (l == cfg.hidden_layers) ? 2 : n;
    s.w_off = off;
    off += static_cast<std::size_t>(s.in) * static_cast<std::size_t>(s.out);
    s.b_off = off;
    off += static_cast<std::size_t>(s.out);
    shapes_.push_back(s);
  }
  flat_.assign(off, 0.0);
}

SurrogateWeights SurrogateWeights::glorot(const SurrogateConfig& cfg, std::uint64_t seed) {
  SurrogateWeights w(cfg);
  SplitMix64 rng(seed);
  for (const LayerShape& s : w.shapes_) {
    const double limit = std::sqrt(6.0 / (s.in + s.out));
    for (std::size_t k = 0; k < static_cast<std::size_t>(s.in) * static_cast<std::size_t>(s.out); ++k) {
      w.flat_[s.w_off + k] = rng.uniform(-limit, limit);
    }
    // biases stay zero
  }
  return w;
}

namespace {

// Plain forward pass; act/next are scratch buffers sized >= neurons.
std::array<double, 2> forward_plain(const SurrogateWeights& w, double t_norm, std::vector<double>& act,
                                    std::vector<double>& next) {
  std::span<const double> f = w.flat();
  act.assign(1, t_norm);
  for (const auto& s : w.layers()) {
    next.assign(static_cast<std::size_t>(s.out), 0.0);
    const bool last = (s.out == 2 && &s == &w.layers().back());
    for (int i = 0; i < s.out; ++i) {
      double acc = f[s.b_off + static_cast<std::size_t>(i)];
      const std::size_t row = s.w_off + static_cast<std::size_t>(i) * static_cast<std::size_t>(s.in);
      for (int j = 0; j < s.in; ++j) acc += f[row + static_cast<std::size_t>(j)] * act[static_cast<std::size_t>(j)];
      next[static_cast<std::size_t>(i)] = last ? acc : std::tanh(acc);
    }
    act.swap(next);
  }
  return {act[0], act[1]};
}

// Forward pass carrying (value, d/dt_raw) duals through every layer.
void forward_dual(const SurrogateWeights& w, double t_norm, std::array<double, 2>& value,
                  std::array<double, 2>& deriv) {
  std::span<const double> f = w.flat();
  std::vector<double> a{t_norm}, ad{kTimeJacobian};
  std::vector<double> z, zd;
  for (const auto& s : w.layers()) {
    z.assign(static_cast<std::size_t>(s.out), 0.0);
    zd.assign(static_cast<std::size_t>(s.out), 0.0);
    const bool last = (&s == &w.layers().back());
    for (int i = 0; i < s.out; ++i) {
      double acc = f[s.b_off + static_cast<std::size_t>(i)];
      double accd = 0.0;
      const std::size_t row = s.w_off + static_cast<std::size_t>(i) * static_cast<std::size_t>(s.in);
      for (int j = 0; j < s.in; ++j) {
        acc += f[row + static_cast<std::size_t>(j)] * a[static_cast<std::size_t>(j)];
        accd += f[row + static_cast<std::size_t>(j)] * ad[static_cast<std::size_t>(j)];
      }
      if (last) {
        z[static_cast<std::size_t>(i)] = acc;
        zd[static_cast<std::size_t>(i)] = accd;
      } else {
        const double h = std::tanh(acc);
        z[static_cast<std::size_t>(i)] = h;
        zd[static_cast<std::size_t>(i)] = (1.0 - h * h) * accd;
      }
    }
    a.swap(z);
    ad.swap(zd);
  }
  value = {a[0], a[1]};
  deriv = {ad[0], ad[1]};
}

}  // namespace

std::array<double, 2> mlp_forward(const SurrogateWeights& w, double t_norm) {
  std::vector<double> act, next;
  return forward_plain(w, t_norm, act, next);
}

std::array<double, 2> mlp_time_derivative(const SurrogateWeights& w, double t_norm) {
  std::array<double, 2> value{}, deriv{};
  forward_dual(w, t_norm, value, deriv);
  return deriv;
}

void mlp_eval_with_time_derivative(const SurrogateWeights& w, double t_norm,
                                   std::array<double, 2>& value, std::array<double, 2>& deriv) {
  forward_dual(w, t_norm, value, deriv);
}

namespace {

using ad::Tape;
using Var = ad::Tape::Var;

// Tape forward pass, value chain only. `wv` holds one leaf per weight in
// flat order; `act` is reused scratch.
std::array<Var, 2> tape_forward(Tape& tape, const SurrogateWeights& w, std::span<const Var> wv,
                                Var input, std::vector<Var>& act, std::vector<Var>& next) {
  act.assign(1, input);
  for (const auto& s : w.layers()) {
    next.assign(static_cast<std::size_t>(s.out), Var{});
    const bool last = (&s == &w.layers().back());
    for (int i = 0; i < s.out; ++i) {
      const std::size_t row = s.w_off + static_cast<std::size_t>(i) * static_cast<std::size_t>(s.in);
      const Var z = tape.affine(wv[s.b_off + static_cast<std::size_t>(i)],
                                wv.subspan(row, static_cast<std::size_t>(s.in)),
                                std::span<const Var>(act.data(), static_cast<std::size_t>(s.in)));
      next[static_cast<std::size_t>(i)] = last ? z : tape.tanh(z);
    }
    act.swap(next);
  }
  return {act[0], act[1]};
}

// Tape forward pass carrying the raw-time derivative chain alongside values.
void tape_forward_dual(Tape& tape, const SurrogateWeights& w, std::span<const Var> wv, Var input,
                       std::array<Var, 2>& value, std::array<Var, 2>& deriv, std::vector<Var>& act,
                       std::vector<Var>& actd, std::vector<Var>& next, std::vector<Var>& nextd) {
  act.assign(1, input);
  actd.clear();  // first-layer derivative handled via scale by the Jacobian
  for (const auto& s : w.layers()) {
    next.assign(static_cast<std::size_t>(s.out), Var{});
    nextd.assign(static_cast<std::size_t>(s.out), Var{});
    const bool first = (&s == &w.layers().front());
    const bool last = (&s == &w.layers().back());
    for (int i = 0; i < s.out; ++i) {
      const std::size_t row = s.w_off + static_cast<std::size_t>(i) * static_cast<std::size_t>(s.in);
      const auto wrow = wv.subspan(row, static_cast<std::size_t>(s.in));
      const Var z = tape.affine(wv[s.b_off + static_cast<std::size_t>(i)], wrow,
                                std::span<const Var>(act.data(), static_cast<std::size_t>(s.in)));
      const Var zd = first ? tape.scale(wrow[0], kTimeJacobian)
                           : tape.dot(wrow, std::span<const Var>(actd.data(),
                                                                 static_cast<std::size_t>(s.in)));
      if (last) {
        next[static_cast<std::size_t>(i)] = z;
        nextd[static_cast<std::size_t>(i)] = zd;
      } else {
        const Var h = tape.tanh(z);
        next[static_cast<std::size_t>(i)] = h;
        nextd[static_cast<std::size_t>(i)] = tape.mul(tape.one_minus_square(h), zd);
      }
    }
    act.swap(next);
    actd.swap(nextd);
  }
  value = {act[0], act[1]};
  deriv = {actd[0], actd[1]};
}

}  // namespace

Gradients grad_all(const SurrogateWeights& w, const ParameterState& state,
                   std::span<const DataPoint> batch, std::span<const double> collocation,
                   const LossSpec& spec) {
  if (batch.empty() || collocation.empty()) {
    throw InvalidInputError("grad_all: batch and collocation must be nonempty");
  }

  thread_local Tape tape;
  tape.reset();

  // Leaves: weights first (flat order), then the active mechanism parameters.
  std::vector<Var> wv(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) wv[k] = tape.leaf(w.flat()[k]);

  std::array<ad::Rev, kNumParams> p;
  std::vector<int> active;
  std::vector<Var> pv;
  for (int i = 0; i < kNumParams; ++i) {
    if (state.mask[static_cast<std::size_t>(i)]) {
      const Var v = tape.leaf(state.value(i));
      p[static_cast<std::size_t>(i)] = ad::Rev{&tape, v};
      active.push_back(i);
      pv.push_back(v);
    } else {
      p[static_cast<std::size_t>(i)] = ad::Rev{&tape, tape.constant(0.0)};
    }
  }

  std::vector<Var> act, actd, next, nextd;

  Var data_sum = tape.constant(0.0);
  for (const DataPoint& pt : batch) {
    const Var input = tape.constant(normalize_time(pt.t));
    const std::array<Var, 2> y = tape_forward(tape, w, wv, input, act, next);
    const Var eu = tape.square(tape.sub(y[0], tape.constant(pt.u)));
    const Var ev = tape.square(tape.sub(y[1], tape.constant(pt.v)));
    data_sum = tape.add(data_sum, tape.add(eu, ev));
  }
  const Var data_mse = tape.scale(data_sum, 1.0 / (2.0 * static_cast<double>(batch.size())));

  Var res_sum = tape.constant(0.0);
  for (double t : collocation) {
    const Var input = tape.constant(normalize_time(t));
    std::array<Var, 2> y{}, yd{};
    tape_forward_dual(tape, w, wv, input, y, yd, act, actd, next, nextd);
    ad::Rev du{&tape, {}}, dv{&tape, {}};
    rhs_terms(p, ad::Rev{&tape, y[0]}, ad::Rev{&tape, y[1]}, du, dv);
    const Var ru = tape.square(tape.sub(yd[0], du.var));
    const Var rv = tape.square(tape.sub(yd[1], dv.var));
    res_sum = tape.add(res_sum, tape.add(ru, rv));
  }
  const Var res_mse = tape.scale(res_sum, 1.0 / (2.0 * static_cast<double>(collocation.size())));

  const Var total = tape.add(tape.scale(data_mse, spec.data_weight), tape.scale(res_mse, spec.residual_weight));

  Gradients g;
  g.loss.data_mse = tape.value(data_mse);
  g.loss.residual_mse = tape.value(res_mse);
  g.loss.total = tape.value(total);
  if (!std::isfinite(g.loss.data_mse)) throw NumericalOverflowError("grad_all: data term is non-finite");
  if (!std::isfinite(g.loss.residual_mse)) {
    throw NumericalOverflowError("grad_all: residual term is non-finite");
  }

  tape.backward(total);

  g.weight_grad.resize(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) g.weight_grad[k] = tape.adjoint(wv[k]);
  g.mechanism_grad.reserve(active.size());
  for (std::size_t k = 0; k < active.size(); ++k) {
    g.mechanism_grad.push_back(MechGrad{active[k], tape.adjoint(pv[k])});
  }
  return g;
}

void save_weights(std::ostream& out, const SurrogateWeights& w) {
  out << "mlp-weights v1\n";
  out << "hidden_layers " << w.config().hidden_layers << "\n";
  out << "neurons " << w.config().neurons_per_layer << "\n";
  out << "activation " << w.config().activation << "\n";
  char buf[40];
  int l = 0;
  for (const auto& s : w.layers()) {
    out << "layer " << l++ << " in " << s.in << " out " << s.out << "\n";
    out << "w";
    for (std::size_t k = 0; k < static_cast<std::size_t>(s.in) * static_cast<std::size_t>(s.out); ++k) {
      std::snprintf(buf, sizeof(buf), " %.17g", w.flat()[s.w_off + k]);
      out << buf;
    }
    out << "\nb";
    for (int k = 0; k < s.out; ++k) {
      std::snprintf(buf, sizeof(buf), " %.17g", w.flat()[s.b_off + static_cast<std::size_t>(k)]);
      out << buf;
    }
    out << "\n";
  }
}

SurrogateWeights load_weights(std::istream& in) {
  std::string line;
  auto fail = [](const std::string& what) { return ConfigError("load_weights: " + what); };
  if (!std::getline(in, line) || line != "mlp-weights v1") throw fail("bad header");

  SurrogateConfig cfg;
  std::string key;
  in >> key >> cfg.hidden_layers;
  if (key != "hidden_layers") throw fail("expected hidden_layers");
  in >> key >> cfg.neurons_per_layer;
  if (key != "neurons") throw fail("expected neurons");
  in >> key >> cfg.activation;
  if (key != "activation") throw fail("expected activation");

  SurrogateWeights w(cfg);
  for (std::size_t l = 0; l < w.layers().size(); ++l) {
    const auto& s = w.layers()[l];
    int idx = 0, in_n = 0, out_n = 0;
    in >> key >> idx;
    if (key != "layer" || idx != static_cast<int>(l)) throw fail("expected layer tag");
    in >> key >> in_n >> key >> out_n;
    if (in_n != s.in || out_n != s.out) throw fail("layer shape mismatch");
    in >> key;
    if (key != "w") throw fail("expected weights row");
    for (std::size_t k = 0; k < static_cast<std::size_t>(s.in) * static_cast<std::size_t>(s.out); ++k) {
      if (!(in >> w.flat()[s.w_off + k])) throw fail("bad weight value");
    }
    in >> key;
    if (key != "b") throw fail("expected bias row");
    for (int k = 0; k < s.out; ++k) {
      if (!(in >> w.flat()[s.b_off + static_cast<std::size_t>(k)])) throw fail("bad bias value");
    }
  }
  for (double x : w.flat()) {
    if (!std::isfinite(x)) throw fail("non-finite value");
  }
  return w;
}

}  // namespace mechsel
