#include "saf/network.hpp"

#include <cmath>
#include <stdexcept>

namespace saf {

namespace {

void check_shape(const SafNetwork& net) {
  const NetworkShape& sh = net.shape;
  if (static_cast<int>(net.hidden.size()) != sh.hidden ||
      static_cast<int>(net.output.size()) != sh.outputs)
    throw std::invalid_argument("SafNetwork: layer sizes disagree with shape");
}

// Evaluates one layer for the whole batch. span_products receives B*q for
// every (unit, span) so each sample only pays a 4-term dot product.
void eval_layer(const std::vector<SafNeuron>& units, const SplineBasis& basis, double delta_x,
                const Matrix& in, LayerCache& lc, std::vector<double>& span_products) {
  const int n = in.rows;
  const int fan = in.cols;
  const int count = static_cast<int>(units.size());
  const int spans = units.empty() ? 0 : units[0].grid.span_count();

  lc.s = Matrix(n, count);
  lc.out = Matrix(n, count);
  lc.dphi = Matrix(n, count);
  lc.span.assign(static_cast<std::size_t>(n) * count, 0);
  lc.u.assign(static_cast<std::size_t>(n) * count, 0.0);
  lc.clamped = 0;

  span_products.assign(static_cast<std::size_t>(count) * spans * 4, 0.0);
  for (int i = 0; i < count; ++i) {
    const std::vector<double>& q = units[i].grid.ordinates;
    for (int k = 0; k < spans; ++k) {
      double* bq = span_products.data() + (static_cast<std::size_t>(i) * spans + k) * 4;
      for (int r = 0; r < 4; ++r) {
        double acc = 0.0;
        for (int c = 0; c < 4; ++c) acc += basis.at(r, c) * q[static_cast<std::size_t>(k + c)];
        bq[r] = acc;
      }
    }
  }

  for (int row = 0; row < n; ++row) {
    const double* x = in.row(row);
    for (int i = 0; i < count; ++i) {
      const std::vector<double>& w = units[i].weights;
      double s = w[static_cast<std::size_t>(fan)];  // bias
      for (int d = 0; d < fan; ++d) s += w[static_cast<std::size_t>(d)] * x[d];

      const SpanAddress a = locate(s, units[i].grid);
      const double* bq =
          span_products.data() + (static_cast<std::size_t>(i) * spans + a.span_index) * 4;
      const double u = a.u;
      const double u2 = u * u;

      const std::size_t slot = static_cast<std::size_t>(row) * count + i;
      lc.s(row, i) = s;
      lc.out(row, i) = u2 * u * bq[0] + u2 * bq[1] + u * bq[2] + bq[3];
      lc.dphi(row, i) = (3.0 * u2 * bq[0] + 2.0 * u * bq[1] + bq[2]) / delta_x;
      lc.span[slot] = a.span_index;
      lc.u[slot] = u;
      if (a.clamped) ++lc.clamped;
    }
  }
}

// B^T * [u^3 u^2 u 1]
inline std::array<double, 4> basis_t_u(const SplineBasis& basis, double u) {
  const double u2 = u * u;
  const double u3 = u2 * u;
  std::array<double, 4> g{};
  for (int c = 0; c < 4; ++c)
    g[c] = basis.at(0, c) * u3 + basis.at(1, c) * u2 + basis.at(2, c) * u + basis.at(3, c);
  return g;
}

}  // namespace

Matrix forward(const SafNetwork& net, const Matrix& x, ForwardCache* cache) {
  check_shape(net);
  if (x.cols != net.shape.inputs)
    throw std::invalid_argument("forward: input column count does not match network");

  ForwardCache local;
  ForwardCache& fc = cache ? *cache : local;
  fc.shape = net.shape;
  fc.batch = x.rows;
  fc.input = x;

  eval_layer(net.hidden, net.basis, net.shape.delta_x, fc.input, fc.hid,
             fc.hidden_span_products);
  eval_layer(net.output, net.basis, net.shape.delta_x, fc.hid.out, fc.out,
             fc.output_span_products);
  return fc.out.out;
}

std::vector<double> backward(const SafNetwork& net, const ForwardCache& cache,
                             const Matrix& out_grad) {
  check_shape(net);
  const NetworkShape& sh = net.shape;
  if (!(cache.shape == sh) || cache.batch != cache.input.rows)
    throw std::invalid_argument("backward: cache does not belong to this network");
  if (out_grad.rows != cache.batch || out_grad.cols != sh.outputs)
    throw std::invalid_argument("backward: upstream gradient has wrong shape");

  std::vector<double> grad(static_cast<std::size_t>(sh.param_count()), 0.0);
  double* gw_hid = grad.data();
  double* gw_out = gw_hid + static_cast<std::size_t>(sh.hidden) * (sh.inputs + 1);
  double* gq_hid = grad.data() + sh.weight_count();
  double* gq_out = gq_hid + static_cast<std::size_t>(sh.hidden) * sh.knots;

  std::vector<double> dh(static_cast<std::size_t>(sh.hidden), 0.0);

  for (int n = 0; n < cache.batch; ++n) {
    const double* x = cache.input.row(n);
    const double* h = cache.hid.out.row(n);
    std::fill(dh.begin(), dh.end(), 0.0);

    for (int j = 0; j < sh.outputs; ++j) {
      const double gj = out_grad(n, j);
      if (gj == 0.0) continue;
      const std::size_t slot = static_cast<std::size_t>(n) * sh.outputs + j;
      const double delta = gj * cache.out.dphi(n, j);  // dJ/ds at the output unit

      double* gw = gw_out + static_cast<std::size_t>(j) * (sh.hidden + 1);
      for (int i = 0; i < sh.hidden; ++i) gw[i] += delta * h[i];
      gw[sh.hidden] += delta;

      const auto btu = basis_t_u(net.basis, cache.out.u[slot]);
      double* gq = gq_out + static_cast<std::size_t>(j) * sh.knots + cache.out.span[slot];
      for (int r = 0; r < 4; ++r) gq[r] += gj * btu[r];

      const std::vector<double>& w = net.output[static_cast<std::size_t>(j)].weights;
      for (int i = 0; i < sh.hidden; ++i) dh[static_cast<std::size_t>(i)] += delta * w[static_cast<std::size_t>(i)];
    }

    for (int i = 0; i < sh.hidden; ++i) {
      const double di = dh[static_cast<std::size_t>(i)];
      if (di == 0.0) continue;
      const std::size_t slot = static_cast<std::size_t>(n) * sh.hidden + i;
      const double delta = di * cache.hid.dphi(n, i);

      double* gw = gw_hid + static_cast<std::size_t>(i) * (sh.inputs + 1);
      for (int d = 0; d < sh.inputs; ++d) gw[d] += delta * x[d];
      gw[sh.inputs] += delta;

      const auto btu = basis_t_u(net.basis, cache.hid.u[slot]);
      double* gq = gq_hid + static_cast<std::size_t>(i) * sh.knots + cache.hid.span[slot];
      for (int r = 0; r < 4; ++r) gq[r] += di * btu[r];
    }
  }
  return grad;
}

std::vector<double> flatten(const SafNetwork& net) {
  check_shape(net);
  const NetworkShape& sh = net.shape;
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(sh.param_count()));
  for (const SafNeuron& u : net.hidden) v.insert(v.end(), u.weights.begin(), u.weights.end());
  for (const SafNeuron& u : net.output) v.insert(v.end(), u.weights.begin(), u.weights.end());
  for (const SafNeuron& u : net.hidden)
    v.insert(v.end(), u.grid.ordinates.begin(), u.grid.ordinates.end());
  for (const SafNeuron& u : net.output)
    v.insert(v.end(), u.grid.ordinates.begin(), u.grid.ordinates.end());
  return v;
}

void unflatten_into(SafNetwork& net, const std::vector<double>& params) {
  const NetworkShape& sh = net.shape;
  if (static_cast<int>(params.size()) != sh.param_count())
    throw std::invalid_argument("unflatten: parameter vector length mismatch");
  const double* p = params.data();
  for (SafNeuron& u : net.hidden) {
    std::copy(p, p + sh.inputs + 1, u.weights.begin());
    p += sh.inputs + 1;
  }
  for (SafNeuron& u : net.output) {
    std::copy(p, p + sh.hidden + 1, u.weights.begin());
    p += sh.hidden + 1;
  }
  for (SafNeuron& u : net.hidden) {
    std::copy(p, p + sh.knots, u.grid.ordinates.begin());
    p += sh.knots;
  }
  for (SafNeuron& u : net.output) {
    std::copy(p, p + sh.knots, u.grid.ordinates.begin());
    p += sh.knots;
  }
}

SafNetwork unflatten(const NetworkShape& shape, const std::vector<double>& params,
                     const SplineBasis& basis) {
  SafNetwork net;
  net.shape = shape;
  net.basis = basis;
  const KnotGrid proto(shape.delta_x, std::vector<double>(static_cast<std::size_t>(shape.knots), 0.0));
  net.hidden.assign(static_cast<std::size_t>(shape.hidden),
                    SafNeuron{std::vector<double>(static_cast<std::size_t>(shape.inputs + 1), 0.0), proto});
  net.output.assign(static_cast<std::size_t>(shape.outputs),
                    SafNeuron{std::vector<double>(static_cast<std::size_t>(shape.hidden + 1), 0.0), proto});
  unflatten_into(net, params);
  return net;
}

SafNetwork init_glorot(int inputs, int hidden, int outputs, double delta_x, int knots,
                       std::uint64_t seed, double noise_fraction, double noise_sigma) {
  if (inputs < 1 || hidden < 1 || outputs < 1)
    throw std::invalid_argument("init_glorot: bad dimensions");
  SafNetwork net;
  net.shape = NetworkShape{inputs, hidden, outputs, knots, delta_x};
  net.basis = SplineBasis::catmull_rom();

  Rng rng(seed);
  const auto draw_layer = [&](int count, int fan_in, int fan_out) {
    // Bound excludes the bias input; biases start at zero.
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<SafNeuron> layer(static_cast<std::size_t>(count));
    for (SafNeuron& u : layer) {
      u.weights.assign(static_cast<std::size_t>(fan_in + 1), 0.0);
      for (int d = 0; d < fan_in; ++d)
        u.weights[static_cast<std::size_t>(d)] = uniform_real(rng, -bound, bound);
    }
    return layer;
  };
  net.hidden = draw_layer(hidden, inputs, hidden);
  net.output = draw_layer(outputs, hidden, outputs);

  const KnotGrid base = init_from_function([](double x) { return std::tanh(x); }, delta_x, knots);
  for (SafNeuron& u : net.hidden) u.grid = perturb(base, noise_fraction, noise_sigma, rng);
  for (SafNeuron& u : net.output) u.grid = perturb(base, noise_fraction, noise_sigma, rng);
  return net;
}

std::vector<double> tanh_ordinate_anchor(const NetworkShape& shape) {
  const KnotGrid base =
      init_from_function([](double x) { return std::tanh(x); }, shape.delta_x, shape.knots);
  std::vector<double> anchor;
  anchor.reserve(static_cast<std::size_t>(shape.ordinate_count()));
  for (int i = 0; i < shape.hidden + shape.outputs; ++i)
    anchor.insert(anchor.end(), base.ordinates.begin(), base.ordinates.end());
  return anchor;
}

}  // namespace saf
