#include "recon/autodiff.hpp"

#include <cmath>
#include <string>

#include "recon/errors.hpp"

namespace recon::nn {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;

void assign(Vec& dst, std::span<const double> src) {
  dst.resize(src.size());
  std::copy(src.begin(), src.end(), dst.begin());
}

void zero_resize(Vec& v, std::size_t n) {
  v.assign(n, 0.0);
}
}  // namespace

void Tape::reset() { used_ = 0; }

// push() can grow the slot vector; parent references must be taken only
// afterwards. Parent ids are validated before the push.
Tape::Node& Tape::push(Op op) {
  if (used_ == static_cast<int>(slots_.size())) slots_.emplace_back();
  Node& n = slots_[used_++];
  n.op = op;
  n.a = n.b = -1;
  n.layer = nullptr;
  n.sink = nullptr;
  n.k = 0.0;
  n.offset = 0;
  return n;
}

Tape::Node& Tape::node(NodeId id) {
  check_open(id);
  return slots_[id];
}

const Tape::Node& Tape::node(NodeId id) const {
  check_open(id);
  return slots_[id];
}

void Tape::check_open(NodeId id) const {
  require(id >= 0 && id < used_, "Tape: node id " + std::to_string(id) + " not on tape");
}

Tape::NodeId Tape::input(std::span<const double> v) {
  Node& n = push(Op::kInput);
  assign(n.value, v);
  return used_ - 1;
}

Tape::NodeId Tape::affine(const DenseLayer& layer, DenseLayer* grad_sink, NodeId x) {
  check_open(x);
  require(static_cast<int>(slots_[x].value.size()) == layer.w.cols,
          "Tape::affine: input size does not match layer");
  Node& n = push(Op::kAffine);
  n.a = x;
  n.layer = &layer;
  n.sink = grad_sink;
  const Vec& xv = slots_[x].value;
  n.value.resize(layer.w.rows);
  for (int o = 0; o < layer.w.rows; ++o) {
    const double* row = &layer.w.data[static_cast<size_t>(o) * layer.w.cols];
    double acc = layer.b[o];
    for (int i = 0; i < layer.w.cols; ++i) acc += row[i] * xv[i];
    n.value[o] = acc;
  }
  return used_ - 1;
}

Tape::NodeId Tape::tanh_of(NodeId x) {
  check_open(x);
  Node& n = push(Op::kTanh);
  n.a = x;
  const Vec& xv = slots_[x].value;
  n.value.resize(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) n.value[i] = std::tanh(xv[i]);
  return used_ - 1;
}

Tape::NodeId Tape::concat(NodeId a, NodeId b) {
  check_open(a);
  check_open(b);
  Node& n = push(Op::kConcat);
  n.a = a;
  n.b = b;
  const Vec& av = slots_[a].value;
  const Vec& bv = slots_[b].value;
  n.value.resize(av.size() + bv.size());
  std::copy(av.begin(), av.end(), n.value.begin());
  std::copy(bv.begin(), bv.end(), n.value.begin() + av.size());
  return used_ - 1;
}

Tape::NodeId Tape::slice(NodeId x, int offset, int len) {
  check_open(x);
  require(offset >= 0 && len >= 0 &&
              offset + len <= static_cast<int>(slots_[x].value.size()),
          "Tape::slice: range out of bounds");
  Node& n = push(Op::kSlice);
  n.a = x;
  n.offset = offset;
  const Vec& xv = slots_[x].value;
  n.value.assign(xv.begin() + offset, xv.begin() + offset + len);
  return used_ - 1;
}

Tape::NodeId Tape::reparameterize(NodeId mu, NodeId log_sigma, std::span<const double> noise) {
  check_open(mu);
  check_open(log_sigma);
  require(slots_[mu].value.size() == slots_[log_sigma].value.size() &&
              slots_[mu].value.size() == noise.size(),
          "Tape::reparameterize: dimension mismatch");
  Node& n = push(Op::kReparam);
  n.a = mu;
  n.b = log_sigma;
  assign(n.aux, noise);
  const Vec& m = slots_[mu].value;
  const Vec& ls = slots_[log_sigma].value;
  n.value.resize(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) n.value[i] = m[i] + std::exp(ls[i]) * noise[i];
  return used_ - 1;
}

Tape::NodeId Tape::gaussian_log_prob(NodeId mu, NodeId log_sigma, std::span<const double> target) {
  check_open(mu);
  check_open(log_sigma);
  require(slots_[mu].value.size() == slots_[log_sigma].value.size() &&
              slots_[mu].value.size() == target.size(),
          "Tape::gaussian_log_prob: dimension mismatch");
  Node& n = push(Op::kGaussLogProb);
  n.a = mu;
  n.b = log_sigma;
  assign(n.aux, target);
  const Vec& m = slots_[mu].value;
  const Vec& ls = slots_[log_sigma].value;
  double lp = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double z = (target[i] - m[i]) / std::exp(ls[i]);
    lp += -kHalfLog2Pi - ls[i] - 0.5 * z * z;
  }
  n.value.assign(1, lp);
  return used_ - 1;
}

Tape::NodeId Tape::kl_to_standard_normal(NodeId mu, NodeId log_sigma) {
  check_open(mu);
  check_open(log_sigma);
  require(slots_[mu].value.size() == slots_[log_sigma].value.size(),
          "Tape::kl_to_standard_normal: dimension mismatch");
  Node& n = push(Op::kKlStdNormal);
  n.a = mu;
  n.b = log_sigma;
  const Vec& m = slots_[mu].value;
  const Vec& ls = slots_[log_sigma].value;
  double kl = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double s2 = std::exp(2.0 * ls[i]);
    kl += m[i] * m[i] + s2 - 1.0 - 2.0 * ls[i];
  }
  n.value.assign(1, 0.5 * kl);
  return used_ - 1;
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  check_open(a);
  check_open(b);
  require(slots_[a].value.size() == slots_[b].value.size(), "Tape::add: size mismatch");
  Node& n = push(Op::kAdd);
  n.a = a;
  n.b = b;
  const Vec& av = slots_[a].value;
  const Vec& bv = slots_[b].value;
  n.value.resize(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = av[i] + bv[i];
  return used_ - 1;
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  check_open(a);
  check_open(b);
  require(slots_[a].value.size() == slots_[b].value.size(), "Tape::sub: size mismatch");
  Node& n = push(Op::kSub);
  n.a = a;
  n.b = b;
  const Vec& av = slots_[a].value;
  const Vec& bv = slots_[b].value;
  n.value.resize(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = av[i] - bv[i];
  return used_ - 1;
}

Tape::NodeId Tape::scale(NodeId x, double k) {
  check_open(x);
  Node& n = push(Op::kScale);
  n.a = x;
  n.k = k;
  const Vec& xv = slots_[x].value;
  n.value.resize(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) n.value[i] = k * xv[i];
  return used_ - 1;
}

Tape::NodeId Tape::dot(NodeId a, NodeId b) {
  check_open(a);
  check_open(b);
  require(slots_[a].value.size() == slots_[b].value.size(), "Tape::dot: size mismatch");
  Node& n = push(Op::kDot);
  n.a = a;
  n.b = b;
  const Vec& av = slots_[a].value;
  const Vec& bv = slots_[b].value;
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  n.value.assign(1, acc);
  return used_ - 1;
}

Tape::NodeId Tape::sum(NodeId x) {
  check_open(x);
  Node& n = push(Op::kSum);
  n.a = x;
  double acc = 0.0;
  for (double v : slots_[x].value) acc += v;
  n.value.assign(1, acc);
  return used_ - 1;
}

void Tape::backward(NodeId loss) {
  require(used_ > 0, "Tape::backward: no forward pass recorded");
  check_open(loss);
  require(node(loss).value.size() == 1, "Tape::backward: loss must be scalar");

  for (int i = 0; i < used_; ++i) zero_resize(slots_[i].grad, slots_[i].value.size());
  slots_[loss].grad[0] = 1.0;

  for (int id = used_ - 1; id >= 0; --id) {
    Node& n = slots_[id];
    bool any = false;
    for (double g : n.grad) {
      if (g != 0.0) {
        any = true;
        break;
      }
    }
    if (!any) continue;

    switch (n.op) {
      case Op::kInput:
        break;
      case Op::kAffine: {
        const DenseLayer& l = *n.layer;
        Vec& xg = slots_[n.a].grad;
        const Vec& xv = slots_[n.a].value;
        for (int o = 0; o < l.w.rows; ++o) {
          const double go = n.grad[o];
          if (go == 0.0) continue;
          const double* row = &l.w.data[static_cast<size_t>(o) * l.w.cols];
          for (int i = 0; i < l.w.cols; ++i) xg[i] += row[i] * go;
          if (n.sink) {
            double* grow = &n.sink->w.data[static_cast<size_t>(o) * l.w.cols];
            for (int i = 0; i < l.w.cols; ++i) grow[i] += go * xv[i];
            n.sink->b[o] += go;
          }
        }
        break;
      }
      case Op::kTanh: {
        Vec& xg = slots_[n.a].grad;
        for (std::size_t i = 0; i < n.value.size(); ++i)
          xg[i] += n.grad[i] * (1.0 - n.value[i] * n.value[i]);
        break;
      }
      case Op::kConcat: {
        Vec& ag = slots_[n.a].grad;
        Vec& bg = slots_[n.b].grad;
        for (std::size_t i = 0; i < ag.size(); ++i) ag[i] += n.grad[i];
        for (std::size_t i = 0; i < bg.size(); ++i) bg[i] += n.grad[ag.size() + i];
        break;
      }
      case Op::kSlice: {
        Vec& xg = slots_[n.a].grad;
        for (std::size_t i = 0; i < n.value.size(); ++i) xg[n.offset + i] += n.grad[i];
        break;
      }
      case Op::kReparam: {
        // z = mu + exp(ls) * eps  =>  dz/dmu = 1, dz/dls = exp(ls) * eps = z - mu
        Vec& mg = slots_[n.a].grad;
        Vec& lg = slots_[n.b].grad;
        const Vec& mv = slots_[n.a].value;
        for (std::size_t i = 0; i < n.value.size(); ++i) {
          mg[i] += n.grad[i];
          lg[i] += n.grad[i] * (n.value[i] - mv[i]);
        }
        break;
      }
      case Op::kGaussLogProb: {
        const double g = n.grad[0];
        Vec& mg = slots_[n.a].grad;
        Vec& lg = slots_[n.b].grad;
        const Vec& mv = slots_[n.a].value;
        const Vec& lv = slots_[n.b].value;
        for (std::size_t i = 0; i < mv.size(); ++i) {
          const double inv_s2 = std::exp(-2.0 * lv[i]);
          const double diff = n.aux[i] - mv[i];
          mg[i] += g * diff * inv_s2;
          lg[i] += g * (diff * diff * inv_s2 - 1.0);
        }
        break;
      }
      case Op::kKlStdNormal: {
        const double g = n.grad[0];
        Vec& mg = slots_[n.a].grad;
        Vec& lg = slots_[n.b].grad;
        const Vec& mv = slots_[n.a].value;
        const Vec& lv = slots_[n.b].value;
        for (std::size_t i = 0; i < mv.size(); ++i) {
          mg[i] += g * mv[i];
          lg[i] += g * (std::exp(2.0 * lv[i]) - 1.0);
        }
        break;
      }
      case Op::kAdd: {
        Vec& ag = slots_[n.a].grad;
        Vec& bg = slots_[n.b].grad;
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          ag[i] += n.grad[i];
          bg[i] += n.grad[i];
        }
        break;
      }
      case Op::kSub: {
        Vec& ag = slots_[n.a].grad;
        Vec& bg = slots_[n.b].grad;
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          ag[i] += n.grad[i];
          bg[i] -= n.grad[i];
        }
        break;
      }
      case Op::kScale: {
        Vec& ag = slots_[n.a].grad;
        for (std::size_t i = 0; i < n.grad.size(); ++i) ag[i] += n.k * n.grad[i];
        break;
      }
      case Op::kDot: {
        const double g = n.grad[0];
        Vec& ag = slots_[n.a].grad;
        Vec& bg = slots_[n.b].grad;
        const Vec& av = slots_[n.a].value;
        const Vec& bv = slots_[n.b].value;
        for (std::size_t i = 0; i < av.size(); ++i) {
          ag[i] += g * bv[i];
          bg[i] += g * av[i];
        }
        break;
      }
      case Op::kSum: {
        const double g = n.grad[0];
        Vec& ag = slots_[n.a].grad;
        for (std::size_t i = 0; i < ag.size(); ++i) ag[i] += g;
        break;
      }
    }
  }
}

const Vec& Tape::value(NodeId id) const { return node(id).value; }
const Vec& Tape::grad(NodeId id) const { return node(id).grad; }

}  // namespace recon::nn
