#include "recon/dense_net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "recon/errors.hpp"

namespace recon::nn {

std::size_t DenseNet::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.w.data.size() + l.b.size();
  return n;
}

std::vector<std::span<double>> DenseNet::param_views() {
  std::vector<std::span<double>> v;
  v.reserve(layers.size() * 2);
  for (auto& l : layers) {
    v.emplace_back(l.w.data);
    v.emplace_back(l.b);
  }
  return v;
}

std::vector<std::span<const double>> DenseNet::param_views() const {
  std::vector<std::span<const double>> v;
  v.reserve(layers.size() * 2);
  for (const auto& l : layers) {
    v.emplace_back(l.w.data);
    v.emplace_back(l.b);
  }
  return v;
}

DenseNet make_net(const std::vector<int>& dims, Rng& rng, bool zero_final_layer) {
  require(dims.size() >= 2, "make_net: need at least input and output dims");
  DenseNet net;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const int in = dims[i];
    const int out = dims[i + 1];
    require(in > 0 && out > 0, "make_net: layer dims must be positive");
    DenseLayer l;
    l.w = Mat(out, in);
    l.b = Vec(out, 0.0);
    const bool final_layer = (i + 2 == dims.size());
    if (!(final_layer && zero_final_layer)) {
      const double scale = std::sqrt(6.0 / (in + out));
      for (auto& x : l.w.data) x = rng.uniform(-scale, scale);
    }
    net.layers.push_back(std::move(l));
  }
  return net;
}

Vec forward(const DenseNet& net, std::span<const double> x) {
  require(!net.layers.empty(), "forward: empty network");
  require(static_cast<int>(x.size()) == net.input_dim(),
          "forward: input length " + std::to_string(x.size()) + " != expected " +
              std::to_string(net.input_dim()));
  Vec cur(x.begin(), x.end());
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const auto& l = net.layers[li];
    Vec next(static_cast<size_t>(l.w.rows));
    for (int o = 0; o < l.w.rows; ++o) {
      const double* row = &l.w.data[static_cast<size_t>(o) * l.w.cols];
      double acc = l.b[o];
      for (int i = 0; i < l.w.cols; ++i) acc += row[i] * cur[i];
      next[o] = acc;
    }
    if (li + 1 < net.layers.size()) {
      for (auto& v : next) v = std::tanh(v);
    }
    cur = std::move(next);
  }
  return cur;
}

DenseNet zeros_like(const DenseNet& net) {
  DenseNet z;
  z.layers.reserve(net.layers.size());
  for (const auto& l : net.layers) {
    DenseLayer g;
    g.w = Mat(l.w.rows, l.w.cols);
    g.b = Vec(l.b.size(), 0.0);
    z.layers.push_back(std::move(g));
  }
  return z;
}

void zero_out(DenseNet& net) {
  for (auto& l : net.layers) {
    std::fill(l.w.data.begin(), l.w.data.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
}

void accumulate_scaled(DenseNet& dst, const DenseNet& src, double k) {
  require(dst.layers.size() == src.layers.size(), "accumulate_scaled: shape mismatch");
  for (std::size_t li = 0; li < dst.layers.size(); ++li) {
    auto& d = dst.layers[li];
    const auto& s = src.layers[li];
    for (std::size_t i = 0; i < d.w.data.size(); ++i) d.w.data[i] += k * s.w.data[i];
    for (std::size_t i = 0; i < d.b.size(); ++i) d.b[i] += k * s.b[i];
  }
}

nlohmann::json net_to_json(const DenseNet& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers) {
    layers.push_back({{"in", l.w.cols}, {"out", l.w.rows}, {"w", l.w.data}, {"b", l.b}});
  }
  return {{"layers", layers}};
}

DenseNet net_from_json(const nlohmann::json& j) {
  DenseNet net;
  for (const auto& lj : j.at("layers")) {
    DenseLayer l;
    const int in = lj.at("in").get<int>();
    const int out = lj.at("out").get<int>();
    l.w = Mat(out, in);
    l.w.data = lj.at("w").get<Vec>();
    l.b = lj.at("b").get<Vec>();
    if (l.w.data.size() != static_cast<size_t>(in) * out || l.b.size() != static_cast<size_t>(out))
      throw IoError("net_from_json: layer array sizes inconsistent with dims");
    net.layers.push_back(std::move(l));
  }
  for (std::size_t i = 0; i + 1 < net.layers.size(); ++i) {
    if (net.layers[i].w.rows != net.layers[i + 1].w.cols)
      throw IoError("net_from_json: consecutive layer dims do not chain");
  }
  return net;
}

}  // namespace recon::nn
