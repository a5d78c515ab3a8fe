#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "helmfluid/autodiff.hpp"
#include "helmfluid/error.hpp"
#include "helmfluid/json_io.hpp"
#include "helmfluid/npy.hpp"

namespace helmfluid::ad {

using nlohmann::json;

template <class T>
std::size_t ParamStore<T>::add(std::string name, Shape4 shape, std::vector<T> value) {
  if (value.size() != shape.numel()) throw ShapeError("parameter '" + name + "' data does not match " + shape.str());
  for (const auto& p : params_) {
    if (p.name == name) throw ConfigError("duplicate parameter name '" + name + "'");
  }
  params_.push_back(Param<T>{std::move(name), shape, std::move(value)});
  return params_.size() - 1;
}

template <class T>
std::size_t ParamStore<T>::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <class T>
std::size_t ParamStore<T>::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  throw ConfigError("unknown parameter '" + name + "'");
}

template <class T>
std::vector<Tensor<T>> ParamStore<T>::bind(bool requires_grad) const {
  std::vector<Tensor<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(Tensor<T>::leaf(p.shape, p.value, requires_grad));
  return out;
}

template <class T>
std::vector<std::vector<T>> ParamStore<T>::gradients(const std::vector<Tensor<T>>& bound) const {
  std::vector<std::vector<T>> g(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto gr = bound[i].grad();
    g[i] = gr.empty() ? std::vector<T>(params_[i].value.size(), T(0)) : std::vector<T>(gr.begin(), gr.end());
  }
  return g;
}

template <class T>
template <class U>
ParamStore<U> ParamStore<T>::cast() const {
  ParamStore<U> out;
  for (const auto& p : params_) out.add(p.name, p.shape, std::vector<U>(p.value.begin(), p.value.end()));
  return out;
}

template <class T>
void adam_step(ParamStore<T>& params, const std::vector<std::vector<T>>& grads, AdamState<T>& st) {
  if (grads.size() != params.size()) throw ShapeError("adam_step: gradient count does not match parameters");
  if (st.m.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      st.m.emplace_back(params[i].value.size(), T(0));
      st.v.emplace_back(params[i].value.size(), T(0));
    }
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].value;
    const auto& g = grads[i];
    if (g.size() != p.size()) throw ShapeError("adam_step: gradient shape mismatch for '" + params[i].name + "'");
    auto& m = st.m[i];
    auto& v = st.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = static_cast<T>(st.beta1 * m[j] + (1.0 - st.beta1) * g[j]);
      v[j] = static_cast<T>(st.beta2 * v[j] + (1.0 - st.beta2) * static_cast<double>(g[j]) * g[j]);
      const double mh = m[j] / c1, vh = v[j] / c2;
      p[j] = static_cast<T>(p[j] - st.lr * mh / (std::sqrt(vh) + st.eps));
    }
  }
}

namespace {

std::vector<std::size_t> dims(const Shape4& s) {
  return {static_cast<std::size_t>(s.n), static_cast<std::size_t>(s.c), static_cast<std::size_t>(s.h),
          static_cast<std::size_t>(s.w)};
}

template <class T>
NpyArray to_npy(const Shape4& s, const std::vector<T>& v) {
  if constexpr (std::is_same_v<T, float>) {
    return NpyArray::from_f32(dims(s), v);
  } else {
    return NpyArray::from_f64(dims(s), v);
  }
}

template <class T>
std::vector<T> from_npy(const NpyArray& a) {
  if constexpr (std::is_same_v<T, float>) {
    return a.to_f32();
  } else {
    return a.to_f64();
  }
}

}  // namespace

template <class T>
void save_params(const ParamStore<T>& params, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json list = json::array();
  for (const auto& p : params.params()) {
    const std::string file = p.name + ".npy";
    write_npy(dir / file, to_npy(p.shape, p.value));
    list.push_back({{"name", p.name}, {"shape", {p.shape.n, p.shape.c, p.shape.h, p.shape.w}}, {"file", file}});
  }
  write_json_file(dir / "params.json",
             {{"dtype", std::is_same_v<T, float> ? "float32" : "float64"}, {"params", list}});
}

template <class T>
void load_params(ParamStore<T>& params, const std::filesystem::path& dir) {
  const json j = read_json_file(dir / "params.json");
  std::vector<std::string> problems;
  std::vector<std::vector<T>> loaded(params.size());
  std::vector<bool> seen(params.size(), false);
  for (const auto& e : j.at("params")) {
    const std::string name = e.at("name");
    std::size_t idx = 0;
    try {
      idx = params.index_of(name);
    } catch (const ConfigError&) {
      problems.push_back(name + " (unexpected)");
      continue;
    }
    const auto shp = e.at("shape").get<std::vector<int>>();
    const Shape4 s = shp.size() == 4 ? Shape4{shp[0], shp[1], shp[2], shp[3]} : Shape4{0, 0, 0, 0};
    if (!(s == params[idx].shape)) {
      problems.push_back(name + " " + s.str() + " != expected " + params[idx].shape.str());
      continue;
    }
    const auto arr = read_npy(dir / e.at("file").get<std::string>());
    if (arr.numel() != s.numel()) {
      problems.push_back(name + " (file size mismatch)");
      continue;
    }
    loaded[idx] = from_npy<T>(arr);
    seen[idx] = true;
  }
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!seen[i] && std::find_if(problems.begin(), problems.end(), [&](const std::string& s) {
                      return s.rfind(params[i].name, 0) == 0;
                    }) == problems.end())
      problems.push_back(params[i].name + " (missing)");
  if (!problems.empty()) {
    std::ostringstream msg;
    msg << "checkpoint '" << dir.string() << "' does not match the model:";
    for (const auto& p : problems) msg << ' ' << p << ';';
    throw ShapeError(msg.str());
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i].value = std::move(loaded[i]);
}

template <class T>
void save_adam(const AdamState<T>& st, const ParamStore<T>& params, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json j = {{"step", st.step}, {"lr", st.lr}, {"beta1", st.beta1}, {"beta2", st.beta2}, {"eps", st.eps}};
  write_json_file(dir / "adam.json", j);
  for (std::size_t i = 0; i < st.m.size(); ++i) {
    write_npy(dir / (params[i].name + ".m.npy"), to_npy(params[i].shape, st.m[i]));
    write_npy(dir / (params[i].name + ".v.npy"), to_npy(params[i].shape, st.v[i]));
  }
}

template <class T>
void load_adam(AdamState<T>& st, const ParamStore<T>& params, const std::filesystem::path& dir) {
  const json j = read_json_file(dir / "adam.json");
  st.step = j.at("step");
  st.lr = j.at("lr");
  st.beta1 = j.at("beta1");
  st.beta2 = j.at("beta2");
  st.eps = j.at("eps");
  st.m.clear();
  st.v.clear();
  if (st.step == 0) return;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto m = from_npy<T>(read_npy(dir / (params[i].name + ".m.npy")));
    auto v = from_npy<T>(read_npy(dir / (params[i].name + ".v.npy")));
    if (m.size() != params[i].value.size() || v.size() != m.size()) {
      throw ShapeError("optimizer state for '" + params[i].name + "' does not match the parameter");
    }
    st.m.push_back(std::move(m));
    st.v.push_back(std::move(v));
  }
}

GradCheckReport grad_check(const GradFn& fn, const std::vector<Tensor<double>>& inputs, double tol,
                           std::size_t max_per_input, std::uint64_t seed) {
  std::vector<Tensor<double>> leaves;
  for (const auto& in : inputs) {
    leaves.push_back(Tensor<double>::leaf(in.shape(), std::vector<double>(in.value().begin(), in.value().end())));
  }
  const auto out = fn(leaves);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> r(out.shape().numel());
  for (auto& x : r) x = normal(rng);
  const auto weights = Tensor<double>::constant(out.shape(), r);
  sum(mul(out, weights)).backward();

  auto project = [&](const std::vector<Tensor<double>>& xs) {
    const auto o = fn(xs);
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) s += o.value()[i] * r[i];
    return s;
  };

  struct Sample {
    double analytic, numeric;
    std::size_t input, index;
  };
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::size_t n = inputs[i].value().size();
    std::vector<std::size_t> idx(n);
    for (std::size_t j = 0; j < n; ++j) idx[j] = j;
    if (max_per_input > 0 && n > max_per_input) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_per_input);
      std::sort(idx.begin(), idx.end());
    }
    const auto g = leaves[i].grad();
    for (std::size_t j : idx) {
      std::vector<Tensor<double>> xs;
      for (const auto& in : inputs) {
        xs.push_back(Tensor<double>::constant(in.shape(), std::vector<double>(in.value().begin(), in.value().end())));
      }
      auto& xv = xs[i].node()->value;
      const double x0 = xv[j];
      const double h = 1e-5 * std::max(1.0, std::abs(x0));
      xv[j] = x0 + h;
      const double fp = project(xs);
      xv[j] = x0 - h;
      const double fm = project(xs);
      samples.push_back({g.empty() ? 0.0 : g[j], (fp - fm) / (2.0 * h), i, j});
    }
  }
  double scale = 0.0;
  for (const auto& s : samples) scale = std::max(scale, std::abs(s.numeric));
  const double floor = std::max(1e-3 * scale, 1e-12);
  GradCheckReport rep;
  rep.checked = samples.size();
  for (const auto& s : samples) {
    const double abs_err = std::abs(s.analytic - s.numeric);
    const double rel = abs_err / std::max({std::abs(s.analytic), std::abs(s.numeric), floor});
    rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
    if (rel >= rep.max_rel_error) {
      rep.max_rel_error = rel;
      std::ostringstream w;
      w << "input " << s.input << " index " << s.index << ": analytic " << s.analytic << " numeric " << s.numeric;
      rep.worst = w.str();
    }
  }
  rep.passed = rep.max_rel_error <= tol;
  return rep;
}

template class ParamStore<float>;
template class ParamStore<double>;
template ParamStore<double> ParamStore<float>::cast<double>() const;
template ParamStore<float> ParamStore<double>::cast<float>() const;
template ParamStore<float> ParamStore<float>::cast<float>() const;
template ParamStore<double> ParamStore<double>::cast<double>() const;

#define HELMFLUID_AD_TRAIN_INSTANTIATE(T)                                                                \
  template void adam_step<T>(ParamStore<T>&, const std::vector<std::vector<T>>&, AdamState<T>&);        \
  template void save_params<T>(const ParamStore<T>&, const std::filesystem::path&);                     \
  template void load_params<T>(ParamStore<T>&, const std::filesystem::path&);                           \
  template void save_adam<T>(const AdamState<T>&, const ParamStore<T>&, const std::filesystem::path&);  \
  template void load_adam<T>(AdamState<T>&, const ParamStore<T>&, const std::filesystem::path&);

HELMFLUID_AD_TRAIN_INSTANTIATE(float)
HELMFLUID_AD_TRAIN_INSTANTIATE(double)

}  // namespace helmfluid::ad
