#include "ehrgen/lm/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "ehrgen/util/error.hpp"

namespace ehrgen::lm {

namespace {

struct Objective {
  Network<double> net;
  const std::vector<std::vector<Token>>& batch;
  std::vector<std::vector<Token>> targets;
  double tokens = 0;

  Objective(const ModelConfig& c, const std::vector<std::vector<Token>>& b) : net(c), batch(b) {
    for (const auto& s : batch) {
      std::vector<Token> t(s.size(), kNoTarget);
      for (std::size_t i = 0; i + 1 < s.size(); ++i) t[i] = s[i + 1];
      tokens += static_cast<double>(s.size()) - 1;
      targets.push_back(std::move(t));
    }
    if (tokens <= 0) throw PreconditionError("grad_check: batch has no target tokens");
  }

  double loss(const std::vector<double>& p) {
    double total = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      net.forward(p.data(), batch[i]);
      total += net.loss(targets[i]);
    }
    return total / tokens;
  }

  std::vector<double> gradient(const std::vector<double>& p) {
    std::vector<double> g(p.size(), 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      net.forward(p.data(), batch[i]);
      net.backward(p.data(), targets[i], g.data(), 1.0 / tokens);
    }
    return g;
  }
};

}  // namespace

GradCheckResult grad_check(const Model& model, const std::vector<std::vector<Token>>& batch, double epsilon,
                           std::size_t samples, std::uint64_t seed) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) throw PreconditionError("grad_check: epsilon outside [1e-6, 1e-3]");
  std::vector<double> p(model.parameters().begin(), model.parameters().end());
  Objective obj(model.config(), batch);
  const std::vector<double> analytic = obj.gradient(p);

  const auto tensors = parameter_tensors(model.config());
  const std::size_t per_tensor = std::max<std::size_t>(1, (samples + tensors.size() - 1) / tensors.size());
  Rng rng = make_rng(seed, 0x6C4E);
  GradCheckResult res;
  for (const auto& t : tensors) {
    for (std::size_t s = 0; s < per_tensor; ++s) {
      const std::size_t i = t.offset + rng() % t.size();
      const double saved = p[i];
      p[i] = saved + epsilon;
      const double up = obj.loss(p);
      p[i] = saved - epsilon;
      const double down = obj.loss(p);
      p[i] = saved;
      const double numeric = (up - down) / (2 * epsilon);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      if (rel > res.max_rel_error || res.checked == 0) {
        res.max_rel_error = std::max(res.max_rel_error, rel);
        if (rel >= res.max_rel_error) res.worst_tensor = t.name;
      }
      ++res.checked;
    }
  }
  return res;
}

}  // namespace ehrgen::lm
