// SPDX-License-Identifier: Apache-2.0
#ifndef FDIKP_OPTIM_HPP
#define FDIKP_OPTIM_HPP

#include <functional>
#include <string>
#include <vector>

#include "fdikp/autodiff.hpp"
#include "fdikp/rng.hpp"

namespace fdikp {

/// Bias-corrected Adam update in place; t counts from 1.
template <typename T>
void adam_step(ParamStoreT<T>& store, const std::vector<TensorT<T>>& grads, double lr,
               double beta1, double beta2, double eps, int t) {
    if (t < 1) throw std::invalid_argument("adam: t must be >= 1");
    if (static_cast<int>(grads.size()) != store.count())
        throw std::invalid_argument("adam: gradient count mismatch");
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (int p = 0; p < store.count(); ++p) {
        auto& e = store.entry(p);
        if (!grads[static_cast<size_t>(p)].same_shape(e.value))
            throw std::invalid_argument("adam: gradient shape mismatch for " + e.name);
        const TensorT<T>& g = grads[static_cast<size_t>(p)];
        for (std::int64_t i = 0; i < g.size(); ++i) {
            const double gi = static_cast<double>(g[i]);
            const double m = beta1 * static_cast<double>(e.m[i]) + (1.0 - beta1) * gi;
            const double v = beta2 * static_cast<double>(e.v[i]) + (1.0 - beta2) * gi * gi;
            e.m[i] = static_cast<T>(m);
            e.v[i] = static_cast<T>(v);
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            e.value[i] = static_cast<T>(static_cast<double>(e.value[i]) -
                                        lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
}

/// MultiStep schedule: lr0 * gamma^(number of milestones at or before step).
inline double lr_schedule(int step, double lr0, const std::vector<int>& milestones, double gamma) {
    int passed = 0;
    for (size_t i = 0; i < milestones.size(); ++i) {
        if (i > 0 && milestones[i] < milestones[i - 1])
            throw std::invalid_argument("lr_schedule: milestones must ascend");
        if (step >= milestones[i]) ++passed;
    }
    return lr0 * std::pow(gamma, passed);
}

/// Elementwise mean over checkpoints with identical schemas; optimizer
/// moments reset.
template <typename T>
ParamStoreT<T> swa_average(const std::vector<ParamStoreT<T>>& checkpoints) {
    if (checkpoints.empty()) throw std::invalid_argument("swa: need at least one checkpoint");
    ParamStoreT<T> out;
    const auto& first = checkpoints.front();
    for (int p = 0; p < first.count(); ++p)
        out.add(first.entry(p).name, TensorT<T>(first.entry(p).value.shape()));
    for (const auto& ck : checkpoints) {
        if (ck.count() != first.count()) throw std::invalid_argument("swa: schema mismatch");
        for (int p = 0; p < first.count(); ++p) {
            const auto& e = ck.entry(p);
            auto& o = out.entry(p);
            if (e.name != o.name || !e.value.same_shape(o.value))
                throw std::invalid_argument("swa: schema mismatch at " + o.name);
            for (std::int64_t i = 0; i < e.value.size(); ++i) o.value[i] += e.value[i];
        }
    }
    const T inv = T(1) / T(checkpoints.size());
    for (int p = 0; p < out.count(); ++p)
        for (std::int64_t i = 0; i < out.entry(p).value.size(); ++i) out.entry(p).value[i] *= inv;
    return out;
}

struct GradCheckReport {
    double max_rel_err = 0.0;
    int checked = 0;
    bool pass = false;
    std::string worst;
};

/// Central-difference check of a scalar-loss builder against the tape
/// gradients. Perturbs a random subset (>= min_scalars when available) of
/// store entries; the relative error denominator is floored at 1e-3 so
/// near-zero gradients compare absolutely.
inline GradCheckReport grad_check(const std::function<int(Graph&)>& build, ParamStore& store,
                                  double tol, Rng& rng, int min_scalars = 64,
                                  double step = 1e-4) {
    std::vector<TensorT<double>> analytic;
    {
        Graph g(&store);
        const int loss = build(g);
        g.backward(loss);
        analytic = g.param_grads();
    }
    auto loss_value = [&]() {
        Graph g(&store);
        return g.val(build(g))[0];
    };

    std::vector<std::pair<int, std::int64_t>> coords;
    for (int p = 0; p < store.count(); ++p)
        for (std::int64_t i = 0; i < store.entry(p).value.size(); ++i) coords.emplace_back(p, i);
    // Fisher-Yates prefix shuffle picks the subset
    const int want = std::min<std::int64_t>(static_cast<std::int64_t>(coords.size()),
                                            std::max(min_scalars, 1));
    for (int i = 0; i < want; ++i) {
        const int j = i + rng.uniform_int(static_cast<int>(coords.size()) - i);
        std::swap(coords[static_cast<size_t>(i)], coords[static_cast<size_t>(j)]);
    }

    GradCheckReport rep;
    for (int i = 0; i < want; ++i) {
        const auto [p, idx] = coords[static_cast<size_t>(i)];
        double& w = store.entry(p).value[idx];
        const double saved = w;
        w = saved + step;
        const double lp = loss_value();
        w = saved - step;
        const double lm = loss_value();
        w = saved;
        const double fd = (lp - lm) / (2.0 * step);
        const double ad = analytic[static_cast<size_t>(p)][idx];
        const double rel = std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), 1e-3});
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.worst = store.entry(p).name + "[" + std::to_string(idx) + "]";
        }
        ++rep.checked;
    }
    rep.pass = rep.max_rel_err <= tol;
    return rep;
}

} // namespace fdikp

#endif
