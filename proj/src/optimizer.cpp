#include "lsim/train/optimizer.hpp"

#include <fmt/format.h>

#include <cmath>

namespace lsim::train {

OptimizerKind optimizer_from_name(const std::string& name) {
    if (name == "adam") return OptimizerKind::Adam;
    if (name == "adamw") return OptimizerKind::AdamW;
    throw FormatError(fmt::format("unknown optimizer '{}'", name));
}

const char* optimizer_name(OptimizerKind k) {
    return k == OptimizerKind::Adam ? "adam" : "adamw";
}

namespace {

void adam_core(Vec& params, const Vec& grad, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
    if (state.m.size() != params.size()) state.init(params.size());
    if (grad.size() != params.size()) throw Error("adam: gradient/parameter size mismatch");
    ++state.t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    // epsilon rides inside the bias-corrected denominator; at step one the
    // update is exactly -lr g / (|g| + eps sqrt(1 - beta2)).
    const double eps_t = eps * std::sqrt(bc2);
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps_t);
    }
}

}  // namespace

void adam_step(Vec& params, const Vec& grad, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
    adam_core(params, grad, state, lr, beta1, beta2, eps);
}

void adamw_step(Vec& params, const Vec& grad, AdamState& state, double lr, double beta1,
                double beta2, double eps, double weight_decay) {
    params *= 1.0 - lr * weight_decay;
    adam_core(params, grad, state, lr, beta1, beta2, eps);
}

}  // namespace lsim::train
