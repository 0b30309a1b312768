#pragma once

#include "lsim/core.hpp"

#include <string>

namespace lsim::train {

enum class OptimizerKind { Adam, AdamW };

OptimizerKind optimizer_from_name(const std::string& name);
const char* optimizer_name(OptimizerKind k);

struct AdamState {
    Vec m, v;
    long t = 0;

    void init(Eigen::Index n) {
        m = Vec::Zero(n);
        v = Vec::Zero(n);
        t = 0;
    }
};

// Bias-corrected Adam update.
void adam_step(Vec& params, const Vec& grad, AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

// Adam plus decoupled weight decay: p -= lr * lambda * p.
void adamw_step(Vec& params, const Vec& grad, AdamState& state, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8, double weight_decay = 0.0);

}  // namespace lsim::train
