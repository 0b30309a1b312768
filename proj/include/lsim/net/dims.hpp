#pragma once

#include "lsim/core.hpp"

namespace lsim::net {

// Scale/translate subnet shape: `depth` hidden layers of `width` units with
// SiLU activations and a linear output layer.
struct MlpDims {
    int in = 0, width = 0, depth = 0, out = 0;

    int param_count() const {
        if (depth == 0) return out * in + out;
        int c = width * in + width;
        c += (depth - 1) * (width * width + width);
        c += out * width + out;
        return c;
    }
};

struct NetDims {
    int n = 0;       // original state dimension
    int m = 0;       // latent dimension, m > n
    int layers = 0;  // coupling layers
    int width = 64;  // subnet hidden width
    int depth = 3;   // subnet hidden layers
    double clamp = 5.0;

    // Conditioner block size; for odd m the extra coordinate conditions.
    int cond_size() const { return (m + 1) / 2; }
    int trans_size() const { return m - cond_size(); }

    // Alternating partition: even layers condition on the leading block,
    // odd layers on the trailing block.
    void layer_blocks(int layer, int& cond_off, int& trans_off) const {
        if (layer % 2 == 0) {
            cond_off = 0;
            trans_off = cond_size();
        } else {
            cond_off = m - cond_size();
            trans_off = 0;
        }
    }

    MlpDims subnet() const { return {cond_size(), width, depth, trans_size()}; }

    int lift_param_count() const { return m * n; }
    int layer_param_count() const { return 2 * subnet().param_count(); }
    int phi_param_count() const { return layers * layer_param_count(); }
    int total_param_count() const { return lift_param_count() + phi_param_count(); }

    // Offset of a subnet's parameters: side 0 = scale, 1 = translate.
    int subnet_offset(int layer, int side) const {
        return lift_param_count() + layer * layer_param_count() + side * subnet().param_count();
    }

    void validate() const {
        if (n < 1 || m <= n) throw Error("net dims: latent dimension m must exceed n");
        if (layers < 1 || width < 1 || depth < 0 || clamp <= 0)
            throw Error("net dims: invalid layer/width/depth/clamp");
    }
};

}  // namespace lsim::net
