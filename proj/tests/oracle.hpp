#pragma once

// Independent loop-level re-implementation of the WCGCN forward pass and the
// unsupervised loss, templated on the scalar type. Used as a test oracle and,
// in quad precision, for finite differences whose roundoff stays far below
// the gradients being checked.

#include <algorithm>
#include <cmath>
#include <span>
#include <type_traits>
#include <vector>

#if defined(__SIZEOF_FLOAT128__) && !defined(__clang__)
#include <quadmath.h>
#define WCGNN_ORACLE_QUAD 1
#endif

#include "wcgnn/wcgcn.hpp"

namespace oracle {

#if WCGNN_ORACLE_QUAD
using quad = __float128;
#else
using quad = long double;
#endif

template <class T>
T exp_(T x) {
#if WCGNN_ORACLE_QUAD
    if constexpr (std::is_same_v<T, __float128>) return expq(x);
    else
#endif
        return std::exp(x);
}

template <class T>
T sqrt_(T x) {
#if WCGNN_ORACLE_QUAD
    if constexpr (std::is_same_v<T, __float128>) return sqrtq(x);
    else
#endif
        return std::sqrt(x);
}

template <class T>
T log2_(T x) {
#if WCGNN_ORACLE_QUAD
    if constexpr (std::is_same_v<T, __float128>) return log2q(x);
    else
#endif
        return std::log2(x);
}

template <class T>
struct Layer {
    std::vector<std::vector<T>> w;  // in x out
    std::vector<T> b;
};

template <class T>
using Mlp = std::vector<Layer<T>>;

template <class T>
Mlp<T> convert(const wcgnn::nn::MlpParams& p) {
    Mlp<T> out;
    for (std::size_t l = 0; l < p.num_layers(); ++l) {
        Layer<T> layer;
        const auto& w = p.weights[l];
        layer.w.assign(w.rows(), std::vector<T>(w.cols()));
        for (std::size_t i = 0; i < w.rows(); ++i) {
            for (std::size_t o = 0; o < w.cols(); ++o) layer.w[i][o] = static_cast<T>(w(i, o));
        }
        for (double b : p.biases[l].buffer()) layer.b.push_back(static_cast<T>(b));
        out.push_back(std::move(layer));
    }
    return out;
}

template <class T>
std::vector<T> run(const Mlp<T>& m, std::vector<T> x) {
    for (std::size_t l = 0; l < m.size(); ++l) {
        std::vector<T> y = m[l].b;
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (std::size_t o = 0; o < y.size(); ++o) y[o] += x[i] * m[l].w[i][o];
        }
        if (l + 1 < m.size()) {
            for (T& v : y) v = std::max(v, T(0));
        }
        x = std::move(y);
    }
    return x;
}

template <class T>
struct Model {
    wcgnn::WcgcnConfig cfg;
    Mlp<T> mlp1, mlp2;
};

template <class T>
Model<T> convert(const wcgnn::WcgcnParams& p) {
    return {p.config, convert<T>(p.mlp1), convert<T>(p.mlp2)};
}

// Channel block of a raw feature row: complex re/im, or moduli.
template <class T>
std::vector<T> encode(const wcgnn::WcgcnConfig& cfg, std::span<const double> re_im, std::size_t nt) {
    std::vector<T> out;
    for (std::size_t n = 0; n < nt; ++n) {
        if (cfg.encoding == wcgnn::Encoding::complex) continue;
        const T re = static_cast<T>(re_im[n]);
        const T im = static_cast<T>(re_im[nt + n]);
        out.push_back(sqrt_(re * re + im * im));
    }
    if (cfg.encoding == wcgnn::Encoding::complex) {
        for (std::size_t n = 0; n < 2 * nt; ++n) out.push_back(static_cast<T>(re_im[n]));
    }
    return out;
}

// Final per-node state (width 1 for sigmoid, 2Nt for projection).
template <class T>
std::vector<std::vector<T>> forward(const Model<T>& m, const wcgnn::WirelessGraph& g) {
    const std::size_t nt = g.num_antennas;
    const std::size_t sw = m.cfg.state_width();
    const bool sigmoid = m.cfg.beta == wcgnn::Beta::sigmoid;
    std::vector<std::vector<T>> node(g.num_nodes), state(g.num_nodes);
    for (std::size_t k = 0; k < g.num_nodes; ++k) {
        const auto row = g.node_row(k);
        node[k] = encode<T>(m.cfg, row, nt);
        node[k].push_back(static_cast<T>(row[2 * nt]));
        if (m.cfg.noise_feature) node[k].push_back(static_cast<T>(row[2 * nt + 1]));
        if (sigmoid) {
            state[k] = {T(0.5)};
        } else {
            T norm = 0;
            for (std::size_t n = 0; n < 2 * nt; ++n) norm += static_cast<T>(row[n]) * static_cast<T>(row[n]);
            norm = sqrt_(norm);
            for (std::size_t n = 0; n < 2 * nt; ++n) state[k].push_back(static_cast<T>(row[n]) / norm);
        }
    }
    for (std::size_t layer = 0; layer < m.cfg.num_layers; ++layer) {
        std::vector<std::vector<T>> next(g.num_nodes);
        for (std::size_t i = 0; i < g.num_nodes; ++i) {
            std::vector<T> agg;
            for (std::size_t e = 0; e < g.num_edges(); ++e) {
                if (g.edges[e].dst != i) continue;
                std::vector<T> in = state[g.edges[e].src];
                if (m.cfg.sender_features) in.insert(in.end(), node[g.edges[e].src].begin(), node[g.edges[e].src].end());
                const auto ef = g.edge_row(e);
                const auto a = encode<T>(m.cfg, ef.subspan(0, 2 * nt), nt);
                const auto b = encode<T>(m.cfg, ef.subspan(2 * nt, 2 * nt), nt);
                in.insert(in.end(), a.begin(), a.end());
                in.insert(in.end(), b.begin(), b.end());
                const std::vector<T> msg = run(m.mlp1, in);
                if (agg.empty()) {
                    agg = msg;
                } else {
                    for (std::size_t c = 0; c < agg.size(); ++c) agg[c] = std::max(agg[c], msg[c]);
                }
            }
            if (agg.empty()) agg.assign(m.mlp1.back().b.size(), T(0));
            std::vector<T> in = node[i];
            in.insert(in.end(), state[i].begin(), state[i].end());
            in.insert(in.end(), agg.begin(), agg.end());
            std::vector<T> y = run(m.mlp2, in);
            if (sigmoid) {
                next[i] = {T(1) / (T(1) + exp_(-y[0]))};
            } else {
                T norm = 0;
                for (T v : y) norm += v * v;
                norm = std::max(sqrt_(norm), T(1));
                for (T& v : y) v /= norm;
                next[i] = y;
            }
        }
        state = std::move(next);
        (void)sw;
    }
    return state;
}

// Weighted sum rate of the final states on the full channel.
template <class T>
T objective(const Model<T>& m, const std::vector<std::vector<T>>& state, const wcgnn::ChannelRealization& ch) {
    const std::size_t k = ch.num_pairs();
    const std::size_t nt = ch.num_antennas();
    const T pmax = static_cast<T>(m.cfg.pmax);
    // v[i] = [re (nt), im (nt)]
    std::vector<std::vector<T>> v(k, std::vector<T>(2 * nt, T(0)));
    for (std::size_t i = 0; i < k; ++i) {
        if (m.cfg.beta == wcgnn::Beta::sigmoid) {
            v[i][0] = sqrt_(state[i][0] * pmax);
        } else {
            for (std::size_t n = 0; n < 2 * nt; ++n) v[i][n] = sqrt_(pmax) * state[i][n];
        }
    }
    // |h(j, r)^H v_j|^2
    auto gain = [&](std::size_t j, std::size_t r) {
        T re = 0, im = 0;
        for (std::size_t n = 0; n < nt; ++n) {
            const auto h = ch.h(j, r)[n];
            const T hr = static_cast<T>(h.real());
            const T hi = static_cast<T>(h.imag());
            re += hr * v[j][n] + hi * v[j][nt + n];
            im += hr * v[j][nt + n] - hi * v[j][n];
        }
        return re * re + im * im;
    };
    T total = 0;
    for (std::size_t r = 0; r < k; ++r) {
        T interf = 0;
        for (std::size_t j = 0; j < k; ++j) {
            if (j != r) interf += gain(j, r);
        }
        const T sinr = gain(r, r) / (interf + static_cast<T>(ch.noise[r]));
        total += static_cast<T>(ch.weights[r]) * log2_(T(1) + sinr);
    }
    return total;
}

template <class T>
T loss(const Model<T>& m, std::span<const wcgnn::TrainingSample> batch) {
    T total = 0;
    for (const auto& s : batch) total -= objective(m, forward(m, s.graph), s.channel);
    return total / static_cast<T>(batch.size());
}

// Parameter slot of tensor `t`, entry `i`, in WcgcnParams::tensors() order.
template <class T>
T& slot(Model<T>& m, std::size_t t, std::size_t i) {
    Mlp<T>& mlp = t < 2 * m.mlp1.size() ? m.mlp1 : m.mlp2;
    const std::size_t local = t < 2 * m.mlp1.size() ? t : t - 2 * m.mlp1.size();
    Layer<T>& layer = mlp[local / 2];
    if (local % 2 == 1) return layer.b[i];
    const std::size_t cols = layer.b.size();
    return layer.w[i / cols][i % cols];
}

}  // namespace oracle
