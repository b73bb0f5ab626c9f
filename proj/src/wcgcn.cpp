#include "wcgnn/wcgcn.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "wcgnn/error.hpp"
#include "wcgnn/nn/checkpoint.hpp"

namespace wcgnn {

using nn::IndexList;
using nn::Tape;
using nn::Tensor;
using nn::Var;

std::string to_string(Beta b) { return b == Beta::sigmoid ? "sigmoid" : "ball-projection"; }

Beta beta_from_string(const std::string& s) {
    if (s == "sigmoid") return Beta::sigmoid;
    if (s == "ball-projection" || s == "l2-ball-projection") return Beta::ball_projection;
    throw ConfigError("unknown beta '" + s + "'");
}

std::string to_string(Aggregation a) {
    switch (a) {
        case Aggregation::max: return "max";
        case Aggregation::sum: return "sum";
        case Aggregation::mean: return "mean";
    }
    return "unknown";
}

Aggregation aggregation_from_string(const std::string& s) {
    if (s == "max") return Aggregation::max;
    if (s == "sum") return Aggregation::sum;
    if (s == "mean") return Aggregation::mean;
    throw ConfigError("unknown aggregation '" + s + "'");
}

std::string to_string(Encoding e) { return e == Encoding::complex ? "complex" : "modulus"; }

Encoding encoding_from_string(const std::string& s) {
    if (s == "complex") return Encoding::complex;
    if (s == "modulus") return Encoding::modulus;
    throw ConfigError("unknown encoding '" + s + "'");
}

WcgcnConfig WcgcnConfig::beamforming(std::size_t nt) {
    WcgcnConfig c;
    c.num_antennas = nt;
    c.beta = Beta::ball_projection;
    c.encoding = Encoding::complex;
    c.sender_features = false;
    c.mlp1_hidden = {64, 64};
    c.mlp2_hidden = {32};
    return c;
}

WcgcnConfig WcgcnConfig::power_control() { return WcgcnConfig{}; }

std::vector<std::size_t> WcgcnConfig::mlp1_widths() const {
    std::vector<std::size_t> w{state_width() + (sender_features ? node_width() : 0) + edge_width()};
    w.insert(w.end(), mlp1_hidden.begin(), mlp1_hidden.end());
    return w;
}

std::vector<std::size_t> WcgcnConfig::mlp2_widths() const {
    std::vector<std::size_t> w{node_width() + state_width() + mlp1_hidden.back()};
    w.insert(w.end(), mlp2_hidden.begin(), mlp2_hidden.end());
    w.push_back(state_width());
    return w;
}

void WcgcnConfig::validate() const {
    if (num_antennas < 1) throw ConfigError("WCGCN: num_antennas must be >= 1");
    if (num_layers < 1) throw ConfigError("WCGCN: num_layers must be >= 1");
    if (mlp1_hidden.empty()) throw ConfigError("WCGCN: MLP1 needs at least one layer");
    if (beta == Beta::sigmoid && num_antennas != 1) {
        throw ConfigError("WCGCN: sigmoid normalization is the power-control head and needs Nt = 1");
    }
    if (!(pmax > 0.0)) throw ConfigError("WCGCN: pmax must be > 0");
}

void to_json(nlohmann::json& j, const WcgcnConfig& c) {
    j = nlohmann::json{{"num_antennas", c.num_antennas},
                       {"beta", to_string(c.beta)},
                       {"aggregation", to_string(c.aggregation)},
                       {"encoding", to_string(c.encoding)},
                       {"sender_features", c.sender_features},
                       {"noise_feature", c.noise_feature},
                       {"num_layers", c.num_layers},
                       {"mlp1_hidden", c.mlp1_hidden},
                       {"mlp2_hidden", c.mlp2_hidden},
                       {"mlp1_widths", c.mlp1_widths()},
                       {"mlp2_widths", c.mlp2_widths()},
                       {"pmax", c.pmax}};
}

void from_json(const nlohmann::json& j, WcgcnConfig& c) {
    const std::size_t nt = j.value("num_antennas", std::size_t{1});
    const Beta beta = beta_from_string(j.value("beta", std::string(nt == 1 ? "sigmoid" : "ball-projection")));
    c = beta == Beta::sigmoid ? WcgcnConfig::power_control() : WcgcnConfig::beamforming(nt);
    c.num_antennas = nt;
    c.beta = beta;
    c.aggregation = aggregation_from_string(j.value("aggregation", std::string("max")));
    if (j.contains("encoding")) c.encoding = encoding_from_string(j.at("encoding").get<std::string>());
    c.sender_features = j.value("sender_features", c.sender_features);
    c.noise_feature = j.value("noise_feature", c.noise_feature);
    c.num_layers = j.value("num_layers", c.num_layers);
    if (j.contains("mlp1_hidden")) j.at("mlp1_hidden").get_to(c.mlp1_hidden);
    if (j.contains("mlp2_hidden")) j.at("mlp2_hidden").get_to(c.mlp2_hidden);
    c.pmax = j.value("pmax", c.pmax);
}

std::vector<Tensor*> WcgcnParams::tensors() {
    std::vector<Tensor*> out;
    for (nn::MlpParams* m : {&mlp1, &mlp2}) {
        for (std::size_t l = 0; l < m->num_layers(); ++l) {
            out.push_back(&m->weights[l]);
            out.push_back(&m->biases[l]);
        }
    }
    return out;
}

std::vector<const Tensor*> WcgcnParams::tensors() const {
    std::vector<const Tensor*> out;
    for (const nn::MlpParams* m : {&mlp1, &mlp2}) {
        for (std::size_t l = 0; l < m->num_layers(); ++l) {
            out.push_back(&m->weights[l]);
            out.push_back(&m->biases[l]);
        }
    }
    return out;
}

WcgcnParams init_params(const WcgcnConfig& cfg, Rng& rng) {
    cfg.validate();
    WcgcnParams p;
    p.config = cfg;
    p.mlp1 = nn::init_glorot(cfg.mlp1_widths(), rng);
    p.mlp2 = nn::init_glorot(cfg.mlp2_widths(), rng);
    return p;
}

WcgcnParams zero_params(const WcgcnConfig& cfg) {
    cfg.validate();
    return {cfg, nn::zero_mlp(cfg.mlp1_widths()), nn::zero_mlp(cfg.mlp2_widths())};
}

void save_checkpoint(const WcgcnParams& p, const std::filesystem::path& path) {
    nn::save_tensors(path, p.tensors(), nlohmann::json{{"model", "wcgcn"}, {"config", p.config}});
}

WcgcnParams load_checkpoint(const std::filesystem::path& path) {
    nn::LoadedTensors loaded = nn::load_tensors(path);
    if (loaded.meta.value("model", std::string{}) != "wcgcn") throw IoError("checkpoint is not a WCGCN model");
    WcgcnParams p = zero_params(loaded.meta.at("config").get<WcgcnConfig>());
    auto slots = p.tensors();
    if (slots.size() != loaded.tensors.size()) throw IoError("checkpoint tensor count does not match its config");
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (!slots[i]->same_shape(loaded.tensors[i])) throw IoError("checkpoint tensor shape does not match its config");
        *slots[i] = std::move(loaded.tensors[i]);
    }
    return p;
}

Tensor initial_state(const WcgcnConfig& cfg, const WirelessGraph& g) {
    const std::size_t nt = g.num_antennas;
    if (nt != cfg.num_antennas) throw ShapeError("graph antenna count does not match the model");
    Tensor s(g.num_nodes, cfg.state_width());
    for (std::size_t k = 0; k < g.num_nodes; ++k) {
        if (cfg.beta == Beta::sigmoid) {
            s(k, 0) = 0.5;
            continue;
        }
        const auto row = g.node_row(k);
        double norm2 = 0.0;
        for (std::size_t n = 0; n < 2 * nt; ++n) norm2 += row[n] * row[n];
        if (norm2 == 0.0) continue;
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t n = 0; n < 2 * nt; ++n) s(k, n) = row[n] * inv;
    }
    return s;
}

GraphBatch make_batch(const WcgcnConfig& cfg, std::span<const WirelessGraph* const> graphs,
                      std::span<const ChannelRealization* const> channels) {
    cfg.validate();
    if (graphs.empty()) throw ConfigError("make_batch: empty batch");
    if (!channels.empty() && channels.size() != graphs.size()) {
        throw ShapeError("make_batch: one channel per graph required");
    }
    const std::size_t nt = cfg.num_antennas;
    GraphBatch b;
    b.num_graphs = graphs.size();
    b.num_antennas = nt;
    std::size_t n_nodes = 0;
    std::size_t n_edges = 0;
    for (const WirelessGraph* g : graphs) {
        if (g->num_antennas != nt) throw ShapeError("graph antenna count does not match the model");
        b.node_offset.push_back(n_nodes);
        n_nodes += g->num_nodes;
        n_edges += g->num_edges();
    }
    b.num_nodes = n_nodes;
    b.node_features = Tensor(n_nodes, cfg.node_width());
    b.edge_features = Tensor(n_edges, cfg.edge_width());
    b.init_state = Tensor(n_nodes, cfg.state_width());
    b.in_degree_inv = Tensor(n_nodes, 1);
    std::vector<std::size_t> src, dst;
    src.reserve(n_edges);
    dst.reserve(n_edges);

    std::size_t e_at = 0;
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const WirelessGraph& g = *graphs[gi];
        g.validate();
        const std::size_t off = b.node_offset[gi];
        for (std::size_t k = 0; k < g.num_nodes; ++k) {
            const auto row = g.node_row(k);
            double* out = b.node_features.data() + (off + k) * cfg.node_width();
            const std::size_t cw = cfg.channel_width();
            if (cfg.encoding == Encoding::complex) {
                std::copy(row.begin(), row.begin() + cw, out);
            } else {
                for (std::size_t n = 0; n < nt; ++n) out[n] = std::hypot(row[n], row[nt + n]);
            }
            out[cw] = row[2 * nt];
            if (cfg.noise_feature) out[cw + 1] = row[2 * nt + 1];
        }
        if (cfg.encoding == Encoding::complex) {
            std::copy(g.edge_features.begin(), g.edge_features.end(),
                      b.edge_features.data() + e_at * cfg.edge_width());
        } else {
            for (std::size_t e = 0; e < g.num_edges(); ++e) {
                const auto row = g.edge_row(e);
                double* out = b.edge_features.data() + (e_at + e) * cfg.edge_width();
                for (std::size_t blk = 0; blk < 2; ++blk) {
                    for (std::size_t n = 0; n < nt; ++n) {
                        out[blk * nt + n] = std::hypot(row[2 * nt * blk + n], row[2 * nt * blk + nt + n]);
                    }
                }
            }
        }
        const Tensor init = initial_state(cfg, g);
        std::copy(init.buffer().begin(), init.buffer().end(), b.init_state.data() + off * cfg.state_width());
        for (const Edge& e : g.edges) {
            src.push_back(off + e.src);
            dst.push_back(off + e.dst);
            b.in_degree_inv[off + e.dst] += 1.0;
        }
        e_at += g.num_edges();
    }
    for (double& d : b.in_degree_inv.buffer()) d = d > 0.0 ? 1.0 / d : 0.0;
    b.edge_src = nn::make_index(std::move(src));
    b.edge_dst = nn::make_index(std::move(dst));

    if (channels.empty()) return b;

    b.has_channel = true;
    std::size_t n_pairs = 0;
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const ChannelRealization& ch = *channels[gi];
        if (ch.num_pairs() != graphs[gi]->num_nodes || ch.num_antennas() != nt) {
            throw ShapeError("make_batch: channel does not match its graph");
        }
        n_pairs += ch.num_pairs() * (ch.num_pairs() - 1);
    }
    const std::size_t w = 2 * nt;
    b.pair_gain = Tensor(n_pairs, 1);
    b.direct_gain = Tensor(n_nodes, 1);
    b.pair_re = Tensor(n_pairs, w);
    b.pair_im = Tensor(n_pairs, w);
    b.direct_re = Tensor(n_nodes, w);
    b.direct_im = Tensor(n_nodes, w);
    b.weights = Tensor(n_nodes, 1);
    b.noise = Tensor(n_nodes, 1);
    std::vector<std::size_t> psrc, pdst;
    psrc.reserve(n_pairs);
    pdst.reserve(n_pairs);

    // Coefficients of re/im(h^H v) as linear forms in [re v, im v].
    auto fill_forms = [nt](const std::complex<double>* h, double* re, double* im) {
        for (std::size_t n = 0; n < nt; ++n) {
            re[n] = h[n].real();
            re[nt + n] = h[n].imag();
            im[n] = -h[n].imag();
            im[nt + n] = h[n].real();
        }
    };
    auto gain = [nt](const std::complex<double>* h) {
        double s = 0.0;
        for (std::size_t n = 0; n < nt; ++n) s += std::norm(h[n]);
        return s;
    };

    std::size_t p_at = 0;
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const ChannelRealization& ch = *channels[gi];
        const std::size_t off = b.node_offset[gi];
        const std::size_t k = ch.num_pairs();
        for (std::size_t r = 0; r < k; ++r) {
            b.weights[off + r] = ch.weights[r];
            b.noise[off + r] = ch.noise[r];
            b.direct_gain[off + r] = gain(ch.h(r, r));
            fill_forms(ch.h(r, r), b.direct_re.data() + (off + r) * w, b.direct_im.data() + (off + r) * w);
            for (std::size_t j = 0; j < k; ++j) {
                if (j == r) continue;
                psrc.push_back(off + j);
                pdst.push_back(off + r);
                b.pair_gain[p_at] = gain(ch.h(j, r));
                fill_forms(ch.h(j, r), b.pair_re.data() + p_at * w, b.pair_im.data() + p_at * w);
                ++p_at;
            }
        }
    }
    b.pair_src = nn::make_index(std::move(psrc));
    b.pair_dst = nn::make_index(std::move(pdst));
    return b;
}

BoundParams bind(Tape& tape, const WcgcnParams& p) {
    return {&p.config, nn::bind(tape, p.mlp1), nn::bind(tape, p.mlp2)};
}

BatchVars bind(Tape& tape, const GraphBatch& b) {
    return {tape.constant(b.node_features), tape.constant(b.edge_features), tape.constant(b.in_degree_inv)};
}

Var layer_forward(Tape& tape, const BoundParams& p, const GraphBatch& b, const BatchVars& bv, Var state) {
    const WcgcnConfig& cfg = *p.config;
    if (tape.value(state).rows() != b.num_nodes || tape.value(state).cols() != cfg.state_width()) {
        throw ShapeError("layer_forward: state has the wrong shape");
    }
    std::vector<Var> inputs{tape.gather_rows(state, b.edge_src)};
    if (cfg.sender_features) inputs.push_back(tape.gather_rows(bv.node_features, b.edge_src));
    inputs.push_back(bv.edge_features);
    const Var messages = nn::mlp_forward(tape, p.mlp1, tape.concat_cols(inputs));
    Var aggregate;
    switch (cfg.aggregation) {
        case Aggregation::max: aggregate = tape.segment_max(messages, b.edge_dst, b.num_nodes); break;
        case Aggregation::sum: aggregate = tape.segment_sum(messages, b.edge_dst, b.num_nodes); break;
        case Aggregation::mean: {
            const Var total = tape.segment_sum(messages, b.edge_dst, b.num_nodes);
            const Var inv = tape.matmul(bv.in_degree_inv, tape.constant(Tensor(1, tape.value(total).cols(), 1.0)));
            aggregate = tape.mul(total, inv);
            break;
        }
    }
    const Var y = nn::mlp_forward(tape, p.mlp2, tape.concat_cols({bv.node_features, state, aggregate}));
    return cfg.beta == Beta::sigmoid ? tape.sigmoid(y) : tape.ball_project(y);
}

Var network_forward(Tape& tape, const BoundParams& p, const GraphBatch& b, const BatchVars& bv,
                    std::size_t layers) {
    const std::size_t s = layers == 0 ? p.config->num_layers : layers;
    Var state = tape.constant(b.init_state);
    for (std::size_t l = 0; l < s; ++l) state = layer_forward(tape, p, b, bv, state);
    return state;
}

Var unsup_loss(Tape& tape, const BoundParams& p, const GraphBatch& b, Var final_state) {
    if (!b.has_channel) throw ConfigError("unsup_loss: batch was built without channels");
    const WcgcnConfig& cfg = *p.config;
    Var signal;
    Var interference;
    if (cfg.beta == Beta::sigmoid) {
        const Var power = tape.scale(final_state, cfg.pmax);
        signal = tape.mul(power, tape.constant(b.direct_gain));
        const Var received = tape.mul(tape.gather_rows(power, b.pair_src), tape.constant(b.pair_gain));
        interference = tape.segment_sum(received, b.pair_dst, b.num_nodes);
    } else {
        const Var v = tape.scale(final_state, std::sqrt(cfg.pmax));
        auto received_power = [&](Var beams, const Tensor& re_form, const Tensor& im_form) {
            const Var re = tape.row_sum(tape.mul(beams, tape.constant(re_form)));
            const Var im = tape.row_sum(tape.mul(beams, tape.constant(im_form)));
            return tape.add(tape.square(re), tape.square(im));
        };
        signal = received_power(v, b.direct_re, b.direct_im);
        const Var received = received_power(tape.gather_rows(v, b.pair_src), b.pair_re, b.pair_im);
        interference = tape.segment_sum(received, b.pair_dst, b.num_nodes);
    }
    const Var sinr = tape.div(signal, tape.add(interference, tape.constant(b.noise)));
    const Var rate = tape.scale(tape.log(tape.add_scalar(sinr, 1.0)), 1.0 / std::numbers::ln2);
    const Var weighted = tape.mul(rate, tape.constant(b.weights));
    return tape.scale(tape.sum(weighted), -1.0 / static_cast<double>(b.num_graphs));
}

Allocation state_to_allocation(const WcgcnConfig& cfg, const GraphBatch& b, const Tensor& state,
                               std::size_t graph_index) {
    const std::size_t off = b.node_offset.at(graph_index);
    const std::size_t end = graph_index + 1 < b.num_graphs ? b.node_offset[graph_index + 1] : b.num_nodes;
    const std::size_t nt = cfg.num_antennas;
    Allocation a(end - off, nt);
    for (std::size_t k = 0; k < end - off; ++k) {
        if (cfg.beta == Beta::sigmoid) {
            a.set(k, 0, std::sqrt(state(off + k, 0) * cfg.pmax));
            continue;
        }
        const double s = std::sqrt(cfg.pmax);
        for (std::size_t c = 0; c < 2 * nt; ++c) a.values[k * 2 * nt + c] = s * state(off + k, c);
    }
    return a;
}

Tensor layer_forward(const WcgcnParams& p, const WirelessGraph& g, const Tensor& state) {
    const WirelessGraph* gs[] = {&g};
    const GraphBatch b = make_batch(p.config, gs);
    Tape tape;
    const BoundParams bp = bind(tape, p);
    const BatchVars bv = bind(tape, b);
    return tape.value(layer_forward(tape, bp, b, bv, tape.constant(state)));
}

Allocation network_forward(const WcgcnParams& p, const WirelessGraph& g, std::size_t layers) {
    const WirelessGraph* gs[] = {&g};
    const GraphBatch b = make_batch(p.config, gs);
    Tape tape;
    const BoundParams bp = bind(tape, p);
    const BatchVars bv = bind(tape, b);
    const Var out = network_forward(tape, bp, b, bv, layers);
    return state_to_allocation(p.config, b, tape.value(out));
}

namespace {

// Per-batch tensors are large enough that glibc would serve each one with a
// fresh mmap and return it on free; raising the threshold keeps them on the heap.
void keep_large_blocks_on_heap() {
#if defined(__GLIBC__)
    static const bool done = [] {
        mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
        mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
        return true;
    }();
    (void)done;
#endif
}

}  // namespace

InferResult infer(const WcgcnParams& p, const WirelessGraph& g) {
    keep_large_blocks_on_heap();
    const auto start = std::chrono::steady_clock::now();
    InferResult r;
    r.allocation = network_forward(p, g);
    r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::vector<TrainingSample> make_samples(const Dataset& ds, const GraphOptions& opts) {
    std::vector<TrainingSample> out;
    out.reserve(ds.size());
    for (const Instance& inst : ds.instances) out.push_back({build_graph(ds.config, inst, opts), inst.channel});
    return out;
}

namespace {

// Loss and gradient of the samples in `chunk`, scaled as part of a batch of
// `batch_size` graphs.
LossAndGrad chunk_loss_and_grad(const WcgcnParams& p, std::span<const TrainingSample* const> chunk,
                                std::size_t batch_size, bool with_grad) {
    std::vector<const WirelessGraph*> graphs;
    std::vector<const ChannelRealization*> channels;
    for (const TrainingSample* s : chunk) {
        graphs.push_back(&s->graph);
        channels.push_back(&s->channel);
    }
    const GraphBatch b = make_batch(p.config, graphs, channels);
    Tape tape;
    const BoundParams bp = bind(tape, p);
    const BatchVars bv = bind(tape, b);
    const Var state = network_forward(tape, bp, b, bv);
    // unsup_loss averages over the chunk; rescale to the full batch.
    const double share = static_cast<double>(chunk.size()) / static_cast<double>(batch_size);
    const Var loss = tape.scale(unsup_loss(tape, bp, b, state), share);
    LossAndGrad out;
    out.loss = tape.value(loss)[0];
    if (!with_grad) return out;
    tape.backward(loss);
    for (const nn::MlpVars* m : {&bp.mlp1, &bp.mlp2}) {
        for (std::size_t l = 0; l < m->weights.size(); ++l) {
            out.grads.push_back(tape.grad(m->weights[l]));
            out.grads.push_back(tape.grad(m->biases[l]));
        }
    }
    // Parameters the loss never reached keep an empty grad; normalize to zeros.
    auto shapes = p.tensors();
    for (std::size_t i = 0; i < out.grads.size(); ++i) {
        if (out.grads[i].empty()) out.grads[i] = Tensor(shapes[i]->rows(), shapes[i]->cols());
    }
    return out;
}

LossAndGrad batch_loss_and_grad(const WcgcnParams& p, std::span<const TrainingSample* const> batch,
                                std::size_t chunks, std::size_t threads, bool with_grad) {
    chunks = std::max<std::size_t>(1, std::min(chunks, batch.size()));
    std::vector<LossAndGrad> parts(chunks);
    auto run = [&](std::size_t c) {
        const std::size_t lo = batch.size() * c / chunks;
        const std::size_t hi = batch.size() * (c + 1) / chunks;
        parts[c] = chunk_loss_and_grad(p, batch.subspan(lo, hi - lo), batch.size(), with_grad);
    };
    if (threads <= 1 || chunks == 1) {
        for (std::size_t c = 0; c < chunks; ++c) run(c);
    } else {
        for (std::size_t first = 0; first < chunks; first += threads) {
            std::vector<std::thread> pool;
            for (std::size_t c = first; c < std::min(chunks, first + threads); ++c) pool.emplace_back(run, c);
            for (auto& t : pool) t.join();
        }
    }
    LossAndGrad total = std::move(parts[0]);
    for (std::size_t c = 1; c < chunks; ++c) {
        total.loss += parts[c].loss;
        for (std::size_t i = 0; i < total.grads.size(); ++i) {
            for (std::size_t k = 0; k < total.grads[i].size(); ++k) total.grads[i][k] += parts[c].grads[i][k];
        }
    }
    return total;
}


std::vector<const TrainingSample*> pointers(std::span<const TrainingSample> batch) {
    std::vector<const TrainingSample*> out;
    out.reserve(batch.size());
    for (const TrainingSample& s : batch) out.push_back(&s);
    return out;
}

}  // namespace

double unsup_loss(const WcgcnParams& p, std::span<const TrainingSample> batch) {
    if (batch.empty()) throw ConfigError("unsup_loss: empty batch");
    const auto ptrs = pointers(batch);
    return batch_loss_and_grad(p, ptrs, 1, 1, false).loss;
}

LossAndGrad unsup_loss_and_grad(const WcgcnParams& p, std::span<const TrainingSample> batch) {
    if (batch.empty()) throw ConfigError("unsup_loss: empty batch");
    const auto ptrs = pointers(batch);
    return batch_loss_and_grad(p, ptrs, 1, 1, true);
}

TrainResult train(WcgcnParams& params, std::span<const TrainingSample> data, const TrainConfig& cfg, Rng& rng) {
    if (data.empty()) throw ConfigError("train: empty dataset");
    if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    params.config.validate();
    keep_large_blocks_on_heap();

    auto slots = params.tensors();
    nn::AdamState adam(cfg.adam, slots);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    std::vector<const TrainingSample*> batch;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.lr_final && cfg.epochs > 1) {
            const double frac = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
            adam.set_learning_rate(cfg.adam.lr * std::pow(*cfg.lr_final / cfg.adam.lr, frac));
        }
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(&data[order[i]]);
            LossAndGrad lg = batch_loss_and_grad(params, batch, cfg.grad_chunks, cfg.threads, true);
            if (!std::isfinite(lg.loss)) {
                std::ostringstream msg;
                msg << "train: non-finite loss at epoch " << epoch << ", batch " << batches << " (loss " << lg.loss
                    << ")";
                throw NumericalError(msg.str());
            }
            adam.step(slots, lg.grads);
            loss_sum += lg.loss;
            ++batches;
            ++result.steps;
        }
        result.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
        if (cfg.on_epoch) cfg.on_epoch(epoch, result.epoch_loss.back());
    }
    return result;
}

}  // namespace wcgnn
