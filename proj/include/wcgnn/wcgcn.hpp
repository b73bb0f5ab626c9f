#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wcgnn/graph.hpp"
#include "wcgnn/nn/adam.hpp"
#include "wcgnn/nn/mlp.hpp"
#include "wcgnn/nn/tape.hpp"
#include "wcgnn/scenario.hpp"

namespace wcgnn {

// Output normalization applied after MLP2.
enum class Beta {
    sigmoid,          // power control, Nt = 1: state is a power fraction in (0, 1)
    ball_projection,  // beamforming: state is x / max(||x||, 1), 2Nt reals
};

// How channel coefficients enter the network. `modulus` replaces every
// complex coefficient by |h|; single-antenna rates depend only on |h|, and
// the phase noise of the raw re/im layout keeps power control from training.
enum class Encoding { complex, modulus };

// Neighborhood aggregation. MAX is the model; the others exist for ablations.
enum class Aggregation { max, sum, mean };

std::string to_string(Beta b);
Beta beta_from_string(const std::string& s);
std::string to_string(Aggregation a);
Aggregation aggregation_from_string(const std::string& s);
std::string to_string(Encoding e);
Encoding encoding_from_string(const std::string& s);

struct WcgcnConfig {
    std::size_t num_antennas = 1;
    Beta beta = Beta::sigmoid;
    Aggregation aggregation = Aggregation::max;
    Encoding encoding = Encoding::modulus;
    // Messages also carry the sender's static node block, so MLP1 sees
    // [state_j, node_j, e_ji]. On for power control, off for beamforming.
    bool sender_features = true;
    // Include sigma^2 in the static block. Features are noise-normalized by
    // default, which makes it a constant, so it is off unless asked for.
    bool noise_feature = false;
    std::size_t num_layers = 3;
    std::vector<std::size_t> mlp1_hidden{32, 32};  // includes MLP1's output width
    std::vector<std::size_t> mlp2_hidden{16};      // MLP2's output width is the state width
    double pmax = 1.0;

    // Defaults for beamforming: MLP1 {6Nt, 64, 64}, MLP2 {.., 32, 2Nt}.
    static WcgcnConfig beamforming(std::size_t nt);
    static WcgcnConfig power_control();

    std::size_t state_width() const { return beta == Beta::sigmoid ? 1 : 2 * num_antennas; }
    std::size_t channel_width() const { return encoding == Encoding::complex ? 2 * num_antennas : num_antennas; }
    std::size_t node_width() const { return channel_width() + 1 + (noise_feature ? 1 : 0); }
    std::size_t edge_width() const { return 2 * channel_width(); }
    std::vector<std::size_t> mlp1_widths() const;
    std::vector<std::size_t> mlp2_widths() const;

    void validate() const;
};

void to_json(nlohmann::json& j, const WcgcnConfig& c);
void from_json(const nlohmann::json& j, WcgcnConfig& c);

/// Trainable parameters. One MLP1/MLP2 pair is shared by every layer.
struct WcgcnParams {
    WcgcnConfig config;
    nn::MlpParams mlp1;
    nn::MlpParams mlp2;

    // Fixed order: mlp1 (W0, b0, W1, b1, ...), then mlp2.
    std::vector<nn::Tensor*> tensors();
    std::vector<const nn::Tensor*> tensors() const;
    std::size_t num_parameters() const { return mlp1.num_parameters() + mlp2.num_parameters(); }

    bool operator==(const WcgcnParams& o) const { return mlp1 == o.mlp1 && mlp2 == o.mlp2; }
};

WcgcnParams init_params(const WcgcnConfig& cfg, Rng& rng);
WcgcnParams zero_params(const WcgcnConfig& cfg);

void save_checkpoint(const WcgcnParams& p, const std::filesystem::path& path);
WcgcnParams load_checkpoint(const std::filesystem::path& path);

/// Disjoint union of graphs laid out for vectorized message passing, plus
/// the full-channel constants the training loss needs.
struct GraphBatch {
    std::size_t num_graphs = 0;
    std::size_t num_nodes = 0;
    std::size_t num_antennas = 1;
    std::vector<std::size_t> node_offset;  // first global node id of each graph
    nn::Tensor node_features;              // N x node_width()
    nn::Tensor edge_features;              // E x edge_width()
    nn::IndexList edge_src;
    nn::IndexList edge_dst;
    nn::Tensor in_degree_inv;              // N x 1, used by mean aggregation
    nn::Tensor init_state;                 // N x state width

    // Full-CSI rate terms. Interference pairs (j -> k, j != k) in global ids.
    bool has_channel = false;
    nn::IndexList pair_src;
    nn::IndexList pair_dst;
    nn::Tensor pair_gain;    // P x 1, |h_jk|^2 (power-control form)
    nn::Tensor direct_gain;  // N x 1, |h_kk|^2
    nn::Tensor pair_re;      // P x 2Nt, re(h^H v) = <pair_re, [re v, im v]>
    nn::Tensor pair_im;      // P x 2Nt
    nn::Tensor direct_re;    // N x 2Nt
    nn::Tensor direct_im;    // N x 2Nt
    nn::Tensor weights;      // N x 1
    nn::Tensor noise;        // N x 1
};

// State the first layer consumes: 0.5 for sigmoid, the maximum-ratio
// direction h_kk / ||h_kk|| for ball projection.
nn::Tensor initial_state(const WcgcnConfig& cfg, const WirelessGraph& g);

GraphBatch make_batch(const WcgcnConfig& cfg, std::span<const WirelessGraph* const> graphs,
                      std::span<const ChannelRealization* const> channels = {});

// Parameters bound to one tape.
struct BoundParams {
    const WcgcnConfig* config = nullptr;
    nn::MlpVars mlp1;
    nn::MlpVars mlp2;
};

BoundParams bind(nn::Tape& tape, const WcgcnParams& p);

// Constant graph tensors of one batch placed on a tape once per forward.
struct BatchVars {
    nn::Var node_features;
    nn::Var edge_features;
    nn::Var in_degree_inv;
};

BatchVars bind(nn::Tape& tape, const GraphBatch& b);

nn::Var layer_forward(nn::Tape& tape, const BoundParams& p, const GraphBatch& b, const BatchVars& bv,
                      nn::Var state);

// Runs config.num_layers (or `layers` when nonzero) shared-weight layers.
nn::Var network_forward(nn::Tape& tape, const BoundParams& p, const GraphBatch& b, const BatchVars& bv,
                        std::size_t layers = 0);

// Mean over graphs of the negative weighted sum rate on the full channel.
nn::Var unsup_loss(nn::Tape& tape, const BoundParams& p, const GraphBatch& b, nn::Var final_state);

// Converts a final state of graph `graph_index` to beamformers.
Allocation state_to_allocation(const WcgcnConfig& cfg, const GraphBatch& b, const nn::Tensor& state,
                               std::size_t graph_index = 0);

// Single-graph conveniences.
nn::Tensor layer_forward(const WcgcnParams& p, const WirelessGraph& g, const nn::Tensor& state);
Allocation network_forward(const WcgcnParams& p, const WirelessGraph& g, std::size_t layers = 0);

struct InferResult {
    Allocation allocation;
    double wall_time_s = 0.0;
};

InferResult infer(const WcgcnParams& p, const WirelessGraph& g);

// Graph the model sees, paired with the full channel the loss is scored on.
struct TrainingSample {
    WirelessGraph graph;
    ChannelRealization channel;
};

std::vector<TrainingSample> make_samples(const Dataset& ds, const GraphOptions& opts);

// Loss on a batch, and the gradient w.r.t. params.tensors() order.
struct LossAndGrad {
    double loss = 0.0;
    std::vector<nn::Tensor> grads;
};

double unsup_loss(const WcgcnParams& p, std::span<const TrainingSample> batch);
LossAndGrad unsup_loss_and_grad(const WcgcnParams& p, std::span<const TrainingSample> batch);

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    nn::AdamConfig adam{};
    // When set, the learning rate decays geometrically from adam.lr in the
    // first epoch to lr_final in the last.
    std::optional<double> lr_final;
    // Each mini-batch is split into this many tapes whose gradients are
    // summed in chunk order; results depend on grad_chunks, not on threads.
    std::size_t grad_chunks = 1;
    std::size_t threads = 1;
    std::function<void(std::size_t epoch, double mean_loss)> on_epoch;
};

struct TrainResult {
    std::vector<double> epoch_loss;
    std::size_t steps = 0;
};

// Mini-batch adam on unsup_loss, reshuffling every epoch. Throws
// NumericalError on a non-finite loss.
TrainResult train(WcgcnParams& params, std::span<const TrainingSample> data, const TrainConfig& cfg, Rng& rng);

}  // namespace wcgnn
