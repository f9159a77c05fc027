#pragma once

#include "jumpcap/model.hpp"
#include "jumpcap/net.hpp"

#include <cstdint>
#include <vector>

namespace jumpcap {

/// Feedback installation rule: a network maps (t, v, d, c) to two strictly
/// positive amplitudes (a1, a2), one per jump source.
class FeedbackPolicy final : public Policy {
public:
    /// The network must have input width 4, output width 2 and a softplus
    /// output transform; throws std::invalid_argument otherwise. Non-owning.
    explicit FeedbackPolicy(const MlpParams& net);
    void rates(double t, std::span<const SystemState> states,
               std::span<InstallRates> out) const override;

private:
    const MlpParams* net_;
};

/// Fresh policy network: (t,v,d,c) -> two hidden relu layers -> softplus pair.
MlpParams make_policy_net(int hidden_width, int hidden_layers, RngStream& rng);

struct ControlTrainConfig {
    int batch = 2000;
    int epochs = 50;
    double learning_rate = 1e-4;
    int hidden_width = 256;
    int hidden_layers = 2;
    std::uint64_t seed = 0;
    double scale = 1.0;      // desk-scale factor on the epoch count
    int eval_paths = 100000; // out-of-sample evaluation size

    int scaled_epochs() const;
    void validate() const;
};

struct RolloutResult {
    double loss = 0.0;               // batch mean discounted cost
    std::vector<double> path_costs;  // per-path totals (shortfall + terminal)
};

/// Simulates `batch` paths under the policy network and returns the mean
/// discounted shortfall plus terminal capacity cost. When `grads` is given
/// (zeroed, shaped like the net) it receives the exact pathwise gradient of
/// the mean loss: jumps are held fixed per scenario and the derivative flows
/// through the install amplitudes into the capacity recursion.
RolloutResult rollout_loss(const MlpParams& policy, const ModelParams& params,
                           const TimeGrid& grid, int batch, RngStream rng,
                           GradBundle* grads = nullptr, int threads = 1);

struct PolicyTrainResult {
    MlpParams policy;
    std::vector<double> loss_history; // pre-update loss per epoch
    McResult out_of_sample;           // fresh-seed evaluation of the final policy
};

/// One Adam update per epoch on a fresh batch, then a mandatory
/// out-of-sample Monte Carlo evaluation of the trained policy.
PolicyTrainResult train_policy(const ModelParams& params, const TimeGrid& grid,
                               const ControlTrainConfig& config, int threads = 1);

enum class StateAxis { time, v, d, c };

struct SurfacePoint {
    double x1 = 0.0;
    double x2 = 0.0;
    double a1 = 0.0;
    double a2 = 0.0;
};

/// Tabulates the two control outputs over a 2-D slice of (t, v, d, c); the
/// remaining coordinates stay at (0, x0).
std::vector<SurfacePoint> policy_surface(const MlpParams& policy, const ModelParams& params,
                                         StateAxis axis1, StateAxis axis2, int resolution);

const char* axis_name(StateAxis axis);

} // namespace jumpcap
