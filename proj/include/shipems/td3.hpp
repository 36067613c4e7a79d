#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "shipems/config.hpp"
#include "shipems/dense_net.hpp"
#include "shipems/rng.hpp"

namespace shipems {

struct Transition {
    std::vector<double> s;
    std::vector<double> a;
    double r = 0.0;
    std::vector<double> s_next;
    bool terminal = false;
};

// Fixed-capacity ring buffer; the oldest transition is overwritten first.
class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ < 1) throw std::invalid_argument("replay capacity must be >= 1");
    }

    void push(Transition t) {
        if (!std::isfinite(t.r)) throw std::invalid_argument("non-finite reward");
        if (data_.size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[cursor_] = std::move(t);
        }
        cursor_ = (cursor_ + 1) % capacity_;
    }

    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& operator[](std::size_t i) const { return data_[i]; }

    // k distinct indices, uniform over subsets (Floyd's algorithm).
    void sample_indices(std::size_t k, Rng& rng, std::vector<std::size_t>& out) const {
        const std::size_t n = data_.size();
        if (k > n) throw std::invalid_argument("batch larger than replay size");
        out.clear();
        picked_.clear();
        for (std::size_t j = n - k; j < n; ++j) {
            const std::size_t t = rng.uniform_index(j + 1);
            if (picked_.insert(t).second) {
                out.push_back(t);
            } else {
                picked_.insert(j);
                out.push_back(j);
            }
        }
    }

private:
    std::size_t capacity_;
    std::size_t cursor_ = 0;
    std::vector<Transition> data_;
    mutable std::unordered_set<std::size_t> picked_;
};

// Huber loss on temporal-difference errors: quadratic inside |delta| < 1,
// linear outside.
inline double huber_value(double delta) {
    const double ad = std::abs(delta);
    return ad < 1.0 ? 0.5 * delta * delta : ad - 0.5;
}

inline double huber_grad(double delta) {
    if (std::abs(delta) < 1.0) return delta;
    return delta > 0.0 ? 1.0 : -1.0;
}

struct HuberResult {
    double loss = 0.0;  // mean over the batch
    std::vector<double> grads;
};

inline HuberResult huber_loss(std::span<const double> deltas) {
    HuberResult r;
    r.grads.reserve(deltas.size());
    for (double d : deltas) {
        r.loss += huber_value(d);
        r.grads.push_back(huber_grad(d));
    }
    if (!deltas.empty()) r.loss /= static_cast<double>(deltas.size());
    return r;
}

struct TrainDiagnostics {
    bool updated = false;
    double critic1_loss = 0.0;
    double critic2_loss = 0.0;
    double actor_objective = 0.0;  // mean Q1(s, pi(s)) at the last actor update
    double mean_abs_td = 0.0;
    std::uint64_t critic_updates = 0;
    std::uint64_t actor_updates = 0;
};

// Twin-delayed deterministic policy gradient agent: two critics trained on
// Huber loss against clipped double-Q targets with target-policy smoothing,
// a delayed actor trained on the deterministic policy gradient, and
// soft-updated target copies of all three networks.
class Td3Agent {
public:
    Td3Agent(int state_dim, int action_dim, double action_limit, const Td3Config& cfg,
             std::uint64_t seed, std::vector<double> obs_scale = {})
        : cfg_(cfg),
          state_dim_(state_dim),
          action_dim_(action_dim),
          action_limit_(action_limit),
          obs_scale_(std::move(obs_scale)),
          rng_(seed),
          replay_(cfg.replay_capacity) {
        cfg_.validate();
        if (obs_scale_.empty()) obs_scale_.assign(static_cast<std::size_t>(state_dim), 1.0);
        if (obs_scale_.size() != static_cast<std::size_t>(state_dim))
            throw std::invalid_argument("obs_scale size must match state dimension");
        actor_ = make_actor(state_dim, cfg_.hidden_units, action_dim, action_limit, rng_);
        critic1_ = make_critic(state_dim, action_dim, cfg_.hidden_units, rng_);
        critic2_ = make_critic(state_dim, action_dim, cfg_.hidden_units, rng_);
        actor_target_ = actor_;
        critic1_target_ = critic1_;
        critic2_target_ = critic2_;
        actor_adam_ = make_adam(actor_, cfg_.actor_lr, cfg_.adam_beta1, cfg_.adam_beta2,
                                cfg_.adam_epsilon);
        critic1_adam_ = make_adam(critic1_, cfg_.critic_lr, cfg_.adam_beta1, cfg_.adam_beta2,
                                  cfg_.adam_epsilon);
        critic2_adam_ = make_adam(critic2_, cfg_.critic_lr, cfg_.adam_beta1, cfg_.adam_beta2,
                                  cfg_.adam_epsilon);
        actor_grads_ = make_gradients(actor_);
        critic_grads_ = make_gradients(critic1_);
        critic_input_grads_ = make_gradients(critic1_);
    }

    int state_dim() const { return state_dim_; }
    int action_dim() const { return action_dim_; }
    double action_limit() const { return action_limit_; }
    const Td3Config& config() const { return cfg_; }
    const ReplayMemory& replay() const { return replay_; }
    std::uint64_t env_steps() const { return env_steps_; }
    std::uint64_t critic_updates() const { return critic_updates_; }
    std::uint64_t actor_updates() const { return actor_updates_; }
    const DenseNet& actor() const { return actor_; }
    const DenseNet& critic1() const { return critic1_; }
    const DenseNet& critic2() const { return critic2_; }
    const DenseNet& actor_target() const { return actor_target_; }
    const DenseNet& critic1_target() const { return critic1_target_; }
    const DenseNet& critic2_target() const { return critic2_target_; }

    void set_config_hash(std::uint64_t h) { config_hash_ = h; }
    std::uint64_t config_hash() const { return config_hash_; }

    // Deterministic policy action (no exploration, no state mutation).
    std::vector<double> policy_action(std::span<const double> state) const {
        std::vector<double> scaled = scale_state(state);
        return forward(actor_, scaled);
    }

    // Exploration adds per-component Gaussian noise; the summed action is
    // clipped back into the action bounds. During warmup the action is drawn
    // uniformly inside the bounds instead.
    std::vector<double> select_action(std::span<const double> state, bool explore) {
        if (explore && env_steps_ < static_cast<std::uint64_t>(cfg_.warmup_steps)) {
            std::vector<double> a(static_cast<std::size_t>(action_dim_));
            for (auto& v : a) v = rng_.uniform(-action_limit_, action_limit_);
            return a;
        }
        std::vector<double> a = policy_action(state);
        if (explore) {
            for (auto& v : a) {
                v += rng_.normal(0.0, cfg_.exploration_sigma);
                v = std::clamp(v, -action_limit_, action_limit_);
            }
        }
        return a;
    }

    // Store a transition and run the update schedule.
    TrainDiagnostics observe(const Transition& t) {
        if (t.s.size() != static_cast<std::size_t>(state_dim_) ||
            t.s_next.size() != static_cast<std::size_t>(state_dim_) ||
            t.a.size() != static_cast<std::size_t>(action_dim_))
            throw std::invalid_argument("transition dimension mismatch");
        replay_.push(t);
        ++env_steps_;
        TrainDiagnostics d;
        d.critic_updates = critic_updates_;
        d.actor_updates = actor_updates_;
        if (env_steps_ % static_cast<std::uint64_t>(cfg_.update_interval) != 0) return d;
        const std::size_t need = std::max<std::size_t>(
            static_cast<std::size_t>(cfg_.batch_size),
            static_cast<std::size_t>(cfg_.warmup_steps));
        if (replay_.size() < std::max<std::size_t>(need, 1)) return d;  // warmup: no-op
        return train_step();
    }

    struct TargetBatch {
        std::vector<double> y;
        std::vector<double> q1, q2;  // target-critic values at the smoothed action
        std::vector<std::vector<double>> smoothed_actions;
    };

    // Clipped double-Q targets with target-policy smoothing:
    // a~ = clip(pi'(s') + clip(eps, -c, c), -a_M, a_M),
    // y  = r                  for terminal transitions,
    //      r + g*min(Q1', Q2') otherwise.
    TargetBatch compute_target(std::span<const std::size_t> indices) {
        TargetBatch out;
        out.y.reserve(indices.size());
        std::vector<double> sa(static_cast<std::size_t>(state_dim_ + action_dim_));
        for (std::size_t idx : indices) {
            const Transition& t = replay_[idx];
            std::vector<double> s_next = scale_state(t.s_next);
            std::vector<double> a_t = forward(actor_target_, s_next);
            for (auto& v : a_t) {
                const double eps =
                    std::clamp(rng_.normal(0.0, cfg_.smoothing_sigma), -cfg_.noise_clip,
                               cfg_.noise_clip);
                v = std::clamp(v + eps, -action_limit_, action_limit_);
            }
            std::copy(s_next.begin(), s_next.end(), sa.begin());
            std::copy(a_t.begin(), a_t.end(), sa.begin() + state_dim_);
            const double q1 = forward(critic1_target_, sa)[0];
            const double q2 = forward(critic2_target_, sa)[0];
            const double bootstrap = t.terminal ? 0.0 : cfg_.gamma * std::min(q1, q2);
            out.y.push_back(t.r + bootstrap);
            out.q1.push_back(q1);
            out.q2.push_back(q2);
            out.smoothed_actions.push_back(std::move(a_t));
        }
        return out;
    }

    void save(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write agent checkpoint: " + path);
        os.write("SEMSAGT1", 8);
        write_u32(os, 1);
        write_u64(os, config_hash_);
        write_u32(os, static_cast<std::uint32_t>(state_dim_));
        write_u32(os, static_cast<std::uint32_t>(action_dim_));
        write_f64(os, action_limit_);
        write_f64_vec(os, obs_scale_);
        write_u64(os, env_steps_);
        write_u64(os, critic_updates_);
        write_u64(os, actor_updates_);
        save_net(os, actor_, &actor_adam_);
        save_net(os, critic1_, &critic1_adam_);
        save_net(os, critic2_, &critic2_adam_);
        save_net(os, actor_target_);
        save_net(os, critic1_target_);
        save_net(os, critic2_target_);
        if (!os) throw std::runtime_error("write failed: " + path);
    }

    static Td3Agent load(const std::string& path, const Td3Config& cfg,
                         std::uint64_t seed = 0) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw std::runtime_error("cannot open agent checkpoint: " + path);
        char magic[8];
        is.read(magic, 8);
        if (!is || std::string(magic, 8) != "SEMSAGT1")
            throw std::runtime_error(path + ": not an agent checkpoint");
        if (read_u32(is) != 1) throw std::runtime_error("unsupported agent checkpoint version");
        const std::uint64_t hash = read_u64(is);
        const int state_dim = static_cast<int>(read_u32(is));
        const int action_dim = static_cast<int>(read_u32(is));
        const double limit = read_f64(is);
        std::vector<double> obs_scale = read_f64_vec(is);

        Td3Agent agent(state_dim, action_dim, limit, cfg, seed, std::move(obs_scale));
        agent.config_hash_ = hash;
        agent.env_steps_ = read_u64(is);
        agent.critic_updates_ = read_u64(is);
        agent.actor_updates_ = read_u64(is);
        agent.actor_ = load_net(is, &agent.actor_adam_);
        agent.critic1_ = load_net(is, &agent.critic1_adam_);
        agent.critic2_ = load_net(is, &agent.critic2_adam_);
        agent.actor_target_ = load_net(is);
        agent.critic1_target_ = load_net(is);
        agent.critic2_target_ = load_net(is);
        return agent;
    }

private:
    std::vector<double> scale_state(std::span<const double> state) const {
        if (state.size() != static_cast<std::size_t>(state_dim_))
            throw std::invalid_argument("state dimension mismatch");
        std::vector<double> out(state.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = state[i] * obs_scale_[i];
        return out;
    }

    TrainDiagnostics train_step() {
        TrainDiagnostics d;
        d.updated = true;
        const std::size_t batch = static_cast<std::size_t>(cfg_.batch_size);
        replay_.sample_indices(batch, rng_, batch_indices_);
        const TargetBatch targets = compute_target(batch_indices_);

        // critic regression toward y on Huber loss
        std::vector<double> sa(static_cast<std::size_t>(state_dim_ + action_dim_));
        double abs_td = 0.0;
        DenseNet* critics[2] = {&critic1_, &critic2_};
        AdamState* adams[2] = {&critic1_adam_, &critic2_adam_};
        double losses[2] = {0.0, 0.0};
        for (int ci = 0; ci < 2; ++ci) {
            critic_grads_.zero();
            double loss = 0.0;
            for (std::size_t j = 0; j < batch; ++j) {
                const Transition& t = replay_[batch_indices_[j]];
                const std::vector<double> s = scale_state(t.s);
                std::copy(s.begin(), s.end(), sa.begin());
                std::copy(t.a.begin(), t.a.end(), sa.begin() + state_dim_);
                forward(*critics[ci], sa, critic_cache_);
                const double q = critic_cache_.output[0];
                const double delta = targets.y[j] - q;
                loss += huber_value(delta);
                if (ci == 0) abs_td += std::abs(delta);
                const double upstream = -huber_grad(delta) / static_cast<double>(batch);
                backward(*critics[ci], critic_cache_, std::span<const double>(&upstream, 1),
                         critic_grads_);
            }
            losses[ci] = loss / static_cast<double>(batch);
            adam_step(*critics[ci], critic_grads_, *adams[ci]);
        }
        d.critic1_loss = losses[0];
        d.critic2_loss = losses[1];
        d.mean_abs_td = abs_td / static_cast<double>(batch);
        ++critic_updates_;

        // delayed actor update and target refresh
        if (critic_updates_ % static_cast<std::uint64_t>(cfg_.policy_delay) == 0) {
            actor_grads_.zero();
            double objective = 0.0;
            for (std::size_t j = 0; j < batch; ++j) {
                const Transition& t = replay_[batch_indices_[j]];
                const std::vector<double> s = scale_state(t.s);
                forward(actor_, s, actor_cache_);
                std::copy(s.begin(), s.end(), sa.begin());
                std::copy(actor_cache_.output.begin(), actor_cache_.output.end(),
                          sa.begin() + state_dim_);
                forward(critic1_, sa, critic_cache_);
                objective += critic_cache_.output[0];
                critic_input_grads_.zero();
                const double one = 1.0;
                backward(critic1_, critic_cache_, std::span<const double>(&one, 1),
                         critic_input_grads_);
                // ascend mean Q: upstream for the actor is -dQ/da / batch
                actor_upstream_.resize(static_cast<std::size_t>(action_dim_));
                for (int k = 0; k < action_dim_; ++k)
                    actor_upstream_[static_cast<std::size_t>(k)] =
                        -critic_input_grads_.dinput[static_cast<std::size_t>(state_dim_ + k)] /
                        static_cast<double>(batch);
                backward(actor_, actor_cache_, actor_upstream_, actor_grads_);
            }
            adam_step(actor_, actor_grads_, actor_adam_);
            d.actor_objective = objective / static_cast<double>(batch);
            ++actor_updates_;
            soft_update(critic1_target_, critic1_, cfg_.tau);
            soft_update(critic2_target_, critic2_, cfg_.tau);
            soft_update(actor_target_, actor_, cfg_.tau);
        }
        d.critic_updates = critic_updates_;
        d.actor_updates = actor_updates_;
        return d;
    }

    Td3Config cfg_;
    int state_dim_;
    int action_dim_;
    double action_limit_;
    std::vector<double> obs_scale_;
    Rng rng_;
    ReplayMemory replay_;

    DenseNet actor_, critic1_, critic2_;
    DenseNet actor_target_, critic1_target_, critic2_target_;
    AdamState actor_adam_, critic1_adam_, critic2_adam_;

    std::uint64_t env_steps_ = 0;
    std::uint64_t critic_updates_ = 0;
    std::uint64_t actor_updates_ = 0;
    std::uint64_t config_hash_ = 0;

    // scratch
    std::vector<std::size_t> batch_indices_;
    ForwardCache critic_cache_, actor_cache_;
    Gradients critic_grads_, actor_grads_, critic_input_grads_;
    std::vector<double> actor_upstream_;
};

}  // namespace shipems
