#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace memerl {

struct AdamWConfig {
    double learning_rate = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 0.1;
    double grad_clip = 1.0;  // max global L2 norm; <= 0 disables
};

void validate(const AdamWConfig& config);

/// Learning-rate multiplier: linear warm-up over ceil(warmup_ratio * total) steps, then cosine decay to 0.
double cosine_schedule(std::size_t step, std::size_t total_steps, double warmup_ratio);

/// Scales `grad` in place so its L2 norm is at most `max_norm`; returns the norm before clipping.
double clip_grad_norm(Eigen::Ref<Eigen::VectorXd> grad, double max_norm);

/// Adam with decoupled weight decay over a flat parameter vector.
class AdamW {
public:
    AdamW(std::size_t num_params, AdamWConfig config);

    /// One update with learning rate config.learning_rate * lr_scale. Clips `grad` first.
    void step(Eigen::Ref<Eigen::VectorXd> params, Eigen::Ref<Eigen::VectorXd> grad, double lr_scale = 1.0);

    const AdamWConfig& config() const { return config_; }
    std::size_t steps_taken() const { return t_; }

    // Optimizer state, exposed for resumable runs.
    const Eigen::VectorXd& first_moment() const { return m_; }
    const Eigen::VectorXd& second_moment() const { return v_; }
    void restore(Eigen::VectorXd m, Eigen::VectorXd v, std::size_t t);

private:
    AdamWConfig config_;
    Eigen::VectorXd m_;
    Eigen::VectorXd v_;
    std::size_t t_ = 0;
};

}  // namespace memerl
