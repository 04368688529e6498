#include "memerl/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "memerl/errors.hpp"

namespace memerl {

void validate(const AdamWConfig& c) {
    if (!(c.learning_rate > 0)) throw InvalidConfig("learning rate must be positive");
    if (!(c.beta1 >= 0 && c.beta1 < 1 && c.beta2 >= 0 && c.beta2 < 1)) throw InvalidConfig("adam betas must lie in [0, 1)");
    if (!(c.eps > 0)) throw InvalidConfig("adam eps must be positive");
    if (c.weight_decay < 0) throw InvalidConfig("weight decay must be non-negative");
}

double cosine_schedule(std::size_t step, std::size_t total_steps, double warmup_ratio) {
    if (total_steps == 0) return 1.0;
    const auto warmup = static_cast<std::size_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps)));
    if (step < warmup) return static_cast<double>(step + 1) / static_cast<double>(warmup);
    const double span = static_cast<double>(total_steps - warmup);
    if (span <= 0) return 1.0;
    const double progress = static_cast<double>(step - warmup) / span;
    return 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
}

double clip_grad_norm(Eigen::Ref<Eigen::VectorXd> grad, double max_norm) {
    const double norm = grad.norm();
    if (max_norm > 0 && norm > max_norm) grad *= max_norm / norm;
    return norm;
}

AdamW::AdamW(std::size_t num_params, AdamWConfig config)
    : config_(config),
      m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_params))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_params))) {
    validate(config_);
}

void AdamW::step(Eigen::Ref<Eigen::VectorXd> params, Eigen::Ref<Eigen::VectorXd> grad, double lr_scale) {
    clip_grad_norm(grad, config_.grad_clip);
    ++t_;
    const double lr = config_.learning_rate * lr_scale;
    m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
    v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseAbs2();
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    params *= 1.0 - lr * config_.weight_decay;
    params.array() -= lr * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + config_.eps);
}

void AdamW::restore(Eigen::VectorXd m, Eigen::VectorXd v, std::size_t t) {
    if (m.size() != m_.size() || v.size() != v_.size()) throw InvalidConfig("optimizer state has the wrong size");
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
}

}  // namespace memerl
