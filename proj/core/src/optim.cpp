#include "npae/optim.hpp"

#include <cmath>

#include "npae/errors.hpp"

namespace npae {

void adam_step(const std::map<std::string, Tensor*>& params,
               const std::map<std::string, Tensor>& grads, AdamState& state,
               const AdamHyper& hyper) {
    if (params.size() != grads.size()) {
        throw InvalidArgument("adam_step: params and grads must carry the same names");
    }
    for (const auto& [name, grad] : grads) {
        auto it = params.find(name);
        if (it == params.end()) {
            throw InvalidArgument("adam_step: gradient for unknown parameter '" + name + "'");
        }
        if (!it->second->same_shape(grad)) {
            throw InvalidArgument("adam_step: shape mismatch for parameter '" + name + "'");
        }
        if (!grad.all_finite()) {
            throw TrainingDiverged("adam_step: non-finite gradient for '" + name + "'", -1);
        }
    }

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(hyper.beta1, t);
    const double bc2 = 1.0 - std::pow(hyper.beta2, t);

    for (const auto& [name, param_ptr] : params) {
        Tensor& param = *param_ptr;
        const Tensor& grad = grads.at(name);
        auto [m_it, m_new] = state.first_moment.try_emplace(name, Tensor(param.shape()));
        auto [v_it, v_new] = state.second_moment.try_emplace(name, Tensor(param.shape()));
        Tensor& m = m_it->second;
        Tensor& v = v_it->second;
        if (!m.same_shape(param) || !v.same_shape(param)) {
            throw InvalidArgument("adam_step: optimizer state shape drifted for '" + name + "'");
        }
        for (std::int64_t i = 0; i < param.size(); ++i) {
            const double g = grad[i];
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g;
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            param[i] -= hyper.step_size * mhat / (std::sqrt(vhat) + hyper.epsilon);
        }
    }
}

void adam_step(std::map<std::string, Tensor>& params, const std::map<std::string, Tensor>& grads,
               AdamState& state, const AdamHyper& hyper) {
    std::map<std::string, Tensor*> refs;
    for (auto& [name, tensor] : params) refs.emplace(name, &tensor);
    adam_step(refs, grads, state, hyper);
}

}  // namespace npae
