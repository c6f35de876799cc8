#include "aimm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aimm/errors.hpp"
#include "aimm/rng.hpp"

namespace aimm {

namespace {

struct LayerView {
    int fan_in = 0;
    int fan_out = 0;
    std::size_t w_off = 0; // row-major fan_out x fan_in
    std::size_t b_off = 0;
};

std::vector<LayerView> layout(const ModelSpec& spec) {
    std::vector<int> sizes;
    sizes.push_back(spec.input_dim);
    for (int h : spec.hidden_dims) sizes.push_back(h);
    sizes.push_back(spec.num_classes);

    std::vector<LayerView> views;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        LayerView v;
        v.fan_in = sizes[l];
        v.fan_out = sizes[l + 1];
        v.w_off = off;
        off += static_cast<std::size_t>(v.fan_in) * v.fan_out;
        v.b_off = off;
        off += static_cast<std::size_t>(v.fan_out);
        views.push_back(v);
    }
    return views;
}

// logits for one sample; activations[l] is the input to layer l.
void forward_sample(const std::vector<LayerView>& views, const double* theta,
                    const double* x, std::vector<std::vector<double>>& acts) {
    acts.resize(views.size() + 1);
    acts[0].assign(x, x + views[0].fan_in);
    for (std::size_t l = 0; l < views.size(); ++l) {
        const LayerView& v = views[l];
        acts[l + 1].assign(static_cast<std::size_t>(v.fan_out), 0.0);
        for (int o = 0; o < v.fan_out; ++o) {
            double z = theta[v.b_off + o];
            const double* w = theta + v.w_off +
                              static_cast<std::size_t>(o) * v.fan_in;
            for (int i = 0; i < v.fan_in; ++i) z += w[i] * acts[l][i];
            // Hidden layers rectify; the last layer stays linear.
            acts[l + 1][o] =
                (l + 1 < views.size()) ? (z > 0.0 ? z : 0.0) : z;
        }
    }
}

// Stable mean cross-entropy of one sample given its logits, plus dL/dlogits
// when grad_out is non-null.
double cross_entropy(const std::vector<double>& logits, int label,
                     std::vector<double>* grad_out) {
    double max_z = logits[0];
    for (double z : logits) max_z = std::max(max_z, z);
    double sum_exp = 0.0;
    for (double z : logits) sum_exp += std::exp(z - max_z);
    double lse = max_z + std::log(sum_exp);
    if (grad_out) {
        grad_out->resize(logits.size());
        for (std::size_t c = 0; c < logits.size(); ++c) {
            (*grad_out)[c] = std::exp(logits[c] - lse);
        }
        (*grad_out)[static_cast<std::size_t>(label)] -= 1.0;
    }
    return lse - logits[static_cast<std::size_t>(label)];
}

void check_theta(const ParamVector& theta, const ModelSpec& spec,
                 const char* op) {
    if (static_cast<int>(theta.dim()) != spec.param_count()) {
        throw StructuralError(std::string(op) + ": theta has " +
                              std::to_string(theta.dim()) +
                              " parameters, spec wants " +
                              std::to_string(spec.param_count()));
    }
}

} // namespace

void ModelSpec::validate() const {
    if (input_dim < 1) throw ValidationError("ModelSpec: input_dim must be >= 1");
    if (num_classes < 2)
        throw ValidationError("ModelSpec: num_classes must be >= 2");
    for (int h : hidden_dims) {
        if (h < 1)
            throw ValidationError("ModelSpec: hidden dims must be >= 1");
    }
}

int ModelSpec::param_count() const {
    validate();
    int count = 0;
    int prev = input_dim;
    for (int h : hidden_dims) {
        count += (prev + 1) * h;
        prev = h;
    }
    count += (prev + 1) * num_classes;
    return count;
}

void Batch::validate(int num_classes) const {
    if (batch_size < 1) throw ValidationError("Batch: batch_size must be >= 1");
    if (input_dim < 1) throw ValidationError("Batch: input_dim must be >= 1");
    if (inputs.size() !=
        static_cast<std::size_t>(batch_size) * static_cast<std::size_t>(input_dim)) {
        throw StructuralError("Batch: inputs size does not match shape");
    }
    if (labels.size() != static_cast<std::size_t>(batch_size)) {
        throw StructuralError("Batch: labels size does not match batch_size");
    }
    for (int y : labels) {
        if (y < 0 || y >= num_classes) {
            throw ValidationError("Batch: label out of range");
        }
    }
    for (double v : inputs) {
        if (!std::isfinite(v)) throw ValidationError("Batch: non-finite input");
    }
}

Batch make_batch(std::span<const Sample> samples) {
    if (samples.empty()) throw ValidationError("make_batch: empty sample set");
    Batch b;
    b.batch_size = static_cast<int>(samples.size());
    b.input_dim = static_cast<int>(samples[0].x.size());
    b.inputs.reserve(samples.size() * samples[0].x.size());
    b.labels.reserve(samples.size());
    for (const Sample& s : samples) {
        if (static_cast<int>(s.x.size()) != b.input_dim) {
            throw StructuralError("make_batch: ragged sample dimensions");
        }
        b.inputs.insert(b.inputs.end(), s.x.begin(), s.x.end());
        b.labels.push_back(s.y);
    }
    return b;
}

Batch make_batch(const std::vector<Sample>& pool,
                 std::span<const std::size_t> indices) {
    if (indices.empty()) throw ValidationError("make_batch: empty index set");
    std::vector<Sample> picked;
    picked.reserve(indices.size());
    for (std::size_t idx : indices) {
        if (idx >= pool.size())
            throw StructuralError("make_batch: index out of range");
        picked.push_back(pool[idx]);
    }
    return make_batch(picked);
}

ParamVector init_model(const ModelSpec& spec) {
    spec.validate();
    ParamVector theta;
    theta.values.assign(static_cast<std::size_t>(spec.param_count()), 0.0);
    Rng rng(spec.seed);
    for (const LayerView& v : layout(spec)) {
        double a = std::sqrt(6.0 / static_cast<double>(v.fan_in + v.fan_out));
        for (int o = 0; o < v.fan_out; ++o) {
            for (int i = 0; i < v.fan_in; ++i) {
                theta.values[v.w_off + static_cast<std::size_t>(o) * v.fan_in +
                             i] = rng.next_uniform(-a, a);
            }
        }
        // biases stay zero
    }
    return theta;
}

std::pair<double, TaskVector> loss_and_grad(const ParamVector& theta,
                                            const ModelSpec& spec,
                                            const Batch& batch) {
    spec.validate();
    batch.validate(spec.num_classes);
    check_theta(theta, spec, "loss_and_grad");
    if (batch.input_dim != spec.input_dim) {
        throw StructuralError("loss_and_grad: batch input_dim mismatch");
    }

    const std::vector<LayerView> views = layout(spec);
    TaskVector grad;
    grad.deltas.assign(theta.dim(), 0.0);

    double total_loss = 0.0;
    std::vector<std::vector<double>> acts;
    std::vector<double> delta, delta_prev;
    for (int s = 0; s < batch.batch_size; ++s) {
        const double* x =
            batch.inputs.data() + static_cast<std::size_t>(s) * spec.input_dim;
        forward_sample(views, theta.values.data(), x, acts);
        total_loss += cross_entropy(acts.back(), batch.labels[s], &delta);

        // Backward: delta holds dL_s/dz for the current layer.
        for (int l = static_cast<int>(views.size()) - 1; l >= 0; --l) {
            const LayerView& v = views[l];
            if (l > 0) delta_prev.assign(static_cast<std::size_t>(v.fan_in), 0.0);
            for (int o = 0; o < v.fan_out; ++o) {
                double g = delta[static_cast<std::size_t>(o)];
                double* gw = grad.deltas.data() + v.w_off +
                             static_cast<std::size_t>(o) * v.fan_in;
                const double* w = theta.values.data() + v.w_off +
                                  static_cast<std::size_t>(o) * v.fan_in;
                const std::vector<double>& in = acts[static_cast<std::size_t>(l)];
                for (int i = 0; i < v.fan_in; ++i) {
                    gw[i] += g * in[i];
                    if (l > 0) delta_prev[static_cast<std::size_t>(i)] += g * w[i];
                }
                grad.deltas[v.b_off + o] += g;
            }
            if (l > 0) {
                // Rectifier gate: the stored activation is relu(z), positive
                // exactly where the unit was active.
                const std::vector<double>& act = acts[static_cast<std::size_t>(l)];
                for (int i = 0; i < views[l].fan_in; ++i) {
                    if (act[static_cast<std::size_t>(i)] <= 0.0) {
                        delta_prev[static_cast<std::size_t>(i)] = 0.0;
                    }
                }
                delta = delta_prev;
            }
        }
    }

    double inv_b = 1.0 / static_cast<double>(batch.batch_size);
    double loss = total_loss * inv_b;
    for (double& g : grad.deltas) g *= inv_b;
    if (!std::isfinite(loss)) {
        throw DivergenceError("loss_and_grad: non-finite loss (batch of " +
                              std::to_string(batch.batch_size) + ")");
    }
    return {loss, std::move(grad)};
}

double loss_only(const ParamVector& theta, const ModelSpec& spec,
                 const Batch& batch) {
    spec.validate();
    batch.validate(spec.num_classes);
    check_theta(theta, spec, "loss_only");
    if (batch.input_dim != spec.input_dim) {
        throw StructuralError("loss_only: batch input_dim mismatch");
    }
    const std::vector<LayerView> views = layout(spec);
    double total = 0.0;
    std::vector<std::vector<double>> acts;
    for (int s = 0; s < batch.batch_size; ++s) {
        const double* x =
            batch.inputs.data() + static_cast<std::size_t>(s) * spec.input_dim;
        forward_sample(views, theta.values.data(), x, acts);
        total += cross_entropy(acts.back(), batch.labels[s], nullptr);
    }
    double loss = total / static_cast<double>(batch.batch_size);
    if (!std::isfinite(loss)) {
        throw DivergenceError("loss_only: non-finite loss");
    }
    return loss;
}

ParamVector sgd_step(const ParamVector& theta, const TaskVector& grad,
                     double lr) {
    if (theta.dim() != grad.dim()) {
        throw StructuralError("sgd_step: gradient dimension mismatch");
    }
    ParamVector out;
    out.values.resize(theta.dim());
    for (std::size_t i = 0; i < theta.dim(); ++i) {
        double v = theta.values[i] - lr * grad.deltas[i];
        if (!std::isfinite(v)) {
            throw DivergenceError("sgd_step: non-finite parameter");
        }
        out.values[i] = v;
    }
    return out;
}

std::pair<ParamVector, StepReport> train_step_with_probe(
    const ParamVector& theta, const ModelSpec& spec, const Batch& new_batch,
    const std::optional<Batch>& probe_batch, double lr) {
    StepReport report;
    auto [loss, grad] = loss_and_grad(theta, spec, new_batch);
    report.new_loss = loss;
    double sq = 0.0;
    for (double g : grad.deltas) sq += g * g;
    report.grad_norm = std::sqrt(sq);
    if (probe_batch) {
        report.mem_loss = loss_only(theta, spec, *probe_batch);
    }
    return {sgd_step(theta, grad, lr), report};
}

double evaluate_accuracy(const ParamVector& theta, const ModelSpec& spec,
                         std::span<const Sample> dataset) {
    spec.validate();
    check_theta(theta, spec, "evaluate_accuracy");
    if (dataset.empty()) {
        throw ValidationError("evaluate_accuracy: empty dataset");
    }
    const std::vector<LayerView> views = layout(spec);
    std::vector<std::vector<double>> acts;
    int correct = 0;
    for (const Sample& s : dataset) {
        if (static_cast<int>(s.x.size()) != spec.input_dim) {
            throw StructuralError("evaluate_accuracy: sample dim mismatch");
        }
        forward_sample(views, theta.values.data(), s.x.data(), acts);
        const std::vector<double>& logits = acts.back();
        std::size_t best =
            static_cast<std::size_t>(std::max_element(logits.begin(),
                                                      logits.end()) -
                                     logits.begin());
        if (static_cast<int>(best) == s.y) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

} // namespace aimm
