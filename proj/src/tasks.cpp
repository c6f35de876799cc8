#include "aimm/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aimm/errors.hpp"
#include "aimm/format.hpp"

namespace aimm {

namespace {

// ceil(fraction * n) guarded against the float dust in products like
// 0.02 * 500, which lands a hair above 10 and would otherwise round to 11.
int ceil_fraction(double fraction, int n) {
    int m = static_cast<int>(std::ceil(fraction * n - 1e-9));
    return std::max(1, m);
}

std::vector<double> unit_gaussian_vector(int dim, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double norm_sq = 0.0;
    for (double& x : v) {
        x = rng.next_gaussian();
        norm_sq += x * x;
    }
    double norm = std::sqrt(norm_sq);
    if (norm == 0.0) {
        v[0] = 1.0;
        return v;
    }
    for (double& x : v) x /= norm;
    return v;
}

// Exactly balanced label list (counts differ by at most one), shuffled.
std::vector<int> balanced_labels(int n, int classes, Rng& rng) {
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) labels.push_back(i % classes);
    std::vector<std::size_t> perm = rng.permutation(static_cast<std::size_t>(n));
    std::vector<int> shuffled(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) shuffled[static_cast<std::size_t>(i)] =
        labels[perm[static_cast<std::size_t>(i)]];
    return shuffled;
}

std::vector<Sample> draw_base_samples(const SequenceSpec& spec, int n,
                                      const std::vector<std::vector<double>>& means,
                                      Rng& label_rng, Rng& noise_rng) {
    std::vector<int> labels = balanced_labels(n, spec.classes_per_task,
                                              label_rng);
    std::vector<Sample> samples(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Sample& s = samples[static_cast<std::size_t>(i)];
        s.y = labels[static_cast<std::size_t>(i)];
        s.x.resize(static_cast<std::size_t>(spec.input_dim));
        const std::vector<double>& mu = means[static_cast<std::size_t>(s.y)];
        for (int d = 0; d < spec.input_dim; ++d) {
            s.x[static_cast<std::size_t>(d)] =
                mu[static_cast<std::size_t>(d)] +
                spec.noise_std * noise_rng.next_gaussian();
        }
    }
    return samples;
}

// Per-task input transform. Task 1 (and the test hook) is the identity.
struct Transform {
    InterferenceMode mode = InterferenceMode::Rotation;
    bool identity = true;
    double angle = 0.0;                // rotation, applied per plane
    std::vector<std::size_t> perm;     // permutation
    std::vector<double> shift;         // mean shift

    std::vector<double> apply(const std::vector<double>& x) const {
        if (identity) return x;
        std::vector<double> out = x;
        switch (mode) {
        case InterferenceMode::Rotation: {
            double c = std::cos(angle);
            double s = std::sin(angle);
            for (std::size_t p = 0; p + 1 < x.size(); p += 2) {
                out[p] = c * x[p] - s * x[p + 1];
                out[p + 1] = s * x[p] + c * x[p + 1];
            }
            break;
        }
        case InterferenceMode::Permutation:
            for (std::size_t d = 0; d < x.size(); ++d) out[d] = x[perm[d]];
            break;
        case InterferenceMode::MeanShift:
            for (std::size_t d = 0; d < x.size(); ++d) out[d] += shift[d];
            break;
        }
        return out;
    }
};

Transform make_transform(const SequenceSpec& spec, int task_id) {
    Transform t;
    t.mode = spec.interference_mode;
    if (spec.force_identity_transform || task_id == 1) return t;
    t.identity = false;
    switch (spec.interference_mode) {
    case InterferenceMode::Rotation:
        t.angle = spec.interference_strength * (task_id - 1);
        break;
    case InterferenceMode::Permutation: {
        Rng rng = Rng::derived(spec.seed, streams::kTransform,
                               static_cast<std::uint64_t>(task_id));
        t.perm = rng.permutation(static_cast<std::size_t>(spec.input_dim));
        break;
    }
    case InterferenceMode::MeanShift: {
        Rng rng = Rng::derived(spec.seed, streams::kTransform,
                               static_cast<std::uint64_t>(task_id));
        t.shift = unit_gaussian_vector(spec.input_dim, rng);
        for (double& v : t.shift) v *= spec.interference_strength;
        break;
    }
    }
    return t;
}

} // namespace

void SequenceSpec::validate() const {
    if (num_tasks < 1) throw ValidationError("SequenceSpec: num_tasks >= 1");
    if (input_dim < 1) throw ValidationError("SequenceSpec: input_dim >= 1");
    if (classes_per_task < 2) {
        throw ValidationError("SequenceSpec: classes_per_task >= 2");
    }
    if (samples_per_task < classes_per_task) {
        throw ValidationError(
            "SequenceSpec: samples_per_task must cover every class");
    }
    if (test_samples_per_task < 1) {
        throw ValidationError("SequenceSpec: test_samples_per_task >= 1");
    }
    if (!(interference_strength >= 0.0)) {
        throw ValidationError("SequenceSpec: interference_strength >= 0");
    }
    if (!(class_separation > 0.0)) {
        throw ValidationError("SequenceSpec: class_separation > 0");
    }
    if (!(noise_std >= 0.0)) {
        throw ValidationError("SequenceSpec: noise_std >= 0");
    }
}

std::vector<TaskDataset> generate_sequence(const SequenceSpec& spec) {
    spec.validate();

    Rng means_rng = Rng::derived(spec.seed, streams::kClassMeans);
    std::vector<std::vector<double>> means;
    means.reserve(static_cast<std::size_t>(spec.classes_per_task));
    for (int c = 0; c < spec.classes_per_task; ++c) {
        std::vector<double> mu = unit_gaussian_vector(spec.input_dim, means_rng);
        for (double& v : mu) v *= spec.class_separation;
        means.push_back(std::move(mu));
    }

    Rng train_label_rng = Rng::derived(spec.seed, streams::kTrainLabels);
    Rng train_noise_rng = Rng::derived(spec.seed, streams::kTrainNoise);
    Rng test_label_rng = Rng::derived(spec.seed, streams::kTestLabels);
    Rng test_noise_rng = Rng::derived(spec.seed, streams::kTestNoise);
    std::vector<Sample> base_train =
        draw_base_samples(spec, spec.samples_per_task, means, train_label_rng,
                          train_noise_rng);
    std::vector<Sample> base_test =
        draw_base_samples(spec, spec.test_samples_per_task, means,
                          test_label_rng, test_noise_rng);

    std::vector<TaskDataset> sequence;
    sequence.reserve(static_cast<std::size_t>(spec.num_tasks));
    for (int k = 1; k <= spec.num_tasks; ++k) {
        Transform t = make_transform(spec, k);
        TaskDataset task;
        task.task_id = k;
        task.train.reserve(base_train.size());
        for (const Sample& s : base_train) {
            task.train.push_back(Sample{t.apply(s.x), s.y});
        }
        task.test.reserve(base_test.size());
        for (const Sample& s : base_test) {
            task.test.push_back(Sample{t.apply(s.x), s.y});
        }
        sequence.push_back(std::move(task));
    }
    return sequence;
}

void MemoryBuffer::store(const TaskDataset& task, double fraction, Rng& rng) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ValidationError("MemoryBuffer::store: fraction in (0, 1]");
    }
    if (task.train.empty()) {
        throw ValidationError("MemoryBuffer::store: task has no training data");
    }
    int m = std::min(ceil_fraction(fraction, task.n_train()), task.n_train());
    std::vector<std::size_t> perm = rng.permutation(task.train.size());
    std::vector<Sample> picked;
    picked.reserve(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) picked.push_back(task.train[perm[static_cast<std::size_t>(i)]]);
    per_task_[task.task_id] = std::move(picked);
    capacity_fraction_ = fraction;

    pooled_.clear();
    for (const auto& [id, samples] : per_task_) {
        pooled_.insert(pooled_.end(), samples.begin(), samples.end());
    }
}

std::optional<Batch> MemoryBuffer::sample_probe(int batch_size,
                                                Rng& rng) const {
    if (pooled_.empty()) return std::nullopt;
    if (batch_size < 1) {
        throw ValidationError("MemoryBuffer::sample_probe: batch_size >= 1");
    }
    std::vector<Sample> picked;
    picked.reserve(static_cast<std::size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) {
        picked.push_back(pooled_[rng.next_index(pooled_.size())]);
    }
    return make_batch(picked);
}

std::vector<Batch> MemoryBuffer::training_batches(int batch_size, int steps,
                                                  Rng& rng) const {
    if (pooled_.empty()) {
        throw ValidationError("MemoryBuffer::training_batches: buffer empty");
    }
    if (steps < 0) {
        throw ValidationError("MemoryBuffer::training_batches: steps >= 0");
    }
    std::vector<Batch> batches;
    batches.reserve(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        std::optional<Batch> b = sample_probe(batch_size, rng);
        batches.push_back(std::move(*b));
    }
    return batches;
}

void export_csv(const TaskDataset& task, std::ostream& out) {
    if (task.train.empty()) return;
    std::size_t dim = task.train[0].x.size();
    for (std::size_t d = 0; d < dim; ++d) out << "f" << d << ",";
    out << "label\n";
    for (const Sample& s : task.train) {
        for (double v : s.x) out << format_double(v) << ",";
        out << s.y << "\n";
    }
}

} // namespace aimm
