#pragma once

#include <vector>

namespace aimm {

// Continual-learning metrics over the task-accuracy matrix. a(i, j) is the
// accuracy on task i's test set after finishing training task j, defined for
// j >= i. individual(i) is the accuracy of a clone of the initial model
// trained on task i alone with the same budget (the transfer baseline).

class AccuracyMatrix {
public:
    explicit AccuracyMatrix(int num_tasks);

    int num_tasks() const { return k_; }

    // 1-based task indices, j >= i.
    void set(int i, int j, double accuracy);
    double at(int i, int j) const;
    bool has(int i, int j) const;

    void set_individual(int i, double accuracy);
    double individual(int i) const;
    bool has_individual(int i) const;

    // Every a(i, j) with j >= i present.
    bool complete() const;
    bool individuals_complete() const;

private:
    int index(int i, int j) const;

    int k_;
    std::vector<double> cells_;
    std::vector<double> individual_;
};

// Overall performance: mean final accuracy, (1/K) * sum_i a(i, K).
double compute_op(const AccuracyMatrix& m);

// Backward transfer: (1/(K-1)) * sum_{i<K} (a(i, K) - a(i, i)). Negative
// values are forgetting. Requires K >= 2.
double compute_bwt(const AccuracyMatrix& m);

// Forward transfer: (1/K) * sum_i (a(i, i) - individual(i)).
double compute_fwt(const AccuracyMatrix& m);

struct MetricsReport {
    double op = 0.0;
    double bwt = 0.0;
    double fwt = 0.0;
    std::vector<double> per_task_final; // a(i, K), ascending i
};

MetricsReport compute_metrics(const AccuracyMatrix& m);

} // namespace aimm
