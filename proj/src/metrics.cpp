#include "aimm/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "aimm/errors.hpp"

namespace aimm {

namespace {
constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

void check_accuracy(double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError("AccuracyMatrix: accuracy must lie in [0, 1]");
    }
}
} // namespace

AccuracyMatrix::AccuracyMatrix(int num_tasks) : k_(num_tasks) {
    if (num_tasks < 1) {
        throw ValidationError("AccuracyMatrix: need at least one task");
    }
    cells_.assign(static_cast<std::size_t>(k_) * k_, kUnset);
    individual_.assign(static_cast<std::size_t>(k_), kUnset);
}

int AccuracyMatrix::index(int i, int j) const {
    if (i < 1 || j < 1 || i > k_ || j > k_ || j < i) {
        throw StructuralError("AccuracyMatrix: bad cell (" + std::to_string(i) +
                              ", " + std::to_string(j) + ") for K=" +
                              std::to_string(k_));
    }
    return (i - 1) * k_ + (j - 1);
}

void AccuracyMatrix::set(int i, int j, double accuracy) {
    check_accuracy(accuracy);
    cells_[static_cast<std::size_t>(index(i, j))] = accuracy;
}

double AccuracyMatrix::at(int i, int j) const {
    double v = cells_[static_cast<std::size_t>(index(i, j))];
    if (std::isnan(v)) {
        throw StructuralError("AccuracyMatrix: cell (" + std::to_string(i) +
                              ", " + std::to_string(j) + ") was never set");
    }
    return v;
}

bool AccuracyMatrix::has(int i, int j) const {
    return !std::isnan(cells_[static_cast<std::size_t>(index(i, j))]);
}

void AccuracyMatrix::set_individual(int i, double accuracy) {
    if (i < 1 || i > k_) throw StructuralError("AccuracyMatrix: bad task index");
    check_accuracy(accuracy);
    individual_[static_cast<std::size_t>(i - 1)] = accuracy;
}

double AccuracyMatrix::individual(int i) const {
    if (i < 1 || i > k_) throw StructuralError("AccuracyMatrix: bad task index");
    double v = individual_[static_cast<std::size_t>(i - 1)];
    if (std::isnan(v)) {
        throw StructuralError("AccuracyMatrix: individual(" + std::to_string(i) +
                              ") was never set");
    }
    return v;
}

bool AccuracyMatrix::has_individual(int i) const {
    if (i < 1 || i > k_) throw StructuralError("AccuracyMatrix: bad task index");
    return !std::isnan(individual_[static_cast<std::size_t>(i - 1)]);
}

bool AccuracyMatrix::complete() const {
    for (int i = 1; i <= k_; ++i) {
        for (int j = i; j <= k_; ++j) {
            if (!has(i, j)) return false;
        }
    }
    return true;
}

bool AccuracyMatrix::individuals_complete() const {
    for (int i = 1; i <= k_; ++i) {
        if (!has_individual(i)) return false;
    }
    return true;
}

double compute_op(const AccuracyMatrix& m) {
    int k = m.num_tasks();
    double sum = 0.0;
    for (int i = 1; i <= k; ++i) sum += m.at(i, k);
    return sum / static_cast<double>(k);
}

double compute_bwt(const AccuracyMatrix& m) {
    int k = m.num_tasks();
    if (k < 2) {
        throw ValidationError("compute_bwt: needs at least two tasks");
    }
    double sum = 0.0;
    for (int i = 1; i <= k - 1; ++i) sum += m.at(i, k) - m.at(i, i);
    return sum / static_cast<double>(k - 1);
}

double compute_fwt(const AccuracyMatrix& m) {
    int k = m.num_tasks();
    double sum = 0.0;
    for (int i = 1; i <= k; ++i) sum += m.at(i, i) - m.individual(i);
    return sum / static_cast<double>(k);
}

MetricsReport compute_metrics(const AccuracyMatrix& m) {
    MetricsReport r;
    r.op = compute_op(m);
    r.bwt = compute_bwt(m);
    r.fwt = compute_fwt(m);
    int k = m.num_tasks();
    r.per_task_final.reserve(static_cast<std::size_t>(k));
    for (int i = 1; i <= k; ++i) r.per_task_final.push_back(m.at(i, k));
    return r;
}

} // namespace aimm
