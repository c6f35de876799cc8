#include "aimm/param_vector.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "aimm/errors.hpp"

namespace aimm {

namespace {

constexpr char kMagic[8] = {'A', 'I', 'M', 'P', 'V', 'E', 'C', '1'};

void check_same_dim(std::size_t a, std::size_t b, const char* op) {
    if (a != b) {
        throw StructuralError(std::string(op) + ": dimension mismatch (" +
                              std::to_string(a) + " vs " + std::to_string(b) +
                              ")");
    }
}

void check_finite(const std::vector<double>& v, const char* op) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw ValidationError(std::string(op) + ": non-finite input");
        }
    }
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

void write_f64_le(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i)
        b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64_le(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace

TaskVector task_vector(const ParamVector& from, const ParamVector& to) {
    check_same_dim(from.dim(), to.dim(), "task_vector");
    check_finite(from.values, "task_vector");
    check_finite(to.values, "task_vector");
    TaskVector tau;
    tau.deltas.resize(to.dim());
    for (std::size_t i = 0; i < to.dim(); ++i) {
        tau.deltas[i] = to.values[i] - from.values[i];
    }
    return tau;
}

ParamVector add(const ParamVector& base, const TaskVector& tau) {
    check_same_dim(base.dim(), tau.dim(), "add");
    ParamVector out;
    out.values.resize(base.dim());
    for (std::size_t i = 0; i < base.dim(); ++i) {
        out.values[i] = base.values[i] + tau.deltas[i];
    }
    return out;
}

double l1_rate(const TaskVector& tau, int steps) {
    if (steps < 1) throw ValidationError("l1_rate: steps must be >= 1");
    check_finite(tau.deltas, "l1_rate");
    double sum = 0.0;
    for (double d : tau.deltas) sum += std::abs(d);
    return sum / static_cast<double>(steps);
}

ParamVector apply_merge(const ParamVector& anchor, const TaskVector& tau_new,
                        const TaskVector& tau_past, double alpha1,
                        double alpha2) {
    check_same_dim(anchor.dim(), tau_new.dim(), "apply_merge");
    check_same_dim(anchor.dim(), tau_past.dim(), "apply_merge");
    if (!(alpha1 >= 0.0 && alpha1 <= 1.0) ||
        !(alpha2 >= 0.0 && alpha2 <= 1.0)) {
        throw ValidationError("apply_merge: weights must lie in [0, 1]");
    }
    ParamVector out;
    out.values.resize(anchor.dim());
    for (std::size_t i = 0; i < anchor.dim(); ++i) {
        double v = anchor.values[i] + alpha1 * tau_new.deltas[i] +
                   alpha2 * tau_past.deltas[i];
        if (!std::isfinite(v)) {
            throw DivergenceError("apply_merge: non-finite merged parameter");
        }
        out.values[i] = v;
    }
    return out;
}

void save_param_vector(const ParamVector& theta,
                       const std::filesystem::path& path) {
    check_finite(theta.values, "save_param_vector");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_param_vector: cannot open " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_u32_le(out, static_cast<std::uint32_t>(theta.dim()));
    write_u32_le(out, 0); // reserved
    for (double v : theta.values) write_f64_le(out, v);
    if (!out) throw IoError("save_param_vector: write failed on " +
                            path.string());
}

ParamVector load_param_vector(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_param_vector: cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw IoError("load_param_vector: bad magic in " + path.string());
    }
    std::uint32_t dim = read_u32_le(in);
    read_u32_le(in); // reserved
    if (!in) throw IoError("load_param_vector: truncated header in " +
                           path.string());
    ParamVector theta;
    theta.values.resize(dim);
    for (std::uint32_t i = 0; i < dim; ++i) theta.values[i] = read_f64_le(in);
    if (!in) throw IoError("load_param_vector: truncated payload in " +
                           path.string());
    in.peek();
    if (!in.eof()) {
        throw IoError("load_param_vector: trailing bytes in " + path.string());
    }
    check_finite(theta.values, "load_param_vector");
    return theta;
}

} // namespace aimm
