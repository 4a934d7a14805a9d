#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace badger {

// Sizes of the shared expert policy.
//
// The cell consumes x = [observation (input_size), error, hotcold,
// id one-hot (id_slots, only when id_embedding), incoming message].
struct ShapeSpec {
    std::size_t hidden_size = 32;   // H
    std::size_t message_size = 8;   // M
    std::size_t key_size = 8;       // K
    std::size_t input_size = 1;     // I: observation slots
    bool id_embedding = false;
    std::size_t id_slots = 8;       // one-hot width; expert index taken modulo this

    bool operator==(const ShapeSpec&) const = default;

    void validate() const {
        if (hidden_size < 1 || message_size < 1 || key_size < 1 || input_size < 1)
            throw ArgumentError("ShapeSpec: all sizes must be >= 1");
        if (id_embedding && id_slots < 1)
            throw ArgumentError("ShapeSpec: id_slots must be >= 1 when id_embedding is on");
    }

    static constexpr std::size_t feedback_channels = 2;  // error, hotcold

    std::size_t observation_width() const { return input_size; }
    std::size_t id_width() const { return id_embedding ? id_slots : 0; }
    // Width of the cell input x (everything except the recurrent state).
    std::size_t cell_input_width() const { return input_size + feedback_channels + id_width() + message_size; }
};

// Number of scalars in a policy of the given shape:
//   3 gates * (H*X + H*H + H)  +  (3K + M + 1) * H,   X = cell_input_width().
constexpr std::size_t parameter_count(const ShapeSpec& s) {
    const std::size_t H = s.hidden_size;
    const std::size_t X = s.input_size + ShapeSpec::feedback_channels + (s.id_embedding ? s.id_slots : 0) + s.message_size;
    return 3 * (H * X + H * H + H) + (3 * s.key_size + s.message_size + 1) * H;
}

// Dense row-major matrix; small enough that a flat vector is all we need.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

// Four interleaved partial sums, combined as (s0 + s1) + (s2 + s3). The
// summation order is fixed, so results do not depend on the compiler's
// vectorization choices.
inline double dot(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

// out = M * v
inline void matvec(const Matrix& m, std::span<const double> v, std::span<double> out) {
    for (std::size_t r = 0; r < m.rows; ++r) out[r] = dot(m.row(r), v);
}

// The single parameter set shared by every expert of an agent.
struct ExpertPolicy {
    ShapeSpec shape;
    // Gated recurrent cell: input matrices (H x X), recurrent matrices (H x H), biases (H).
    Matrix w_update, w_reset, w_candidate;
    Matrix u_update, u_reset, u_candidate;
    // Inter-expert attention and output addressing.
    Matrix w_query;       // K x H
    Matrix w_key;         // K x H
    Matrix w_value;       // M x H
    Matrix w_out_key;     // K x H
    std::vector<double> w_out_value;  // H
    std::vector<double> b_update, b_reset, b_candidate;

    explicit ExpertPolicy(const ShapeSpec& s = {}) : shape(s) {
        s.validate();
        const std::size_t H = s.hidden_size, X = s.cell_input_width();
        w_update = w_reset = w_candidate = Matrix(H, X);
        u_update = u_reset = u_candidate = Matrix(H, H);
        w_query = w_key = w_out_key = Matrix(s.key_size, H);
        w_value = Matrix(s.message_size, H);
        w_out_value.assign(H, 0.0);
        b_update.assign(H, 0.0);
        b_reset.assign(H, 0.0);
        b_candidate.assign(H, 0.0);
    }

    // Visits every parameter block in flatten order.
    template <typename Self, typename Fn>
    static void for_each_block(Self& p, Fn&& fn) {
        fn(p.w_update.data);
        fn(p.w_reset.data);
        fn(p.w_candidate.data);
        fn(p.u_update.data);
        fn(p.u_reset.data);
        fn(p.u_candidate.data);
        fn(p.w_query.data);
        fn(p.w_key.data);
        fn(p.w_value.data);
        fn(p.w_out_key.data);
        fn(p.w_out_value);
        fn(p.b_update);
        fn(p.b_reset);
        fn(p.b_candidate);
    }
};

struct ExpertState {
    std::vector<double> h;
    std::size_t expert_index = 0;

    bool operator==(const ExpertState&) const = default;
};

struct ParamVector {
    std::vector<double> values;
    ShapeSpec shape;

    std::size_t size() const { return values.size(); }
};

inline bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

// Flatten order: W_update, W_reset, W_candidate, U_update, U_reset, U_candidate
// (each row-major), W_query, W_key, W_value, W_out_key, w_out_value, then the
// biases b_update, b_reset, b_candidate. Biases therefore occupy the last 3H slots.
inline ParamVector flatten(const ExpertPolicy& policy) {
    ParamVector out;
    out.shape = policy.shape;
    out.values.reserve(parameter_count(policy.shape));
    ExpertPolicy::for_each_block(policy, [&](const std::vector<double>& block) {
        out.values.insert(out.values.end(), block.begin(), block.end());
    });
    return out;
}

inline ExpertPolicy unflatten(const ParamVector& params) {
    ExpertPolicy policy(params.shape);
    if (params.values.size() != parameter_count(params.shape))
        throw ShapeError("unflatten: expected " + std::to_string(parameter_count(params.shape)) +
                         " values, got " + std::to_string(params.values.size()));
    std::size_t offset = 0;
    ExpertPolicy::for_each_block(policy, [&](std::vector<double>& block) {
        std::memcpy(block.data(), params.values.data() + offset, block.size() * sizeof(double));
        offset += block.size();
    });
    return policy;
}

inline bool bitwise_equal(const ExpertPolicy& a, const ExpertPolicy& b) {
    return a.shape == b.shape && bitwise_equal(flatten(a).values, flatten(b).values);
}

// Offset of the first bias entry inside a flattened vector.
constexpr std::size_t bias_offset(const ShapeSpec& s) { return parameter_count(s) - 3 * s.hidden_size; }

// Matrices i.i.d. uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
inline ExpertPolicy init_policy(const ShapeSpec& shape, std::uint64_t seed) {
    ExpertPolicy p(shape);
    Rng rng(derive_seed(seed, {0x1D17ull}));
    auto fill = [&](Matrix& m) {
        const double s = 1.0 / std::sqrt(static_cast<double>(m.cols));
        for (auto& v : m.data) v = rng.uniform(-s, s);
    };
    fill(p.w_update);
    fill(p.w_reset);
    fill(p.w_candidate);
    fill(p.u_update);
    fill(p.u_reset);
    fill(p.u_candidate);
    fill(p.w_query);
    fill(p.w_key);
    fill(p.w_value);
    fill(p.w_out_key);
    const double s = 1.0 / std::sqrt(static_cast<double>(shape.hidden_size));
    for (auto& v : p.w_out_value) v = rng.uniform(-s, s);
    return p;
}

}  // namespace badger
