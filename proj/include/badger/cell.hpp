#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "core_types.hpp"

namespace badger {

// Numerically stable softmax (max subtraction), written into `out`.
inline void softmax_into(std::span<const double> logits, std::span<double> out) {
    if (logits.empty()) throw ArgumentError("softmax: empty input");
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    const double inv = 1.0 / sum;
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] *= inv;
}

inline std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    softmax_into(logits, out);
    return out;
}

namespace detail {

// exp(x) by Cody-Waite reduction to |r| <= ln2/2 and a degree-13 Taylor
// polynomial; relative error within a few ulp of std::exp over the clamped
// range. Branch-free so the activation loops below vectorize, and pure
// arithmetic so results are identical across libm implementations.
inline double exp_poly(double x) {
    constexpr double log2e = 1.4426950408889634;
    constexpr double ln2_hi = 6.93147180369123816490e-01;
    constexpr double ln2_lo = 1.90821492927058770002e-10;
    constexpr double shifter = 0x1.8p52;
    x = std::clamp(x, -708.0, 709.0);
    const double t = x * log2e + shifter;
    const double n = t - shifter;
    const double r = (x - n * ln2_hi) - n * ln2_lo;
    double p = 1.0 / 6227020800.0;
    p = p * r + 1.0 / 479001600.0;
    p = p * r + 1.0 / 39916800.0;
    p = p * r + 1.0 / 3628800.0;
    p = p * r + 1.0 / 362880.0;
    p = p * r + 1.0 / 40320.0;
    p = p * r + 1.0 / 5040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    // 2^n from the low mantissa bits of t, which hold n in two's complement.
    const std::uint64_t bits = (std::bit_cast<std::uint64_t>(t) << 52) + (std::uint64_t{1023} << 52);
    return p * std::bit_cast<double>(bits);
}

}  // namespace detail

inline double sigmoid(double v) { return 1.0 / (1.0 + detail::exp_poly(-v)); }

// tanh via exp(-2|v|); the result always lies in [-1, 1].
inline double tanh_bounded(double v) {
    const double e = detail::exp_poly(-2.0 * std::abs(v));
    return std::copysign((1.0 - e) / (1.0 + e), v);
}

struct CellInput {
    std::vector<double> observation;       // length input_size
    std::vector<double> incoming_message;  // length M
    double feedback = 0.0;                 // error signal; 0 unless this expert is the recipient
    double hotcold = 0.0;
    std::optional<std::vector<double>> id_onehot;  // length id_slots when id_embedding
};

// Packs a CellInput into the cell's x layout: [obs, error, hotcold, id, message].
inline std::vector<double> pack_cell_input(const ShapeSpec& shape, const CellInput& in) {
    if (in.observation.size() != shape.observation_width())
        throw ShapeError("cell input: observation width mismatch");
    if (in.incoming_message.size() != shape.message_size)
        throw ShapeError("cell input: message width mismatch");
    if (shape.id_embedding != in.id_onehot.has_value() ||
        (in.id_onehot && in.id_onehot->size() != shape.id_slots))
        throw ShapeError("cell input: id one-hot does not match shape");
    std::vector<double> x;
    x.reserve(shape.cell_input_width());
    x.insert(x.end(), in.observation.begin(), in.observation.end());
    x.push_back(in.feedback);
    x.push_back(in.hotcold);
    if (in.id_onehot) x.insert(x.end(), in.id_onehot->begin(), in.id_onehot->end());
    x.insert(x.end(), in.incoming_message.begin(), in.incoming_message.end());
    return x;
}

// Gated recurrent update on raw buffers. `scratch` must hold 3H doubles.
//   z  = sigmoid(Wz x + Uz h + bz)
//   r  = sigmoid(Wr x + Ur h + br)
//   h~ = tanh(Wc x + Uc (r*h) + bc)
//   h' = (1 - z) h + z h~
// `out` must not alias `h`.
inline void gru_update(const ExpertPolicy& p, std::span<const double> x, std::span<const double> h,
                       std::span<double> out, std::span<double> scratch) {
    const std::size_t H = p.shape.hidden_size;
    double* z = scratch.data();
    double* r = z + H;
    double* c = r + H;
    for (std::size_t j = 0; j < H; ++j) {
        z[j] = dot(p.w_update.row(j), x) + dot(p.u_update.row(j), h) + p.b_update[j];
        r[j] = dot(p.w_reset.row(j), x) + dot(p.u_reset.row(j), h) + p.b_reset[j];
    }
    for (std::size_t j = 0; j < H; ++j) {
        z[j] = sigmoid(z[j]);
        r[j] = sigmoid(r[j]) * h[j];
    }
    const std::span<const double> rh(r, H);
    for (std::size_t j = 0; j < H; ++j)
        c[j] = dot(p.w_candidate.row(j), x) + dot(p.u_candidate.row(j), rh) + p.b_candidate[j];
    for (std::size_t j = 0; j < H; ++j) {
        // Rounding can push a convex combination of values in [-1,1] one ulp outside.
        out[j] = std::clamp((1.0 - z[j]) * h[j] + z[j] * tanh_bounded(c[j]), -1.0, 1.0);
    }
}

// One expert's state update under the shared policy. Pure: returns a new state.
inline ExpertState cell_step(const ExpertPolicy& policy, const ExpertState& state, const CellInput& input) {
    if (state.h.size() != policy.shape.hidden_size) throw ShapeError("cell_step: state size mismatch");
    const std::vector<double> x = pack_cell_input(policy.shape, input);
    ExpertState next{std::vector<double>(state.h.size()), state.expert_index};
    std::vector<double> scratch(3 * state.h.size());
    gru_update(policy, x, state.h, next.h, scratch);
    return next;
}

}  // namespace badger
