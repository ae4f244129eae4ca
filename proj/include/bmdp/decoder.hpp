#pragma once

#include <vector>

#include "bmdp/model.hpp"

namespace bmdp {

/// Total map from observations to latent states. Two representations:
/// a lookup table over global observation ids (finite-observation models), or
/// a per-layer linear argmax over vector observations.
class Decoder {
public:
    static Decoder table(std::vector<int> state_of_obs);

    /// Linear decoder: state = layer_offset[h] + argmax_i (W x)_i, rows of W
    /// scoring the per-layer local states.
    static Decoder linear(std::vector<std::vector<double>> weight_rows,
                          std::vector<int> layer_offsets);

    int decode(int layer, const Obs& x) const;

    bool is_table() const { return is_table_; }
    const std::vector<int>& table_map() const { return state_of_obs_; }

    /// Number of observation assignments differing from `other` (table decoders).
    int disagreements(const Decoder& other) const;

private:
    bool is_table_ = true;
    std::vector<int> state_of_obs_;
    std::vector<std::vector<double>> weights_;
    std::vector<int> layer_offsets_;
};

/// Finite decoder class; the position of the true decoder is recorded for
/// tests and diagnostics only, algorithms never read it.
struct DecoderClass {
    std::vector<Decoder> decoders;
    int true_index = -1;

    int size() const { return static_cast<int>(decoders.size()); }
    const Decoder& operator[](int i) const { return decoders[i]; }
};

} // namespace bmdp
