#include "bmdp/decoder.hpp"

#include <stdexcept>

namespace bmdp {

Decoder Decoder::table(std::vector<int> state_of_obs) {
    Decoder d;
    d.is_table_ = true;
    d.state_of_obs_ = std::move(state_of_obs);
    return d;
}

Decoder Decoder::linear(std::vector<std::vector<double>> weight_rows,
                        std::vector<int> layer_offsets) {
    Decoder d;
    d.is_table_ = false;
    d.weights_ = std::move(weight_rows);
    d.layer_offsets_ = std::move(layer_offsets);
    return d;
}

int Decoder::decode(int layer, const Obs& x) const {
    if (is_table_) {
        if (x.id < 0 || x.id >= static_cast<int>(state_of_obs_.size()))
            throw std::out_of_range("Decoder::decode: observation id out of range");
        return state_of_obs_[x.id];
    }
    if (x.vec.empty()) throw std::invalid_argument("Decoder::decode: vector observation expected");
    int best = 0;
    double best_score = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        double score = 0.0;
        const auto& row = weights_[i];
        for (std::size_t k = 0; k < row.size() && k < x.vec.size(); ++k)
            score += row[k] * x.vec[k];
        if (i == 0 || score > best_score) {
            best_score = score;
            best = static_cast<int>(i);
        }
    }
    if (layer < 1 || layer > static_cast<int>(layer_offsets_.size()))
        throw std::out_of_range("Decoder::decode: bad layer");
    return layer_offsets_[layer - 1] + best;
}

int Decoder::disagreements(const Decoder& other) const {
    if (!is_table_ || !other.is_table_)
        throw std::invalid_argument("disagreements: table decoders only");
    if (state_of_obs_.size() != other.state_of_obs_.size())
        throw std::invalid_argument("disagreements: mismatched observation spaces");
    int count = 0;
    for (std::size_t x = 0; x < state_of_obs_.size(); ++x)
        if (state_of_obs_[x] != other.state_of_obs_[x]) ++count;
    return count;
}

} // namespace bmdp
