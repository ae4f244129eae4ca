#pragma once

#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "bmdp/decoder.hpp"

namespace bmdp {

/// Fitted conditional distribution over (action, index) cells given a decoded
/// state pair (z, z'). Rows are dense vectors of length A*K laid out
/// action-major (cell (a, j) at a*K + j); unobserved conditioning pairs fall
/// back to the uniform row. The tabular form uses K = 1 slots per action,
/// i.e. rows of length A.
class ConditionalTable {
public:
    ConditionalTable() = default;
    ConditionalTable(int num_actions, int num_indices);

    int num_actions() const { return num_actions_; }
    int num_indices() const { return num_indices_; }
    int row_size() const { return num_actions_ * num_indices_; }

    void set_row(int z, int zprime, std::vector<double> probs);
    bool has_row(int z, int zprime) const;

    /// Row for (z, z'); the uniform distribution when unobserved.
    const std::vector<double>& row(int z, int zprime) const;

    double prob(int z, int zprime, int a, int j) const { return row(z, zprime)[a * num_indices_ + j]; }

    /// Argmax over (a, j) cells, ties broken by lowest (a, j) lexicographic.
    /// Scans the full row; `reads` (when given) is incremented by row_size().
    std::pair<int, int> argmax_cell(int z, int zprime, long long* reads = nullptr) const;

    const std::map<std::pair<int, int>, std::vector<double>>& rows() const { return rows_; }

private:
    int num_actions_ = 0;
    int num_indices_ = 1;
    std::vector<double> uniform_row_;
    std::map<std::pair<int, int>, std::vector<double>> rows_;
};

/// One layer of a learned non-Markov policy stack: the fitted conditional
/// table plus the decoder it reads observations through.
struct IkRule {
    int layer = 0;
    ConditionalTable f;
    Decoder phi;
    int decoder_index = -1;   // position in the class it was selected from
};

using IkRulePtr = std::shared_ptr<const IkRule>;

} // namespace bmdp
