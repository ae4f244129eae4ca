#include "bmdp/tables.hpp"

#include <stdexcept>

namespace bmdp {

ConditionalTable::ConditionalTable(int num_actions, int num_indices)
    : num_actions_(num_actions), num_indices_(num_indices) {
    if (num_actions < 1 || num_indices < 1)
        throw std::invalid_argument("ConditionalTable: bad shape");
    uniform_row_.assign(static_cast<std::size_t>(num_actions) * num_indices,
                        1.0 / (static_cast<double>(num_actions) * num_indices));
}

void ConditionalTable::set_row(int z, int zprime, std::vector<double> probs) {
    if (static_cast<int>(probs.size()) != row_size())
        throw std::invalid_argument("ConditionalTable::set_row: arity");
    rows_[{z, zprime}] = std::move(probs);
}

bool ConditionalTable::has_row(int z, int zprime) const {
    return rows_.count({z, zprime}) > 0;
}

const std::vector<double>& ConditionalTable::row(int z, int zprime) const {
    auto it = rows_.find({z, zprime});
    return it == rows_.end() ? uniform_row_ : it->second;
}

std::pair<int, int> ConditionalTable::argmax_cell(int z, int zprime, long long* reads) const {
    const auto& r = row(z, zprime);
    if (reads) *reads += static_cast<long long>(r.size());
    int best = 0;
    for (int c = 1; c < static_cast<int>(r.size()); ++c)
        if (r[c] > r[best]) best = c;
    return {best / num_indices_, best % num_indices_};
}

} // namespace bmdp
