#pragma once

#include <iosfwd>
#include <string>

#include "bmdp/model.hpp"
#include "bmdp/policy.hpp"

namespace bmdp {

/// Plain-text model format (lossless round trip; floats printed with 17
/// significant digits). Layout:
///
///   bmdp-model v1
///   horizon H
///   layer-states n1 ... nH
///   actions A
///   initial p...                      # over layer-1 states
///   transition s a p...               # one line per (s below last layer, a)
///   emission s k x1 p1 ... xk pk
///   decoder x s                       # one line per observation
///   reward s a v                      # optional
///   end
void save_model(const BlockMdp& m, std::ostream& out);
void save_model(const BlockMdp& m, const std::string& path);
BlockMdp load_model(std::istream& in);
BlockMdp load_model(const std::string& path);

/// Cover-set format: shared (table, decoder) rules followed by per-layer
/// member lists (stacks reference rules by index; Markov members are inlined).
/// Only table decoders serialize; vector-observation covers stay in memory.
void save_covers(const CoverSet& covers, std::ostream& out);
void save_covers(const CoverSet& covers, const std::string& path);
CoverSet load_covers(std::istream& in);
CoverSet load_covers(const std::string& path);

std::string format_double(double v);

} // namespace bmdp
