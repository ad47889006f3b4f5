// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace cfwb {

// Causal attention mask as per-query-row sorted sets of attendable key
// indices. Invariants: row t contains t, all indices are in [0, t], rows are
// strictly increasing with no duplicates.
struct SparsityPattern {
  std::size_t n = 0;
  std::vector<std::vector<std::size_t>> rows;

  // Throws DataError if any invariant is violated.
  void validate() const;
};

// Row t = {0..t}; n(n+1)/2 total pairs.
SparsityPattern full_causal_pattern(std::size_t n);

// Local window of width s plus periodic anchor columns (j mod s == s-1):
// row t = {j : t-s < j <= t} ∪ {j <= t : j mod s == s-1}.
SparsityPattern strided_sparse_pattern(std::size_t n, std::size_t stride);
// Default stride ceil(sqrt(n)).
SparsityPattern strided_sparse_pattern(std::size_t n);

// Powers-of-two history: row t = {t} ∪ {t - 2^j : 2^j <= t}.
SparsityPattern logsparse_pattern(std::size_t n);

// Row t = {t}; pointwise attention, used by permutation-covariance tests.
SparsityPattern self_only_pattern(std::size_t n);

std::size_t default_stride(std::size_t n);  // ceil(sqrt(n))

struct PatternStats {
  std::size_t total_pairs = 0;
  std::size_t max_row_cardinality = 0;
  std::size_t bytes_estimate = 0;  // total_pairs * 8 (one f64 score per pair)
};

PatternStats pattern_stats(const SparsityPattern& p);

// Minimum number of stacked layers after which every position j has received
// information from every i <= j, computed by a levelized breadth-first
// expansion of the per-row reachable sets. Returns -1 if some pair can never
// connect (e.g. the self-only pattern).
int reachability_depth(const SparsityPattern& p);

// Per-node completion levels: element j is the smallest L such that j reaches
// every i <= j within L layers (-1 if never). reachability_depth is the max.
// Exposed so sweep tests can derive the depth of every prefix length from one
// pass: rows do not depend on n, so depth(n) = max over j < n.
std::vector<int> reachability_completion_levels(const SparsityPattern& p, int max_levels = 64);

// Text format: one line per row, space-separated indices.
void write_pattern(std::ostream& os, const SparsityPattern& p);
SparsityPattern read_pattern(std::istream& is);

// Attended positions per element for factorized 2-D attention (one row pass
// plus one column pass) versus full 2-D attention.
inline std::size_t axial_pairs_per_element(std::size_t h, std::size_t w) { return h + w; }
inline std::size_t full_2d_pairs_per_element(std::size_t h, std::size_t w) { return h * w; }

}  // namespace cfwb
