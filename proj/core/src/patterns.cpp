// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfwb/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "cfwb/errors.hpp"

namespace cfwb {

void SparsityPattern::validate() const {
  if (rows.size() != n) {
    throw DataError("pattern: " + std::to_string(rows.size()) + " rows for n=" + std::to_string(n));
  }
  for (std::size_t t = 0; t < n; ++t) {
    const auto& row = rows[t];
    if (row.empty()) throw DataError("pattern: row " + std::to_string(t) + " is empty");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i] > t) {
        throw DataError("pattern: row " + std::to_string(t) + " attends to future index " +
                        std::to_string(row[i]));
      }
      if (i > 0 && row[i] <= row[i - 1]) {
        throw DataError("pattern: row " + std::to_string(t) + " is not strictly sorted");
      }
    }
    if (row.back() != t) {
      throw DataError("pattern: row " + std::to_string(t) + " does not contain itself");
    }
  }
}

std::size_t default_stride(std::size_t n) {
  return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
}

SparsityPattern full_causal_pattern(std::size_t n) {
  if (n == 0) throw ConfigError("full_causal_pattern: n must be >= 1");
  SparsityPattern p;
  p.n = n;
  p.rows.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    p.rows[t].resize(t + 1);
    for (std::size_t j = 0; j <= t; ++j) p.rows[t][j] = j;
  }
  return p;
}

SparsityPattern strided_sparse_pattern(std::size_t n, std::size_t stride) {
  if (n == 0) throw ConfigError("strided_sparse_pattern: n must be >= 1");
  if (stride == 0) throw ConfigError("strided_sparse_pattern: stride must be >= 1");
  SparsityPattern p;
  p.n = n;
  p.rows.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    auto& row = p.rows[t];
    // Anchor columns j mod s == s-1, then the local window (t-s, t].
    for (std::size_t j = stride - 1; j <= t; j += stride) row.push_back(j);
    const std::size_t w0 = t + 1 > stride ? t + 1 - stride : 0;
    for (std::size_t j = w0; j <= t; ++j) row.push_back(j);
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return p;
}

SparsityPattern strided_sparse_pattern(std::size_t n) {
  return strided_sparse_pattern(n, default_stride(n));
}

SparsityPattern logsparse_pattern(std::size_t n) {
  if (n == 0) throw ConfigError("logsparse_pattern: n must be >= 1");
  SparsityPattern p;
  p.n = n;
  p.rows.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    auto& row = p.rows[t];
    for (std::size_t step = 1; step <= t; step <<= 1) row.push_back(t - step);
    row.push_back(t);
    std::sort(row.begin(), row.end());
  }
  return p;
}

SparsityPattern self_only_pattern(std::size_t n) {
  if (n == 0) throw ConfigError("self_only_pattern: n must be >= 1");
  SparsityPattern p;
  p.n = n;
  p.rows.resize(n);
  for (std::size_t t = 0; t < n; ++t) p.rows[t] = {t};
  return p;
}

PatternStats pattern_stats(const SparsityPattern& p) {
  PatternStats s;
  for (const auto& row : p.rows) {
    s.total_pairs += row.size();
    s.max_row_cardinality = std::max(s.max_row_cardinality, row.size());
  }
  s.bytes_estimate = s.total_pairs * 8;
  return s;
}

std::vector<int> reachability_completion_levels(const SparsityPattern& p, int max_levels) {
  p.validate();
  const std::size_t n = p.n;
  const std::size_t words = (n + 63) / 64;
  // reach[j] = bitset over targets i, grown level by level:
  // R_1(j) = rows[j]; R_{L+1}(j) = union of R_L(u) for u in rows[j].
  std::vector<std::uint64_t> cur(n * words, 0), next;
  std::vector<int> level(n, -1);
  std::vector<std::size_t> bits_needed(n), bits_have(n, 0);
  for (std::size_t j = 0; j < n; ++j) bits_needed[j] = j + 1;

  auto popcount_row = [&](const std::uint64_t* row, std::size_t upto_words) {
    std::size_t c = 0;
    for (std::size_t w = 0; w < upto_words; ++w) c += static_cast<std::size_t>(__builtin_popcountll(row[w]));
    return c;
  };

  std::size_t incomplete = n;
  for (std::size_t j = 0; j < n; ++j) {
    std::uint64_t* row = cur.data() + j * words;
    for (std::size_t i : p.rows[j]) row[i / 64] |= 1ULL << (i % 64);
    bits_have[j] = popcount_row(row, j / 64 + 1);
    if (bits_have[j] == bits_needed[j]) {
      level[j] = 1;
      --incomplete;
    }
  }

  next = cur;
  for (int lvl = 2; lvl <= max_levels && incomplete > 0; ++lvl) {
    bool progress = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (level[j] >= 0) continue;
      std::uint64_t* out = next.data() + j * words;
      const std::size_t row_words = j / 64 + 1;
      for (std::size_t u : p.rows[j]) {
        const std::uint64_t* src = cur.data() + u * words;
        const std::size_t uw = u / 64 + 1;
        for (std::size_t w = 0; w < uw; ++w) out[w] |= src[w];
      }
      const std::size_t have = popcount_row(out, row_words);
      if (have != bits_have[j]) progress = true;
      bits_have[j] = have;
      if (have == bits_needed[j]) {
        level[j] = lvl;
        --incomplete;
      }
    }
    cur = next;
    if (!progress) break;  // disconnected pairs remain
  }
  return level;
}

int reachability_depth(const SparsityPattern& p) {
  const std::vector<int> levels = reachability_completion_levels(p);
  int depth = 0;
  for (int l : levels) {
    if (l < 0) return -1;
    depth = std::max(depth, l);
  }
  return depth;
}

void write_pattern(std::ostream& os, const SparsityPattern& p) {
  for (const auto& row : p.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ' ';
      os << row[i];
    }
    os << '\n';
  }
}

SparsityPattern read_pattern(std::istream& is) {
  SparsityPattern p;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::size_t> row;
    std::size_t v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) throw FormatError("pattern: malformed row '" + line + "'");
    p.rows.push_back(std::move(row));
  }
  p.n = p.rows.size();
  p.validate();
  return p;
}

}  // namespace cfwb
