// Copyright 2026 The saim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SAIM_FEATURIZE_HPP_
#define SAIM_FEATURIZE_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "saim/numerics.hpp"

namespace saim {

/// A review. Labeled documents carry stars, a label, or both (which must agree).
struct Document {
  std::string text;
  std::optional<int> stars;
  std::optional<int> label;

  /// stars > 3 is positive (1), otherwise negative (0). Throws ContractError
  /// if neither field is set or they disagree.
  int resolved_label() const;
};

int label_from_stars(int stars);

/// Lowercases ASCII and splits on runs of non-alphanumeric ASCII bytes.
/// Bytes >= 0x80 are kept inside tokens so multi-byte characters survive.
std::vector<std::string> tokenize(std::string_view text);

/// Unigrams followed by space-joined adjacent bigrams.
std::vector<std::string> extract_terms(std::string_view text);

class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> terms, std::vector<double> idf,
             std::size_t requested_dim);

  /// Number of selected terms; the feature dimensionality.
  std::size_t size() const { return terms_.size(); }
  std::size_t requested_dim() const { return requested_dim_; }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<double>& idf() const { return idf_; }
  std::optional<std::uint32_t> find(std::string_view term) const;

 private:
  std::vector<std::string> terms_;
  std::vector<double> idf_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::size_t requested_dim_ = 0;
};

/// Keeps the `dim` terms with highest document frequency (ties broken
/// lexicographically); idf = ln((1 + n) / (1 + df)) + 1.
Vocabulary fit_vocabulary(std::span<const Document> corpus, std::size_t dim);

/// Raw-count tf times idf, L2 normalized. Out-of-vocabulary terms are ignored.
SparseVector vectorize(std::string_view text, const Vocabulary& vocab);
inline SparseVector vectorize(const Document& doc, const Vocabulary& vocab) {
  return vectorize(doc.text, vocab);
}

struct UnlabeledDataset {
  std::size_t dim = 0;
  std::vector<SparseVector> features;
  std::string domain;

  std::size_t size() const { return features.size(); }
};

struct LabeledDataset {
  std::size_t dim = 0;
  std::vector<SparseVector> features;
  std::vector<int> labels;
  std::string domain;

  std::size_t size() const { return features.size(); }
  Matrix one_hot_labels(std::size_t classes) const;
  LabeledDataset subset(std::span<const std::size_t> rows) const;
  /// Drops the labels; the returned dataset carries no trace of them.
  UnlabeledDataset strip_labels() const;
  /// Checks shared dim, label range and per-row sparse invariants.
  void validate(std::size_t classes) const;
};

/// Contents of a sparse text file. Label -1 marks an unlabeled row.
struct SparseFile {
  std::size_t dim = 0;
  std::vector<SparseVector> features;
  std::vector<int> labels;

  bool fully_labeled() const;
  LabeledDataset labeled(std::string domain = {}) const;
  UnlabeledDataset unlabeled(std::string domain = {}) const;
};

/// Parses "#dim D" followed by "label idx:val idx:val ..." records.
SparseFile parse_sparse(std::string_view text);
SparseFile load_sparse_file(const std::filesystem::path& path);

/// Values are written with 17 significant digits.
std::string format_sparse(const SparseFile& file);
void save_sparse_file(const std::filesystem::path& path, const SparseFile& file);
void save_sparse_file(const std::filesystem::path& path, const LabeledDataset& data);
void save_sparse_file(const std::filesystem::path& path, const UnlabeledDataset& data);

/// Reads "text<TAB>stars" rows. Text may use \t, \n and \\ escapes. A first
/// row whose stars field is not an integer is treated as a header.
std::vector<Document> parse_tsv(std::string_view text);
std::vector<Document> load_tsv(const std::filesystem::path& path);

}  // namespace saim

#endif  // SAIM_FEATURIZE_HPP_
