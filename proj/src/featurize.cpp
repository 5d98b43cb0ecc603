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

#include "saim/featurize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>

#include "saim/errors.hpp"
#include "saim/io.hpp"

namespace saim {

int label_from_stars(int stars) {
  if (stars < 1 || stars > 5)
    throw ContractError("stars must be in 1..5, got " + std::to_string(stars));
  return stars > 3 ? 1 : 0;
}

int Document::resolved_label() const {
  if (stars && label) {
    if (label_from_stars(*stars) != *label)
      throw ContractError("document label disagrees with its star rating");
    return *label;
  }
  if (label) return *label;
  if (stars) return label_from_stars(*stars);
  throw ContractError("document has neither stars nor label");
}

// -------------------------------------------------------------------- Tokens

namespace {

bool is_token_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                         : static_cast<char>(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> extract_terms(std::string_view text) {
  std::vector<std::string> tokens = tokenize(text);
  std::vector<std::string> terms = tokens;
  for (std::size_t i = 1; i < tokens.size(); ++i)
    terms.push_back(tokens[i - 1] + " " + tokens[i]);
  return terms;
}

// ---------------------------------------------------------------- Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> terms, std::vector<double> idf,
                       std::size_t requested_dim)
    : terms_(std::move(terms)), idf_(std::move(idf)), requested_dim_(requested_dim) {
  if (terms_.size() != idf_.size()) throw ShapeError("vocabulary: terms/idf length mismatch");
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!(idf_[i] >= 0.0)) throw ContractError("vocabulary: idf must be >= 0");
    if (!index_.emplace(terms_[i], static_cast<std::uint32_t>(i)).second)
      throw ContractError("vocabulary: duplicate term '" + terms_[i] + "'");
  }
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary fit_vocabulary(std::span<const Document> corpus, std::size_t dim) {
  if (corpus.empty()) throw ContractError("fit_vocabulary: corpus is empty");
  std::map<std::string, std::size_t> df;
  for (const Document& doc : corpus) {
    std::vector<std::string> terms = extract_terms(doc.text);
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    for (auto& t : terms) ++df[std::move(t)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(df.begin(), df.end());
  // std::map already orders lexicographically; stable sort keeps that for ties
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > dim) ranked.resize(dim);

  const double n = static_cast<double>(corpus.size());
  std::vector<std::string> terms;
  std::vector<double> idf;
  terms.reserve(ranked.size());
  idf.reserve(ranked.size());
  for (auto& [term, count] : ranked) {
    terms.push_back(term);
    idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return Vocabulary(std::move(terms), std::move(idf), dim);
}

SparseVector vectorize(std::string_view text, const Vocabulary& vocab) {
  std::map<std::uint32_t, double> tf;
  for (const std::string& term : extract_terms(text))
    if (auto idx = vocab.find(term)) tf[*idx] += 1.0;

  SparseVector out;
  out.dim = vocab.size();
  double sq = 0.0;
  for (const auto& [idx, count] : tf) {
    const double w = count * vocab.idf()[idx];
    if (w == 0.0) continue;
    out.indices.push_back(idx);
    out.values.push_back(w);
    sq += w * w;
  }
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (double& v : out.values) v *= inv;
  }
  return out;
}

// ------------------------------------------------------------------ Datasets

Matrix LabeledDataset::one_hot_labels(std::size_t classes) const {
  return one_hot(labels, classes);
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> rows) const {
  LabeledDataset out;
  out.dim = dim;
  out.domain = domain;
  out.features.reserve(rows.size());
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= size()) throw BoundsError("subset: row out of range");
    out.features.push_back(features[r]);
    out.labels.push_back(labels[r]);
  }
  return out;
}

UnlabeledDataset LabeledDataset::strip_labels() const {
  return UnlabeledDataset{dim, features, domain};
}

void LabeledDataset::validate(std::size_t classes) const {
  if (features.size() != labels.size())
    throw ShapeError("dataset: feature and label counts differ");
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].dim != dim) throw ShapeError("dataset: rows do not share dim");
    features[i].validate();
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
      throw BoundsError("dataset: label out of range at row " + std::to_string(i));
  }
}

bool SparseFile::fully_labeled() const {
  return std::none_of(labels.begin(), labels.end(), [](int y) { return y < 0; });
}

LabeledDataset SparseFile::labeled(std::string domain) const {
  if (!fully_labeled()) throw ContractError("sparse file contains unlabeled rows");
  return LabeledDataset{dim, features, labels, std::move(domain)};
}

UnlabeledDataset SparseFile::unlabeled(std::string domain) const {
  return UnlabeledDataset{dim, features, std::move(domain)};
}

// ---------------------------------------------------------------- Sparse I/O

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

SparseFile parse_sparse(std::string_view text) {
  SparseFile file;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    if (!have_header) {
      auto parts = split_ws(line);
      if (parts.size() != 2 || parts[0] != "#dim" || !parse_number(parts[1], file.dim))
        throw ParseError("expected header '#dim D'", line_no);
      have_header = true;
      continue;
    }
    if (line.front() == '#') continue;
    auto parts = split_ws(line);
    int label = 0;
    if (!parse_number(parts[0], label) || label < -1)
      throw ParseError("bad label '" + std::string(parts[0]) + "'", line_no);
    SparseVector x;
    x.dim = file.dim;
    for (std::size_t k = 1; k < parts.size(); ++k) {
      auto colon = parts[k].find(':');
      std::uint64_t idx = 0;
      double val = 0.0;
      if (colon == std::string_view::npos || !parse_number(parts[k].substr(0, colon), idx) ||
          !parse_number(parts[k].substr(colon + 1), val))
        throw ParseError("bad feature '" + std::string(parts[k]) + "'", line_no);
      if (idx >= file.dim)
        throw BoundsError("feature index " + std::to_string(idx) + " >= dim " +
                          std::to_string(file.dim) + " (line " + std::to_string(line_no) +
                          ")");
      if (!x.indices.empty() && idx <= x.indices.back())
        throw ParseError("feature indices must be strictly increasing", line_no);
      if (val == 0.0) continue;
      x.indices.push_back(static_cast<std::uint32_t>(idx));
      x.values.push_back(val);
    }
    file.features.push_back(std::move(x));
    file.labels.push_back(label);
  }
  return file;
}

SparseFile load_sparse_file(const std::filesystem::path& path) {
  return parse_sparse(read_text_file(path));
}

std::string format_sparse(const SparseFile& file) {
  std::string out = "#dim " + std::to_string(file.dim) + "\n";
  char buf[64];
  for (std::size_t r = 0; r < file.features.size(); ++r) {
    out += std::to_string(file.labels[r]);
    const SparseVector& x = file.features[r];
    for (std::size_t k = 0; k < x.nnz(); ++k) {
      std::snprintf(buf, sizeof buf, " %u:%.17g", x.indices[k], x.values[k]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void save_sparse_file(const std::filesystem::path& path, const SparseFile& file) {
  write_text_file(path, format_sparse(file));
}

void save_sparse_file(const std::filesystem::path& path, const LabeledDataset& data) {
  save_sparse_file(path, SparseFile{data.dim, data.features, data.labels});
}

void save_sparse_file(const std::filesystem::path& path, const UnlabeledDataset& data) {
  save_sparse_file(path, SparseFile{data.dim, data.features,
                                    std::vector<int>(data.features.size(), -1)});
}

// ------------------------------------------------------------------- TSV

namespace {

std::string unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char c = s[++i];
      if (c == 't') out += '\t';
      else if (c == 'n') out += '\n';
      else if (c == 'r') out += '\r';
      else if (c == '\\') out += '\\';
      else {
        out += '\\';
        out += c;
      }
    } else {
      out += s[i];
    }
  }
  return out;
}

}  // namespace

std::vector<Document> parse_tsv(std::string_view text) {
  std::vector<Document> docs;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    auto tab = line.rfind('\t');
    if (tab == std::string_view::npos) throw ParseError("expected 'text<TAB>stars'", line_no);
    std::string_view stars_field = trim(line.substr(tab + 1));
    int stars = 0;
    if (!parse_number(stars_field, stars)) {
      if (docs.empty() && line_no == 1) continue;  // header
      throw ParseError("stars field is not an integer", line_no);
    }
    if (stars < 1 || stars > 5) throw ParseError("stars must be in 1..5", line_no);
    docs.push_back(Document{unescape(line.substr(0, tab)), stars, std::nullopt});
  }
  return docs;
}

std::vector<Document> load_tsv(const std::filesystem::path& path) {
  return parse_tsv(read_text_file(path));
}

}  // namespace saim
