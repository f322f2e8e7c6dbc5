#include "hetens/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "hetens/error.hpp"

namespace hetens {

Dataset::Dataset(std::size_t n, std::size_t d, std::vector<double> features, std::vector<ClassId> labels,
                 std::vector<std::string> class_names, std::vector<std::string> feature_names)
    : n_(n),
      d_(d),
      features_(std::move(features)),
      labels_(std::move(labels)),
      class_names_(std::move(class_names)),
      feature_names_(std::move(feature_names)) {
  if (n_ == 0) throw DataError("dataset has no rows");
  if (d_ == 0) throw DataError("dataset has no feature columns");
  if (class_names_.size() < 2) throw DataError("single-class dataset");
  if (features_.size() != n_ * d_) throw DataError("feature matrix size does not match n*d");
  if (labels_.size() != n_) throw DataError("label vector size does not match n");
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (!std::isfinite(features_[i])) {
      throw DataError("non-finite feature value at row " + std::to_string(i / d_) + ", column " +
                      std::to_string(i % d_));
    }
  }
  const auto k = static_cast<ClassId>(class_names_.size());
  for (std::size_t i = 0; i < n_; ++i) {
    if (labels_[i] < 0 || labels_[i] >= k) {
      throw DataError("label out of range at row " + std::to_string(i));
    }
  }
  std::unordered_set<std::string> seen(class_names_.begin(), class_names_.end());
  if (seen.size() != class_names_.size()) throw DataError("duplicate class names");
  if (feature_names_.empty()) {
    feature_names_.reserve(d_);
    for (std::size_t j = 0; j < d_; ++j) feature_names_.push_back("x" + std::to_string(j));
  } else if (feature_names_.size() != d_) {
    throw DataError("feature name count does not match d");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> f;
  f.reserve(indices.size() * d_);
  std::vector<ClassId> y;
  y.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= n_) throw DataError("subset index out of range");
    const auto r = row(i);
    f.insert(f.end(), r.begin(), r.end());
    y.push_back(labels_[i]);
  }
  return Dataset(indices.size(), d_, std::move(f), std::move(y), class_names_, feature_names_);
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes(), 0);
  for (ClassId y : labels_) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

namespace {

class Fnv1a {
 public:
  void bytes(const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h_ ^= b[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

std::uint64_t fingerprint(const Dataset& ds) {
  Fnv1a h;
  h.value(static_cast<std::uint64_t>(ds.size()));
  h.value(static_cast<std::uint64_t>(ds.dims()));
  for (double x : ds.features()) {
    // +0.0 and -0.0 hash alike.
    const double v = x == 0.0 ? 0.0 : x;
    h.value(v);
  }
  for (ClassId y : ds.labels()) h.value(static_cast<std::int32_t>(y));
  for (const auto& name : ds.class_names()) {
    h.bytes(name.data(), name.size());
    h.value('\0');
  }
  return h.digest();
}

std::vector<bool> IndexSample::in_bag_mask(std::size_t n) const {
  std::vector<bool> mask(n, false);
  for (std::size_t i : indices) {
    if (i < n) mask[i] = true;
  }
  return mask;
}

std::vector<std::size_t> IndexSample::out_of_bag(std::size_t n) const {
  const auto mask = in_bag_mask(n);
  std::vector<std::size_t> oob;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) oob.push_back(i);
  }
  return oob;
}

Split stratified_split(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  Rng rng(spec.seed);
  std::vector<std::size_t> train, test;
  if (spec.stratified) {
    std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.label(i))].push_back(i);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      if (by_class[c].size() < 2) {
        throw DataError("class '" + ds.class_names()[c] + "' has fewer than 2 instances");
      }
    }
    for (auto& members : by_class) {
      const auto take = static_cast<std::size_t>(
          std::floor(static_cast<double>(members.size()) * spec.train_fraction + 0.5));
      shuffle(members, rng);
      train.insert(train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
      test.insert(test.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
    }
  } else {
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);
    shuffle(all, rng);
    const auto take =
        static_cast<std::size_t>(std::floor(static_cast<double>(ds.size()) * spec.train_fraction + 0.5));
    train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take));
    test.assign(all.begin() + static_cast<std::ptrdiff_t>(take), all.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  if (train.empty() || test.empty()) throw DataError("split leaves an empty partition");
  return Split{ds.subset(train), ds.subset(test), std::move(train), std::move(test)};
}

IndexSample subbag(std::size_t n, double rate, Seed seed) {
  if (!(rate > 0.0 && rate <= 1.0)) throw ConfigError("subbag rate must lie in (0, 1]");
  if (n < 2) throw DataError("subbag needs at least 2 instances");
  const auto m = static_cast<std::size_t>(std::floor(static_cast<double>(n) * rate));
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates: the first m slots form a uniform sample.
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(all[i], all[j]);
  }
  all.resize(m);
  return IndexSample{std::move(all), false};
}

IndexSample bootstrap(std::size_t n, Seed seed) {
  if (n < 1) throw DataError("bootstrap needs at least 1 instance");
  Rng rng(seed);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = rng.uniform_index(n);
  return IndexSample{std::move(idx), true};
}

namespace {

constexpr std::size_t kSyntheticDims = 20;

template <typename Sampler>
Dataset generate(std::size_t n, Seed seed, Sampler&& sample) {
  if (n < 2) throw ConfigError("synthetic generators need n >= 2");
  Rng rng(seed);
  std::vector<double> f(n * kSyntheticDims);
  std::vector<ClassId> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.uniform01() < 0.5 ? 0 : 1;
    sample(y[i], std::span<double>(f.data() + i * kSyntheticDims, kSyntheticDims), rng);
  }
  return Dataset(n, kSyntheticDims, std::move(f), std::move(y), {"0", "1"});
}

const double kShift = 2.0 / std::sqrt(static_cast<double>(kSyntheticDims));

}  // namespace

Dataset gen_twonorm(std::size_t n, Seed seed) {
  return generate(n, seed, [](ClassId y, std::span<double> x, Rng& rng) {
    const double mu = y == 0 ? kShift : -kShift;
    for (double& v : x) v = mu + rng.normal();
  });
}

Dataset gen_threenorm(std::size_t n, Seed seed) {
  return generate(n, seed, [](ClassId y, std::span<double> x, Rng& rng) {
    if (y == 0) {
      const double mu = rng.uniform01() < 0.5 ? kShift : -kShift;
      for (double& v : x) v = mu + rng.normal();
    } else {
      for (std::size_t j = 0; j < x.size(); ++j) x[j] = (j % 2 == 0 ? kShift : -kShift) + rng.normal();
    }
  });
}

Dataset gen_ringnorm(std::size_t n, Seed seed) {
  return generate(n, seed, [](ClassId y, std::span<double> x, Rng& rng) {
    if (y == 0) {
      for (double& v : x) v = 2.0 * rng.normal();
    } else {
      for (double& v : x) v = kShift + rng.normal();
    }
  });
}

Generator synthetic_generator(std::string_view name) {
  if (name == "twonorm") return &gen_twonorm;
  if (name == "threenorm") return &gen_threenorm;
  if (name == "ringnorm") return &gen_ringnorm;
  return nullptr;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  s = s.substr(b, e - b);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') quoted = !quoted;
    if (ch == delim && !quoted) {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  out.push_back(trim(cell));
  return out;
}

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

std::string where(std::size_t line, std::size_t col) {
  return "line " + std::to_string(line) + ", column " + std::to_string(col + 1);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    header = split_line(line, options.delimiter);
    break;
  }
  if (header.empty()) throw DataError("'" + path.string() + "' has no header row");

  std::size_t label_col = 0;
  if (const auto* name = std::get_if<std::string>(&options.label_column)) {
    const auto it = std::find(header.begin(), header.end(), *name);
    if (it == header.end()) throw DataError("label column '" + *name + "' not found in header");
    label_col = static_cast<std::size_t>(it - header.begin());
  } else {
    label_col = std::get<std::size_t>(options.label_column);
    if (label_col >= header.size()) throw DataError("label column index out of range");
  }
  for (const auto& c : options.categorical) {
    if (std::find(header.begin(), header.end(), c) == header.end()) {
      throw DataError("categorical column '" + c + "' not found in header");
    }
  }

  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_line(line, options.delimiter);
    if (cells.size() != header.size()) {
      throw DataError("ragged row at line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (cells[c].empty() || cells[c] == "?") throw DataError("missing value at " + where(line_no, c));
    }
    rows.push_back(std::move(cells));
    row_lines.push_back(line_no);
  }
  if (rows.empty()) throw DataError("'" + path.string() + "' has no data rows");

  // Column plan: numeric columns map to one output feature, categorical ones
  // to one feature per level.
  struct Column {
    std::size_t source;
    bool categorical;
    std::vector<std::string> levels;
  };
  std::vector<Column> columns;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == label_col) continue;
    bool categorical = std::find(options.categorical.begin(), options.categorical.end(), header[c]) !=
                       options.categorical.end();
    if (!categorical) {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        double v = 0.0;
        if (parse_real(rows[r][c], v)) {
          if (!std::isfinite(v)) throw DataError("non-finite value at " + where(row_lines[r], c));
          continue;
        }
        if (!options.auto_categorical) {
          throw DataError("non-numeric feature value '" + rows[r][c] + "' at " + where(row_lines[r], c));
        }
        categorical = true;
        break;
      }
    }
    Column col{c, categorical, {}};
    if (categorical) {
      for (const auto& row : rows) {
        if (std::find(col.levels.begin(), col.levels.end(), row[c]) == col.levels.end()) {
          col.levels.push_back(row[c]);
        }
      }
    }
    columns.push_back(std::move(col));
  }

  std::vector<std::string> feature_names;
  for (const auto& col : columns) {
    if (col.categorical) {
      for (const auto& lv : col.levels) feature_names.push_back(header[col.source] + "=" + lv);
    } else {
      feature_names.push_back(header[col.source]);
    }
  }
  const std::size_t d = feature_names.size();
  if (d == 0) throw DataError("no feature columns besides the label");

  std::vector<std::string> class_names = options.class_names;
  std::unordered_map<std::string, ClassId> class_index;
  for (std::size_t c = 0; c < class_names.size(); ++c) class_index.emplace(class_names[c], static_cast<ClassId>(c));
  std::vector<ClassId> labels;
  std::vector<double> features;
  features.reserve(rows.size() * d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto it = class_index.find(row[label_col]);
    if (it == class_index.end()) {
      if (!options.class_names.empty()) {
        throw DataError("unknown class '" + row[label_col] + "' at " + where(row_lines[r], label_col));
      }
      it = class_index.emplace(row[label_col], static_cast<ClassId>(class_names.size())).first;
      class_names.push_back(row[label_col]);
    }
    labels.push_back(it->second);
    for (const auto& col : columns) {
      if (col.categorical) {
        const auto pos = std::find(col.levels.begin(), col.levels.end(), row[col.source]) - col.levels.begin();
        for (std::ptrdiff_t l = 0; l < static_cast<std::ptrdiff_t>(col.levels.size()); ++l) {
          features.push_back(l == pos ? 1.0 : 0.0);
        }
      } else {
        double v = 0.0;
        parse_real(row[col.source], v);
        features.push_back(v);
      }
    }
  }
  if (class_names.size() < 2) throw DataError("single-class dataset");
  return Dataset(rows.size(), d, std::move(features), std::move(labels), std::move(class_names),
                 std::move(feature_names));
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const auto& name : ds.feature_names()) out << name << ',';
  out << "class\n";
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ',';
    }
    out << ds.class_names()[static_cast<std::size_t>(ds.label(i))] << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Standardizer Standardizer::fit(const Dataset& ds) {
  const std::size_t n = ds.size(), d = ds.dims();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = ds.row(i);
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
  }
  for (auto& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = ds.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double c = r[j] - s.mean[j];
      var[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    if (sd > 0.0 && std::isfinite(1.0 / sd)) {
      s.scale[j] = sd;
    } else {
      s.mean[j] = 0.0;
      s.scale[j] = 1.0;
      s.degenerate.push_back(j);
    }
  }
  return s;
}

void Standardizer::apply(std::span<const double> x, std::span<double> out) const {
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / scale[j];
}

Dataset Standardizer::transform(const Dataset& ds) const {
  if (ds.dims() != mean.size()) throw DataError("standardizer dimension mismatch");
  std::vector<double> f(ds.features().size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    apply(ds.row(i), std::span<double>(f.data() + i * ds.dims(), ds.dims()));
  }
  return Dataset(ds.size(), ds.dims(), std::move(f), ds.labels(), ds.class_names(), ds.feature_names());
}

}  // namespace hetens
