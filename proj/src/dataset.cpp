#include "dcpl/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dcpl/error.hpp"

namespace dcpl {

namespace {

constexpr char kDatasetMagic[4] = {'D', 'C', 'P', 'L'};
constexpr char kHeadMagic[4] = {'D', 'C', 'P', 'H'};

class ByteWriter {
 public:
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, sizeof v);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64s(const std::vector<double>& vs) {
    for (double d : vs) f64(d);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string origin)
      : bytes_(bytes), origin_(std::move(origin)) {}

  void need(std::size_t n, const std::string& what) const {
    if (bytes_.size() - pos_ < n)
      throw FormatError(origin_ + ": unexpected end of file while reading " + what +
                        " at byte offset " + std::to_string(pos_));
  }
  bool magic(const char (&m)[4]) {
    need(4, "magic");
    const bool ok = std::memcmp(bytes_.data() + pos_, m, 4) == 0;
    pos_ += 4;
    return ok;
  }
  std::uint16_t u16(const std::string& what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const std::string& what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64(const std::string& what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    double d;
    std::memcpy(&d, &v, sizeof d);
    return d;
  }
  Mat matrix(std::size_t rows, std::size_t cols, const std::string& what) {
    // Guard against absurd headers before allocating.
    if (cols != 0 && rows > (bytes_.size() - pos_) / 8 / cols)
      throw FormatError(origin_ + ": " + what + " declares " + std::to_string(rows) + "x" +
                        std::to_string(cols) + " values but the file is too short");
    Mat m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        const double v = f64(what);
        if (!std::isfinite(v))
          throw FormatError(origin_ + ": " + what + " row " + std::to_string(r) + " column " +
                            std::to_string(c) + " is not finite");
        m(r, c) = v;
      }
    return m;
  }
  Labels labels(std::size_t n, std::size_t k, const std::string& what) {
    need(4 * n, what);
    Labels out(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t v = u32(what);
      if (v >= k)
        throw FormatError(origin_ + ": " + what + " row " + std::to_string(i) + " has label " +
                          std::to_string(v) + " outside [0, " + std::to_string(k) + ")");
      out[i] = v;
    }
    return out;
  }
  ModelParams head(const std::string& what) {
    const std::uint32_t k = u32(what + " k");
    const std::uint32_t d = u32(what + " d_f");
    ModelParams h;
    h.weights = matrix(k, d, what + " weights");
    Mat b = matrix(1, k, what + " bias");
    h.bias = std::move(b.values());
    return h;
  }
  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }
  const std::string& origin() const { return origin_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

void write_head_section(ByteWriter& w, const ModelParams& h) {
  w.u32(static_cast<std::uint32_t>(h.num_classes()));
  w.u32(static_cast<std::uint32_t>(h.feature_dim()));
  w.f64s(h.weights.values());
  w.f64s(h.bias);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_matrix_finite(const Mat& m, const std::string& what) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      if (!std::isfinite(m(r, c)))
        throw FormatError(what + " row " + std::to_string(r) + " column " + std::to_string(c) +
                          " is not finite");
}

void check_labels(const Labels& labels, std::size_t n, std::size_t k, const std::string& what) {
  if (labels.size() != n)
    throw FormatError(what + " has " + std::to_string(labels.size()) + " entries, expected " +
                      std::to_string(n));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= k)
      throw FormatError(what + " row " + std::to_string(i) + " has label " +
                        std::to_string(labels[i]) + " outside [0, " + std::to_string(k) + ")");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw FormatError(where + ": cannot parse '" + s + "' as a number");
  if (!std::isfinite(v)) throw FormatError(where + " is not finite");
  return v;
}

}  // namespace

void validate(const Dataset& ds) {
  if (ds.n() == 0) throw DegenerateInputError("dataset is empty (n = 0)");
  if (ds.k == 0) throw FormatError("dataset declares k = 0 classes");
  if (ds.features_p.rows() != ds.n())
    throw FormatError("features_p has " + std::to_string(ds.features_p.rows()) +
                      " rows but features_f has " + std::to_string(ds.n()));
  if (ds.d_f() == 0 || ds.d_p() == 0) throw FormatError("feature dimension is zero");
  check_matrix_finite(ds.features_f, "features_f");
  check_matrix_finite(ds.features_p, "features_p");
  if (ds.true_labels) check_labels(*ds.true_labels, ds.n(), ds.k, "true_labels");
  if (ds.pseudo_labels) check_labels(*ds.pseudo_labels, ds.n(), ds.k, "pseudo_labels");
  if (ds.source_head) {
    const auto& h = *ds.source_head;
    if (h.num_classes() != ds.k || h.feature_dim() != ds.d_f() || h.bias.size() != ds.k)
      throw FormatError("embedded source head is " + std::to_string(h.num_classes()) + "x" +
                        std::to_string(h.feature_dim()) + ", dataset needs " +
                        std::to_string(ds.k) + "x" + std::to_string(ds.d_f()));
    if (!h.is_finite()) throw FormatError("embedded source head has non-finite entries");
  }
  if (ds.projection) {
    if (ds.projection->rows() != ds.d_p())
      throw FormatError("projection has " + std::to_string(ds.projection->rows()) +
                        " rows, expected d_p = " + std::to_string(ds.d_p()));
    check_matrix_finite(*ds.projection, "projection");
  }
}

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  validate(ds);
  std::uint32_t flags = 0;
  if (ds.true_labels) flags |= kFlagTrueLabels;
  if (ds.pseudo_labels) flags |= kFlagPseudoLabels;
  if (ds.source_head) flags |= kFlagSourceHead;
  if (ds.projection) flags |= kFlagProjection;

  ByteWriter w;
  w.raw(kDatasetMagic, 4);
  w.u16(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(ds.n()));
  w.u32(static_cast<std::uint32_t>(ds.d_f()));
  w.u32(static_cast<std::uint32_t>(ds.d_p()));
  w.u32(static_cast<std::uint32_t>(ds.k));
  w.u32(flags);
  w.f64s(ds.features_f.values());
  w.f64s(ds.features_p.values());
  if (ds.true_labels)
    for (auto l : *ds.true_labels) w.u32(static_cast<std::uint32_t>(l));
  if (ds.pseudo_labels)
    for (auto l : *ds.pseudo_labels) w.u32(static_cast<std::uint32_t>(l));
  if (ds.source_head) write_head_section(w, *ds.source_head);
  if (ds.projection) {
    w.u32(static_cast<std::uint32_t>(ds.projection->rows()));
    w.u32(static_cast<std::uint32_t>(ds.projection->cols()));
    w.f64s(ds.projection->values());
  }
  return w.take();
}

Dataset decode_dataset(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  ByteReader r(bytes, origin);
  if (!r.magic(kDatasetMagic)) throw FormatError(origin + ": bad magic, expected \"DCPL\"");
  const std::uint16_t version = r.u16("format version");
  if (version != kFormatVersion)
    throw FormatError(origin + ": unsupported format version " + std::to_string(version));
  const std::size_t n = r.u32("header n");
  const std::size_t d_f = r.u32("header d_f");
  const std::size_t d_p = r.u32("header d_p");
  const std::size_t k = r.u32("header k");
  const std::uint32_t flags = r.u32("header flags");
  if (flags & ~(kFlagTrueLabels | kFlagPseudoLabels | kFlagSourceHead | kFlagProjection))
    throw FormatError(origin + ": unknown header flag bits " + std::to_string(flags));
  if (n == 0) throw DegenerateInputError(origin + ": dataset is empty (n = 0)");
  if (k == 0) throw FormatError(origin + ": header declares k = 0");
  if (d_f == 0 || d_p == 0) throw FormatError(origin + ": header declares a zero feature dimension");

  Dataset ds;
  ds.k = k;
  ds.features_f = r.matrix(n, d_f, "features_f");
  ds.features_p = r.matrix(n, d_p, "features_p");
  if (flags & kFlagTrueLabels) ds.true_labels = r.labels(n, k, "true_labels");
  if (flags & kFlagPseudoLabels) ds.pseudo_labels = r.labels(n, k, "pseudo_labels");
  if (flags & kFlagSourceHead) {
    ds.source_head = r.head("source_head");
    if (ds.source_head->num_classes() != k || ds.source_head->feature_dim() != d_f)
      throw FormatError(origin + ": source_head dimensions do not match header");
  }
  if (flags & kFlagProjection) {
    const std::size_t rows = r.u32("projection rows");
    const std::size_t cols = r.u32("projection cols");
    if (rows != d_p) throw FormatError(origin + ": projection rows do not match d_p");
    ds.projection = r.matrix(rows, cols, "projection");
  }
  if (!r.at_end())
    throw FormatError(origin + ": trailing bytes after offset " + std::to_string(r.pos()));
  validate(ds);
  return ds;
}

Dataset load_dataset(const std::string& path, const LoadOptions& opts) {
  if (!std::filesystem::exists(path)) throw FormatError(path + ": no such file");
  const auto bytes = read_file(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kDatasetMagic, 4) == 0)
    return decode_dataset(bytes, path);
  const bool csv_ext = std::filesystem::path(path).extension() == ".csv";
  const bool csv_header = bytes.size() >= 3 && std::memcmp(bytes.data(), "id,", 3) == 0;
  if (csv_ext || csv_header) return load_dataset_csv(path, opts);
  throw FormatError(path + ": bad magic, expected \"DCPL\" container or CSV with an id column");
}

Dataset load_dataset_csv(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open file");
  std::string line;
  if (!std::getline(in, line)) throw DegenerateInputError(path + ": empty file");
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "id")
    throw FormatError(path + ": header must start with 'id'");
  bool has_label = false;
  std::size_t d_f = 0, d_p = 0;
  for (std::size_t i = 1; i < header.size(); ++i) {
    const auto& h = header[i];
    if (h == "label" && i == 1) {
      has_label = true;
    } else if (h.rfind("f_", 0) == 0 && d_p == 0) {
      if (h != "f_" + std::to_string(d_f))
        throw FormatError(path + ": header column " + std::to_string(i) + " is '" + h +
                          "', expected f_" + std::to_string(d_f));
      ++d_f;
    } else if (h.rfind("p_", 0) == 0) {
      if (h != "p_" + std::to_string(d_p))
        throw FormatError(path + ": header column " + std::to_string(i) + " is '" + h +
                          "', expected p_" + std::to_string(d_p));
      ++d_p;
    } else {
      throw FormatError(path + ": unexpected header column '" + h + "'");
    }
  }
  if (d_f == 0 || d_p == 0) throw FormatError(path + ": header needs f_* and p_* columns");

  const std::size_t width = 1 + (has_label ? 1 : 0) + d_f + d_p;
  std::vector<double> ff, fp;
  Labels labels;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const std::string where = path + " row " + std::to_string(row);
    if (cells.size() != width)
      throw FormatError(where + ": has " + std::to_string(cells.size()) + " fields, expected " +
                        std::to_string(width));
    std::size_t c = 1;
    if (has_label) {
      const auto& s = cells[c++];
      std::size_t v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size())
        throw FormatError(where + ": label '" + s + "' is not a class index");
      labels.push_back(v);
    }
    for (std::size_t j = 0; j < d_f; ++j, ++c)
      ff.push_back(parse_double(cells[c], where + " field f_" + std::to_string(j)));
    for (std::size_t j = 0; j < d_p; ++j, ++c)
      fp.push_back(parse_double(cells[c], where + " field p_" + std::to_string(j)));
    ++row;
  }
  if (row == 0) throw DegenerateInputError(path + ": dataset is empty (n = 0)");

  Dataset ds;
  if (opts.k) {
    ds.k = *opts.k;
  } else if (has_label) {
    std::size_t mx = 0;
    for (auto l : labels) mx = std::max(mx, l);
    ds.k = mx + 1;
  } else {
    throw FormatError(path + ": CSV has no label column; class count must be given");
  }
  ds.features_f = Mat(row, d_f, std::move(ff));
  ds.features_p = Mat(row, d_p, std::move(fp));
  if (has_label) ds.true_labels = std::move(labels);
  try {
    validate(ds);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  write_file_atomic(path, encode_dataset(ds));
}

void save_head(const ModelParams& head, const std::string& path) {
  if (!head.is_finite()) throw ArgumentError("save_head: non-finite parameters");
  if (head.bias.size() != head.num_classes())
    throw ArgumentError("save_head: bias length does not match k");
  ByteWriter w;
  w.raw(kHeadMagic, 4);
  w.u16(kFormatVersion);
  write_head_section(w, head);
  write_file_atomic(path, w.take());
}

ModelParams load_head(const std::string& path) {
  if (!std::filesystem::exists(path)) throw FormatError(path + ": no such file");
  const auto bytes = read_file(path);
  ByteReader r(bytes, path);
  if (!r.magic(kHeadMagic)) throw FormatError(path + ": bad magic, expected \"DCPH\"");
  const std::uint16_t version = r.u16("format version");
  if (version != kFormatVersion)
    throw FormatError(path + ": unsupported format version " + std::to_string(version));
  ModelParams h = r.head("head");
  if (h.num_classes() == 0 || h.feature_dim() == 0)
    throw FormatError(path + ": head has a zero dimension");
  if (!r.at_end()) throw FormatError(path + ": trailing bytes after head section");
  return h;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(path + ": cannot open for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw FormatError(path + ": write failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw FormatError(path + ": rename failed");
  }
}

void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& contents) {
  write_file_atomic(path, std::string(contents.begin(), contents.end()));
}

std::string matrix_to_csv(const Mat& m) {
  std::string out;
  char buf[32];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

Mat matrix_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (rows == 0) cols = cells.size();
    if (cells.size() != cols)
      throw FormatError("matrix CSV row " + std::to_string(rows) + " has " +
                        std::to_string(cells.size()) + " fields, expected " + std::to_string(cols));
    for (std::size_t c = 0; c < cells.size(); ++c)
      values.push_back(parse_double(cells[c], "matrix CSV row " + std::to_string(rows)));
    ++rows;
  }
  return Mat(rows, cols, std::move(values));
}

}  // namespace dcpl
