#include "keydetect/model_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "keydetect/errors.hpp"
#include "keydetect/record_io.hpp"
#include "keydetect/text.hpp"

namespace keydetect {

namespace {

constexpr std::string_view kMagic = "KEYDETECT-MODEL";
constexpr int kVersion = 1;

std::span<const double> span_of(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Row-major copy of a matrix.
std::vector<double> flat(const Matrix& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

Vector to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix to_mat(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[r * cols + c];
  return m;
}

std::size_t read_size(RecordReader& rd, std::string_view key) {
  const long long v = rd.expect_int(key);
  if (v < 0) rd.fail("'" + std::string(key) + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

void write_matrix(std::ostream& out, std::string_view key, const Matrix& m) {
  out << key << "_shape " << m.rows() << ' ' << m.cols() << '\n';
  write_array(out, key, flat(m));
}

Matrix read_matrix(RecordReader& rd, const std::string& key) {
  const auto dims = rd.expect(key + "_shape", 2);
  const long long rows = rd.to_int(dims[0]), cols = rd.to_int(dims[1]);
  if (rows < 0 || cols < 0) rd.fail("negative matrix shape");
  const auto r = static_cast<std::size_t>(rows), c = static_cast<std::size_t>(cols);
  return to_mat(rd.expect_array(key, r * c), r, c);
}

void write_standardizer(std::ostream& out, const Standardizer& s) {
  write_array(out, "std_mean", span_of(s.mean));
  write_array(out, "std_scale", span_of(s.scale));
}

Standardizer read_standardizer(RecordReader& rd) {
  Standardizer s;
  s.mean = to_vec(rd.expect_array("std_mean"));
  s.scale = to_vec(rd.expect_array("std_scale", static_cast<std::size_t>(s.mean.size())));
  for (Eigen::Index i = 0; i < s.scale.size(); ++i) {
    if (!(s.scale[i] > 0.0)) rd.fail("standardizer scale must be positive");
  }
  return s;
}

void write_body(std::ostream& out, const StatDetectorModel& m) {
  out << "detector " << to_string(m.kind) << '\n';
  write_record(out, "z_threshold", std::vector<double>{m.z_threshold});
  out << "count " << m.stats.count << '\n';
  write_array(out, "mean", span_of(m.stats.mean));
  write_array(out, "std", span_of(m.stats.std));
  write_array(out, "mad", span_of(m.stats.mad));
  out << "cov_inverse " << (m.cov_inverse ? 1 : 0) << '\n';
  if (m.cov_inverse) write_matrix(out, "cov_inverse", *m.cov_inverse);
}

StatDetectorModel read_stat(RecordReader& rd) {
  StatDetectorModel m;
  try {
    m.kind = parse_detector_kind(rd.expect_string("detector"));
  } catch (const ValueError& e) {
    rd.fail(e.what());
  }
  m.z_threshold = rd.expect_double("z_threshold");
  m.stats.count = rd.expect_int("count");
  m.stats.mean = to_vec(rd.expect_array("mean"));
  const auto d = static_cast<std::size_t>(m.stats.mean.size());
  m.stats.std = to_vec(rd.expect_array("std", d));
  m.stats.mad = to_vec(rd.expect_array("mad", d));
  const long long has_cov = rd.expect_int("cov_inverse");
  if (has_cov == 1) {
    Matrix inv = read_matrix(rd, "cov_inverse");
    if (static_cast<std::size_t>(inv.rows()) != d || static_cast<std::size_t>(inv.cols()) != d) {
      rd.fail("inverse covariance does not match the feature count");
    }
    m.cov_inverse = std::move(inv);
  } else if (has_cov != 0) {
    rd.fail("cov_inverse flag must be 0 or 1");
  }
  const bool needs_cov = m.kind == DetectorKind::mahalanobis || m.kind == DetectorKind::mahalanobis_normed;
  if (needs_cov != m.cov_inverse.has_value()) rd.fail("inverse covariance presence does not match the detector");
  return m;
}

void write_body(std::ostream& out, const OcSvmModel& m) {
  write_record(out, "nu", std::vector<double>{m.nu});
  write_record(out, "gamma", std::vector<double>{m.gamma});
  write_record(out, "rho", std::vector<double>{m.rho});
  write_record(out, "tolerance", std::vector<double>{m.tolerance});
  write_record(out, "kkt_gap", std::vector<double>{m.kkt_gap});
  out << "iterations " << m.iterations << '\n';
  write_array(out, "shift", span_of(m.shift));
  write_array(out, "scale", span_of(m.scale));
  write_array(out, "alphas", m.alphas);
  write_matrix(out, "support_vectors", m.support_vectors);
}

OcSvmModel read_ocsvm(RecordReader& rd) {
  OcSvmModel m;
  m.nu = rd.expect_double("nu");
  m.gamma = rd.expect_double("gamma");
  m.rho = rd.expect_double("rho");
  m.tolerance = rd.expect_double("tolerance");
  m.kkt_gap = rd.expect_double("kkt_gap");
  m.iterations = static_cast<long>(rd.expect_int("iterations"));
  m.shift = to_vec(rd.expect_array("shift"));
  m.scale = to_vec(rd.expect_array("scale", static_cast<std::size_t>(m.shift.size())));
  m.alphas = rd.expect_array("alphas");
  m.support_vectors = read_matrix(rd, "support_vectors");
  if (static_cast<std::size_t>(m.support_vectors.rows()) != m.alphas.size()) {
    rd.fail("one multiplier per support vector required");
  }
  if (m.shift.size() != 0 && m.shift.size() != m.support_vectors.cols()) {
    rd.fail("standardization does not match the support vector width");
  }
  if (!(m.gamma > 0.0)) rd.fail("gamma must be positive");
  return m;
}

void write_classes(std::ostream& out, const std::vector<std::string>& names) {
  out << "classes " << names.size();
  for (const auto& n : names) out << ' ' << n;
  out << '\n';
}

std::vector<std::string> read_classes(RecordReader& rd) {
  auto tokens = rd.expect("classes");
  if (tokens.empty() || rd.to_int(tokens[0]) != static_cast<long long>(tokens.size() - 1)) {
    rd.fail("class list length does not match");
  }
  return {tokens.begin() + 1, tokens.end()};
}

void write_body(std::ostream& out, const NnClassifier& m) {
  out << "arch " << to_string(m.arch) << '\n';
  write_classes(out, m.class_names);
  write_standardizer(out, m.standardizer);
  nn::write_network(out, m.network);
}

NnClassifier read_nn(RecordReader& rd, std::istream& in) {
  NnClassifier m;
  try {
    m.arch = parse_nn_arch(rd.expect_string("arch"));
  } catch (const ValueError& e) {
    rd.fail(e.what());
  }
  m.class_names = read_classes(rd);
  m.standardizer = read_standardizer(rd);
  m.network = nn::read_network(in);
  const auto out = m.network.output_shape();
  if (out != nn::Shape{m.class_names.size()}) rd.fail("network output does not match the class list");
  if (m.network.input_shape.back() != static_cast<std::size_t>(m.standardizer.mean.size())) {
    rd.fail("network input does not match the standardizer");
  }
  return m;
}

void write_body(std::ostream& out, const ForestModel& m) {
  out << "n_classes " << m.n_classes << '\n';
  out << "max_features " << m.max_features << '\n';
  out << "trees " << m.trees.size() << '\n';
  for (const auto& t : m.trees) {
    out << "tree " << t.nodes.size() << '\n';
    for (const auto& n : t.nodes) {
      if (n.feature >= 0) {
        out << "split " << n.feature << ' ' << format_double(n.threshold) << ' ' << n.left << ' ' << n.right
            << '\n';
      } else {
        out << "leaf " << n.counts.size();
        for (const auto& [c, k] : n.counts) out << ' ' << c << ' ' << k;
        out << '\n';
      }
    }
  }
}

ForestModel read_forest(RecordReader& rd) {
  ForestModel m;
  m.n_classes = static_cast<int>(rd.expect_int("n_classes"));
  if (m.n_classes < 1) rd.fail("n_classes must be >= 1");
  m.max_features = read_size(rd, "max_features");
  const std::size_t trees = read_size(rd, "trees");
  for (std::size_t t = 0; t < trees; ++t) {
    DecisionTree tree;
    const std::size_t nodes = read_size(rd, "tree");
    if (nodes == 0) rd.fail("a tree needs at least one node");
    for (std::size_t i = 0; i < nodes; ++i) {
      const auto tok = rd.next();
      TreeNode n;
      if (tok[0] == "split" && tok.size() == 5) {
        n.feature = static_cast<int>(rd.to_int(tok[1]));
        n.threshold = rd.to_double(tok[2]);
        n.left = static_cast<int>(rd.to_int(tok[3]));
        n.right = static_cast<int>(rd.to_int(tok[4]));
        const auto in_range = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(nodes); };
        if (n.feature < 0 || !in_range(n.left) || !in_range(n.right)) rd.fail("split node out of range");
      } else if (tok[0] == "leaf" && tok.size() >= 2) {
        const long long k = rd.to_int(tok[1]);
        if (k < 1 || tok.size() != static_cast<std::size_t>(2 + 2 * k)) rd.fail("malformed leaf");
        for (long long j = 0; j < k; ++j) {
          const long long c = rd.to_int(tok[static_cast<std::size_t>(2 + 2 * j)]);
          const long long cnt = rd.to_int(tok[static_cast<std::size_t>(3 + 2 * j)]);
          if (c < 0 || c >= m.n_classes || cnt < 1) rd.fail("leaf count out of range");
          n.counts.emplace_back(static_cast<int>(c), static_cast<long>(cnt));
        }
      } else {
        rd.fail("expected a split or leaf record");
      }
      tree.nodes.push_back(std::move(n));
    }
    m.trees.push_back(std::move(tree));
  }
  return m;
}

void write_body(std::ostream& out, const LinearSvmModel& m) {
  write_record(out, "lambda", std::vector<double>{m.lambda});
  write_standardizer(out, m.standardizer);
  write_matrix(out, "weights", m.weights);
  write_array(out, "bias", span_of(m.bias));
}

LinearSvmModel read_svm(RecordReader& rd) {
  LinearSvmModel m;
  m.lambda = rd.expect_double("lambda");
  m.standardizer = read_standardizer(rd);
  m.weights = read_matrix(rd, "weights");
  m.bias = to_vec(rd.expect_array("bias", static_cast<std::size_t>(m.weights.rows())));
  if (m.weights.cols() != m.standardizer.mean.size()) rd.fail("weights do not match the standardizer");
  return m;
}

}  // namespace

std::string model_kind(const AnyModel& model) {
  struct {
    std::string operator()(const StatDetectorModel&) const { return "stat-detector"; }
    std::string operator()(const OcSvmModel&) const { return "ocsvm"; }
    std::string operator()(const NnClassifier&) const { return "nn"; }
    std::string operator()(const ForestModel&) const { return "forest"; }
    std::string operator()(const LinearSvmModel&) const { return "linear-svm"; }
  } v;
  return std::visit(v, model);
}

void write_model(std::ostream& out, const AnyModel& model) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "kind " << model_kind(model) << '\n';
  std::visit([&](const auto& m) { write_body(out, m); }, model);
  out << "end\n";
}

AnyModel read_model(std::istream& in) {
  RecordReader rd(in, "model file");
  const auto version = rd.expect(kMagic, 1);
  if (rd.to_int(version[0]) != kVersion) rd.fail("unsupported model version " + version[0]);
  const std::string kind = rd.expect_string("kind");
  AnyModel model;
  if (kind == "stat-detector") {
    model = read_stat(rd);
  } else if (kind == "ocsvm") {
    model = read_ocsvm(rd);
  } else if (kind == "nn") {
    model = read_nn(rd, in);
  } else if (kind == "forest") {
    model = read_forest(rd);
  } else if (kind == "linear-svm") {
    model = read_svm(rd);
  } else {
    rd.fail("unknown model kind '" + kind + "'");
  }
  rd.expect("end", 0);
  return model;
}

void save_model(const std::filesystem::path& path, const AnyModel& model) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write model file " + path.string());
  write_model(out, model);
  if (!out) throw FormatError("failed writing model file " + path.string());
}

AnyModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open model file " + path.string());
  return read_model(in);
}

}  // namespace keydetect
