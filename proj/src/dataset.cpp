#include "keydetect/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <tuple>

#include "keydetect/errors.hpp"
#include "keydetect/exec.hpp"
#include "keydetect/text.hpp"

namespace keydetect {

namespace {

constexpr std::string_view kDatasetMagic = "KEYDETECT-DATASET";
constexpr int kDatasetVersion = 1;

std::string row_tag(std::size_t line) { return "row " + std::to_string(line); }

bool valid_subject_id(std::string_view s) {
  return !s.empty() && std::none_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == ',' || c == '\n' || c == '\r';
  });
}

KeystrokeSample make_sample(std::string_view subject, long long session,
                            long long rep, std::span<const double> values,
                            std::size_t line) {
  if (!valid_subject_id(subject)) {
    throw ValueError(row_tag(line) + ": invalid subject id");
  }
  if (session < 1 || session > 8) {
    throw ValueError(row_tag(line) + ": session " + std::to_string(session) +
                     " outside [1,8]");
  }
  if (rep < 1 || rep > 50) {
    throw ValueError(row_tag(line) + ": repetition " + std::to_string(rep) +
                     " outside [1,50]");
  }
  KeystrokeSample s;
  s.subject = std::string(subject);
  s.session = static_cast<int>(session);
  s.repetition = static_cast<int>(rep);
  try {
    s.vector = TimingVector::from(values);
  } catch (const ValueError& e) {
    throw ValueError(row_tag(line) + ": " + e.what());
  }
  return s;
}

}  // namespace

std::vector<std::size_t> Dataset::indices_of(const std::string& subject) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].subject == subject) out.push_back(i);
  }
  return out;
}

Matrix Dataset::rows_of(const std::string& subject) const {
  const auto idx = indices_of(subject);
  Matrix m(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(kFeatureCount));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    m.row(static_cast<Eigen::Index>(r)) = to_vector(samples[idx[r]].vector).transpose();
  }
  return m;
}

void normalize_order(Dataset& ds) {
  std::stable_sort(ds.samples.begin(), ds.samples.end(),
                   [](const KeystrokeSample& a, const KeystrokeSample& b) {
                     return std::tie(a.subject, a.session, a.repetition) <
                            std::tie(b.subject, b.session, b.repetition);
                   });
  ds.subjects.clear();
  for (const auto& s : ds.samples) {
    if (ds.subjects.empty() || ds.subjects.back() != s.subject) {
      ds.subjects.push_back(s.subject);
    }
  }
}

Dataset parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty file: no header row");
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);

  const auto header = split(trim(line), ',');
  const auto& labels = feature_labels();
  if (header.size() != 3 + kFeatureCount) {
    throw SchemaError("header has " + std::to_string(header.size()) +
                      " columns, expected " + std::to_string(3 + kFeatureCount));
  }
  if (trim(header[0]) != "subject" || trim(header[1]) != "sessionIndex" ||
      trim(header[2]) != "rep") {
    throw SchemaError("header must start with subject,sessionIndex,rep");
  }
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (trim(header[3 + i]) != labels[i]) {
      throw SchemaError("header column " + std::to_string(4 + i) + " is '" +
                        std::string(trim(header[3 + i])) + "', expected '" +
                        labels[i] + "'");
    }
  }

  Dataset ds;
  std::array<double, kFeatureCount> values{};
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto cells = split(body, ',');
    if (cells.size() != 3 + kFeatureCount) {
      throw SchemaError(row_tag(line_no) + ": " + std::to_string(cells.size()) +
                        " columns, expected " + std::to_string(3 + kFeatureCount));
    }
    const auto session = parse_int(cells[1]);
    const auto rep = parse_int(cells[2]);
    if (!session || !rep) {
      throw ValueError(row_tag(line_no) + ": non-integer session or rep");
    }
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const auto v = parse_double(cells[3 + i]);
      if (!v) {
        throw ValueError(row_tag(line_no) + ": non-numeric value '" +
                         std::string(cells[3 + i]) + "' in " + labels[i]);
      }
      values[i] = *v;
    }
    ds.samples.push_back(make_sample(trim(cells[0]), *session, *rep, values, line_no));
  }
  normalize_order(ds);
  return ds;
}

Dataset parse_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path.string());
  return parse_csv(in);
}

void write_csv(std::ostream& out, const Dataset& ds) {
  out << "subject,sessionIndex,rep";
  for (const auto& l : feature_labels()) out << ',' << l;
  out << '\n';
  for (const auto& s : ds.samples) {
    out << s.subject << ',' << s.session << ',' << s.repetition;
    for (double v : s.vector.values()) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  out << kDatasetMagic << ' ' << kDatasetVersion << '\n';
  out << "features " << kFeatureCount;
  for (const auto& l : feature_labels()) out << ' ' << l;
  out << '\n';
  out << "samples " << ds.samples.size() << '\n';
  for (const auto& s : ds.samples) {
    out << s.subject << ' ' << s.session << ' ' << s.repetition;
    for (double v : s.vector.values()) out << ' ' << format_double(v);
    out << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty dataset file");
  auto tok = split_ws(trim(line));
  if (tok.size() != 2 || tok[0] != kDatasetMagic) {
    throw FormatError("not a keydetect dataset file");
  }
  if (parse_int(tok[1]) != kDatasetVersion) {
    throw FormatError("unsupported dataset version " + std::string(tok[1]));
  }
  if (!std::getline(in, line)) throw FormatError("missing features line");
  tok = split_ws(trim(line));
  if (tok.size() != 2 + kFeatureCount || tok[0] != "features" ||
      parse_int(tok[1]) != static_cast<long long>(kFeatureCount)) {
    throw FormatError("bad features line");
  }
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (tok[2 + i] != feature_labels()[i]) {
      throw FormatError("feature label mismatch at " + std::to_string(i));
    }
  }
  if (!std::getline(in, line)) throw FormatError("missing samples line");
  tok = split_ws(trim(line));
  const auto count = tok.size() == 2 && tok[0] == "samples" ? parse_int(tok[1])
                                                             : std::nullopt;
  if (!count || *count < 0) throw FormatError("bad samples line");

  Dataset ds;
  ds.samples.reserve(static_cast<std::size_t>(*count));
  std::array<double, kFeatureCount> values{};
  for (long long r = 0; r < *count; ++r) {
    const std::size_t line_no = static_cast<std::size_t>(r) + 4;
    if (!std::getline(in, line)) throw FormatError("truncated at " + row_tag(line_no));
    tok = split_ws(trim(line));
    if (tok.size() != 3 + kFeatureCount) {
      throw FormatError(row_tag(line_no) + ": wrong field count");
    }
    const auto session = parse_int(tok[1]);
    const auto rep = parse_int(tok[2]);
    if (!session || !rep) throw FormatError(row_tag(line_no) + ": bad indices");
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const auto v = parse_double(tok[3 + i]);
      if (!v) throw FormatError(row_tag(line_no) + ": bad value");
      values[i] = *v;
    }
    ds.samples.push_back(make_sample(tok[0], *session, *rep, values, line_no));
  }
  normalize_order(ds);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path.string());
  const int first = in.peek();
  if (first == kDatasetMagic.front()) return read_dataset(in);
  return parse_csv(in);
}

OutlierFilterResult filter_outliers(const Dataset& ds, double z_cut) {
  if (!(z_cut > 0.0)) throw ValueError("z_cut must be positive");
  std::vector<bool> drop(ds.samples.size(), false);
  for (const auto& subject : ds.subjects) {
    const auto idx = ds.indices_of(subject);
    if (idx.size() < 2) continue;
    const ColumnStats st = column_stats(ds.rows_of(subject));
    for (std::size_t i : idx) {
      const auto& v = ds.samples[i].vector;
      for (std::size_t c = 0; c < kFeatureCount; ++c) {
        const double sd = st.std[static_cast<Eigen::Index>(c)];
        if (sd <= 0.0) continue;
        const double z = std::abs(v[c] - st.mean[static_cast<Eigen::Index>(c)]) / sd;
        if (z > z_cut) {
          drop[i] = true;
          break;
        }
      }
    }
  }
  OutlierFilterResult result;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (drop[i]) {
      ++result.removed;
    } else {
      result.dataset.samples.push_back(ds.samples[i]);
    }
  }
  normalize_order(result.dataset);
  return result;
}

std::vector<AnomalySplit> make_anomaly_splits(const Dataset& ds,
                                              const AnomalyProtocol& protocol) {
  const std::size_t needed = protocol.train_reps + protocol.genuine_reps;
  std::vector<Matrix> per_subject;
  per_subject.reserve(ds.subjects.size());
  for (const auto& subject : ds.subjects) {
    Matrix rows = ds.rows_of(subject);
    if (static_cast<std::size_t>(rows.rows()) < needed ||
        static_cast<std::size_t>(rows.rows()) < protocol.impostor_reps) {
      throw SubjectTooSmall("subject " + subject + " has " +
                            std::to_string(rows.rows()) + " samples, need " +
                            std::to_string(std::max(needed, protocol.impostor_reps)));
    }
    per_subject.push_back(std::move(rows));
  }

  const auto p = static_cast<Eigen::Index>(kFeatureCount);
  const auto train_n = static_cast<Eigen::Index>(protocol.train_reps);
  const auto genuine_n = static_cast<Eigen::Index>(protocol.genuine_reps);
  const auto imp_n = static_cast<Eigen::Index>(protocol.impostor_reps);
  const auto n_subjects = static_cast<Eigen::Index>(ds.subjects.size());

  std::vector<AnomalySplit> splits;
  splits.reserve(ds.subjects.size());
  for (Eigen::Index s = 0; s < n_subjects; ++s) {
    AnomalySplit split;
    split.subject = ds.subjects[static_cast<std::size_t>(s)];
    const Matrix& rows = per_subject[static_cast<std::size_t>(s)];
    split.train = rows.topRows(train_n);
    split.genuine_test = rows.middleRows(train_n, genuine_n);
    split.impostor_test.resize((n_subjects - 1) * imp_n, p);
    Eigen::Index at = 0;
    for (Eigen::Index o = 0; o < n_subjects; ++o) {
      if (o == s) continue;
      split.impostor_test.middleRows(at, imp_n) =
          per_subject[static_cast<std::size_t>(o)].topRows(imp_n);
      at += imp_n;
    }
    splits.push_back(std::move(split));
  }
  return splits;
}

namespace {

void append_rows(LabeledSet& dst, const LabeledSet& src,
                 const std::vector<std::size_t>& picks) {
  const auto old = dst.x.rows();
  dst.x.conservativeResize(old + static_cast<Eigen::Index>(picks.size()), src.x.cols());
  for (std::size_t i = 0; i < picks.size(); ++i) {
    dst.x.row(old + static_cast<Eigen::Index>(i)) =
        src.x.row(static_cast<Eigen::Index>(picks[i]));
    dst.y.push_back(src.y[picks[i]]);
    dst.origin.push_back(src.origin.empty() ? std::string() : src.origin[picks[i]]);
  }
}

}  // namespace

ClassSplit stratified_split(const LabeledSet& pool,
                            const std::vector<std::string>& class_names,
                            std::uint64_t seed, const SplitFractions& f) {
  ClassSplit out;
  out.class_names = class_names;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    out.label_map[class_names[c]] = static_cast<int>(c);
  }
  for (LabeledSet* set : {&out.train, &out.validation, &out.test}) {
    set->x.resize(0, pool.x.cols());
  }

  for (std::size_t c = 0; c < class_names.size(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < pool.y.size(); ++i) {
      if (pool.y[i] == static_cast<int>(c)) members.push_back(i);
    }
    std::mt19937_64 rng(derive_seed(seed, c));
    std::shuffle(members.begin(), members.end(), rng);

    const auto n = members.size();
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * f.test));
    const auto n_val = static_cast<std::size_t>(
        std::llround(static_cast<double>(n - n_test) * f.validation));
    const auto begin = members.begin();
    append_rows(out.test, pool, {begin, begin + static_cast<std::ptrdiff_t>(n_test)});
    append_rows(out.validation, pool,
                {begin + static_cast<std::ptrdiff_t>(n_test),
                 begin + static_cast<std::ptrdiff_t>(n_test + n_val)});
    append_rows(out.train, pool,
                {begin + static_cast<std::ptrdiff_t>(n_test + n_val), members.end()});
  }
  return out;
}

ClassSplit make_class_split(const Dataset& ds, std::uint64_t seed,
                            const SplitFractions& f) {
  std::map<std::string, int> label;
  for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
    label[ds.subjects[i]] = static_cast<int>(i);
  }
  LabeledSet pool;
  pool.x.resize(static_cast<Eigen::Index>(ds.samples.size()),
                static_cast<Eigen::Index>(kFeatureCount));
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    pool.x.row(static_cast<Eigen::Index>(i)) = to_vector(ds.samples[i].vector).transpose();
    pool.y.push_back(label.at(ds.samples[i].subject));
    pool.origin.push_back(ds.samples[i].subject);
  }
  return stratified_split(pool, ds.subjects, seed, f);
}

}  // namespace keydetect
