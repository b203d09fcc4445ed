#include "keydetect/service.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "keydetect/errors.hpp"
#include "keydetect/text.hpp"

namespace keydetect {

namespace {

constexpr std::string_view kStoreMagic = "KEYDETECT-USERSTORE";
constexpr int kStoreVersion = 1;
constexpr const char* kStoreSuffix = ".store";

// Percent-encodes anything outside a conservative printable set so that a
// key name can never break the whitespace-separated record layout.
std::string encode(std::string_view s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '.' || c == '_' || c == '-' || c == '+') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 15];
    }
  }
  return out.empty() ? "%" : out;  // lone '%' encodes the empty string
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  throw FormatError("bad escape digit");
}

std::string decode(std::string_view s) {
  if (s == "%") return {};
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '%') {
      out += s[i];
      continue;
    }
    if (i + 2 >= s.size()) throw FormatError("truncated escape");
    out += static_cast<char>(hex_digit(s[i + 1]) * 16 + hex_digit(s[i + 2]));
    i += 2;
  }
  return out;
}

std::string trace_record(const std::string& nonce, const EventTrace& trace) {
  std::ostringstream line;
  line << "enroll " << encode(nonce) << ' ' << trace.size();
  for (const auto& e : trace) {
    line << ' ' << encode(e.key) << ' ' << (e.action == KeyAction::down ? 'd' : 'u') << ' ' << e.t_ms;
  }
  return line.str();
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

bool valid_user_id(std::string_view id) {
  return !id.empty() && id.size() <= 64 && std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '.' || c == '-';
  });
}

bool valid_nonce(std::string_view nonce) {
  return !nonce.empty() && nonce.size() <= 128 &&
         std::all_of(nonce.begin(), nonce.end(), [](unsigned char c) { return c > 0x20 && c < 0x7f; });
}

std::vector<double> leave_one_out_scores(DetectorKind kind, const Matrix& rows,
                                         const StatDetectorOptions& options) {
  const Eigen::Index n = rows.rows();
  if (n < 3) throw InsufficientData("leave-one-out scoring needs at least 3 rows");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  Matrix rest(n - 1, rows.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index r = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) rest.row(r++) = rows.row(j);
    }
    const auto m = fit_stat_detector(kind, rest, options);
    out.push_back(score(m, rows.row(i).transpose()));
  }
  return out;
}

VerificationService::VerificationService(ServiceConfig config) : config_(std::move(config)) {
  if (config_.min_enroll < 3) throw ValueError("min_enroll must be at least 3");
  if (!config_.store_dir.empty()) {
    std::filesystem::create_directories(config_.store_dir);
    load_store();
  }
}

VerificationService::~VerificationService() = default;

VerificationService::User* VerificationService::find(const std::string& id) const {
  const auto it = users_.find(id);
  return it == users_.end() ? nullptr : it->second.get();
}

VerificationService::User& VerificationService::get_or_create(const std::string& id) {
  {
    std::shared_lock lock(users_mutex_);
    if (User* u = find(id)) return *u;
  }
  std::unique_lock lock(users_mutex_);
  auto& slot = users_[id];
  if (!slot) {
    slot = std::make_unique<User>();
    slot->id = id;
  }
  return *slot;
}

std::shared_ptr<const VerificationService::Trained> VerificationService::fit(
    std::span<const TimingVector> attempts, DetectorKind kind) const {
  const Matrix rows = to_matrix(attempts);
  auto t = std::make_shared<Trained>();
  t->model = fit_stat_detector(kind, rows);
  const auto loo = leave_one_out_scores(kind, rows);
  const double mu = mean_of(loo);
  double var = 0.0;
  for (double s : loo) var += (s - mu) * (s - mu);
  t->threshold = mu + config_.threshold_sd * std::sqrt(var / static_cast<double>(loo.size()));
  if (!std::isfinite(t->threshold)) throw NonConvergence("threshold is not finite");
  return t;
}

void VerificationService::append_record(const std::string& id, const std::string& line) {
  if (config_.store_dir.empty()) return;
  const auto path = config_.store_dir / (id + kStoreSuffix);
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error("cannot open user store " + path.string());
  if (fresh) out << kStoreMagic << ' ' << kStoreVersion << '\n';
  out << line << '\n';
  out.flush();
  if (!out) throw Error("failed writing user store " + path.string());
}

std::size_t VerificationService::enroll(const std::string& user, const std::string& nonce,
                                        const EventTrace& trace) {
  if (!valid_user_id(user)) throw BadRequest("invalid user id '" + user + "'");
  if (!valid_nonce(nonce)) throw BadRequest("nonce must be 1-128 printable characters without spaces");
  const TimingVector v = extract_features(trace);  // MalformedTrace before any state change
  User& u = get_or_create(user);
  std::lock_guard write(u.write_mutex);
  if (u.nonces.count(nonce)) return u.attempts.size();
  append_record(user, trace_record(nonce, trace));
  std::unique_lock lock(users_mutex_);
  u.nonces.insert(nonce);
  u.attempts.push_back(v);
  return u.attempts.size();
}

double VerificationService::train(const std::string& user, std::optional<DetectorKind> detector) {
  User* u = nullptr;
  {
    std::shared_lock lock(users_mutex_);
    u = find(user);
  }
  if (!u) throw UnknownUser("unknown user '" + user + "'");
  std::lock_guard write(u->write_mutex);
  std::size_t count;
  {
    std::shared_lock lock(users_mutex_);
    count = u->attempts.size();
  }
  if (count < config_.min_enroll) {
    throw InsufficientEnrollment("user '" + user + "' has " + std::to_string(count) +
                                 " attempts, training needs " + std::to_string(config_.min_enroll));
  }
  const DetectorKind kind = detector.value_or(config_.default_detector);
  auto trained = fit(u->attempts, kind);  // attempts only change under write_mutex, which we hold
  append_record(user, "train " + std::string(to_string(kind)));
  const double threshold = trained->threshold;
  std::unique_lock lock(users_mutex_);
  u->trained = std::move(trained);
  return threshold;
}

VerifyDecision VerificationService::verify(const std::string& user, const EventTrace& trace) const {
  std::shared_ptr<const Trained> t;
  {
    std::shared_lock lock(users_mutex_);
    const User* u = find(user);
    if (!u) throw UnknownUser("unknown user '" + user + "'");
    t = u->trained;
  }
  if (!t) throw NotTrained("user '" + user + "' has no trained model");
  const TimingVector v = extract_features(trace);
  VerifyDecision d;
  d.score = score(t->model, to_vector(v));
  d.threshold = t->threshold;
  d.accepted = d.score <= d.threshold;
  d.detector = t->model.kind;
  return d;
}

std::vector<UserSummary> VerificationService::list_users() const {
  std::shared_lock lock(users_mutex_);
  std::vector<UserSummary> out;
  for (const auto& [id, u] : users_) out.push_back({id, u->attempts.size(), u->trained != nullptr});
  return out;
}

void VerificationService::load_store() {
  for (const auto& entry : std::filesystem::directory_iterator(config_.store_dir)) {
    const auto& path = entry.path();
    if (path.extension() != kStoreSuffix) continue;
    const std::string id = path.stem().string();
    const auto where = [&](std::size_t line) { return path.string() + " line " + std::to_string(line); };
    if (!valid_user_id(id)) throw FormatError(path.string() + ": invalid user id in file name");
    std::ifstream in(path);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) continue;
    ++line_no;
    const auto header = split_ws(line);
    if (header.size() != 2 || header[0] != kStoreMagic || parse_int(header[1]) != kStoreVersion) {
      throw FormatError(where(line_no) + ": not a version " + std::to_string(kStoreVersion) + " user store");
    }
    auto user = std::make_unique<User>();
    user->id = id;
    // A train record refits on the attempts enrolled before it.
    std::optional<std::pair<DetectorKind, std::size_t>> last_train;
    while (std::getline(in, line)) {
      ++line_no;
      const auto tok = split_ws(line);
      if (tok.empty()) continue;
      try {
        if (tok[0] == "enroll" && tok.size() >= 3) {
          const std::string nonce = decode(tok[1]);
          const auto n = parse_int(tok[2]);
          if (!n || *n < 0 || tok.size() != 3 + 3 * static_cast<std::size_t>(*n)) {
            throw FormatError("event count does not match");
          }
          EventTrace trace;
          for (long long e = 0; e < *n; ++e) {
            const std::size_t at = 3 + 3 * static_cast<std::size_t>(e);
            const auto t = parse_int(tok[at + 2]);
            if (!t || (tok[at + 1] != "d" && tok[at + 1] != "u")) throw FormatError("bad event");
            trace.push_back({decode(tok[at]), tok[at + 1] == "d" ? KeyAction::down : KeyAction::up, *t});
          }
          const TimingVector v = extract_features(trace);
          if (user->nonces.insert(nonce).second) user->attempts.push_back(v);
        } else if (tok[0] == "train" && tok.size() == 2) {
          last_train.emplace(parse_detector_kind(tok[1]), user->attempts.size());
        } else {
          throw FormatError("unknown record '" + std::string(tok[0]) + "'");
        }
      } catch (const Error& e) {
        throw FormatError(where(line_no) + ": " + e.what());
      } catch (const std::exception& e) {
        throw FormatError(where(line_no) + ": " + e.what());
      }
    }
    if (last_train && last_train->second >= 3) {
      const std::span<const TimingVector> seen(user->attempts.data(), last_train->second);
      user->trained = fit(seen, last_train->first);
    }
    users_[id] = std::move(user);
  }
}

}  // namespace keydetect
