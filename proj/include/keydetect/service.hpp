#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "keydetect/detectors.hpp"
#include "keydetect/timing.hpp"

namespace keydetect {

struct ServiceConfig {
  std::filesystem::path store_dir;  // one append-only file per user; empty = memory only
  DetectorKind default_detector = DetectorKind::scaled_manhattan;
  std::size_t min_enroll = 10;
  double threshold_sd = 3.0;  // threshold = mean + threshold_sd * SD of leave-one-out scores
};

struct UserSummary {
  std::string id;
  std::size_t attempts = 0;
  bool trained = false;
};

struct VerifyDecision {
  double score = 0.0;
  double threshold = 0.0;
  bool accepted = false;  // score <= threshold
  DetectorKind detector = DetectorKind::scaled_manhattan;
};

// Leave-one-out self-scores: row i scored by a detector fit on the others.
std::vector<double> leave_one_out_scores(DetectorKind kind, const Matrix& rows,
                                         const StatDetectorOptions& options = {});

// User ids: 1..64 characters from [A-Za-z0-9_.-]. Nonces: 1..128 printable
// characters without whitespace.
bool valid_user_id(std::string_view id);
bool valid_nonce(std::string_view nonce);

// Enrollment and verification state for every user. Thread-safe: verify and
// list take shared locks, enroll and train serialize per user. A verify sees
// the model and threshold of a single training run.
class VerificationService {
 public:
  // Replays every store file found in config.store_dir, re-validating each
  // trace and refitting trained users.
  explicit VerificationService(ServiceConfig config);
  ~VerificationService();
  VerificationService(const VerificationService&) = delete;
  VerificationService& operator=(const VerificationService&) = delete;

  // Returns the attempt count. A nonce already seen for the user is ignored.
  // Throws BadRequest (bad id/nonce) or MalformedTrace.
  std::size_t enroll(const std::string& user, const std::string& nonce, const EventTrace& trace);
  // Returns the new threshold. Throws UnknownUser or InsufficientEnrollment.
  double train(const std::string& user, std::optional<DetectorKind> detector = std::nullopt);
  // Throws UnknownUser, NotTrained or MalformedTrace.
  VerifyDecision verify(const std::string& user, const EventTrace& trace) const;
  std::vector<UserSummary> list_users() const;

  const ServiceConfig& config() const { return config_; }

 private:
  struct Trained {
    StatDetectorModel model;
    double threshold = 0.0;
  };
  struct User {
    std::string id;
    std::vector<TimingVector> attempts;
    std::set<std::string> nonces;
    std::shared_ptr<const Trained> trained;
    mutable std::mutex write_mutex;
  };

  User& get_or_create(const std::string& id);
  User* find(const std::string& id) const;
  std::shared_ptr<const Trained> fit(std::span<const TimingVector> attempts, DetectorKind kind) const;
  void append_record(const std::string& id, const std::string& line);
  void load_store();

  ServiceConfig config_;
  mutable std::shared_mutex users_mutex_;  // guards the map and every User::trained pointer
  std::map<std::string, std::unique_ptr<User>> users_;
};

}  // namespace keydetect
