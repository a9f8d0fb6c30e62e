#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "kgsq/model.hpp"
#include "kgsq/semquery.hpp"

namespace kgsq {

/// {"results": [{"entity": name, "type": label (typed entities only), "score": s}, ...]}
nlohmann::json results_json(const Vocabulary& vocab, const RankedList& list);

struct EntityMatch {
  std::string name;
  EntityId id = 0;
  std::string type;
};

/// Case-insensitive substring search ordered by (match position, name).
/// An empty query matches nothing.
std::vector<EntityMatch> search_entities(const Vocabulary& vocab, std::string_view q,
                                         const std::optional<std::string>& type, std::size_t limit);

/// In-memory browse sessions with a time-to-live and a capacity bound. The
/// store lock only guards the map; each session has its own lock, so distinct
/// sessions proceed in parallel.
class SessionStore {
public:
  using Clock = std::chrono::steady_clock;
  using Session = BrowseSession<float>;

  SessionStore(std::chrono::seconds ttl, std::size_t capacity, std::function<Clock::time_point()> now = Clock::now);

  /// Assigns a fresh id, evicting the oldest session if at capacity.
  std::string create(Session session);

  /// Runs `fn` on the session under its lock. Returns false if the id is
  /// unknown or expired.
  bool with_session(const std::string& id, const std::function<void(Session&)>& fn);

  std::size_t size();

private:
  struct Entry {
    Clock::time_point created_at;
    std::mutex mutex;
    Session session;
  };

  void purge_expired(Clock::time_point now);
  std::string fresh_id();

  std::chrono::seconds ttl_;
  std::size_t capacity_;
  std::function<Clock::time_point()> now_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::mt19937_64 id_rng_;
};

struct ServiceConfig {
  std::chrono::seconds ttl{3600};
  std::size_t capacity = 10000;
  /// Optional directory served at / (the browsing UI bundle).
  std::string static_dir;
  bool log_requests = true;
};

/// HTTP/JSON front end over one immutable model.
class Service {
public:
  Service(EmbeddingModel<float> model, ServiceConfig config = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds to an OS-chosen port. Returns the port, or -1 on failure.
  int bind_any_port(const std::string& host);
  /// Binds to the given port. Returns false on failure.
  bool bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  bool listen_after_bind();
  void stop();
  void wait_until_ready();

  const EmbeddingModel<float>& model() const;
  SessionStore& sessions();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace kgsq
